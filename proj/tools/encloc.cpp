/*
 * Copyright 2026 The encloc Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// encloc: serve | client | bench | gen

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "encloc/bench.hpp"
#include "encloc/comparison.hpp"
#include "encloc/fingerprint.hpp"
#include "encloc/localization.hpp"
#include "encloc/net.hpp"
#include "encloc/wire.hpp"

namespace {

using namespace encloc;

struct ServeOptions {
  std::string db;
  std::string listen = std::string(net::kDefaultListen);
  std::size_t min_count = fp::kDefaultMinCount;
};

int serve(const ServeOptions& o) {
  const fp::LookupTable table = fp::build_lookup_table(fp::ingest_csv(o.db), o.min_count);
  net::Server server(table, net::listen_address(o.listen));
  std::cerr << "encloc: serving " << table.n_f() << " fingerprints x " << table.n_ap()
            << " APs on " << server.address() << "\n";

  boost::asio::io_context io;
  boost::asio::signal_set signals(io, SIGINT, SIGTERM);
  signals.async_wait([&](const boost::system::error_code&, int) {});
  server.start();
  io.run();
  server.stop();
  const net::ServerStats s = server.stats();
  std::cerr << "encloc: " << s.connections << " connections, " << s.localizations
            << " localizations, " << s.errors << " errors\n";
  return 0;
}

struct ClientOptions {
  std::string server = std::string(net::kDefaultListen);
  std::string scan;
  std::string scheme = "paillier";
  std::string mode = "server";
  unsigned key_bits = 2048;
  std::size_t k = 1;
  std::string keys;
};

int client(const ClientOptions& o) {
  const Scheme scheme = parse_scheme(o.scheme);
  const wire::Mode mode = wire::parse_mode(o.mode);
  const loc::LocalizationScan scan = loc::read_scan(o.scan);
  Rng rng = Rng::from_env();

  cmp::KeyholderKeys keys = [&] {
    if (!o.keys.empty() && std::filesystem::exists(o.keys)) {
      auto k = wire::load_keys(o.keys);
      if (he::scheme_of(he::public_key_of(k.carrier)) != scheme) {
        throw SetupError("key file '" + o.keys + "' holds a " +
                         std::string(scheme_name(he::scheme_of(he::public_key_of(k.carrier)))) +
                         " carrier key");
      }
      return k;
    }
    auto k = cmp::generate_keyholder_keys(scheme, o.key_bits, rng);
    if (!o.keys.empty()) wire::save_keys(o.keys, k);
    return k;
  }();

  net::ClientSession session(net::LineChannel::connect(o.server), std::move(keys), mode, o.k,
                             rng);
  const net::LocalizeOutcome out = session.localize(scan);
  session.close();
  for (const auto& c : out.coords) {
    std::cout << nlohmann::json{{"x", c.x}, {"y", c.y}}.dump() << "\n";
  }
  std::cerr << "encloc: " << out.comparisons << " comparisons, " << session.bytes().sent
            << " bytes sent, " << session.bytes().received << " bytes received\n";
  if (!out.failed_rows.empty()) {
    std::cerr << "encloc: " << out.failed_rows.size() << " distance rows failed to decrypt\n";
  }
  return 0;
}

struct BenchOptions {
  std::string preset = "paper";
  std::optional<std::size_t> trials;
  std::optional<unsigned> key_bits;
  std::optional<std::size_t> fingerprints;
  std::optional<std::size_t> aps;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int bench_cmd(const BenchOptions& o) {
  bench::BenchConfig cfg = bench::preset(o.preset);
  if (o.trials) cfg.trials = *o.trials;
  if (o.key_bits) cfg.key_bits = *o.key_bits;
  if (o.fingerprints) cfg.fingerprints = *o.fingerprints;
  if (o.aps) cfg.aps = *o.aps;
  if (o.seed) cfg.seed = *o.seed;
  const bench::BenchReport report = bench::run_bench(cfg);
  const std::string json = bench::to_json(report).dump(2);
  if (o.out.empty()) {
    std::cout << json << "\n";
  } else {
    std::ofstream f(o.out);
    if (!f) throw Error("cannot write '" + o.out + "'");
    f << json << "\n";
  }
  std::cerr << bench::summary(report);
  if (report.failed() > 0) {
    std::cerr << "encloc: " << report.failed() << " trials failed\n";
    return 1;
  }
  return 0;
}

struct GenOptions {
  std::size_t fingerprints = 19;
  std::size_t aps = 26;
  std::uint64_t seed = 1;
  std::string out;
  std::string scan_out;
};

int gen(const GenOptions& o) {
  const auto records = fp::generate_synthetic(o.fingerprints, o.aps, o.seed);
  fp::write_csv(o.out, records);
  if (!o.scan_out.empty()) {
    const fp::LookupTable table = fp::build_lookup_table(records, 1);
    Rng rng(o.seed);
    loc::write_scan(o.scan_out, bench::perturbed_scan(table, rng));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"encrypted Wi-Fi fingerprint localization"};
  app.require_subcommand(1);

  ServeOptions so;
  auto* serve_cmd = app.add_subcommand("serve", "run the localization server");
  serve_cmd->add_option("--db", so.db, "fingerprint CSV")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--listen", so.listen, "host:port (ENCLOC_LISTEN overrides)");
  serve_cmd->add_option("--min-count", so.min_count, "minimum fingerprints an AP must appear in")
      ->check(CLI::PositiveNumber);

  ClientOptions co;
  auto* client_cmd = app.add_subcommand("client", "localize one scan");
  client_cmd->add_option("--server", co.server, "host:port");
  client_cmd->add_option("--scan", co.scan, "scan CSV (mac,rss)")->required()->check(CLI::ExistingFile);
  client_cmd->add_option("--scheme", co.scheme)->check(CLI::IsMember({"paillier", "dgk"}));
  client_cmd->add_option("--mode", co.mode)->check(CLI::IsMember({"client", "server"}));
  client_cmd->add_option("--key-bits", co.key_bits)->check(CLI::PositiveNumber);
  client_cmd->add_option("--k", co.k, "number of nearest fingerprints")->check(CLI::PositiveNumber);
  client_cmd->add_option("--keys", co.keys, "key file; loaded if present, written otherwise");

  BenchOptions bo;
  auto* bench_sub = app.add_subcommand("bench", "loopback benchmark of all scheme/mode cells");
  bench_sub->add_option("--preset", bo.preset)->check(CLI::IsMember({"paper", "smoke"}));
  bench_sub->add_option("--trials", bo.trials)->check(CLI::PositiveNumber);
  bench_sub->add_option("--key-bits", bo.key_bits)->check(CLI::PositiveNumber);
  bench_sub->add_option("--fingerprints", bo.fingerprints)->check(CLI::PositiveNumber);
  bench_sub->add_option("--aps", bo.aps)->check(CLI::PositiveNumber);
  bench_sub->add_option("--seed", bo.seed);
  bench_sub->add_option("--out", bo.out, "write the JSON report here instead of stdout");

  GenOptions go;
  auto* gen_cmd = app.add_subcommand("gen", "write a synthetic fingerprint CSV");
  gen_cmd->add_option("--fingerprints", go.fingerprints)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--aps", go.aps)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", go.seed);
  gen_cmd->add_option("--out", go.out)->required();
  gen_cmd->add_option("--scan-out", go.scan_out, "also write a scan near one fingerprint");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_cmd) return serve(so);
    if (*client_cmd) return client(co);
    if (*bench_sub) return bench_cmd(bo);
    if (*gen_cmd) return gen(go);
  } catch (const fp::CsvError& e) {
    std::cerr << "encloc: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "encloc: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

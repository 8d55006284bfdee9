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

// End-to-end loopback benchmark over scheme x mode cells.
//
// Each cell starts its own server on an ephemeral port, generates client
// keys outside the timed region, then times `trials` localizations. A trial
// is one fresh connection: handshake, scan, result, decryption. Scans are
// perturbed copies of random table rows and every answer is checked
// against the plaintext nearest row.

#ifndef ENCLOC_BENCH_HPP_
#define ENCLOC_BENCH_HPP_

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "encloc/comparison.hpp"
#include "encloc/fingerprint.hpp"
#include "encloc/localization.hpp"
#include "encloc/net.hpp"
#include "encloc/wire.hpp"

namespace encloc::bench {

using Json = nlohmann::json;

inline constexpr unsigned kMinDgkKeyBits = 512;

struct CellSpec {
  Scheme scheme = Scheme::kPaillier;
  wire::Mode mode = wire::Mode::kServer;
};

inline std::vector<CellSpec> all_cells() {
  return {{Scheme::kPaillier, wire::Mode::kClient},
          {Scheme::kDgk, wire::Mode::kClient},
          {Scheme::kPaillier, wire::Mode::kServer},
          {Scheme::kDgk, wire::Mode::kServer}};
}

struct BenchConfig {
  std::string preset = "paper";
  std::size_t fingerprints = 19;
  std::size_t aps = 26;
  std::size_t trials = 20;
  unsigned key_bits = 2048;
  std::size_t k = 1;
  std::uint64_t seed = 1;
  std::vector<CellSpec> cells = all_cells();
};

inline BenchConfig preset(const std::string& name) {
  BenchConfig c;
  c.preset = name;
  if (name == "paper") return c;
  if (name == "smoke") {
    c.trials = 1;
    c.key_bits = 256;
    return c;
  }
  throw RangeError("unknown bench preset '" + name + "' (expected paper or smoke)");
}

// DGK moduli need room for u * v_p inside each prime.
inline unsigned dgk_key_bits(unsigned key_bits) { return std::max(key_bits, kMinDgkKeyBits); }

inline cmp::KeyholderKeys bench_keys(Scheme scheme, unsigned key_bits, Rng& rng) {
  const unsigned dbits = dgk_key_bits(key_bits);
  auto bits = dgk::keygen({.key_bits = dbits, .u_bits = cmp::kBitKeyUBits}, rng);
  if (scheme == Scheme::kPaillier) {
    return cmp::KeyholderKeys{paillier::keygen(key_bits, rng).sk, std::move(bits.sk)};
  }
  const unsigned log2_u =
      cmp::dgk_carrier_log2_u(cmp::Params::for_carrier(Scheme::kDgk, cmp::kMaxBitLength));
  auto c = dgk::keygen(
      {.key_bits = dbits, .u_bits = log2_u, .kind = dgk::PlaintextKind::kPowerOfTwo}, rng);
  return cmp::KeyholderKeys{std::move(c.sk), std::move(bits.sk)};
}

struct SideReport {
  net::ByteCounts bytes;
  OpCounters ops;
};

struct TrialReport {
  double ms = 0;
  bool ok = false;
  std::string error;
  std::size_t comparisons = 0;
  std::size_t result_bytes = 0;
  std::size_t result_ciphertexts = 0;
  std::size_t result_rows = 0;
};

struct CellReport {
  Scheme scheme = Scheme::kPaillier;
  wire::Mode mode = wire::Mode::kServer;
  unsigned key_bits = 0;
  unsigned dgk_key_bits = 0;
  std::size_t fingerprints = 0;
  std::size_t aps = 0;
  std::size_t k = 1;
  std::vector<TrialReport> trials;
  SideReport client;
  SideReport server;

  std::size_t failed() const {
    return static_cast<std::size_t>(
        std::count_if(trials.begin(), trials.end(), [](const auto& t) { return !t.ok; }));
  }
  double median_ms() const {
    std::vector<double> v;
    for (const auto& t : trials) v.push_back(t.ms);
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2;
  }
  double total_ms() const {
    double s = 0;
    for (const auto& t : trials) s += t.ms;
    return s;
  }
};

struct BenchReport {
  BenchConfig config;
  std::vector<CellReport> cells;

  std::size_t failed() const {
    std::size_t n = 0;
    for (const auto& c : cells) n += c.failed();
    return n;
  }
  const CellReport* find(Scheme s, wire::Mode m) const {
    for (const auto& c : cells) {
      if (c.scheme == s && c.mode == m) return &c;
    }
    return nullptr;
  }
};

inline Json ops_json(const OpCounters& o) {
  return Json{{"encryptions", o.encryptions},
              {"decryptions", o.decryptions},
              {"zero_checks", o.zero_checks},
              {"comparisons", o.comparisons}};
}

inline Json side_json(const SideReport& s) {
  return Json{{"bytes_sent", s.bytes.sent}, {"bytes_received", s.bytes.received},
              {"ops", ops_json(s.ops)}};
}

inline Json to_json(const CellReport& c) {
  Json trials = Json::array();
  for (const auto& t : c.trials) {
    Json j{{"ms", t.ms},
           {"ok", t.ok},
           {"comparisons", t.comparisons},
           {"result_bytes", t.result_bytes},
           {"result_ciphertexts", t.result_ciphertexts},
           {"result_rows", t.result_rows}};
    if (!t.ok) j["error"] = t.error;
    trials.push_back(std::move(j));
  }
  return Json{{"scheme", scheme_name(c.scheme)},
              {"mode", wire::mode_name(c.mode)},
              {"key_bits", c.key_bits},
              {"dgk_key_bits", c.dgk_key_bits},
              {"fingerprints", c.fingerprints},
              {"aps", c.aps},
              {"k", c.k},
              {"trials", c.trials.size()},
              {"failed", c.failed()},
              {"median_ms", c.median_ms()},
              {"total_ms", c.total_ms()},
              {"expected_comparisons_per_trial",
               c.mode == wire::Mode::kServer ? cmp::expected_comparisons(c.fingerprints, c.k) : 0},
              {"client", side_json(c.client)},
              {"server", side_json(c.server)},
              {"per_trial", std::move(trials)}};
}

inline Json to_json(const BenchReport& r) {
  Json cells = Json::array();
  for (const auto& c : r.cells) cells.push_back(to_json(c));
  return Json{{"preset", r.config.preset},
              {"fingerprints", r.config.fingerprints},
              {"aps", r.config.aps},
              {"trials", r.config.trials},
              {"key_bits", r.config.key_bits},
              {"seed", r.config.seed},
              {"failed", r.failed()},
              {"cells", std::move(cells)}};
}

// Fixed-width table of medians, one row per cell.
inline std::string summary(const BenchReport& r) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-9s %-7s %6s %11s %11s %12s %12s %6s\n", "scheme", "mode",
                "trials", "median_ms", "total_ms", "client_tx", "client_rx", "failed");
  out += line;
  for (const auto& c : r.cells) {
    std::snprintf(line, sizeof line, "%-9s %-7s %6zu %11.1f %11.1f %12llu %12llu %6zu\n",
                  std::string(scheme_name(c.scheme)).c_str(),
                  std::string(wire::mode_name(c.mode)).c_str(), c.trials.size(), c.median_ms(),
                  c.total_ms(), static_cast<unsigned long long>(c.client.bytes.sent),
                  static_cast<unsigned long long>(c.client.bytes.received), c.failed());
    out += line;
  }
  return out;
}

inline long plain_distance(const fp::LookupRow& row, const std::vector<int>& scan) {
  long d = 0;
  for (std::size_t j = 0; j < scan.size(); ++j) {
    const long diff = row.rss[j] - scan[j];
    d += diff * diff;
  }
  return d;
}

// The k nearest rows, ties to the lower index.
inline std::vector<fp::Coord> nearest(const fp::LookupTable& t, const std::vector<int>& scan,
                                      std::size_t k) {
  std::vector<std::size_t> idx(t.n_f());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return plain_distance(t.rows[a], scan) < plain_distance(t.rows[b], scan);
  });
  std::vector<fp::Coord> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(t.rows[idx[i]].coord);
  return out;
}

inline loc::LocalizationScan perturbed_scan(const fp::LookupTable& t, Rng& rng) {
  const auto& row = t.rows[low_u64(rng.below(BigInt(static_cast<unsigned long>(t.n_f()))))];
  loc::LocalizationScan scan;
  for (std::size_t j = 0; j < t.n_ap(); ++j) {
    const int noise = static_cast<int>(rng.u64() % 7) - 3;
    scan.pairs.emplace_back(t.ap_columns[j],
                            std::clamp(row.rss[j] + noise, fp::kMinRss, fp::kMaxRss));
  }
  return scan;
}

inline fp::LookupTable bench_table(std::size_t fingerprints, std::size_t aps,
                                   std::uint64_t seed) {
  return fp::build_lookup_table(fp::generate_synthetic(fingerprints, aps, seed), 1);
}

inline CellReport run_cell(const BenchConfig& cfg, const CellSpec& spec,
                           const fp::LookupTable& table, const cmp::KeyholderKeys& keys,
                           Rng& rng) {
  CellReport cell;
  cell.scheme = spec.scheme;
  cell.mode = spec.mode;
  cell.key_bits = cfg.key_bits;
  cell.dgk_key_bits = dgk_key_bits(cfg.key_bits);
  cell.fingerprints = table.n_f();
  cell.aps = table.n_ap();
  cell.k = cfg.k;

  net::Server server(table, "127.0.0.1:0");
  server.start();
  for (std::size_t i = 0; i < cfg.trials; ++i) {
    const loc::LocalizationScan scan = perturbed_scan(table, rng);
    const auto want = nearest(table, loc::align_scan(scan, table.ap_columns), cfg.k);
    TrialReport t;
    OpCounters ops;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      OpScope scope(ops);
      net::ClientSession client(net::LineChannel::connect(server.address()), keys, spec.mode,
                                cfg.k, rng);
      net::LocalizeOutcome out = client.localize(scan);
      t.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                 .count();
      client.close();
      cell.client.bytes += client.bytes();
      t.comparisons = out.comparisons;
      t.result_bytes = out.result_bytes;
      t.result_ciphertexts = out.result_ciphertexts;
      t.result_rows = out.result_rows;
      if (spec.mode == wire::Mode::kClient) {
        t.ok = out.coords.size() == 1 && out.coords[0] == want[0];
      } else {
        t.ok = out.coords == want;
      }
      if (!t.ok) t.error = "result does not match the nearest fingerprint";
    } catch (const std::exception& e) {
      t.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                 .count();
      t.error = e.what();
    }
    cell.client.ops += ops;
    cell.trials.push_back(std::move(t));
  }
  server.stop();
  const net::ServerStats stats = server.stats();
  cell.server.bytes = stats.bytes;
  cell.server.ops = stats.ops;
  return cell;
}

inline BenchReport run_bench(const BenchConfig& cfg) {
  if (cfg.trials == 0) throw RangeError("bench needs at least one trial");
  BenchReport report;
  report.config = cfg;
  const fp::LookupTable table = bench_table(cfg.fingerprints, cfg.aps, cfg.seed);
  Rng rng(cfg.seed);
  std::optional<cmp::KeyholderKeys> paillier_keys, dgk_keys;
  for (const auto& spec : cfg.cells) {
    auto& slot = spec.scheme == Scheme::kPaillier ? paillier_keys : dgk_keys;
    if (!slot) slot.emplace(bench_keys(spec.scheme, cfg.key_bits, rng));
    report.cells.push_back(run_cell(cfg, spec, table, *slot, rng));
  }
  return report;
}

}  // namespace encloc::bench

#endif  // ENCLOC_BENCH_HPP_

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

#include "encloc/net.hpp"

#include <gtest/gtest.h>

#include <thread>

namespace encloc::net {
namespace {

const std::string kA = "aa:00:00:00:00:0a";
const std::string kB = "aa:00:00:00:00:0b";
const std::string kC = "aa:00:00:00:00:0c";

fp::LookupTable three_rows() {
  fp::LookupTable t;
  t.ap_columns = {kA, kB, kC};
  t.rows = {{{0, 0}, {-40, -70, -90}}, {{5, 0}, {-60, -50, -80}}, {{10, 5}, {-85, -65, -45}}};
  return t;
}

const cmp::KeyholderKeys& keys_for(Scheme s) {
  static const cmp::KeyholderKeys paillier = [] {
    Rng rng(11);
    return cmp::generate_keyholder_keys(Scheme::kPaillier, 512, rng);
  }();
  static const cmp::KeyholderKeys dgk = [] {
    Rng rng(12);
    return cmp::generate_keyholder_keys(Scheme::kDgk, 512, rng);
  }();
  return s == Scheme::kPaillier ? paillier : dgk;
}

struct Cell {
  Scheme scheme;
  wire::Mode mode;
};

void PrintTo(const Cell& c, std::ostream* os) {
  *os << scheme_name(c.scheme) << "/" << wire::mode_name(c.mode);
}

std::string cell_name(const ::testing::TestParamInfo<Cell>& info) {
  return std::string(scheme_name(info.param.scheme)) + "_" +
         std::string(wire::mode_name(info.param.mode));
}

class NetCell : public ::testing::TestWithParam<Cell> {};

TEST_P(NetCell, LocalizesNearestRow) {
  Server server(three_rows(), "127.0.0.1:0");
  server.start();
  Rng rng(1);
  ClientSession client(LineChannel::connect(server.address()), keys_for(GetParam().scheme),
                       GetParam().mode, 1, rng);
  EXPECT_EQ(client.columns(), three_rows().ap_columns);
  EXPECT_EQ(client.params().l, cmp::default_bit_length(3));

  const std::vector<std::pair<loc::LocalizationScan, fp::Coord>> cases = {
      {{{{kA, -42}, {kB, -71}, {kC, -88}}}, {0, 0}},
      {{{{kA, -61}, {kB, -49}}}, {5, 0}},
      {{{{kC, -44}, {kB, -66}, {kA, -86}}}, {10, 5}},
  };
  for (const auto& [scan, want] : cases) {
    LocalizeOutcome out = client.localize(scan);
    ASSERT_EQ(out.coords.size(), 1u);
    EXPECT_EQ(out.coords[0], want);
    EXPECT_GT(out.result_bytes, 0u);
    if (GetParam().mode == wire::Mode::kServer) {
      EXPECT_EQ(out.comparisons, 2u);
      EXPECT_EQ(out.result_ciphertexts, 2u);
    } else {
      EXPECT_EQ(out.comparisons, 0u);
      EXPECT_EQ(out.result_rows, 3u);
      EXPECT_TRUE(out.failed_rows.empty());
    }
  }
  client.close();
  const ByteCounts client_bytes = client.bytes();
  server.stop();
  const ServerStats stats = server.stats();
  EXPECT_EQ(stats.localizations, 3u);
  EXPECT_EQ(stats.errors, 0u);
  EXPECT_EQ(stats.bytes.received, client_bytes.sent);
  EXPECT_EQ(stats.bytes.sent, client_bytes.received);
  if (GetParam().mode == wire::Mode::kServer) {
    EXPECT_EQ(stats.ops.comparisons, 6u);
  } else {
    EXPECT_EQ(stats.ops.comparisons, 0u);
  }
}

INSTANTIATE_TEST_SUITE_P(Cells, NetCell,
                         ::testing::Values(Cell{Scheme::kPaillier, wire::Mode::kServer},
                                           Cell{Scheme::kPaillier, wire::Mode::kClient},
                                           Cell{Scheme::kDgk, wire::Mode::kServer},
                                           Cell{Scheme::kDgk, wire::Mode::kClient}),
                         cell_name);

TEST(Net, TopKReturnsClosestFirst) {
  Server server(three_rows(), "127.0.0.1:0");
  server.start();
  Rng rng(2);
  ClientSession client(LineChannel::connect(server.address()), keys_for(Scheme::kPaillier),
                       wire::Mode::kServer, 2, rng);
  auto out = client.localize({{{kA, -61}, {kB, -49}, {kC, -82}}});
  ASSERT_EQ(out.coords.size(), 2u);
  EXPECT_EQ(out.coords[0], (fp::Coord{5, 0}));
  EXPECT_EQ(out.coords[1], (fp::Coord{0, 0}));
  // Partial selection sort: (3-1) + (3-2).
  EXPECT_EQ(out.comparisons, 3u);
}

wire::Message exchange_raw(const std::string& addr, const wire::Message& m) {
  LineChannel ch = LineChannel::connect(addr);
  ch.send(m);
  wire::Message reply = ch.receive();
  EXPECT_FALSE(ch.receive_or_eof().has_value());
  return reply;
}

TEST(Net, ScanBeforeHelloIsAProtocolError) {
  Server server(three_rows(), "127.0.0.1:0");
  server.start();
  Rng rng(3);
  const auto pk = he::public_key_of(keys_for(Scheme::kPaillier).carrier);
  loc::EncryptedScan scan = loc::prepare_scan({{{kA, -50}}}, three_rows().ap_columns, pk, rng);
  wire::Message reply = exchange_raw(server.address(), {"s", scan});
  auto* err = std::get_if<wire::ErrorReply>(&reply.body);
  ASSERT_NE(err, nullptr);
  EXPECT_EQ(err->code, "protocol");
  server.stop();
  EXPECT_EQ(server.stats().errors, 1u);
}

TEST(Net, ServerModeWithoutBitKeyIsASetupError) {
  Server server(three_rows(), "127.0.0.1:0");
  server.start();
  const auto pk = he::public_key_of(keys_for(Scheme::kDgk).carrier);
  wire::Message reply =
      exchange_raw(server.address(), {"s", wire::Hello{Scheme::kDgk, wire::Mode::kServer, 1, pk,
                                                        std::nullopt}});
  auto* err = std::get_if<wire::ErrorReply>(&reply.body);
  ASSERT_NE(err, nullptr);
  EXPECT_EQ(err->code, "setup");
}

TEST(Net, MismatchedSchemeAndOversizedKAreRejected) {
  Server server(three_rows(), "127.0.0.1:0");
  server.start();
  const auto& keys = keys_for(Scheme::kPaillier);
  const auto pk = he::public_key_of(keys.carrier);
  for (const wire::Hello& h :
       {wire::Hello{Scheme::kDgk, wire::Mode::kClient, 1, pk, std::nullopt},
        wire::Hello{Scheme::kPaillier, wire::Mode::kServer, 4, pk, keys.bits.public_key()},
        wire::Hello{Scheme::kPaillier, wire::Mode::kServer, 0, pk, keys.bits.public_key()}}) {
    wire::Message reply = exchange_raw(server.address(), {"s", h});
    auto* err = std::get_if<wire::ErrorReply>(&reply.body);
    ASSERT_NE(err, nullptr);
    EXPECT_EQ(err->code, "setup");
  }
}

TEST(Net, GarbageLineIsABadFrame) {
  Server server(three_rows(), "127.0.0.1:0");
  server.start();
  asio::io_context io;
  tcp::socket sock(io);
  sock.connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), server.port()));
  const std::string junk = "{\"v\":1,\"type\":\n";
  asio::write(sock, asio::buffer(junk));
  LineChannel ch(std::move(sock));
  wire::Message reply = ch.receive();
  auto* err = std::get_if<wire::ErrorReply>(&reply.body);
  ASSERT_NE(err, nullptr);
  EXPECT_EQ(err->code, "bad_frame");
}

TEST(Net, WrongColumnCountIsIncompatible) {
  Server server(three_rows(), "127.0.0.1:0");
  server.start();
  Rng rng(4);
  const auto& keys = keys_for(Scheme::kPaillier);
  const auto pk = he::public_key_of(keys.carrier);
  LineChannel ch = LineChannel::connect(server.address());
  ch.send({"s", wire::Hello{Scheme::kPaillier, wire::Mode::kClient, 1, pk, std::nullopt}});
  ASSERT_TRUE(std::holds_alternative<wire::Columns>(ch.receive().body));
  ch.send({"s", loc::prepare_scan({{{kA, -50}}}, {kA, kB}, pk, rng)});
  auto reply = ch.receive();
  auto* err = std::get_if<wire::ErrorReply>(&reply.body);
  ASSERT_NE(err, nullptr);
  EXPECT_EQ(err->code, "incompatible");
}

TEST(Net, ConcurrentClientsAreIndependent) {
  Server server(three_rows(), "127.0.0.1:0");
  server.start();
  std::vector<fp::Coord> got(2);
  std::vector<std::string> failures(2);
  auto worker = [&](int i) {
    try {
      Rng rng(100 + i);
      const Scheme s = i == 0 ? Scheme::kPaillier : Scheme::kDgk;
      ClientSession client(LineChannel::connect(server.address()), keys_for(s),
                           wire::Mode::kServer, 1, rng);
      loc::LocalizationScan scan = i == 0 ? loc::LocalizationScan{{{kA, -42}, {kB, -71}}}
                                          : loc::LocalizationScan{{{kC, -44}, {kB, -66}}};
      for (int r = 0; r < 3; ++r) got[i] = client.localize(scan).coords.at(0);
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  };
  std::thread a(worker, 0), b(worker, 1);
  a.join();
  b.join();
  EXPECT_EQ(failures[0], "");
  EXPECT_EQ(failures[1], "");
  EXPECT_EQ(got[0], (fp::Coord{0, 0}));
  EXPECT_EQ(got[1], (fp::Coord{10, 5}));
  server.stop();
  EXPECT_EQ(server.stats().connections, 2u);
  EXPECT_EQ(server.stats().localizations, 6u);
}

TEST(Net, EndpointParsing) {
  EXPECT_EQ(parse_endpoint("127.0.0.1:7341").host, "127.0.0.1");
  EXPECT_EQ(parse_endpoint("127.0.0.1:7341").port, "7341");
  EXPECT_EQ(parse_endpoint(":9000").host, "0.0.0.0");
  EXPECT_EQ(parse_endpoint("[::1]:80").host, "::1");
  EXPECT_THROW(parse_endpoint("localhost"), RangeError);
  EXPECT_THROW(parse_endpoint("localhost:"), RangeError);
}

TEST(Net, StopWithoutClientsReturns) {
  Server server(three_rows(), "127.0.0.1:0");
  server.start();
  EXPECT_GT(server.port(), 0);
  server.stop();
  server.stop();
  EXPECT_EQ(server.stats().connections, 0u);
}

}  // namespace
}  // namespace encloc::net

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

#include "encloc/localization.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

namespace encloc::loc {
namespace {

const std::string kA = "aa:00:00:00:00:0a";
const std::string kB = "aa:00:00:00:00:0b";

struct Keys {
  cmp::KeyholderKeys kh;
  cmp::EvaluatorKeys ev;
};

const Keys& keys_for(Scheme s) {
  static const Keys paillier = [] {
    Rng rng(1);
    auto kh = cmp::generate_keyholder_keys(Scheme::kPaillier, 512, rng);
    return Keys{kh, kh.public_keys()};
  }();
  static const Keys dgk = [] {
    Rng rng(2);
    auto kh = cmp::generate_keyholder_keys(Scheme::kDgk, 512, rng);
    return Keys{kh, kh.public_keys()};
  }();
  return s == Scheme::kPaillier ? paillier : dgk;
}

fp::LookupTable table_of(std::vector<std::string> cols, std::vector<fp::LookupRow> rows) {
  fp::LookupTable t;
  t.ap_columns = std::move(cols);
  t.rows = std::move(rows);
  return t;
}

// Squared distance with missing scan entries at -120, written from scratch.
long plain_distance(const fp::LookupTable& t, std::size_t row, const LocalizationScan& scan) {
  long d = 0;
  for (std::size_t j = 0; j < t.n_ap(); ++j) {
    long s = -120;
    for (const auto& [mac, rss] : scan.pairs) {
      if (mac == t.ap_columns[j]) s = rss;
    }
    const long diff = t.rows[row].rss[j] - s;
    d += diff * diff;
  }
  return d;
}

std::size_t oracle_argmin(const fp::LookupTable& t, const LocalizationScan& scan) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.n_f(); ++i) {
    if (plain_distance(t, i, scan) < plain_distance(t, best, scan)) best = i;
  }
  return best;
}

class Localization : public ::testing::TestWithParam<Scheme> {
 protected:
  const Keys& k() const { return keys_for(GetParam()); }
  const he::AnyPublicKey& pk() const { return k().ev.carrier; }
  BigInt dec(const Ciphertext& c) const { return he::decrypt_signed(k().kh.carrier, c); }
  cmp::Params params(const fp::LookupTable& t) const {
    return cmp::Params::for_carrier(GetParam(), cmp::default_bit_length(t.n_ap()));
  }
  Rng rng{7};
};

TEST_P(Localization, PrepareScanEncodesTerms) {
  EncryptedScan es = prepare_scan({{{kA, -40}, {kB, -60}}}, {kA, kB}, pk(), rng);
  ASSERT_EQ(es.s2.size(), 2u);
  EXPECT_EQ(dec(es.s2[0]), 80);
  EXPECT_EQ(dec(es.s2[1]), 120);
  EXPECT_EQ(dec(es.s3), 5200);
  EXPECT_EQ(es.scheme, GetParam());

  EncryptedScan missing = prepare_scan({{{kA, -40}}}, {kA, kB}, pk(), rng);
  EXPECT_EQ(dec(missing.s2[1]), 240);
  EXPECT_EQ(dec(missing.s3), 1600 + 14400);

  EncryptedScan empty = prepare_scan({}, {kA, kB}, pk(), rng);
  EXPECT_EQ(dec(empty.s3), 2 * 14400);
}

TEST_P(Localization, DistanceExamples) {
  auto t = table_of({kA, kB}, {{{0, 0}, {-50, -70}}, {{6, 0}, {-40, -60}}, {{12, 0}, {-120, -60}}});
  auto es = prepare_scan({{{kA, -40}, {kB, -60}}}, t.ap_columns, pk(), rng);
  auto rows = compute_distance_rows(t, es, pk(), rng);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(dec(rows[0].dist), 200);
  EXPECT_EQ(dec(rows[1].dist), 0);
  EXPECT_EQ(dec(rows[2].dist), 6400);
  EXPECT_EQ(rows[0].s1, 2500 + 4900);
  EXPECT_EQ(rows[2].coord, (fp::Coord{12, 0}));
}

TEST_P(Localization, DistancesMatchPlaintextOracle) {
  std::mt19937 gen(11);
  auto t = fp::build_lookup_table(fp::generate_synthetic(9, 6, 3), 1);
  for (int trial = 0; trial < 5; ++trial) {
    LocalizationScan scan;
    for (const auto& mac : t.ap_columns) {
      if (gen() % 4 != 0) scan.pairs.emplace_back(mac, -static_cast<int>(gen() % 121));
    }
    auto rows = compute_distance_rows(t, prepare_scan(scan, t.ap_columns, pk(), rng), pk(), rng);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      ASSERT_EQ(dec(rows[i].dist), plain_distance(t, i, scan));
      ASSERT_EQ(rows[i].coord, t.rows[i].coord);
    }
  }
}

TEST_P(Localization, WorstCaseDistanceFitsBitLength) {
  const std::size_t n_ap = 26;
  std::vector<std::string> cols;
  for (std::size_t j = 0; j < n_ap; ++j) cols.push_back(fp::format_mac(0x020000000000ULL + j));
  auto t = table_of(cols, {{{0, 0}, std::vector<int>(n_ap, 0)}});
  auto rows = compute_distance_rows(t, prepare_scan({}, cols, pk(), rng), pk(), rng);
  const BigInt d = dec(rows[0].dist);
  EXPECT_EQ(d, 26 * 14400);
  EXPECT_LT(d, pow2(cmp::default_bit_length(n_ap)));
}

TEST_P(Localization, ServerModeReturnsArgmin) {
  auto t = table_of({kA, kB}, {{{0, 0}, {-90, -90}}, {{6, 6}, {-41, -61}}, {{12, 0}, {-70, -30}}});
  LocalizationScan scan{{{kA, -40}, {kB, -60}}};
  auto es = prepare_scan(scan, t.ap_columns, pk(), rng);
  cmp::LocalKeyholder kh(k().kh, params(t), rng);
  auto res = localize_server_mode(t, es, 1, k().ev, kh, params(t), rng);
  ASSERT_EQ(res.coords.size(), 1u);
  EXPECT_EQ(decrypt_coord(res.coords[0], k().kh.carrier), (fp::Coord{6, 6}));
  EXPECT_EQ(res.rows, (std::vector<std::size_t>{1}));
  EXPECT_EQ(res.comparisons, 2u);

  auto client = client_argmin(localize_client_mode(t, es, pk(), rng), k().kh.carrier);
  EXPECT_EQ(client.coord, (fp::Coord{6, 6}));
  EXPECT_EQ(client.index, 1u);
  EXPECT_EQ(client.distance, 2);
}

TEST_P(Localization, ServerModeTopK) {
  auto t = table_of({kA}, {{{0, 0}, {-70}}, {{1, 0}, {-41}}, {{2, 0}, {-90}}, {{3, 0}, {-45}}});
  auto es = prepare_scan({{{kA, -40}}}, t.ap_columns, pk(), rng);
  cmp::LocalKeyholder kh(k().kh, params(t), rng);
  auto res = localize_server_mode(t, es, 3, k().ev, kh, params(t), rng);
  EXPECT_EQ(res.rows, (std::vector<std::size_t>{1, 3, 0}));
  EXPECT_EQ(res.comparisons, cmp::expected_comparisons(4, 3));
  EXPECT_EQ(decrypt_coord(res.coords[2], k().kh.carrier), (fp::Coord{0, 0}));
  EXPECT_THROW(localize_server_mode(t, es, 5, k().ev, kh, params(t), rng), RangeError);
  EXPECT_THROW(localize_server_mode(t, es, 0, k().ev, kh, params(t), rng), RangeError);
}

TEST_P(Localization, SingleRowNeedsNoComparison) {
  auto t = table_of({kA}, {{{3, 9}, {-50}}});
  auto es = prepare_scan({{{kA, -40}}}, t.ap_columns, pk(), rng);
  cmp::LocalKeyholder kh(k().kh, params(t), rng);
  auto res = localize_server_mode(t, es, 1, k().ev, kh, params(t), rng);
  EXPECT_EQ(res.comparisons, 0u);
  EXPECT_EQ(decrypt_coord(res.coords[0], k().kh.carrier), (fp::Coord{3, 9}));
  EXPECT_EQ(client_argmin(localize_client_mode(t, es, pk(), rng), k().kh.carrier).coord,
            (fp::Coord{3, 9}));
}

TEST_P(Localization, TiesResolveToLowerIndexInBothModes) {
  // Rows 1 and 3 are both at distance 1 from the scan.
  auto t = table_of({kA}, {{{0, 0}, {-60}}, {{1, 0}, {-41}}, {{2, 0}, {-80}}, {{3, 0}, {-39}}});
  auto es = prepare_scan({{{kA, -40}}}, t.ap_columns, pk(), rng);
  cmp::LocalKeyholder kh(k().kh, params(t), rng);
  auto res = localize_server_mode(t, es, 1, k().ev, kh, params(t), rng);
  EXPECT_EQ(res.rows[0], 1u);
  EXPECT_EQ(client_argmin(localize_client_mode(t, es, pk(), rng), k().kh.carrier).index, 1u);

  auto all_equal = table_of({kA}, {{{5, 5}, {-50}}, {{6, 6}, {-50}}, {{7, 7}, {-50}}});
  auto res2 = localize_server_mode(all_equal, prepare_scan({}, {kA}, pk(), rng), 2, k().ev, kh,
                                   params(all_equal), rng);
  EXPECT_EQ(res2.rows, (std::vector<std::size_t>{0, 1}));
}

TEST_P(Localization, ModesAgreeWithOracleOnSyntheticTables) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto t = fp::build_lookup_table(fp::generate_synthetic(8, 6, 100 + seed), 1);
    std::mt19937 gen(static_cast<unsigned>(seed));
    LocalizationScan scan;
    for (const auto& mac : t.ap_columns) {
      scan.pairs.emplace_back(mac, -30 - static_cast<int>(gen() % 70));
    }
    auto es = prepare_scan(scan, t.ap_columns, pk(), rng);
    cmp::LocalKeyholder kh(k().kh, params(t), rng);
    const std::size_t want = oracle_argmin(t, scan);
    auto server = localize_server_mode(t, es, 1, k().ev, kh, params(t), rng);
    auto client = client_argmin(localize_client_mode(t, es, pk(), rng), k().kh.carrier);
    ASSERT_EQ(decrypt_coord(server.coords[0], k().kh.carrier), t.rows[want].coord);
    ASSERT_EQ(client.coord, t.rows[want].coord);
  }
}

TEST_P(Localization, RejectsMisalignedOrForeignScans) {
  auto t = table_of({kA, kB}, {{{0, 0}, {-50, -70}}});
  auto es = prepare_scan({}, {kA}, pk(), rng);
  EXPECT_THROW(compute_distance_rows(t, es, pk(), rng), IncompatibleError);
  const Scheme other = GetParam() == Scheme::kPaillier ? Scheme::kDgk : Scheme::kPaillier;
  auto foreign = prepare_scan({}, {kA, kB}, keys_for(other).ev.carrier, rng);
  EXPECT_THROW(compute_distance_rows(t, foreign, pk(), rng), IncompatibleError);
}

INSTANTIATE_TEST_SUITE_P(Carriers, Localization,
                         ::testing::Values(Scheme::kPaillier, Scheme::kDgk),
                         [](const auto& info) { return std::string(scheme_name(info.param)); });

TEST(LocalizationOverflow, SmallPlaintextSpaceIsReported) {
  Rng rng(3);
  auto small = dgk::keygen(
      {.key_bits = 512, .u_bits = 12, .kind = dgk::PlaintextKind::kPowerOfTwo}, rng);
  he::AnyPublicKey pk = small.pk;
  // 240 fits in (-2048, 2048); 14400 does not.
  EXPECT_NO_THROW(prepare_scan({{{kA, -40}}}, {kA}, pk, rng));
  EXPECT_THROW(prepare_scan({}, {kA}, pk, rng), OverflowError);
}

TEST(ClientArgmin, SkipsRowsThatFailToDecrypt) {
  Rng rng(4);
  const auto& k = keys_for(Scheme::kDgk);
  auto t = table_of({kA}, {{{0, 0}, {-41}}, {{1, 0}, {-60}}});
  auto rows = localize_client_mode(t, prepare_scan({{{kA, -40}}}, {kA}, k.ev.carrier, rng),
                                   k.ev.carrier, rng);
  rows[0].dist.value = 12345;  // not in the plaintext subgroup
  auto res = client_argmin(rows, k.kh.carrier);
  EXPECT_EQ(res.failed_rows, (std::vector<std::size_t>{0}));
  EXPECT_EQ(res.index, 1u);
  rows[1].dist.value = 6789;
  EXPECT_THROW(client_argmin(rows, k.kh.carrier), DecryptionError);
}

TEST(ScanFile, ParseAndValidate) {
  std::istringstream ok("mac,rss\nAA:00:00:00:00:0A,-40\n\naa:00:00:00:00:0b,-60\n");
  auto scan = parse_scan(ok);
  ASSERT_EQ(scan.pairs.size(), 2u);
  EXPECT_EQ(scan.pairs[0].first, kA);
  EXPECT_EQ(scan.pairs[1].second, -60);

  std::istringstream dup("mac,rss\naa:00:00:00:00:0a,-40\naa:00:00:00:00:0a,-41\n");
  EXPECT_THROW(parse_scan(dup), RangeError);
  std::istringstream range("mac,rss\naa:00:00:00:00:0a,-121\n");
  EXPECT_THROW(parse_scan(range), fp::CsvError);
  std::istringstream hdr("rss,mac\n");
  EXPECT_THROW(parse_scan(hdr), fp::CsvError);
  EXPECT_EQ(align_scan(scan, {kB, "aa:00:00:00:00:0c", kA}), (std::vector<int>{-60, -120, -40}));
}

}  // namespace
}  // namespace encloc::loc

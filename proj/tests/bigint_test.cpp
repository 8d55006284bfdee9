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

#include "encloc/bigint.hpp"

#include <gtest/gtest.h>

#include "encloc/ciphertext.hpp"

namespace encloc {
namespace {

TEST(BigIntHelpers, ArithmeticBasics) {
  EXPECT_EQ(bit_length(BigInt(0)), 0u);
  EXPECT_EQ(bit_length(BigInt(1)), 1u);
  EXPECT_EQ(bit_length(BigInt(255)), 8u);
  EXPECT_EQ(pow2(10), 1024);
  EXPECT_EQ(mod(BigInt(-3), BigInt(7)), 4);
  EXPECT_EQ(powm(3, 4, 7), 4);  // 81 mod 7
  EXPECT_EQ(*invm(3, 7), 5);
  EXPECT_FALSE(invm(6, 9).has_value());
  EXPECT_EQ(lcm(10, 12), 60);
  EXPECT_TRUE(is_probable_prime(BigInt(65537)));
  EXPECT_FALSE(is_probable_prime(BigInt(65535)));
}

TEST(BigIntHex, CanonicalRoundtrip) {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    BigInt x = rng.bits(1 + (i * 13) % 700);
    std::string h = to_hex(x);
    ASSERT_TRUE(is_canonical_hex(h));
    ASSERT_EQ(from_hex(h), x);
  }
  EXPECT_EQ(to_hex(BigInt(0)), "0");
  EXPECT_EQ(to_hex(BigInt(255)), "ff");
}

TEST(BigIntHex, RejectsNonCanonical) {
  for (const char* bad : {"", "00ff", "0x1", "FF", "12g", " 1", "-1", "00"}) {
    EXPECT_FALSE(is_canonical_hex(bad)) << bad;
    EXPECT_THROW(from_hex(bad), RangeError) << bad;
  }
  EXPECT_THROW(to_hex(BigInt(-1)), RangeError);
}

TEST(RngTest, SeededStreamsRepeat) {
  Rng a(42), b(42), c(43);
  BigInt xa = a.bits(256), xb = b.bits(256), xc = c.bits(256);
  EXPECT_EQ(xa, xb);
  EXPECT_NE(xa, xc);
  EXPECT_TRUE(a.deterministic());
  EXPECT_FALSE(Rng().deterministic());
}

TEST(RngTest, RangesAreRespected) {
  for (Rng* r : {new Rng(5), new Rng()}) {
    for (int i = 0; i < 500; ++i) {
      BigInt x = r->below(BigInt(37));
      ASSERT_GE(x, 0);
      ASSERT_LT(x, 37);
      BigInt y = r->range(-5, 5);
      ASSERT_GE(y, -5);
      ASSERT_LT(y, 5);
      ASSERT_LT(r->bits(9), 512);
      ASSERT_EQ(bit_length(r->exact_bits(33)), 33u);
    }
    EXPECT_THROW(r->below(BigInt(0)), RangeError);
    delete r;
  }
}

TEST(RngTest, SystemSourceCoversSmallRange) {
  Rng rng;
  bool seen[8] = {};
  for (int i = 0; i < 400; ++i) seen[rng.below(BigInt(8)).get_ui()] = true;
  for (bool s : seen) EXPECT_TRUE(s);
}

TEST(RandomPrime, ExactLengthAndPrimality) {
  Rng rng(9);
  for (unsigned bits : {16u, 64u, 160u, 256u}) {
    BigInt p = random_prime(bits, rng);
    EXPECT_EQ(bit_length(p), bits);
    EXPECT_TRUE(is_probable_prime(p));
  }
}

TEST(KeyFingerprintTest, HexRoundtripAndStability) {
  KeyFingerprint a = KeyFingerprint::of("paillier:8f");
  EXPECT_EQ(a, KeyFingerprint::of("paillier:8f"));
  EXPECT_NE(a, KeyFingerprint::of("paillier:8e"));
  EXPECT_EQ(a.hex().size(), 16u);
  EXPECT_EQ(KeyFingerprint::from_hex(a.hex()), a);
  EXPECT_THROW(KeyFingerprint::from_hex("123"), RangeError);
  EXPECT_THROW(KeyFingerprint::from_hex("zzzzzzzzzzzzzzzz"), RangeError);
}

TEST(OpCountersTest, ScopeInstallsAndRestores) {
  OpCounters outer, inner;
  {
    OpScope s1(outer);
    ops::count_encryption();
    {
      OpScope s2(inner);
      ops::count_decryption();
      ops::count_zero_check();
    }
    ops::count_comparison();
  }
  ops::count_encryption();  // no scope installed
  EXPECT_EQ(outer.encryptions, 1u);
  EXPECT_EQ(outer.comparisons, 1u);
  EXPECT_EQ(outer.decryptions, 0u);
  EXPECT_EQ(inner.decryptions, 1u);
  EXPECT_EQ(inner.zero_checks, 1u);
}

}  // namespace
}  // namespace encloc

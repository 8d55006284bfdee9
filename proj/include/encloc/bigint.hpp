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

// Arbitrary-precision helpers on top of GMP: randomness, primes, modular
// arithmetic and the canonical hex form used on the wire.

#ifndef ENCLOC_BIGINT_HPP_
#define ENCLOC_BIGINT_HPP_

#include <gmpxx.h>
#include <sys/random.h>

#include <array>
#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "encloc/errors.hpp"

namespace encloc {

using BigInt = mpz_class;

inline std::size_t bit_length(const BigInt& x) {
  return x == 0 ? 0 : mpz_sizeinbase(x.get_mpz_t(), 2);
}

inline BigInt pow2(unsigned e) {
  BigInt r;
  mpz_setbit(r.get_mpz_t(), e);
  return r;
}

inline BigInt powm(const BigInt& base, const BigInt& exp, const BigInt& mod) {
  BigInt r;
  mpz_powm(r.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
  return r;
}

inline BigInt mulm(const BigInt& a, const BigInt& b, const BigInt& mod) {
  BigInt r = a * b;
  mpz_mod(r.get_mpz_t(), r.get_mpz_t(), mod.get_mpz_t());
  return r;
}

// Non-negative remainder, also for negative `a`.
inline BigInt mod(const BigInt& a, const BigInt& m) {
  BigInt r;
  mpz_mod(r.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t());
  return r;
}

inline std::optional<BigInt> invm(const BigInt& a, const BigInt& m) {
  BigInt r;
  if (mpz_invert(r.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t()) == 0) {
    return std::nullopt;
  }
  return r;
}

inline BigInt gcd(const BigInt& a, const BigInt& b) {
  BigInt r;
  mpz_gcd(r.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return r;
}

inline BigInt lcm(const BigInt& a, const BigInt& b) {
  BigInt r;
  mpz_lcm(r.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return r;
}

inline bool is_probable_prime(const BigInt& x, int rounds = 64) {
  return mpz_probab_prime_p(x.get_mpz_t(), rounds) != 0;
}

// Lowercase hex, no sign, no leading zeros ("0" for zero).
inline std::string to_hex(const BigInt& x) {
  if (x < 0) throw RangeError("to_hex: negative value");
  return x.get_str(16);
}

inline bool is_canonical_hex(std::string_view s) {
  if (s.empty()) return false;
  if (s.size() > 1 && s.front() == '0') return false;
  for (char c : s) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

// Throws RangeError on anything other than canonical hex.
inline BigInt from_hex(std::string_view s) {
  if (!is_canonical_hex(s)) {
    throw RangeError("non-canonical hex integer '" +
                     std::string(s.substr(0, 32)) + "'");
  }
  return BigInt(std::string(s), 16);
}

inline std::uint64_t low_u64(const BigInt& x) {
  static_assert(sizeof(mp_limb_t) == sizeof(std::uint64_t));
  return mpz_getlimbn(x.get_mpz_t(), 0);
}

// Randomness source for keys, nonces and protocol masks.
//
// Default-constructed instances draw from getrandom(2). A seeded instance is
// deterministic and exists for fixtures and reproducible benches.
class Rng {
 public:
  Rng() = default;
  explicit Rng(std::uint64_t seed)
      : seeded_(std::make_unique<gmp_randclass>(gmp_randinit_mt)) {
    seeded_->seed(seed);
  }

  Rng(Rng&&) = default;
  Rng& operator=(Rng&&) = default;
  Rng(const Rng&) = delete;
  Rng& operator=(const Rng&) = delete;

  // Honors ENCLOC_SEED when set, for test harnesses only.
  static Rng from_env() {
    if (const char* s = std::getenv("ENCLOC_SEED"); s != nullptr && *s) {
      return Rng(std::strtoull(s, nullptr, 10));
    }
    return Rng();
  }

  bool deterministic() const { return seeded_ != nullptr; }

  // Uniform in [0, 2^bits).
  BigInt bits(unsigned nbits) {
    if (nbits == 0) return 0;
    if (seeded_) return seeded_->get_z_bits(nbits);
    const std::size_t nbytes = (nbits + 7) / 8;
    std::string buf(nbytes, '\0');
    fill(buf.data(), nbytes);
    BigInt r;
    mpz_import(r.get_mpz_t(), nbytes, 1, 1, 0, 0, buf.data());
    const unsigned extra = static_cast<unsigned>(nbytes * 8 - nbits);
    if (extra) mpz_fdiv_q_2exp(r.get_mpz_t(), r.get_mpz_t(), extra);
    return r;
  }

  // Uniform in [0, bound), bound > 0.
  BigInt below(const BigInt& bound) {
    if (bound <= 0) throw RangeError("Rng::below: bound must be positive");
    if (seeded_) return seeded_->get_z_range(bound);
    const auto nbits = static_cast<unsigned>(bit_length(bound));
    for (;;) {
      BigInt r = bits(nbits);
      if (r < bound) return r;
    }
  }

  // Uniform in [lo, hi).
  BigInt range(const BigInt& lo, const BigInt& hi) {
    return lo + below(hi - lo);
  }

  // Uniform `nbits`-bit value with the top bit set.
  BigInt exact_bits(unsigned nbits) {
    BigInt r = bits(nbits);
    mpz_setbit(r.get_mpz_t(), nbits - 1);
    return r;
  }

  std::uint64_t u64() { return static_cast<std::uint64_t>(low_u64(bits(64))); }

  bool coin() { return bits(1) == 1; }

 private:
  static void fill(char* out, std::size_t n) {
    while (n > 0) {
      const ssize_t got = ::getrandom(out, n, 0);
      if (got < 0) {
        if (errno == EINTR) continue;
        std::abort();
      }
      out += got;
      n -= static_cast<std::size_t>(got);
    }
  }

  std::unique_ptr<gmp_randclass> seeded_;
};

// Random prime of exactly `nbits` bits. The two top bits are set so that the
// product of two such primes has exactly 2*nbits bits.
inline BigInt random_prime(unsigned nbits, Rng& rng) {
  for (;;) {
    BigInt c = rng.bits(nbits);
    mpz_setbit(c.get_mpz_t(), nbits - 1);
    if (nbits > 1) mpz_setbit(c.get_mpz_t(), nbits - 2);
    mpz_setbit(c.get_mpz_t(), 0);
    if (is_probable_prime(c)) return c;
  }
}

}  // namespace encloc

#endif  // ENCLOC_BIGINT_HPP_

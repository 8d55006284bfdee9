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

// Paillier cryptosystem with generator g = n + 1.
//
//   Enc(m; r) = (1 + m*n) * r^n mod n^2
//   Dec(c)    = L(c^lambda mod n^2) * mu mod n,  L(u) = (u - 1) / n

#ifndef ENCLOC_PAILLIER_HPP_
#define ENCLOC_PAILLIER_HPP_

#include <string>
#include <utility>

#include "encloc/bigint.hpp"
#include "encloc/ciphertext.hpp"
#include "encloc/errors.hpp"

namespace encloc::paillier {

inline constexpr unsigned kMinKeyBits = 256;
inline constexpr unsigned kDefaultKeyBits = 2048;

class PublicKey {
 public:
  static constexpr Scheme kScheme = Scheme::kPaillier;

  PublicKey() = default;
  explicit PublicKey(BigInt n) : n_(std::move(n)) {
    if (n_ < 3 || mpz_even_p(n_.get_mpz_t())) {
      throw RangeError("paillier modulus must be odd and > 2");
    }
    n2_ = n_ * n_;
    kf_ = KeyFingerprint::of("paillier:" + to_hex(n_));
  }

  const BigInt& n() const { return n_; }
  const BigInt& ciphertext_modulus() const { return n2_; }
  const BigInt& plaintext_modulus() const { return n_; }
  KeyFingerprint fingerprint() const { return kf_; }
  std::size_t key_bits() const { return bit_length(n_); }

  Ciphertext encrypt(const BigInt& m, Rng& rng) const {
    BigInt r;
    do {
      r = rng.range(1, n_);
    } while (gcd(r, n_) != 1);
    return encrypt_with_nonce(m, r);
  }

  // Deterministic encryption with caller-supplied nonce r (fixtures only).
  Ciphertext encrypt_with_nonce(const BigInt& m, const BigInt& r) const {
    if (m < 0 || m >= n_) throw RangeError("paillier plaintext out of [0, n)");
    ops::count_encryption();
    BigInt gm = mod(1 + m * n_, n2_);
    return Ciphertext{kScheme, mulm(gm, powm(r, n_, n2_), n2_), kf_};
  }

  void check(const Ciphertext& c) const {
    if (c.scheme != kScheme) throw WrongKeyError("not a paillier ciphertext");
    if (!(c.kf == kf_)) {
      throw WrongKeyError("ciphertext key " + c.kf.hex() +
                          " does not match paillier key " + kf_.hex());
    }
    if (c.value < 0 || c.value >= n2_) {
      throw RangeError("paillier ciphertext out of [0, n^2)");
    }
  }

  friend bool operator==(const PublicKey& a, const PublicKey& b) {
    return a.n_ == b.n_;
  }

 private:
  BigInt n_;
  BigInt n2_;
  KeyFingerprint kf_;
};

class PrivateKey {
 public:
  PrivateKey() = default;

  // Builds the trapdoor from two distinct primes. Also the hook used to
  // inject fixed toy primes in tests.
  static PrivateKey from_primes(const BigInt& p, const BigInt& q) {
    if (p == q) throw KeygenError("paillier primes must differ");
    PrivateKey sk;
    sk.p_ = p;
    sk.q_ = q;
    sk.pk_ = PublicKey(p * q);
    sk.lambda_ = lcm(p - 1, q - 1);
    auto mu = invm(sk.lambda_, sk.pk_.n());
    if (!mu) throw KeygenError("lambda not invertible mod n");
    sk.mu_ = *mu;
    return sk;
  }

  const PublicKey& public_key() const { return pk_; }
  const BigInt& p() const { return p_; }
  const BigInt& q() const { return q_; }
  const BigInt& lambda() const { return lambda_; }
  const BigInt& mu() const { return mu_; }

  BigInt decrypt(const Ciphertext& c) const {
    pk_.check(c);
    ops::count_decryption();
    const BigInt& n = pk_.n();
    BigInt u = powm(c.value, lambda_, pk_.ciphertext_modulus());
    BigInt l = (u - 1) / n;
    return mulm(l, mu_, n);
  }

 private:
  BigInt p_, q_, lambda_, mu_;
  PublicKey pk_;
};

struct KeyPair {
  PublicKey pk;
  PrivateKey sk;
};

inline KeyPair keygen(unsigned key_bits, Rng& rng) {
  if (key_bits < kMinKeyBits || key_bits % 2 != 0) {
    throw KeygenError("paillier key_bits must be even and >= 256, got " +
                      std::to_string(key_bits));
  }
  for (;;) {
    BigInt p = random_prime(key_bits / 2, rng);
    BigInt q = random_prime(key_bits / 2, rng);
    if (p == q) continue;
    BigInt n = p * q;
    if (bit_length(n) != key_bits) continue;
    if (gcd(n, (p - 1) * (q - 1)) != 1) continue;
    PrivateKey sk = PrivateKey::from_primes(p, q);
    PublicKey pk = sk.public_key();
    return KeyPair{std::move(pk), std::move(sk)};
  }
}

}  // namespace encloc::paillier

#endif  // ENCLOC_PAILLIER_HPP_

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

// Scheme-agnostic additive homomorphic algebra.
//
// Both carriers share the same shape: ciphertexts multiply modulo a
// ciphertext modulus N (n^2 or n) and plaintexts add modulo M (n or u).
// Everything here is written once against that shape, either statically
// (templates over the key type) or through the AnyPublicKey variant.

#ifndef ENCLOC_HE_HPP_
#define ENCLOC_HE_HPP_

#include <concepts>
#include <string>
#include <variant>

#include "encloc/bigint.hpp"
#include "encloc/ciphertext.hpp"
#include "encloc/dgk.hpp"
#include "encloc/errors.hpp"
#include "encloc/paillier.hpp"

namespace encloc::he {

template <class K>
concept AdditiveKey = requires(const K& k, const BigInt& m, const Ciphertext& c,
                               Rng& rng) {
  { K::kScheme } -> std::convertible_to<Scheme>;
  { k.encrypt(m, rng) } -> std::same_as<Ciphertext>;
  { k.ciphertext_modulus() } -> std::convertible_to<const BigInt&>;
  { k.plaintext_modulus() } -> std::convertible_to<const BigInt&>;
  { k.fingerprint() } -> std::same_as<KeyFingerprint>;
  k.check(c);
};

using AnyPublicKey = std::variant<paillier::PublicKey, dgk::PublicKey>;
using AnyPrivateKey = std::variant<paillier::PrivateKey, dgk::PrivateKey>;

// Signed integers live in (-M/2, M/2), represented as residues mod M.
inline BigInt encode_signed(const BigInt& m, const BigInt& M) {
  BigInt a = abs(m);
  if (2 * a >= M) {
    throw OverflowError("value " + m.get_str() + " exceeds the signed plaintext space (M has " +
                        std::to_string(bit_length(M)) + " bits)");
  }
  return mod(m, M);
}

inline BigInt decode_signed(const BigInt& r, const BigInt& M) {
  if (r < 0 || r >= M) throw RangeError("residue out of [0, M)");
  return 2 * r <= M ? BigInt(r) : BigInt(r - M);
}

template <AdditiveKey K>
Ciphertext add(const K& pk, const Ciphertext& a, const Ciphertext& b) {
  require_compatible(a, b);
  pk.check(a);
  pk.check(b);
  return Ciphertext{a.scheme, mulm(a.value, b.value, pk.ciphertext_modulus()), a.kf};
}

// Decrypts to (m * k) mod M for any integer k. Exponents above M/2 go
// through the ciphertext inverse so that small negative scalars stay cheap.
template <AdditiveKey K>
Ciphertext scalar_mul(const K& pk, const Ciphertext& c, const BigInt& k) {
  pk.check(c);
  const BigInt& M = pk.plaintext_modulus();
  const BigInt& N = pk.ciphertext_modulus();
  BigInt e = mod(k, M);
  if (2 * e > M) {
    auto inv = invm(c.value, N);
    if (!inv) throw RangeError("ciphertext not invertible");
    return Ciphertext{c.scheme, powm(*inv, M - e, N), c.kf};
  }
  return Ciphertext{c.scheme, powm(c.value, e, N), c.kf};
}

template <AdditiveKey K>
Ciphertext sub(const K& pk, const Ciphertext& a, const Ciphertext& b) {
  require_compatible(a, b);
  return add(pk, a, scalar_mul(pk, b, pk.plaintext_modulus() - 1));
}

template <AdditiveKey K>
Ciphertext encrypt_signed(const K& pk, const BigInt& m, Rng& rng) {
  return pk.encrypt(encode_signed(m, pk.plaintext_modulus()), rng);
}

// Variant front-ends, for code that picks the carrier at run time.

inline Scheme scheme_of(const AnyPublicKey& pk) {
  return std::visit([](const auto& k) { return std::decay_t<decltype(k)>::kScheme; }, pk);
}

inline const BigInt& plaintext_modulus(const AnyPublicKey& pk) {
  return std::visit([](const auto& k) -> const BigInt& { return k.plaintext_modulus(); }, pk);
}

inline KeyFingerprint fingerprint(const AnyPublicKey& pk) {
  return std::visit([](const auto& k) { return k.fingerprint(); }, pk);
}

inline Ciphertext encrypt(const AnyPublicKey& pk, const BigInt& m, Rng& rng) {
  return std::visit([&](const auto& k) { return k.encrypt(m, rng); }, pk);
}

inline Ciphertext encrypt_signed(const AnyPublicKey& pk, const BigInt& m, Rng& rng) {
  return std::visit([&](const auto& k) { return encrypt_signed(k, m, rng); }, pk);
}

inline Ciphertext add(const AnyPublicKey& pk, const Ciphertext& a, const Ciphertext& b) {
  return std::visit([&](const auto& k) { return add(k, a, b); }, pk);
}

inline Ciphertext sub(const AnyPublicKey& pk, const Ciphertext& a, const Ciphertext& b) {
  return std::visit([&](const auto& k) { return sub(k, a, b); }, pk);
}

inline Ciphertext scalar_mul(const AnyPublicKey& pk, const Ciphertext& c, const BigInt& k) {
  return std::visit([&](const auto& key) { return scalar_mul(key, c, k); }, pk);
}

inline void check(const AnyPublicKey& pk, const Ciphertext& c) {
  std::visit([&](const auto& k) { k.check(c); }, pk);
}

inline AnyPublicKey public_key_of(const AnyPrivateKey& sk) {
  return std::visit([](const auto& k) { return AnyPublicKey(k.public_key()); }, sk);
}

inline BigInt decrypt(const AnyPrivateKey& sk, const Ciphertext& c) {
  return std::visit([&](const auto& k) { return k.decrypt(c); }, sk);
}

inline BigInt decrypt_signed(const AnyPrivateKey& sk, const Ciphertext& c) {
  return std::visit(
      [&](const auto& k) {
        return decode_signed(k.decrypt(c), k.public_key().plaintext_modulus());
      },
      sk);
}

}  // namespace encloc::he

#endif  // ENCLOC_HE_HPP_

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

// DGK cryptosystem.
//
// n = p*q with u*v_p | p-1 and u*v_q | q-1. g has order u*v_p*v_q and h has
// order v_p*v_q in Z_n^*. Enc(m; r) = g^m * h^r mod n with r of 2.5*t bits.
//
// Raising a ciphertext to v_p modulo p kills the h^r term and leaves
// G^m with G = g^{v_p} mod p of order u, so:
//   * zero check:  c^{v_p} mod p == 1  <=>  m == 0 (mod u)
//   * decryption:  discrete log of c^{v_p} base G in the order-u subgroup.
//
// Two plaintext spaces are supported. A prime u (needed wherever plaintexts
// get multiplicatively blinded) is decrypted with baby-step/giant-step over a
// ceil(sqrt(u)) table. A power-of-two u is decrypted bit by bit in
// O(log^2 u) squarings, which keeps 40..51-bit plaintext spaces cheap.

#ifndef ENCLOC_DGK_HPP_
#define ENCLOC_DGK_HPP_

#include <algorithm>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "encloc/bigint.hpp"
#include "encloc/ciphertext.hpp"
#include "encloc/errors.hpp"

namespace encloc::dgk {

inline constexpr unsigned kMinKeyBits = 512;
inline constexpr unsigned kDefaultTBits = 160;

enum class PlaintextKind { kPrime, kPowerOfTwo };

struct KeyParams {
  unsigned key_bits = 2048;
  unsigned t_bits = kDefaultTBits;
  // Bit length of u for kPrime; log2(u) for kPowerOfTwo.
  unsigned u_bits = 16;
  PlaintextKind kind = PlaintextKind::kPrime;
  // Fixed u (prime kind only), overriding u_bits.
  std::optional<BigInt> u = std::nullopt;
};

inline bool is_power_of_two(const BigInt& x) {
  return x > 0 && mpz_popcount(x.get_mpz_t()) == 1;
}

class PublicKey {
 public:
  static constexpr Scheme kScheme = Scheme::kDgk;

  PublicKey() = default;
  PublicKey(BigInt n, BigInt g, BigInt h, BigInt u, unsigned t_bits)
      : n_(std::move(n)), g_(std::move(g)), h_(std::move(h)), u_(std::move(u)),
        t_bits_(t_bits) {
    if (u_ <= 2) throw RangeError("dgk plaintext modulus u must exceed 2");
    if (g_ < 2 || g_ >= n_ || h_ < 2 || h_ >= n_) {
      throw RangeError("dgk generators must lie in [2, n)");
    }
    if (t_bits_ == 0) throw RangeError("dgk t_bits must be positive");
    kf_ = KeyFingerprint::of("dgk:" + to_hex(n_) + ":" + to_hex(g_) + ":" +
                             to_hex(h_) + ":" + to_hex(u_));
  }

  const BigInt& n() const { return n_; }
  const BigInt& g() const { return g_; }
  const BigInt& h() const { return h_; }
  const BigInt& u() const { return u_; }
  unsigned t_bits() const { return t_bits_; }
  const BigInt& ciphertext_modulus() const { return n_; }
  const BigInt& plaintext_modulus() const { return u_; }
  KeyFingerprint fingerprint() const { return kf_; }
  std::size_t key_bits() const { return bit_length(n_); }
  PlaintextKind kind() const {
    return is_power_of_two(u_) ? PlaintextKind::kPowerOfTwo : PlaintextKind::kPrime;
  }
  unsigned nonce_bits() const { return (5 * t_bits_ + 1) / 2; }

  Ciphertext encrypt(const BigInt& m, Rng& rng) const {
    return encrypt_with_nonce(m, rng.bits(nonce_bits()));
  }

  Ciphertext encrypt_with_nonce(const BigInt& m, const BigInt& r) const {
    if (m < 0 || m >= u_) throw RangeError("dgk plaintext out of [0, u)");
    ops::count_encryption();
    return Ciphertext{kScheme, mulm(powm(g_, m, n_), powm(h_, r, n_), n_), kf_};
  }

  void check(const Ciphertext& c) const {
    if (c.scheme != kScheme) throw WrongKeyError("not a dgk ciphertext");
    if (!(c.kf == kf_)) {
      throw WrongKeyError("ciphertext key " + c.kf.hex() +
                          " does not match dgk key " + kf_.hex());
    }
    if (c.value < 0 || c.value >= n_) throw RangeError("dgk ciphertext out of [0, n)");
  }

  friend bool operator==(const PublicKey& a, const PublicKey& b) {
    return a.n_ == b.n_ && a.g_ == b.g_ && a.h_ == b.h_ && a.u_ == b.u_ &&
           a.t_bits_ == b.t_bits_;
  }

 private:
  BigInt n_, g_, h_, u_;
  unsigned t_bits_ = kDefaultTBits;
  KeyFingerprint kf_;
};

// Discrete logarithms base G (order u) modulo p.
class SubgroupLog {
 public:
  SubgroupLog(const BigInt& G, const BigInt& u, const BigInt& p)
      : p_(p), G_(G), u_(u) {
    if (is_power_of_two(u)) {
      build_binary();
    } else {
      build_bsgs();
    }
  }

  std::size_t table_size() const { return baby_; }

  BigInt log(const BigInt& y) const {
    return binary_ ? log_binary(y) : log_bsgs(y);
  }

 private:
  static constexpr std::uint32_t kEmpty = std::numeric_limits<std::uint32_t>::max();
  static constexpr std::uint64_t kEmptySlot = std::numeric_limits<std::uint64_t>::max();

  void build_binary() {
    binary_ = true;
    k_ = static_cast<unsigned>(bit_length(u_) - 1);
    auto ginv = invm(G_, p_);
    if (!ginv) throw KeygenError("dgk subgroup generator not invertible");
    inv_pow2_.reserve(k_);
    BigInt cur = *ginv;
    for (unsigned i = 0; i < k_; ++i) {
      inv_pow2_.push_back(cur);
      cur = mulm(cur, cur, p_);
    }
  }

  void build_bsgs() {
    BigInt s;
    mpz_sqrt(s.get_mpz_t(), u_.get_mpz_t());
    if (s * s < u_) s += 1;
    if (s >= BigInt(static_cast<unsigned long>(kEmpty))) {
      throw KeygenError("dgk plaintext space too large for baby-step table");
    }
    baby_ = s.get_ui();
    nlimbs_ = mpz_size(p_.get_mpz_t());
    plimbs_.resize(nlimbs_);
    limbs_of(p_, plimbs_);
    mont_r_ = mod(BigInt(1) << static_cast<mp_bitcnt_t>(64 * nlimbs_), p_);
    // -p^{-1} mod 2^64 by Newton iteration.
    mp_limb_t inv = plimbs_[0];
    for (int k = 0; k < 6; ++k) inv *= 2 - plimbs_[0] * inv;
    pinv_ = ~inv + 1;

    std::size_t cap = 1;
    while (cap < 2 * baby_) cap <<= 1;
    mask_ = cap - 1;
    slots_.assign(cap, kEmptySlot);
    BigInt cur = mont_r_;
    const BigInt G = G_;
    for (std::size_t j = 0; j < baby_; ++j) {
      insert(low_u64(cur), static_cast<std::uint32_t>(j));
      cur = mulm(cur, G, p_);
    }
    // cur == G^s in Montgomery form
    auto inv_gs = invm(mulm(cur, *invm(mont_r_, p_), p_), p_);
    if (!inv_gs) throw KeygenError("dgk giant step not invertible");
    giant_.resize(nlimbs_);
    limbs_of(to_mont(*inv_gs), giant_);
    giants_ = BigInt((u_ + s - 1) / s).get_ui();
  }

  static std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    return x;
  }

  // A slot packs a 32-bit tag of the residue's low word with its exponent.
  static std::uint64_t tag(std::uint64_t key) { return key & 0xffffffff00000000ULL; }

  void insert(std::uint64_t key, std::uint32_t val) {
    std::size_t i = mix(key) & mask_;
    while (slots_[i] != kEmptySlot) i = (i + 1) & mask_;
    slots_[i] = tag(key) | val;
  }

  // Giant steps run in Montgomery form on raw limbs; the baby table stores
  // low words of Montgomery residues so lookups need no conversion.
  BigInt to_mont(const BigInt& x) const { return mod(x * mont_r_, p_); }

  static void limbs_of(const BigInt& x, std::vector<mp_limb_t>& out) {
    std::fill(out.begin(), out.end(), 0);
    std::size_t count = 0;
    mpz_export(out.data(), &count, -1, sizeof(mp_limb_t), 0, 0, x.get_mpz_t());
  }

  // out = a * b / R mod p, with scratch of 3n + 1 limbs.
  void mont_mul(mp_limb_t* out, const mp_limb_t* a, const mp_limb_t* b,
                mp_limb_t* scratch) const {
    const auto n = static_cast<mp_size_t>(nlimbs_);
    const mp_limb_t* p = plimbs_.data();
    mp_limb_t* carries = scratch + 2 * n + 1;
    mpn_mul_n(scratch, a, b, n);
    for (mp_size_t i = 0; i < n; ++i) {
      carries[i] = mpn_addmul_1(scratch + i, p, n, scratch[i] * pinv_);
    }
    scratch[2 * n] = mpn_add_n(scratch + n, scratch + n, carries, n);
    mp_limb_t* hi = scratch + n;
    if (hi[n] != 0 || mpn_cmp(hi, p, n) >= 0) mpn_sub_n(hi, hi, p, n);
    std::copy(hi, hi + n, out);
  }

  BigInt log_bsgs(const BigInt& y) const {
    std::vector<mp_limb_t> gamma(nlimbs_), scratch(3 * nlimbs_ + 1);
    limbs_of(to_mont(y), gamma);
    BigInt check, cur;
    for (std::uint64_t i = 0; i < giants_; ++i) {
      const std::uint64_t key = gamma[0];
      for (std::size_t slot = mix(key) & mask_; slots_[slot] != kEmptySlot;
           slot = (slot + 1) & mask_) {
        if (tag(slots_[slot]) != tag(key)) continue;
        const auto j = static_cast<std::uint32_t>(slots_[slot]);
        // Low-word match; confirm against the full residue.
        mpz_import(cur.get_mpz_t(), nlimbs_, -1, sizeof(mp_limb_t), 0, 0, gamma.data());
        mpz_powm_ui(check.get_mpz_t(), G_.get_mpz_t(), j, p_.get_mpz_t());
        if (to_mont(check) == cur) {
          BigInt m = BigInt(static_cast<unsigned long>(i)) * static_cast<unsigned long>(baby_) +
                     static_cast<unsigned long>(j);
          if (m < u_) return m;
        }
      }
      mont_mul(gamma.data(), gamma.data(), giant_.data(), scratch.data());
    }
    throw DecryptionError("dgk discrete log not found (corrupted ciphertext?)");
  }

  BigInt log_binary(const BigInt& y) const {
    BigInt m = 0;
    BigInt cur = y;
    for (unsigned i = 0; i < k_; ++i) {
      if (powm(cur, pow2(k_ - 1 - i), p_) != 1) {
        mpz_setbit(m.get_mpz_t(), i);
        cur = mulm(cur, inv_pow2_[i], p_);
      }
    }
    if (cur != 1) {
      throw DecryptionError("dgk ciphertext outside the plaintext subgroup");
    }
    return m;
  }

  BigInt p_, G_, u_;
  bool binary_ = false;
  // power-of-two u
  unsigned k_ = 0;
  std::vector<BigInt> inv_pow2_;
  // prime u
  std::size_t baby_ = 0;
  std::size_t mask_ = 0;
  std::vector<std::uint64_t> slots_;
  std::size_t nlimbs_ = 0;
  std::vector<mp_limb_t> plimbs_;
  mp_limb_t pinv_ = 0;
  BigInt mont_r_;
  std::vector<mp_limb_t> giant_;
  std::uint64_t giants_ = 0;
};

class PrivateKey {
 public:
  PrivateKey() = default;

  // Rebuilds the decryption table; used after keygen and when loading.
  static PrivateKey from_components(PublicKey pk, BigInt p, BigInt q, BigInt vp,
                                    BigInt vq) {
    if (p * q != pk.n()) throw KeygenError("dgk p*q does not match n");
    PrivateKey sk;
    sk.pk_ = std::move(pk);
    sk.p_ = std::move(p);
    sk.q_ = std::move(q);
    sk.vp_ = std::move(vp);
    sk.vq_ = std::move(vq);
    BigInt G = powm(sk.pk_.g(), sk.vp_, sk.p_);
    sk.log_ = std::make_shared<const SubgroupLog>(G, sk.pk_.u(), sk.p_);
    return sk;
  }

  const PublicKey& public_key() const { return pk_; }
  const BigInt& p() const { return p_; }
  const BigInt& q() const { return q_; }
  const BigInt& vp() const { return vp_; }
  const BigInt& vq() const { return vq_; }
  std::size_t dlog_table_size() const { return log_ ? log_->table_size() : 0; }

  BigInt decrypt(const Ciphertext& c) const {
    pk_.check(c);
    ops::count_decryption();
    return log_->log(powm(c.value, vp_, p_));
  }

  bool is_zero(const Ciphertext& c) const {
    pk_.check(c);
    ops::count_zero_check();
    return powm(c.value, vp_, p_) == 1;
  }

 private:
  PublicKey pk_;
  BigInt p_, q_, vp_, vq_;
  std::shared_ptr<const SubgroupLog> log_;
};

struct KeyPair {
  PublicKey pk;
  PrivateKey sk;
};

namespace detail {

// Prime p = base*f + 1 of exactly `bits` bits; f even when base is odd.
inline BigInt structured_prime(const BigInt& base, unsigned bits, Rng& rng) {
  const auto base_bits = static_cast<unsigned>(bit_length(base));
  if (bits < base_bits + 16) {
    throw KeygenError("dgk: u*v does not fit below p-1 (prime of " +
                      std::to_string(bits) + " bits, u*v has " +
                      std::to_string(base_bits) + " bits)");
  }
  const unsigned f_bits = bits - base_bits + 1;
  const bool need_even = mpz_odd_p(base.get_mpz_t()) != 0;
  for (;;) {
    BigInt f = rng.exact_bits(f_bits);
    if (need_even) mpz_clrbit(f.get_mpz_t(), 0);
    BigInt p = base * f + 1;
    if (bit_length(p) != bits) continue;
    if (is_probable_prime(p)) return p;
  }
}

// Element of order exactly `order` modulo prime p, for order | p-1, given
// the distinct prime factors of `order`.
inline BigInt element_of_order(const BigInt& p, const BigInt& order,
                               const std::vector<BigInt>& factors, Rng& rng) {
  const BigInt cofactor = (p - 1) / order;
  for (;;) {
    BigInt x = rng.range(2, p - 1);
    BigInt y = powm(x, cofactor, p);
    bool ok = true;
    for (const auto& f : factors) {
      if (powm(y, order / f, p) == 1) {
        ok = false;
        break;
      }
    }
    if (ok) return y;
  }
}

inline BigInt crt(const BigInt& ap, const BigInt& p, const BigInt& aq, const BigInt& q) {
  const BigInt n = p * q;
  BigInt qinv = *invm(q, p);
  BigInt pinv = *invm(p, q);
  return mod(ap * q * qinv + aq * p * pinv, n);
}

}  // namespace detail

inline KeyPair keygen(const KeyParams& params, Rng& rng) {
  if (params.key_bits < kMinKeyBits || params.key_bits % 2 != 0) {
    throw KeygenError("dgk key_bits must be even and >= 512, got " +
                      std::to_string(params.key_bits));
  }
  if (params.t_bits < 8) throw KeygenError("dgk t_bits must be >= 8");

  BigInt u;
  BigInt u_radical;
  if (params.kind == PlaintextKind::kPowerOfTwo) {
    if (params.u) throw KeygenError("fixed u is only supported for prime u");
    if (params.u_bits < 2) throw KeygenError("dgk power-of-two u needs log2(u) >= 2");
    u = pow2(params.u_bits);
    u_radical = 2;
  } else if (params.u) {
    u = *params.u;
    if (u <= 2 || !is_probable_prime(u)) throw KeygenError("dgk u must be an odd prime");
    u_radical = u;
  } else {
    if (params.u_bits < 3) throw KeygenError("dgk prime u needs at least 3 bits");
    u = random_prime(params.u_bits, rng);
    u_radical = u;
  }

  const unsigned half = params.key_bits / 2;
  for (;;) {
    BigInt vp = random_prime(params.t_bits, rng);
    BigInt vq;
    do {
      vq = random_prime(params.t_bits, rng);
    } while (vq == vp);
    if (vp == u || vq == u) continue;

    BigInt p = detail::structured_prime(u * vp, half, rng);
    BigInt q = detail::structured_prime(u * vq, half, rng);
    if (p == q) continue;
    BigInt n = p * q;
    if (bit_length(n) != params.key_bits) continue;

    BigInt gp = detail::element_of_order(p, u * vp, {u_radical, vp}, rng);
    BigInt gq = detail::element_of_order(q, u * vq, {u_radical, vq}, rng);
    BigInt hp = detail::element_of_order(p, vp, {vp}, rng);
    BigInt hq = detail::element_of_order(q, vq, {vq}, rng);
    BigInt g = detail::crt(gp, p, gq, q);
    BigInt h = detail::crt(hp, p, hq, q);

    PublicKey pk(n, g, h, u, params.t_bits);
    PrivateKey sk = PrivateKey::from_components(pk, p, q, vp, vq);
    return KeyPair{std::move(pk), std::move(sk)};
  }
}

}  // namespace encloc::dgk

#endif  // ENCLOC_DGK_HPP_

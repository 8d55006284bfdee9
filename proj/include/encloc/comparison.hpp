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

// Two-party comparison of encrypted integers, and k-min selection on top.
//
// The evaluator holds [[x]], [[y]] (x, y < 2^l) under the keyholder's
// carrier key and learns t = (x >= y). The keyholder only ever sees values
// that are statistically masked or direction-blinded.
//
//   M1  eval -> key   [[z + r]],        z = 2^l + x - y, r < 2^{l+1+sigma}
//   M2  key -> eval   DGK bits of a' = 2*(d mod 2^l) + 1,  [[d >> l]]
//   M3  eval -> key   shuffled, blinded DGK values c_i; a zero appears iff
//                     a' > b' (s = +1) or a' < b' (s = -1), b' = 2*(r mod 2^l)
//   M4  key -> eval   [[delta]], delta = "some c_i was zero"
//   M5  eval -> key   [[t + gamma]],  t = top - (r >> l) - [a' < b']
//   M6  key -> eval   t + gamma in the clear
//
// Comparing 2d+1 against 2r (odd vs even) means the two compared values are
// never equal, so the direction blind s cannot be defeated by a tie.

#ifndef ENCLOC_COMPARISON_HPP_
#define ENCLOC_COMPARISON_HPP_

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "encloc/bigint.hpp"
#include "encloc/ciphertext.hpp"
#include "encloc/dgk.hpp"
#include "encloc/errors.hpp"
#include "encloc/he.hpp"

namespace encloc::cmp {

inline constexpr unsigned kPaillierSigma = 80;
inline constexpr unsigned kDgkSigma = 16;
inline constexpr unsigned kMinSigma = 16;
inline constexpr unsigned kMaxBitLength = 32;
inline constexpr int kMaxRssDelta = 120;

struct Params {
  unsigned l = 20;
  unsigned sigma = kPaillierSigma;

  static Params for_carrier(Scheme carrier, unsigned l) {
    return Params{l, carrier == Scheme::kPaillier ? kPaillierSigma : kDgkSigma};
  }

  friend bool operator==(const Params&, const Params&) = default;
};

// Input bound for squared distances over `n_ap` columns:
// ceil(log2(n_ap * 120^2)) + 1, capped at 32.
inline unsigned default_bit_length(std::size_t n_ap) {
  const double bound = static_cast<double>(n_ap) * kMaxRssDelta * kMaxRssDelta;
  unsigned l = static_cast<unsigned>(std::ceil(std::log2(std::max(bound, 2.0)))) + 1;
  return std::min(l, kMaxBitLength);
}

// Smallest DGK u (as log2) that can carry comparison inputs for params.
inline unsigned dgk_carrier_log2_u(const Params& p) { return p.l + p.sigma + 3; }

// Bit-stage values range over [-2, 3*(l+1)+2]; u must not wrap them to 0.
inline BigInt min_bit_u(const Params& p) { return BigInt(3 * (p.l + 1) + 6); }

inline void validate(const Params& p, const he::AnyPublicKey& carrier,
                     const dgk::PublicKey& bit_key) {
  if (p.l == 0 || p.l > kMaxBitLength) {
    throw SetupError("comparison bit length l must be in [1, 32]");
  }
  if (p.sigma < kMinSigma) throw SetupError("statistical masking sigma must be >= 16");
  const BigInt need = pow2(p.l + 1) + pow2(p.l + 1 + p.sigma);
  if (he::plaintext_modulus(carrier) <= need) {
    throw SetupError("carrier plaintext space too small for l=" + std::to_string(p.l) +
                     ", sigma=" + std::to_string(p.sigma));
  }
  if (bit_key.u() <= min_bit_u(p)) {
    throw SetupError("bit-stage DGK u must exceed 3*(l+1)+6");
  }
  if (bit_key.kind() != dgk::PlaintextKind::kPrime) {
    throw SetupError("bit-stage DGK key needs a prime u");
  }
}

struct Msg1 {
  Ciphertext c;
  friend bool operator==(const Msg1&, const Msg1&) = default;
};
struct Msg2 {
  std::vector<Ciphertext> bits;  // a'_l ... a'_0
  Ciphertext top;
  friend bool operator==(const Msg2&, const Msg2&) = default;
};
struct Msg3 {
  std::vector<Ciphertext> e;
  friend bool operator==(const Msg3&, const Msg3&) = default;
};
struct Msg4 {
  Ciphertext delta;
  friend bool operator==(const Msg4&, const Msg4&) = default;
};
struct Msg5 {
  Ciphertext c;
  friend bool operator==(const Msg5&, const Msg5&) = default;
};
struct Msg6 {
  BigInt w;
  friend bool operator==(const Msg6&, const Msg6&) = default;
};

struct EvaluatorKeys {
  he::AnyPublicKey carrier;
  dgk::PublicKey bits;
};

struct KeyholderKeys {
  he::AnyPrivateKey carrier;
  dgk::PrivateKey bits;

  EvaluatorKeys public_keys() const {
    return EvaluatorKeys{he::public_key_of(carrier), bits.public_key()};
  }
};

inline constexpr unsigned kBitKeyUBits = 16;

// Keys a client needs before it knows the table: the carrier is sized for
// the largest supported l, and the bit-stage key gets a 16-bit prime u.
inline KeyholderKeys generate_keyholder_keys(Scheme carrier, unsigned key_bits, Rng& rng) {
  auto bits = dgk::keygen({.key_bits = key_bits, .u_bits = kBitKeyUBits}, rng);
  if (carrier == Scheme::kPaillier) {
    return KeyholderKeys{paillier::keygen(key_bits, rng).sk, std::move(bits.sk)};
  }
  const unsigned log2_u = dgk_carrier_log2_u(Params::for_carrier(Scheme::kDgk, kMaxBitLength));
  auto c = dgk::keygen(
      {.key_bits = key_bits, .u_bits = log2_u, .kind = dgk::PlaintextKind::kPowerOfTwo}, rng);
  return KeyholderKeys{std::move(c.sk), std::move(bits.sk)};
}

// Fixed masks for hand-computed traces.
struct EvaluatorHooks {
  std::optional<BigInt> r;
  std::optional<int> s;
  std::optional<BigInt> gamma;
  bool identity_blinding = false;  // rho_i = 1, no shuffle
  bool unchecked_params = false;
};

class EvaluatorSession {
 public:
  enum class Stage { kAwaitM2, kAwaitM4, kAwaitM6, kDone };

  static std::pair<EvaluatorSession, Msg1> start(const EvaluatorKeys& keys,
                                                 const Ciphertext& cx,
                                                 const Ciphertext& cy,
                                                 const Params& params, Rng& rng,
                                                 EvaluatorHooks hooks = {}) {
    if (!hooks.unchecked_params) validate(params, keys.carrier, keys.bits);
    he::check(keys.carrier, cx);
    he::check(keys.carrier, cy);

    EvaluatorSession es(keys, params);
    es.hooks_ = hooks;
    es.r_ = hooks.r ? *hooks.r : rng.bits(params.l + 1 + params.sigma);
    es.s_ = hooks.s ? *hooks.s : (rng.coin() ? 1 : -1);
    if (es.s_ != 1 && es.s_ != -1) throw SetupError("direction blind must be +1 or -1");

    const auto& pk = keys.carrier;
    Ciphertext z = he::add(pk, he::sub(pk, cx, cy), he::encrypt(pk, pow2(params.l), rng));
    Msg1 m1{he::add(pk, z, he::encrypt(pk, es.r_, rng))};
    es.stage_ = Stage::kAwaitM2;
    return {std::move(es), std::move(m1)};
  }

  Stage stage() const { return stage_; }

  Msg3 bit_stage(const Msg2& m2, Rng& rng) {
    expect(Stage::kAwaitM2, "cmp2");
    const unsigned width = params_.l + 1;
    if (m2.bits.size() != width) {
      throw ProtocolError("cmp2 carries " + std::to_string(m2.bits.size()) +
                          " bit ciphertexts, expected " + std::to_string(width));
    }
    he::check(keys_.carrier, m2.top);
    const dgk::PublicKey& bk = keys_.bits;
    for (const auto& b : m2.bits) bk.check(b);
    top_ = m2.top;

    const BigInt& u = bk.u();
    BigInt b_prime = 2 * mod(r_, pow2(params_.l));
    // Index i is bit position; message order is most significant first.
    auto a_bit = [&](unsigned i) -> const Ciphertext& { return m2.bits[params_.l - i]; };

    // Noise-free encodings of 0 and 1; every c_i gets a fresh encryption below.
    const Ciphertext zero{Scheme::kDgk, BigInt(1), bk.fingerprint()};
    const Ciphertext one{Scheme::kDgk, bk.g(), bk.fingerprint()};

    std::vector<Ciphertext> c(width);
    Ciphertext xor_sum = zero;  // [[sum_{j>i} w_j]]
    for (int i = static_cast<int>(params_.l); i >= 0; --i) {
      const auto ui = static_cast<unsigned>(i);
      const bool b_i = mpz_tstbit(b_prime.get_mpz_t(), ui) != 0;
      const Ciphertext& a_i = a_bit(ui);
      BigInt lead = mod(BigInt(b_i ? 1 : 0) + s_, u);
      Ciphertext ci = he::add(bk, bk.encrypt(lead, rng), he::scalar_mul(bk, a_i, u - 1));
      ci = he::add(bk, ci, he::scalar_mul(bk, xor_sum, 3));
      c[ui] = std::move(ci);
      Ciphertext w_i = b_i ? he::sub(bk, one, a_i) : a_i;
      xor_sum = he::add(bk, xor_sum, w_i);
    }

    if (!hooks_.identity_blinding) {
      for (auto& ci : c) ci = he::scalar_mul(bk, ci, rng.range(1, u));
      for (std::size_t i = c.size() - 1; i > 0; --i) {
        std::size_t j = rng.below(BigInt(static_cast<unsigned long>(i + 1))).get_ui();
        std::swap(c[i], c[j]);
      }
    }
    stage_ = Stage::kAwaitM4;
    return Msg3{std::move(c)};
  }

  Msg5 mask_result(const Msg4& m4, Rng& rng) {
    expect(Stage::kAwaitM4, "cmp4");
    const auto& pk = keys_.carrier;
    he::check(pk, m4.delta);
    // beta = [a' < b'] = delta if s = -1, else 1 - delta.
    Ciphertext beta = s_ == -1 ? m4.delta : he::sub(pk, he::encrypt(pk, 1, rng), m4.delta);
    Ciphertext t = he::sub(pk, *top_, he::encrypt(pk, r_ >> params_.l, rng));
    t = he::add(pk, t, he::scalar_mul(pk, beta, -1));
    const BigInt& M = he::plaintext_modulus(pk);
    gamma_ = hooks_.gamma ? *hooks_.gamma : rng.below(M);
    stage_ = Stage::kAwaitM6;
    return Msg5{he::add(pk, t, he::encrypt(pk, gamma_, rng))};
  }

  bool finish(const Msg6& m6) {
    expect(Stage::kAwaitM6, "cmp6");
    const BigInt& M = he::plaintext_modulus(keys_.carrier);
    if (m6.w < 0 || m6.w >= M) throw ProtocolError("cmp6 value out of plaintext range");
    BigInt t = mod(m6.w - gamma_, M);
    stage_ = Stage::kDone;
    if (t != 0 && t != 1) {
      throw ProtocolError("comparison result is not a bit; inputs exceed 2^l?");
    }
    return t == 1;
  }

 private:
  EvaluatorSession(const EvaluatorKeys& keys, const Params& params)
      : keys_(keys), params_(params) {}

  void expect(Stage want, const char* msg) const {
    if (stage_ != want) {
      throw ProtocolError(std::string("comparison evaluator not expecting ") + msg);
    }
  }

  EvaluatorKeys keys_;
  Params params_;
  EvaluatorHooks hooks_;
  Stage stage_ = Stage::kAwaitM2;
  BigInt r_;
  int s_ = 1;
  BigInt gamma_;
  std::optional<Ciphertext> top_;
};

class KeyholderSession {
 public:
  enum class Stage { kAwaitM1, kAwaitM3, kAwaitM5, kDone };

  KeyholderSession(const KeyholderKeys& keys, const Params& params)
      : keys_(&keys), params_(params) {}

  Stage stage() const { return stage_; }

  Msg2 mask_decompose(const Msg1& m1, Rng& rng) {
    expect(Stage::kAwaitM1, "cmp1");
    const BigInt d = he::decrypt(keys_->carrier, m1.c);
    const BigInt d_low = mod(d, pow2(params_.l));
    const BigInt a_prime = 2 * d_low + 1;
    const dgk::PublicKey& bk = keys_->bits.public_key();
    Msg2 m2;
    m2.bits.reserve(params_.l + 1);
    for (int i = static_cast<int>(params_.l); i >= 0; --i) {
      const bool bit = mpz_tstbit(a_prime.get_mpz_t(), static_cast<unsigned>(i)) != 0;
      m2.bits.push_back(bk.encrypt(bit ? 1 : 0, rng));
    }
    m2.top = he::encrypt(he::public_key_of(keys_->carrier), d >> params_.l, rng);
    stage_ = Stage::kAwaitM3;
    return m2;
  }

  Msg4 zero_stage(const Msg3& m3, Rng& rng) {
    expect(Stage::kAwaitM3, "cmp3");
    if (m3.e.size() != params_.l + 1) {
      throw ProtocolError("cmp3 carries " + std::to_string(m3.e.size()) +
                          " ciphertexts, expected " + std::to_string(params_.l + 1));
    }
    bool any_zero = false;
    for (const auto& e : m3.e) any_zero = keys_->bits.is_zero(e) || any_zero;
    stage_ = Stage::kAwaitM5;
    return Msg4{he::encrypt(he::public_key_of(keys_->carrier), any_zero ? 1 : 0, rng)};
  }

  Msg6 unmask(const Msg5& m5) {
    expect(Stage::kAwaitM5, "cmp5");
    stage_ = Stage::kDone;
    return Msg6{he::decrypt(keys_->carrier, m5.c)};
  }

 private:
  void expect(Stage want, const char* msg) const {
    if (stage_ != want) {
      throw ProtocolError(std::string("comparison keyholder not expecting ") + msg);
    }
  }

  const KeyholderKeys* keys_;
  Params params_;
  Stage stage_ = Stage::kAwaitM1;
};

// A transport relays the three evaluator messages to the keyholder and
// returns its replies.
template <class T>
concept Transport = requires(T& t, const Msg1& m1, const Msg3& m3, const Msg5& m5) {
  { t.exchange(m1) } -> std::same_as<Msg2>;
  { t.exchange(m3) } -> std::same_as<Msg4>;
  { t.exchange(m5) } -> std::same_as<Msg6>;
};

// In-process keyholder; one KeyholderSession per comparison.
class LocalKeyholder {
 public:
  LocalKeyholder(const KeyholderKeys& keys, const Params& params, Rng& rng)
      : keys_(keys), params_(params), rng_(rng) {}

  Msg2 exchange(const Msg1& m1) {
    session_.emplace(keys_, params_);
    last_m4_.reset();
    return session_->mask_decompose(m1, rng_);
  }
  Msg4 exchange(const Msg3& m3) {
    Msg4 m4 = session().zero_stage(m3, rng_);
    last_m4_ = m4;
    return m4;
  }
  Msg6 exchange(const Msg5& m5) {
    Msg6 m6 = session().unmask(m5);
    session_.reset();
    return m6;
  }

  // The keyholder's view of the last zero-stage reply (for transcript tests).
  const std::optional<Msg4>& last_zero_stage() const { return last_m4_; }

 private:
  KeyholderSession& session() {
    if (!session_) throw ProtocolError("keyholder has no open comparison session");
    return *session_;
  }

  const KeyholderKeys& keys_;
  Params params_;
  Rng& rng_;
  std::optional<KeyholderSession> session_;
  std::optional<Msg4> last_m4_;
};

// Drives all six messages; returns x >= y.
template <Transport T>
bool joint_compare(const EvaluatorKeys& keys, T& transport, const Ciphertext& cx,
                   const Ciphertext& cy, const Params& params, Rng& rng) {
  ops::count_comparison();
  auto [es, m1] = EvaluatorSession::start(keys, cx, cy, params, rng);
  Msg3 m3 = es.bit_stage(transport.exchange(m1), rng);
  Msg5 m5 = es.mask_result(transport.exchange(m3), rng);
  return es.finish(transport.exchange(m5));
}

inline std::size_t expected_comparisons(std::size_t n, std::size_t k) {
  std::size_t total = 0;
  for (std::size_t i = 0; i < k; ++i) total += n - i - 1;
  return total;
}

// k bubble passes. `greater_equal(a, b)` is the comparison oracle; a pair is
// swapped when it reports false, so the smaller element moves right. Ties
// are never swapped. Afterwards rows[n-p] is the p-th smallest, p = 1..k.
// Returns the number of comparisons made.
template <class Row, class GreaterEqual>
std::size_t k_min_select(std::vector<Row>& rows, std::size_t k, GreaterEqual&& greater_equal) {
  const std::size_t n = rows.size();
  if (n == 0) throw RangeError("k_min_select: empty input");
  if (k == 0 || k > n) {
    throw RangeError("k_min_select: k must be in [1, " + std::to_string(n) + "]");
  }
  std::size_t comparisons = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j + i + 1 < n; ++j) {
      ++comparisons;
      if (!greater_equal(rows[j], rows[j + 1])) std::swap(rows[j], rows[j + 1]);
    }
  }
  return comparisons;
}

}  // namespace encloc::cmp

#endif  // ENCLOC_COMPARISON_HPP_

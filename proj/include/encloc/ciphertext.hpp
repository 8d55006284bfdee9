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

#ifndef ENCLOC_CIPHERTEXT_HPP_
#define ENCLOC_CIPHERTEXT_HPP_

#include <cstdint>
#include <string>
#include <string_view>

#include "encloc/bigint.hpp"
#include "encloc/errors.hpp"

namespace encloc {

enum class Scheme { kPaillier, kDgk };

inline std::string_view scheme_name(Scheme s) {
  return s == Scheme::kPaillier ? "paillier" : "dgk";
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "paillier") return Scheme::kPaillier;
  if (s == "dgk") return Scheme::kDgk;
  throw RangeError("unknown scheme '" + std::string(s) + "'");
}

// Short public-key hash binding a ciphertext to the key that produced it.
struct KeyFingerprint {
  std::uint64_t value = 0;

  friend bool operator==(KeyFingerprint, KeyFingerprint) = default;

  std::string hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
      out[static_cast<std::size_t>(i)] = kDigits[(value >> ((15 - i) * 4)) & 0xf];
    }
    return out;
  }

  static KeyFingerprint from_hex(std::string_view s) {
    if (s.size() != 16) throw RangeError("key fingerprint must be 16 hex digits");
    KeyFingerprint kf;
    for (char c : s) {
      int d;
      if (c >= '0' && c <= '9') {
        d = c - '0';
      } else if (c >= 'a' && c <= 'f') {
        d = c - 'a' + 10;
      } else {
        throw RangeError("key fingerprint must be lowercase hex");
      }
      kf.value = (kf.value << 4) | static_cast<std::uint64_t>(d);
    }
    return kf;
  }

  // FNV-1a over the scheme tag and the public parameters.
  static KeyFingerprint of(std::string_view material) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : material) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return KeyFingerprint{h};
  }
};

// An encrypted value [[v]]. Plain data: the scheme and key binding travel
// with the residue so that mismatched combinations are caught.
struct Ciphertext {
  Scheme scheme = Scheme::kPaillier;
  BigInt value;
  KeyFingerprint kf;

  friend bool operator==(const Ciphertext&, const Ciphertext&) = default;
};

inline void require_compatible(const Ciphertext& a, const Ciphertext& b) {
  if (a.scheme != b.scheme) {
    throw IncompatibleError("cannot combine " + std::string(scheme_name(a.scheme)) +
                            " and " + std::string(scheme_name(b.scheme)) +
                            " ciphertexts");
  }
  if (!(a.kf == b.kf)) {
    throw IncompatibleError("ciphertexts are bound to different keys (" +
                            a.kf.hex() + " vs " + b.kf.hex() + ")");
  }
}

// Per-thread operation accounting used by the bench harness. A role installs
// its counters with OpScope; primitives increment whatever is installed.
struct OpCounters {
  std::uint64_t encryptions = 0;
  std::uint64_t decryptions = 0;
  std::uint64_t zero_checks = 0;
  std::uint64_t comparisons = 0;

  OpCounters& operator+=(const OpCounters& o) {
    encryptions += o.encryptions;
    decryptions += o.decryptions;
    zero_checks += o.zero_checks;
    comparisons += o.comparisons;
    return *this;
  }
  friend bool operator==(const OpCounters&, const OpCounters&) = default;
};

namespace ops {

inline OpCounters*& current() {
  thread_local OpCounters* sink = nullptr;
  return sink;
}

inline void count_encryption() {
  if (auto* c = current()) ++c->encryptions;
}
inline void count_decryption() {
  if (auto* c = current()) ++c->decryptions;
}
inline void count_zero_check() {
  if (auto* c = current()) ++c->zero_checks;
}
inline void count_comparison() {
  if (auto* c = current()) ++c->comparisons;
}

}  // namespace ops

class OpScope {
 public:
  explicit OpScope(OpCounters& counters) : previous_(ops::current()) {
    ops::current() = &counters;
  }
  ~OpScope() { ops::current() = previous_; }
  OpScope(const OpScope&) = delete;
  OpScope& operator=(const OpScope&) = delete;

 private:
  OpCounters* previous_;
};

}  // namespace encloc

#endif  // ENCLOC_CIPHERTEXT_HPP_

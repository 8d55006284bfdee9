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

// Line-framed JSON messages: {"v":1,"type":...,"sid":...,"body":{...}}\n
//
// Big integers are lowercase hex without sign or leading zeros. A ciphertext
// is {"scheme","c","kf"}. Decoding validates the full body, so a message
// that decodes is structurally well-formed; key and range checks happen
// where the message is used.

#ifndef ENCLOC_WIRE_HPP_
#define ENCLOC_WIRE_HPP_

#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "encloc/bigint.hpp"
#include "encloc/ciphertext.hpp"
#include "encloc/comparison.hpp"
#include "encloc/errors.hpp"
#include "encloc/fingerprint.hpp"
#include "encloc/he.hpp"
#include "encloc/localization.hpp"

namespace encloc::wire {

using Json = nlohmann::json;

inline constexpr int kVersion = 1;
inline constexpr std::size_t kMaxFrameBytes = std::size_t{16} << 20;

enum class Mode { kClient, kServer };

inline std::string_view mode_name(Mode m) { return m == Mode::kClient ? "client" : "server"; }

inline Mode parse_mode(std::string_view s) {
  if (s == "client") return Mode::kClient;
  if (s == "server") return Mode::kServer;
  throw RangeError("unknown mode '" + std::string(s) + "'");
}

struct Hello {
  Scheme scheme = Scheme::kPaillier;
  Mode mode = Mode::kServer;
  std::size_t k = loc::kDefaultK;
  he::AnyPublicKey carrier;
  std::optional<dgk::PublicKey> bit_key;  // server mode only

  friend bool operator==(const Hello&, const Hello&) = default;
};

struct Columns {
  std::vector<std::string> ap_columns;
  cmp::Params params;
  friend bool operator==(const Columns&, const Columns&) = default;
};

struct ServerResult {
  std::vector<loc::EncryptedCoord> coords;
  friend bool operator==(const ServerResult&, const ServerResult&) = default;
};

struct ClientResult {
  std::vector<loc::ClientModeRow> rows;
  friend bool operator==(const ClientResult&, const ClientResult&) = default;
};

struct ErrorReply {
  std::string code;
  std::string message;
  friend bool operator==(const ErrorReply&, const ErrorReply&) = default;
};

using Body = std::variant<Hello, Columns, loc::EncryptedScan, cmp::Msg1, cmp::Msg2, cmp::Msg3,
                          cmp::Msg4, cmp::Msg5, cmp::Msg6, ServerResult, ClientResult,
                          ErrorReply>;

struct Message {
  std::string sid;
  Body body;
  friend bool operator==(const Message&, const Message&) = default;
};

inline std::string_view type_name(const Body& b) {
  static constexpr std::string_view kNames[] = {"hello", "columns", "scan", "cmp1",
                                                "cmp2",  "cmp3",    "cmp4", "cmp5",
                                                "cmp6",  "result",  "result", "error"};
  return kNames[b.index()];
}

// ---- field codecs -------------------------------------------------------

namespace detail {

[[noreturn]] inline void fail(const std::string& what) { throw FrameError(what, 0); }

inline const Json& field(const Json& obj, const char* name) {
  if (!obj.is_object()) fail(std::string("expected an object holding '") + name + "'");
  auto it = obj.find(name);
  if (it == obj.end()) fail(std::string("missing field '") + name + "'");
  return *it;
}

inline const std::string& str(const Json& obj, const char* name) {
  const Json& v = field(obj, name);
  if (!v.is_string()) fail(std::string("field '") + name + "' must be a string");
  return v.get_ref<const std::string&>();
}

inline std::uint64_t uint(const Json& obj, const char* name) {
  const Json& v = field(obj, name);
  if (!v.is_number_unsigned()) fail(std::string("field '") + name + "' must be unsigned");
  return v.get<std::uint64_t>();
}

inline std::int64_t sint(const Json& obj, const char* name) {
  const Json& v = field(obj, name);
  if (!v.is_number_integer()) fail(std::string("field '") + name + "' must be an integer");
  return v.get<std::int64_t>();
}

inline const Json& array(const Json& obj, const char* name) {
  const Json& v = field(obj, name);
  if (!v.is_array()) fail(std::string("field '") + name + "' must be an array");
  return v;
}

inline BigInt hex(const Json& obj, const char* name) {
  const std::string& s = str(obj, name);
  if (!is_canonical_hex(s)) {
    fail(std::string("field '") + name + "' is not canonical lowercase hex");
  }
  return from_hex(s);
}

inline Scheme scheme(const Json& obj, const char* name) {
  try {
    return parse_scheme(str(obj, name));
  } catch (const RangeError& e) {
    fail(e.what());
  }
}

}  // namespace detail

inline Json ciphertext_to_json(const Ciphertext& c) {
  return Json{{"scheme", scheme_name(c.scheme)}, {"c", to_hex(c.value)}, {"kf", c.kf.hex()}};
}

inline Ciphertext ciphertext_from_json(const Json& j) {
  Ciphertext c;
  c.scheme = detail::scheme(j, "scheme");
  c.value = detail::hex(j, "c");
  try {
    c.kf = KeyFingerprint::from_hex(detail::str(j, "kf"));
  } catch (const RangeError& e) {
    detail::fail(e.what());
  }
  return c;
}

inline Json ciphertexts_to_json(const std::vector<Ciphertext>& cs) {
  Json a = Json::array();
  for (const auto& c : cs) a.push_back(ciphertext_to_json(c));
  return a;
}

inline std::vector<Ciphertext> ciphertexts_from_json(const Json& obj, const char* name) {
  std::vector<Ciphertext> out;
  for (const auto& e : detail::array(obj, name)) out.push_back(ciphertext_from_json(e));
  return out;
}

inline Json public_key_to_json(const he::AnyPublicKey& pk) {
  if (const auto* p = std::get_if<paillier::PublicKey>(&pk)) {
    return Json{{"scheme", "paillier"}, {"n", to_hex(p->n())}};
  }
  const auto& d = std::get<dgk::PublicKey>(pk);
  return Json{{"scheme", "dgk"},      {"n", to_hex(d.n())}, {"g", to_hex(d.g())},
              {"h", to_hex(d.h())},   {"u", to_hex(d.u())}, {"t", d.t_bits()}};
}

inline he::AnyPublicKey public_key_from_json(const Json& j) {
  const Scheme s = detail::scheme(j, "scheme");
  try {
    if (s == Scheme::kPaillier) return paillier::PublicKey(detail::hex(j, "n"));
    const std::uint64_t t = detail::uint(j, "t");
    if (t == 0 || t > 4096) detail::fail("dgk t out of range");
    return dgk::PublicKey(detail::hex(j, "n"), detail::hex(j, "g"), detail::hex(j, "h"),
                          detail::hex(j, "u"), static_cast<unsigned>(t));
  } catch (const RangeError& e) {
    detail::fail(std::string("invalid public key: ") + e.what());
  }
}

inline dgk::PublicKey dgk_public_key_from_json(const Json& j) {
  auto pk = public_key_from_json(j);
  if (!std::holds_alternative<dgk::PublicKey>(pk)) detail::fail("expected a dgk public key");
  return std::get<dgk::PublicKey>(std::move(pk));
}

// ---- bodies -------------------------------------------------------------

inline Json body_to_json(const Body& body) {
  return std::visit(
      [](const auto& b) -> Json {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, Hello>) {
          Json keys{{"carrier", public_key_to_json(b.carrier)}};
          if (b.bit_key) keys["bit"] = public_key_to_json(*b.bit_key);
          return Json{{"scheme", scheme_name(b.scheme)},
                      {"mode", mode_name(b.mode)},
                      {"k", b.k},
                      {"keys", std::move(keys)}};
        } else if constexpr (std::is_same_v<T, Columns>) {
          return Json{{"ap_columns", b.ap_columns}, {"l", b.params.l}, {"sigma", b.params.sigma}};
        } else if constexpr (std::is_same_v<T, loc::EncryptedScan>) {
          return Json{{"scheme", scheme_name(b.scheme)},
                      {"s2", ciphertexts_to_json(b.s2)},
                      {"s3", ciphertext_to_json(b.s3)}};
        } else if constexpr (std::is_same_v<T, cmp::Msg1> || std::is_same_v<T, cmp::Msg5>) {
          return Json{{"c", ciphertext_to_json(b.c)}};
        } else if constexpr (std::is_same_v<T, cmp::Msg2>) {
          return Json{{"bits", ciphertexts_to_json(b.bits)}, {"top", ciphertext_to_json(b.top)}};
        } else if constexpr (std::is_same_v<T, cmp::Msg3>) {
          return Json{{"e", ciphertexts_to_json(b.e)}};
        } else if constexpr (std::is_same_v<T, cmp::Msg4>) {
          return Json{{"delta", ciphertext_to_json(b.delta)}};
        } else if constexpr (std::is_same_v<T, cmp::Msg6>) {
          return Json{{"w", to_hex(b.w)}};
        } else if constexpr (std::is_same_v<T, ServerResult>) {
          Json coords = Json::array();
          for (const auto& c : b.coords) {
            coords.push_back(Json{{"x", ciphertext_to_json(c.x)}, {"y", ciphertext_to_json(c.y)}});
          }
          return Json{{"mode", "server"}, {"coords", std::move(coords)}};
        } else if constexpr (std::is_same_v<T, ClientResult>) {
          Json rows = Json::array();
          for (const auto& r : b.rows) {
            rows.push_back(
                Json{{"x", r.coord.x}, {"y", r.coord.y}, {"d", ciphertext_to_json(r.dist)}});
          }
          return Json{{"mode", "client"}, {"rows", std::move(rows)}};
        } else {
          static_assert(std::is_same_v<T, ErrorReply>);
          return Json{{"code", b.code}, {"message", b.message}};
        }
      },
      body);
}

inline Body body_from_json(std::string_view type, const Json& j) {
  using namespace detail;
  if (!j.is_object()) fail("body must be an object");
  if (type == "hello") {
    Hello h;
    h.scheme = scheme(j, "scheme");
    try {
      h.mode = parse_mode(str(j, "mode"));
    } catch (const RangeError& e) {
      fail(e.what());
    }
    h.k = static_cast<std::size_t>(uint(j, "k"));
    const Json& keys = field(j, "keys");
    h.carrier = public_key_from_json(field(keys, "carrier"));
    if (keys.contains("bit")) h.bit_key = dgk_public_key_from_json(keys["bit"]);
    return h;
  }
  if (type == "columns") {
    Columns c;
    for (const auto& m : array(j, "ap_columns")) {
      if (!m.is_string()) fail("ap_columns entries must be strings");
      c.ap_columns.push_back(m.get<std::string>());
    }
    const auto l = uint(j, "l"), sigma = uint(j, "sigma");
    if (l > 1024 || sigma > 1024) fail("comparison parameters out of range");
    c.params = cmp::Params{static_cast<unsigned>(l), static_cast<unsigned>(sigma)};
    return c;
  }
  if (type == "scan") {
    loc::EncryptedScan s;
    s.scheme = scheme(j, "scheme");
    s.s2 = ciphertexts_from_json(j, "s2");
    s.s3 = ciphertext_from_json(field(j, "s3"));
    return s;
  }
  if (type == "cmp1") return cmp::Msg1{ciphertext_from_json(field(j, "c"))};
  if (type == "cmp2") {
    return cmp::Msg2{ciphertexts_from_json(j, "bits"), ciphertext_from_json(field(j, "top"))};
  }
  if (type == "cmp3") return cmp::Msg3{ciphertexts_from_json(j, "e")};
  if (type == "cmp4") return cmp::Msg4{ciphertext_from_json(field(j, "delta"))};
  if (type == "cmp5") return cmp::Msg5{ciphertext_from_json(field(j, "c"))};
  if (type == "cmp6") return cmp::Msg6{hex(j, "w")};
  if (type == "result") {
    const std::string& mode = str(j, "mode");
    if (mode == "server") {
      ServerResult r;
      for (const auto& c : array(j, "coords")) {
        r.coords.push_back(
            {ciphertext_from_json(field(c, "x")), ciphertext_from_json(field(c, "y"))});
      }
      return r;
    }
    if (mode == "client") {
      ClientResult r;
      for (const auto& row : array(j, "rows")) {
        r.rows.push_back({fp::Coord{sint(row, "x"), sint(row, "y")},
                          ciphertext_from_json(field(row, "d"))});
      }
      return r;
    }
    fail("result mode must be 'client' or 'server'");
  }
  if (type == "error") return ErrorReply{str(j, "code"), str(j, "message")};
  fail("unknown message type '" + std::string(type) + "'");
}

// ---- framing ------------------------------------------------------------

inline std::string frame_encode(const Message& m) {
  Json j{{"v", kVersion}, {"type", type_name(m.body)}, {"sid", m.sid}, {"body", body_to_json(m.body)}};
  std::string line = j.dump();
  if (line.size() + 1 > kMaxFrameBytes) {
    throw FrameError("encoded frame exceeds " + std::to_string(kMaxFrameBytes) + " bytes",
                     kMaxFrameBytes);
  }
  line.push_back('\n');
  return line;
}

// Accepts a line with or without its trailing newline.
inline Message frame_decode(std::string_view line) {
  if (line.size() > kMaxFrameBytes) {
    throw FrameError("frame exceeds " + std::to_string(kMaxFrameBytes) + " bytes",
                     kMaxFrameBytes);
  }
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (line.find('\n') != std::string_view::npos) {
    throw FrameError("embedded newline in frame", line.find('\n'));
  }
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw FrameError(std::string("malformed frame: ") + e.what(), e.byte);
  }
  try {
    if (!j.is_object()) detail::fail("frame must be a JSON object");
    const auto v = detail::uint(j, "v");
    if (v != static_cast<std::uint64_t>(kVersion)) {
      detail::fail("unsupported protocol version " + std::to_string(v));
    }
    Message m;
    m.sid = detail::str(j, "sid");
    m.body = body_from_json(detail::str(j, "type"), detail::field(j, "body"));
    return m;
  } catch (const FrameError&) {
    throw;
  } catch (const std::exception& e) {
    throw FrameError(std::string("malformed frame: ") + e.what(), 0);
  }
}

// ---- key files ----------------------------------------------------------

inline Json keyholder_keys_to_json(const cmp::KeyholderKeys& keys) {
  Json carrier;
  if (const auto* p = std::get_if<paillier::PrivateKey>(&keys.carrier)) {
    carrier = Json{{"scheme", "paillier"}, {"p", to_hex(p->p())}, {"q", to_hex(p->q())}};
  } else {
    const auto& d = std::get<dgk::PrivateKey>(keys.carrier);
    carrier = public_key_to_json(d.public_key());
    carrier.update(Json{{"p", to_hex(d.p())}, {"q", to_hex(d.q())},
                        {"vp", to_hex(d.vp())}, {"vq", to_hex(d.vq())}});
  }
  Json bit = public_key_to_json(keys.bits.public_key());
  bit.update(Json{{"p", to_hex(keys.bits.p())}, {"q", to_hex(keys.bits.q())},
                  {"vp", to_hex(keys.bits.vp())}, {"vq", to_hex(keys.bits.vq())}});
  return Json{{"v", kVersion}, {"carrier", std::move(carrier)}, {"bit", std::move(bit)}};
}

namespace detail {
inline dgk::PrivateKey dgk_private_from_json(const Json& j) {
  try {
    return dgk::PrivateKey::from_components(dgk_public_key_from_json(j), hex(j, "p"), hex(j, "q"),
                                            hex(j, "vp"), hex(j, "vq"));
  } catch (const KeygenError& e) {
    fail(std::string("inconsistent dgk private key: ") + e.what());
  }
}
}  // namespace detail

inline cmp::KeyholderKeys keyholder_keys_from_json(const Json& j) {
  using namespace detail;
  const Json& c = field(j, "carrier");
  cmp::KeyholderKeys keys;
  if (scheme(c, "scheme") == Scheme::kPaillier) {
    try {
      keys.carrier = paillier::PrivateKey::from_primes(hex(c, "p"), hex(c, "q"));
    } catch (const Error& e) {
      fail(std::string("inconsistent paillier private key: ") + e.what());
    }
  } else {
    keys.carrier = dgk_private_from_json(c);
  }
  keys.bits = dgk_private_from_json(field(j, "bit"));
  return keys;
}

inline void save_keys(const std::string& path, const cmp::KeyholderKeys& keys) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write key file '" + path + "'");
  out << keyholder_keys_to_json(keys).dump(2) << '\n';
}

inline cmp::KeyholderKeys load_keys(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open key file '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw FrameError(std::string("malformed key file: ") + e.what(), e.byte);
  }
  return keyholder_keys_from_json(j);
}

}  // namespace encloc::wire

#endif  // ENCLOC_WIRE_HPP_

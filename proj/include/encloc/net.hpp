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

// TCP localization service.
//
// Per connection the server expects
//   hello -> columns, then any number of scan -> [cmp1..cmp6]* -> result.
// In server mode the server is the comparison evaluator and the client
// holds the keys; in client mode the server returns every distance row and
// the client picks the minimum itself. Anything out of order draws an error
// reply and the connection is closed.

#ifndef ENCLOC_NET_HPP_
#define ENCLOC_NET_HPP_

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <boost/asio.hpp>

#include "encloc/bigint.hpp"
#include "encloc/ciphertext.hpp"
#include "encloc/comparison.hpp"
#include "encloc/errors.hpp"
#include "encloc/fingerprint.hpp"
#include "encloc/he.hpp"
#include "encloc/localization.hpp"
#include "encloc/wire.hpp"

namespace encloc::net {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;

inline constexpr std::string_view kDefaultListen = "127.0.0.1:7341";

struct Endpoint {
  std::string host;
  std::string port;
};

inline Endpoint parse_endpoint(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon + 1 == addr.size()) {
    throw RangeError("address '" + addr + "' must be host:port");
  }
  std::string host = addr.substr(0, colon);
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') {
    host = host.substr(1, host.size() - 2);
  }
  return Endpoint{host.empty() ? "0.0.0.0" : host, addr.substr(colon + 1)};
}

// ENCLOC_LISTEN overrides the configured listen address.
inline std::string listen_address(const std::string& configured) {
  if (const char* env = std::getenv("ENCLOC_LISTEN"); env != nullptr && *env) return env;
  return configured;
}

struct ByteCounts {
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
  ByteCounts& operator+=(const ByteCounts& o) {
    sent += o.sent;
    received += o.received;
    return *this;
  }
};

// One framed message per line over a connected socket.
class LineChannel {
 public:
  explicit LineChannel(tcp::socket socket)
      : socket_(std::move(socket)),
        buffer_(std::make_unique<asio::streambuf>(wire::kMaxFrameBytes + 1)) {}

  static LineChannel connect(const std::string& addr) {
    asio::io_context& io = shared_io();
    const Endpoint ep = parse_endpoint(addr);
    tcp::resolver resolver(io);
    tcp::socket socket(io);
    boost::system::error_code ec;
    asio::connect(socket, resolver.resolve(ep.host, ep.port, ec), ec);
    if (ec) throw Error("cannot connect to " + addr + ": " + ec.message());
    socket.set_option(tcp::no_delay(true));
    return LineChannel(std::move(socket));
  }

  void send(const wire::Message& m) {
    const std::string line = wire::frame_encode(m);
    boost::system::error_code ec;
    asio::write(socket_, asio::buffer(line), ec);
    if (ec) throw Error("send failed: " + ec.message());
    bytes_.sent += line.size();
  }

  // Returns nullopt on orderly close before any byte of a new frame.
  std::optional<wire::Message> receive_or_eof() {
    boost::system::error_code ec;
    const std::size_t n = asio::read_until(socket_, *buffer_, '\n', ec);
    if (ec == asio::error::eof && buffer_->size() == 0) return std::nullopt;
    if (ec == asio::error::not_found) {
      throw FrameError("frame exceeds " + std::to_string(wire::kMaxFrameBytes) + " bytes",
                       wire::kMaxFrameBytes);
    }
    if (ec) throw Error("receive failed: " + ec.message());
    std::string line(asio::buffers_begin(buffer_->data()),
                     asio::buffers_begin(buffer_->data()) + static_cast<std::ptrdiff_t>(n));
    buffer_->consume(n);
    bytes_.received += n;
    last_frame_bytes_ = n;
    return wire::frame_decode(line);
  }

  wire::Message receive() {
    auto m = receive_or_eof();
    if (!m) throw Error("connection closed by peer");
    return std::move(*m);
  }

  const ByteCounts& bytes() const { return bytes_; }
  std::size_t last_frame_bytes() const { return last_frame_bytes_; }

  void close() {
    shutdown();
    boost::system::error_code ec;
    socket_.close(ec);
  }

  // Unblocks a reader on another thread without releasing the descriptor.
  void shutdown() {
    boost::system::error_code ec;
    socket_.shutdown(tcp::socket::shutdown_both, ec);
  }

 private:
  static asio::io_context& shared_io() {
    static asio::io_context io;
    return io;
  }

  tcp::socket socket_;
  std::unique_ptr<asio::streambuf> buffer_;
  ByteCounts bytes_;
  std::size_t last_frame_bytes_ = 0;
};

// Raised on the receiving side when the peer sent an error message.
class RemoteError : public Error {
 public:
  RemoteError(std::string code, const std::string& message)
      : Error("peer reported " + code + ": " + message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

inline std::string error_code_of(const std::exception& e) {
  if (dynamic_cast<const FrameError*>(&e)) return "bad_frame";
  if (dynamic_cast<const ProtocolError*>(&e)) return "protocol";
  if (dynamic_cast<const SetupError*>(&e)) return "setup";
  if (dynamic_cast<const IncompatibleError*>(&e)) return "incompatible";
  if (dynamic_cast<const WrongKeyError*>(&e)) return "wrong_key";
  if (dynamic_cast<const OverflowError*>(&e)) return "overflow";
  if (dynamic_cast<const RangeError*>(&e)) return "range";
  return "internal";
}

template <class T>
T expect_body(wire::Message&& m, const char* stage) {
  if (auto* err = std::get_if<wire::ErrorReply>(&m.body)) {
    throw RemoteError(err->code, err->message);
  }
  if (auto* b = std::get_if<T>(&m.body)) return std::move(*b);
  throw ProtocolError(std::string("unexpected ") + std::string(wire::type_name(m.body)) +
                      " while waiting for " + stage);
}

// Evaluator-side transport: each comparison gets its own sid suffix.
class NetworkTransport {
 public:
  NetworkTransport(LineChannel& ch, std::string sid) : ch_(ch), sid_(std::move(sid)) {}

  cmp::Msg2 exchange(const cmp::Msg1& m1) {
    current_ = sid_ + "." + std::to_string(count_++);
    ch_.send({current_, m1});
    return reply<cmp::Msg2>("cmp2");
  }
  cmp::Msg4 exchange(const cmp::Msg3& m3) {
    ch_.send({current_, m3});
    return reply<cmp::Msg4>("cmp4");
  }
  cmp::Msg6 exchange(const cmp::Msg5& m5) {
    ch_.send({current_, m5});
    return reply<cmp::Msg6>("cmp6");
  }

  std::size_t sessions() const { return count_; }

 private:
  template <class T>
  T reply(const char* stage) {
    wire::Message m = ch_.receive();
    if (m.sid != current_) {
      throw ProtocolError("comparison reply for session '" + m.sid + "', expected '" +
                          current_ + "'");
    }
    return expect_body<T>(std::move(m), stage);
  }

  LineChannel& ch_;
  std::string sid_;
  std::string current_;
  std::size_t count_ = 0;
};

struct ServerStats {
  OpCounters ops;
  ByteCounts bytes;
  std::uint64_t connections = 0;
  std::uint64_t localizations = 0;
  std::uint64_t errors = 0;
};

// Serves one connection; the lookup table is shared read-only.
class ServerConnection {
 public:
  ServerConnection(const fp::LookupTable& table, LineChannel& ch, Rng& rng)
      : table_(table), ch_(ch), rng_(rng) {}

  // Returns after the client disconnects or after an error reply.
  void run() {
    try {
      auto first = ch_.receive_or_eof();
      if (!first) return;
      sid_ = first->sid;
      handshake(std::move(*first));
      while (auto m = ch_.receive_or_eof()) localize(std::move(*m));
    } catch (const std::exception& e) {
      ++errors_;
      try {
        ch_.send({sid_, wire::ErrorReply{error_code_of(e), e.what()}});
      } catch (const std::exception&) {
      }
    }
  }

  std::uint64_t localizations() const { return localizations_; }
  std::uint64_t errors() const { return errors_; }

 private:
  void handshake(wire::Message m) {
    auto* hello = std::get_if<wire::Hello>(&m.body);
    if (!hello) {
      throw ProtocolError(std::string("expected hello, got ") +
                          std::string(wire::type_name(m.body)));
    }
    if (he::scheme_of(hello->carrier) != hello->scheme) {
      throw SetupError("hello scheme does not match the carrier key");
    }
    if (hello->k == 0 || hello->k > table_.n_f()) {
      throw SetupError("k must be in [1, " + std::to_string(table_.n_f()) + "]");
    }
    params_ = cmp::Params::for_carrier(hello->scheme, cmp::default_bit_length(table_.n_ap()));
    if (hello->mode == wire::Mode::kServer) {
      if (!hello->bit_key) throw SetupError("server mode needs a bit-stage dgk key");
      cmp::validate(params_, hello->carrier, *hello->bit_key);
      keys_.emplace(cmp::EvaluatorKeys{hello->carrier, *hello->bit_key});
    } else if (he::plaintext_modulus(hello->carrier) <= pow2(params_.l + 1)) {
      throw SetupError("carrier plaintext space cannot hold squared distances");
    }
    hello_ = std::move(*hello);
    ch_.send({sid_, wire::Columns{table_.ap_columns, params_}});
  }

  void localize(wire::Message m) {
    if (m.sid != sid_) throw ProtocolError("scan carries session id '" + m.sid + "'");
    auto* scan = std::get_if<loc::EncryptedScan>(&m.body);
    if (!scan) {
      throw ProtocolError(std::string("expected scan, got ") +
                          std::string(wire::type_name(m.body)));
    }
    for (const auto& c : scan->s2) he::check(hello_->carrier, c);
    he::check(hello_->carrier, scan->s3);
    if (hello_->mode == wire::Mode::kClient) {
      ch_.send({sid_, wire::ClientResult{
                          loc::localize_client_mode(table_, *scan, hello_->carrier, rng_)}});
    } else {
      NetworkTransport transport(ch_, sid_);
      auto res = loc::localize_server_mode(table_, *scan, hello_->k, *keys_, transport,
                                           params_, rng_);
      ch_.send({sid_, wire::ServerResult{std::move(res.coords)}});
    }
    ++localizations_;
  }

  const fp::LookupTable& table_;
  LineChannel& ch_;
  Rng& rng_;
  std::string sid_;
  std::optional<wire::Hello> hello_;
  std::optional<cmp::EvaluatorKeys> keys_;
  cmp::Params params_;
  std::uint64_t localizations_ = 0;
  std::uint64_t errors_ = 0;
};

// Accepts connections and serves each on its own thread.
class Server {
 public:
  Server(fp::LookupTable table, const std::string& listen)
      : table_(std::move(table)), acceptor_(io_) {
    const Endpoint ep = parse_endpoint(listen);
    tcp::resolver resolver(io_);
    boost::system::error_code ec;
    auto results = resolver.resolve(ep.host, ep.port, ec);
    if (ec || results.empty()) throw Error("cannot resolve listen address '" + listen + "'");
    const tcp::endpoint endpoint = *results.begin();
    acceptor_.open(endpoint.protocol());
    acceptor_.set_option(tcp::acceptor::reuse_address(true));
    acceptor_.bind(endpoint, ec);
    if (ec) throw Error("cannot listen on " + listen + ": " + ec.message());
    acceptor_.listen();
    port_ = acceptor_.local_endpoint().port();
    loopback_ = endpoint.address().is_unspecified()
                    ? (endpoint.address().is_v6() ? asio::ip::address(asio::ip::address_v6::loopback())
                                                  : asio::ip::address(asio::ip::address_v4::loopback()))
                    : endpoint.address();
  }

  ~Server() { stop(); }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short port() const { return port_; }
  std::string address() const { return loopback_.to_string() + ":" + std::to_string(port_); }

  // Blocks until stop().
  void run() {
    std::uint64_t index = 0;
    for (;;) {
      tcp::socket socket(io_);
      boost::system::error_code ec;
      acceptor_.accept(socket, ec);
      if (stopping_) return;
      if (ec) continue;
      socket.set_option(tcp::no_delay(true), ec);
      auto conn = std::make_shared<Conn>(std::move(socket));
      {
        std::lock_guard lock(mu_);
        reap_locked();
        conns_.push_back(conn);
        ++stats_.connections;
      }
      ++index;
      conn->worker = std::thread([this, conn, index] { serve(*conn, index); });
    }
  }

  void start() {
    runner_ = std::thread([this] { run(); });
  }

  void stop() {
    if (stopping_.exchange(true)) return;
    boost::system::error_code ec;
    if (runner_.joinable()) {
      // Wake the blocked accept() by connecting to ourselves.
      tcp::socket poke(io_);
      poke.connect(tcp::endpoint(loopback_, port_), ec);
      runner_.join();
    }
    acceptor_.close(ec);
    std::list<std::shared_ptr<Conn>> conns;
    {
      std::lock_guard lock(mu_);
      conns.swap(conns_);
    }
    for (auto& c : conns) c->channel.shutdown();
    for (auto& c : conns) {
      if (c->worker.joinable()) c->worker.join();
    }
  }

  ServerStats stats() const {
    std::lock_guard lock(mu_);
    return stats_;
  }

  const fp::LookupTable& table() const { return table_; }

 private:
  struct Conn {
    explicit Conn(tcp::socket s) : channel(std::move(s)) {}
    LineChannel channel;
    std::thread worker;
    std::atomic<bool> done{false};
  };

  void reap_locked() {
    for (auto it = conns_.begin(); it != conns_.end();) {
      if ((*it)->done) {
        (*it)->worker.join();
        it = conns_.erase(it);
      } else {
        ++it;
      }
    }
  }

  void serve(Conn& conn, std::uint64_t index) {
    Rng rng = seeded_rng(index);
    OpCounters ops;
    ServerConnection sc(table_, conn.channel, rng);
    {
      OpScope scope(ops);
      sc.run();
    }
    conn.channel.close();
    std::lock_guard lock(mu_);
    stats_.ops += ops;
    stats_.bytes += conn.channel.bytes();
    stats_.localizations += sc.localizations();
    stats_.errors += sc.errors();
    conn.done = true;
  }

  static Rng seeded_rng(std::uint64_t index) {
    if (const char* s = std::getenv("ENCLOC_SEED"); s != nullptr && *s) {
      return Rng(std::strtoull(s, nullptr, 10) + 0x9e3779b97f4a7c15ULL * index);
    }
    return Rng();
  }

  fp::LookupTable table_;
  asio::io_context io_;
  tcp::acceptor acceptor_;
  unsigned short port_ = 0;
  asio::ip::address loopback_;
  std::atomic<bool> stopping_{false};
  std::thread runner_;
  mutable std::mutex mu_;
  std::list<std::shared_ptr<Conn>> conns_;
  ServerStats stats_;
};

// ---- client -------------------------------------------------------------

struct LocalizeOutcome {
  std::vector<fp::Coord> coords;  // closest first; one entry in client mode
  std::size_t comparisons = 0;    // comparison sessions served as keyholder
  std::size_t result_bytes = 0;   // size of the result frame
  std::size_t result_ciphertexts = 0;
  std::size_t result_rows = 0;
  std::vector<std::size_t> failed_rows;  // client mode rows that did not decrypt
};

// Client end of a connection: holds the keys and answers comparisons.
class ClientSession {
 public:
  ClientSession(LineChannel channel, cmp::KeyholderKeys keys, wire::Mode mode, std::size_t k,
                Rng& rng, std::string sid = {})
      : ch_(std::move(channel)), keys_(std::move(keys)), mode_(mode), rng_(rng) {
    sid_ = sid.empty() ? random_sid(rng) : std::move(sid);
    pk_ = he::public_key_of(keys_.carrier);
    wire::Hello hello{he::scheme_of(pk_), mode, k, pk_, std::nullopt};
    if (mode == wire::Mode::kServer) hello.bit_key = keys_.bits.public_key();
    ch_.send({sid_, std::move(hello)});
    try {
      auto cols = expect_body<wire::Columns>(ch_.receive(), "columns");
      columns_ = std::move(cols.ap_columns);
      params_ = cols.params;
    } catch (const Error& e) {
      throw Error(std::string("handshake failed: ") + e.what());
    }
  }

  const std::vector<std::string>& columns() const { return columns_; }
  const cmp::Params& params() const { return params_; }
  const std::string& sid() const { return sid_; }
  const ByteCounts& bytes() const { return ch_.bytes(); }

  LocalizeOutcome localize(const loc::LocalizationScan& scan) {
    ch_.send({sid_, loc::prepare_scan(scan, columns_, pk_, rng_)});
    LocalizeOutcome out;
    std::optional<cmp::KeyholderSession> session;
    std::string cmp_sid;
    for (;;) {
      wire::Message m = ch_.receive();
      if (auto* err = std::get_if<wire::ErrorReply>(&m.body)) {
        throw RemoteError(err->code, err->message);
      }
      if (auto* m1 = std::get_if<cmp::Msg1>(&m.body)) {
        if (mode_ != wire::Mode::kServer) throw ProtocolError("comparison in client mode");
        if (m.sid.rfind(sid_ + ".", 0) != 0) {
          throw ProtocolError("comparison session '" + m.sid + "' is not ours");
        }
        cmp_sid = m.sid;
        session.emplace(keys_, params_);
        ++out.comparisons;
        ch_.send({cmp_sid, session->mask_decompose(*m1, rng_)});
      } else if (auto* m3 = std::get_if<cmp::Msg3>(&m.body)) {
        ch_.send({in_session(session, cmp_sid, m.sid), session->zero_stage(*m3, rng_)});
      } else if (auto* m5 = std::get_if<cmp::Msg5>(&m.body)) {
        ch_.send({in_session(session, cmp_sid, m.sid), session->unmask(*m5)});
        session.reset();
      } else if (auto* sr = std::get_if<wire::ServerResult>(&m.body)) {
        if (mode_ != wire::Mode::kServer) throw ProtocolError("server-mode result in client mode");
        out.result_bytes = ch_.last_frame_bytes();
        out.result_ciphertexts = 2 * sr->coords.size();
        for (const auto& c : sr->coords) out.coords.push_back(loc::decrypt_coord(c, keys_.carrier));
        return out;
      } else if (auto* cr = std::get_if<wire::ClientResult>(&m.body)) {
        if (mode_ != wire::Mode::kClient) throw ProtocolError("client-mode result in server mode");
        out.result_bytes = ch_.last_frame_bytes();
        out.result_rows = cr->rows.size();
        out.result_ciphertexts = cr->rows.size();
        auto best = loc::client_argmin(cr->rows, keys_.carrier);
        out.coords.push_back(best.coord);
        out.failed_rows = std::move(best.failed_rows);
        return out;
      } else {
        throw ProtocolError(std::string("unexpected ") + std::string(wire::type_name(m.body)) +
                            " during localization");
      }
    }
  }

  void close() { ch_.close(); }

 private:
  static std::string random_sid(Rng& rng) {
    std::string s = KeyFingerprint{rng.u64()}.hex();
    return s.substr(0, 12);
  }

  static const std::string& in_session(const std::optional<cmp::KeyholderSession>& s,
                                       const std::string& expected, const std::string& got) {
    if (!s) throw ProtocolError("comparison message outside a session");
    if (got != expected) {
      throw ProtocolError("comparison message for '" + got + "', expected '" + expected + "'");
    }
    return expected;
  }

  LineChannel ch_;
  cmp::KeyholderKeys keys_;
  wire::Mode mode_;
  Rng& rng_;
  std::string sid_;
  he::AnyPublicKey pk_;
  std::vector<std::string> columns_;
  cmp::Params params_;
};

}  // namespace encloc::net

#endif  // ENCLOC_NET_HPP_

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

// Fingerprint database: CSV ingestion, AP filtering and the lookup table
// the localization server works from.

#ifndef ENCLOC_FINGERPRINT_HPP_
#define ENCLOC_FINGERPRINT_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "encloc/errors.hpp"

namespace encloc::fp {

inline constexpr int kMissingRss = -120;
inline constexpr int kMinRss = -120;
inline constexpr int kMaxRss = 0;
inline constexpr std::size_t kDefaultMinCount = 8;
inline constexpr std::string_view kCsvHeader = "map_id,x,y,mac,rss,device,timestamp";

struct Coord {
  std::int64_t x = 0;
  std::int64_t y = 0;
  friend bool operator==(const Coord&, const Coord&) = default;
  friend auto operator<=>(const Coord&, const Coord&) = default;
};

struct FingerprintRecord {
  std::string map_id;
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::string mac;
  int rss = 0;
  std::string device;
  std::string timestamp;
  friend bool operator==(const FingerprintRecord&, const FingerprintRecord&) = default;
};

// One surveyed location with its per-AP readings.
struct Fingerprint {
  std::string map_id;
  Coord coord;
  std::map<std::string, int> rss_by_mac;
};

struct LookupRow {
  Coord coord;
  std::vector<int> rss;  // aligned with LookupTable::ap_columns
  friend bool operator==(const LookupRow&, const LookupRow&) = default;
};

struct LookupTable {
  std::vector<std::string> ap_columns;
  std::vector<LookupRow> rows;
  int v_c = kMissingRss;

  std::size_t n_ap() const { return ap_columns.size(); }
  std::size_t n_f() const { return rows.size(); }
  friend bool operator==(const LookupTable&, const LookupTable&) = default;
};

struct LineError {
  std::size_t line = 0;
  std::string message;
};

class CsvError : public Error {
 public:
  explicit CsvError(std::vector<LineError> errors)
      : Error(summarize(errors)), errors_(std::move(errors)) {}
  const std::vector<LineError>& errors() const { return errors_; }

 private:
  static std::string summarize(const std::vector<LineError>& errors) {
    std::ostringstream os;
    os << errors.size() << " malformed line(s)";
    for (std::size_t i = 0; i < errors.size() && i < 5; ++i) {
      os << "; line " << errors[i].line << ": " << errors[i].message;
    }
    return os.str();
  }
  std::vector<LineError> errors_;
};

class EmptyTableError : public Error {
 public:
  using Error::Error;
};

// Lowercases and checks the aa:bb:cc:dd:ee:ff form.
inline bool normalize_mac(std::string& mac) {
  if (mac.size() != 17) return false;
  for (std::size_t i = 0; i < mac.size(); ++i) {
    char& c = mac[i];
    if (i % 3 == 2) {
      if (c != ':') return false;
      continue;
    }
    if (c >= 'A' && c <= 'F') c = static_cast<char>(c - 'A' + 'a');
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

template <class Int>
bool parse_int(std::string_view s, Int& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

// RFC 4180 field split (double-quoted fields, "" escapes).
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::vector<FingerprintRecord> parse_csv(std::istream& in) {
  std::vector<FingerprintRecord> records;
  std::vector<LineError> errors;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header_seen) {
      if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
      if (line != kCsvHeader) {
        throw CsvError({{lineno, "expected header '" + std::string(kCsvHeader) + "'"}});
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 7) {
      errors.push_back({lineno, "expected 7 fields, got " + std::to_string(f.size())});
      continue;
    }
    FingerprintRecord r;
    r.map_id = f[0];
    if (!parse_int(f[1], r.x) || !parse_int(f[2], r.y)) {
      errors.push_back({lineno, "coordinates must be integers"});
      continue;
    }
    r.mac = f[3];
    if (!normalize_mac(r.mac)) {
      errors.push_back({lineno, "malformed mac '" + f[3] + "'"});
      continue;
    }
    if (!parse_int(f[4], r.rss)) {
      errors.push_back({lineno, "malformed rss '" + f[4] + "'"});
      continue;
    }
    if (r.rss < kMinRss || r.rss > kMaxRss) {
      errors.push_back({lineno, "rss " + f[4] + " outside [-120, 0]"});
      continue;
    }
    r.device = f[5];
    r.timestamp = f[6];
    records.push_back(std::move(r));
  }
  if (!errors.empty()) throw CsvError(std::move(errors));
  return records;
}

inline std::vector<FingerprintRecord> ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open fingerprint database '" + path + "'");
  if (in.peek() == std::ifstream::traits_type::eof()) return {};
  return parse_csv(in);
}

inline void write_csv(std::ostream& out, const std::vector<FingerprintRecord>& records) {
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << csv_field(r.map_id) << ',' << r.x << ',' << r.y << ',' << r.mac << ',' << r.rss
        << ',' << csv_field(r.device) << ',' << csv_field(r.timestamp) << '\n';
  }
}

inline void write_csv(const std::string& path, const std::vector<FingerprintRecord>& records) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  write_csv(out, records);
}

// Groups records by (map_id, x, y) in order of first appearance. Repeated
// readings of one AP at one location are averaged (rounded half away from 0).
inline std::vector<Fingerprint> group_fingerprints(const std::vector<FingerprintRecord>& records) {
  std::vector<Fingerprint> out;
  std::map<std::tuple<std::string, std::int64_t, std::int64_t>, std::size_t> index;
  std::vector<std::map<std::string, std::pair<long, long>>> sums;
  for (const auto& r : records) {
    auto key = std::make_tuple(r.map_id, r.x, r.y);
    auto [it, fresh] = index.try_emplace(key, out.size());
    if (fresh) {
      out.push_back(Fingerprint{r.map_id, Coord{r.x, r.y}, {}});
      sums.emplace_back();
    }
    auto& acc = sums[it->second][r.mac];
    acc.first += r.rss;
    acc.second += 1;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (const auto& [mac, acc] : sums[i]) {
      out[i].rss_by_mac[mac] = static_cast<int>(
          std::lround(static_cast<double>(acc.first) / static_cast<double>(acc.second)));
    }
  }
  return out;
}

inline LookupTable build_lookup_table(const std::vector<Fingerprint>& fingerprints,
                                      std::size_t min_count = kDefaultMinCount,
                                      int v_c = kMissingRss) {
  if (fingerprints.empty()) throw EmptyTableError("no fingerprints to build a table from");
  std::map<std::string, std::size_t> seen;
  for (const auto& f : fingerprints) {
    for (const auto& [mac, rss] : f.rss_by_mac) ++seen[mac];
  }
  LookupTable table;
  table.v_c = v_c;
  for (const auto& [mac, count] : seen) {  // std::map: lexicographic order
    if (count >= min_count) table.ap_columns.push_back(mac);
  }
  if (table.ap_columns.empty()) {
    throw EmptyTableError("every AP was seen in fewer than " + std::to_string(min_count) +
                          " fingerprints");
  }
  table.rows.reserve(fingerprints.size());
  for (const auto& f : fingerprints) {
    LookupRow row{f.coord, {}};
    row.rss.reserve(table.ap_columns.size());
    for (const auto& mac : table.ap_columns) {
      auto it = f.rss_by_mac.find(mac);
      row.rss.push_back(it == f.rss_by_mac.end() ? v_c : it->second);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline LookupTable build_lookup_table(const std::vector<FingerprintRecord>& records,
                                      std::size_t min_count = kDefaultMinCount,
                                      int v_c = kMissingRss) {
  if (records.empty()) throw EmptyTableError("no fingerprint records");
  return build_lookup_table(group_fingerprints(records), min_count, v_c);
}

inline std::string format_mac(std::uint64_t bits) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string mac;
  for (int octet = 5; octet >= 0; --octet) {
    const auto b = static_cast<unsigned>((bits >> (octet * 8)) & 0xff);
    mac.push_back(kDigits[b >> 4]);
    mac.push_back(kDigits[b & 0xf]);
    if (octet) mac.push_back(':');
  }
  return mac;
}

// Distinct locally administered unicast MACs.
inline std::vector<std::string> synthetic_macs(std::size_t count, std::mt19937_64& gen) {
  std::set<std::string> used;
  std::vector<std::string> out;
  while (out.size() < count) {
    std::uint64_t bits = gen() & 0xffffffffffffULL;
    bits = (bits & ~(0x01ULL << 40)) | (0x02ULL << 40);
    auto mac = format_mac(bits);
    if (used.insert(mac).second) out.push_back(std::move(mac));
  }
  return out;
}

inline constexpr std::int64_t kGridSpacing = 6;

// Fingerprints on a square grid; APs scattered over the same area. Every
// AP is reported at every location with
//   rss = -30 - 25*log10(dist + 1) + noise,  noise uniform in [-4, 4],
// clamped to [-120, -30]. Deterministic for a given seed.
inline std::vector<FingerprintRecord> generate_synthetic(std::size_t n_fprints,
                                                         std::size_t n_aps,
                                                         std::uint64_t seed) {
  if (n_fprints == 0 || n_aps == 0) throw Error("generate_synthetic: counts must be >= 1");
  std::mt19937_64 gen(seed);
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_fprints))));
  const double extent = static_cast<double>(cols * kGridSpacing);
  std::uniform_real_distribution<double> pos(-0.25 * extent, 1.25 * extent);
  std::uniform_int_distribution<int> noise(-4, 4);

  auto macs = synthetic_macs(n_aps, gen);
  std::vector<std::pair<double, double>> aps(n_aps);
  for (auto& ap : aps) ap = {pos(gen), pos(gen)};

  std::vector<FingerprintRecord> records;
  records.reserve(n_fprints * n_aps);
  for (std::size_t i = 0; i < n_fprints; ++i) {
    const auto x = static_cast<std::int64_t>(i % cols) * kGridSpacing;
    const auto y = static_cast<std::int64_t>(i / cols) * kGridSpacing;
    char ts[32];
    std::snprintf(ts, sizeof ts, "2017-07-01T%02zu:%02zu:00Z", 10 + i / 60 % 12, i % 60);
    for (std::size_t a = 0; a < n_aps; ++a) {
      const double dx = static_cast<double>(x) - aps[a].first;
      const double dy = static_cast<double>(y) - aps[a].second;
      const double dist = std::sqrt(dx * dx + dy * dy);
      const double level = -30.0 - 25.0 * std::log10(dist + 1.0) + noise(gen);
      const int rss = std::clamp(static_cast<int>(std::lround(level)), -120, -30);
      records.push_back(
          FingerprintRecord{"synthetic", x, y, macs[a], rss, "synthetic/1.0", ts});
    }
  }
  return records;
}

}  // namespace encloc::fp

#endif  // ENCLOC_FINGERPRINT_HPP_

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

// Encrypted squared-Euclidean distance between a client scan and every
// lookup-table row, and the two ways of turning those distances into a
// location.
//
// With x1 the scan RSS and x2 the fingerprint RSS of one column,
//   (x2 - x1)^2 = x2^2 + (-2*x1)*x2 + x1^2 = S1 + S2 + S3.
// The client sends [[-2*x1]] per column (s2) and [[sum x1^2]] (s3); the
// server knows x2 in the clear, so S1 is plaintext and S2 is a product of
// scalar multiplications.

#ifndef ENCLOC_LOCALIZATION_HPP_
#define ENCLOC_LOCALIZATION_HPP_

#include <cstddef>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "encloc/bigint.hpp"
#include "encloc/ciphertext.hpp"
#include "encloc/comparison.hpp"
#include "encloc/errors.hpp"
#include "encloc/fingerprint.hpp"
#include "encloc/he.hpp"

namespace encloc::loc {

inline constexpr std::size_t kDefaultK = 1;

struct LocalizationScan {
  std::vector<std::pair<std::string, int>> pairs;

  void validate() const {
    std::set<std::string> seen;
    for (const auto& [mac, rss] : pairs) {
      if (!seen.insert(mac).second) throw RangeError("duplicate AP " + mac + " in scan");
      if (rss < fp::kMinRss || rss > fp::kMaxRss) {
        throw RangeError("scan rss " + std::to_string(rss) + " outside [-120, 0]");
      }
    }
  }
};

inline constexpr std::string_view kScanHeader = "mac,rss";

inline LocalizationScan parse_scan(std::istream& in) {
  LocalizationScan scan;
  std::vector<fp::LineError> errors;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != kScanHeader) {
        throw fp::CsvError({{1, "expected header '" + std::string(kScanHeader) + "'"}});
      }
      continue;
    }
    if (line.empty()) continue;
    auto f = fp::split_csv_line(line);
    int rss = 0;
    if (f.size() != 2) {
      errors.push_back({lineno, "expected 2 fields"});
    } else if (!fp::normalize_mac(f[0])) {
      errors.push_back({lineno, "malformed mac '" + f[0] + "'"});
    } else if (!fp::parse_int(f[1], rss) || rss < fp::kMinRss || rss > fp::kMaxRss) {
      errors.push_back({lineno, "rss must be an integer in [-120, 0]"});
    } else {
      scan.pairs.emplace_back(f[0], rss);
    }
  }
  if (!errors.empty()) throw fp::CsvError(std::move(errors));
  scan.validate();
  return scan;
}

inline LocalizationScan read_scan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scan file '" + path + "'");
  return parse_scan(in);
}

inline void write_scan(const std::string& path, const LocalizationScan& scan) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << kScanHeader << '\n';
  for (const auto& [mac, rss] : scan.pairs) out << mac << ',' << rss << '\n';
}

// Scan RSS in column order, v_c where the scan did not see a column's AP.
inline std::vector<int> align_scan(const LocalizationScan& scan,
                                   const std::vector<std::string>& ap_columns,
                                   int v_c = fp::kMissingRss) {
  std::vector<int> out;
  out.reserve(ap_columns.size());
  for (const auto& mac : ap_columns) {
    auto it = std::find_if(scan.pairs.begin(), scan.pairs.end(),
                           [&](const auto& p) { return p.first == mac; });
    out.push_back(it == scan.pairs.end() ? v_c : it->second);
  }
  return out;
}

struct EncryptedScan {
  Scheme scheme = Scheme::kPaillier;
  std::vector<Ciphertext> s2;  // [[-2 * rss_j]]
  Ciphertext s3;               // [[sum_j rss_j^2]]
  friend bool operator==(const EncryptedScan&, const EncryptedScan&) = default;
};

inline EncryptedScan prepare_scan(const LocalizationScan& scan,
                                  const std::vector<std::string>& ap_columns,
                                  const he::AnyPublicKey& pk, Rng& rng) {
  scan.validate();
  const auto aligned = align_scan(scan, ap_columns);
  EncryptedScan out;
  out.scheme = he::scheme_of(pk);
  out.s2.reserve(aligned.size());
  BigInt s3 = 0;
  for (int rss : aligned) {
    out.s2.push_back(he::encrypt_signed(pk, BigInt(-2 * rss), rng));
    s3 += rss * rss;
  }
  out.s3 = he::encrypt_signed(pk, s3, rng);
  return out;
}

struct DistanceRow {
  fp::Coord coord;
  BigInt s1;        // sum of fingerprint rss^2, plaintext
  Ciphertext dist;  // [[d^2]]
};

inline std::vector<DistanceRow> compute_distance_rows(const fp::LookupTable& table,
                                                      const EncryptedScan& scan,
                                                      const he::AnyPublicKey& pk, Rng& rng) {
  if (scan.s2.size() != table.n_ap()) {
    throw IncompatibleError("scan has " + std::to_string(scan.s2.size()) +
                            " columns, table has " + std::to_string(table.n_ap()));
  }
  if (scan.scheme != he::scheme_of(pk) || !(scan.s3.kf == he::fingerprint(pk))) {
    throw IncompatibleError("scan was not encrypted under the session key");
  }
  // [[2 * rss_j]]: fingerprint values are negative, so raise these instead.
  std::vector<Ciphertext> neg_s2;
  neg_s2.reserve(scan.s2.size());
  for (const auto& c : scan.s2) {
    if (!(c.kf == scan.s3.kf) || c.scheme != scan.scheme) {
      throw IncompatibleError("scan columns encrypted under mixed keys");
    }
    neg_s2.push_back(he::scalar_mul(pk, c, -1));
  }

  std::vector<DistanceRow> rows;
  rows.reserve(table.n_f());
  for (const auto& row : table.rows) {
    BigInt s1 = 0;
    std::optional<Ciphertext> s2;
    for (std::size_t j = 0; j < row.rss.size(); ++j) {
      const int v = row.rss[j];
      s1 += v * v;
      Ciphertext term = he::scalar_mul(pk, neg_s2[j], BigInt(-v));
      s2 = s2 ? he::add(pk, *s2, term) : term;
    }
    Ciphertext d = he::encrypt_signed(pk, s1, rng);
    if (s2) d = he::add(pk, d, *s2);
    d = he::add(pk, d, scan.s3);
    rows.push_back(DistanceRow{row.coord, std::move(s1), std::move(d)});
  }
  return rows;
}

struct EncryptedCoord {
  Ciphertext x;
  Ciphertext y;
  friend bool operator==(const EncryptedCoord&, const EncryptedCoord&) = default;
};

struct ServerModeResult {
  std::vector<EncryptedCoord> coords;  // closest first
  std::vector<std::size_t> rows;       // table row index of each winner
  std::size_t comparisons = 0;
};

// Distances are handed to k-min selection in reverse table order: selection
// keeps the later of two equal elements, so equal distances resolve to the
// lower table index.
template <cmp::Transport T>
ServerModeResult localize_server_mode(const fp::LookupTable& table, const EncryptedScan& scan,
                                      std::size_t k, const cmp::EvaluatorKeys& keys,
                                      T& transport, const cmp::Params& params, Rng& rng) {
  if (k == 0 || k > table.n_f()) {
    throw RangeError("k must be in [1, " + std::to_string(table.n_f()) + "]");
  }
  const auto rows = compute_distance_rows(table, scan, keys.carrier, rng);
  std::vector<std::size_t> order(rows.size());
  std::iota(order.rbegin(), order.rend(), std::size_t{0});

  ServerModeResult out;
  out.comparisons = cmp::k_min_select(order, k, [&](std::size_t a, std::size_t b) {
    return cmp::joint_compare(keys, transport, rows[a].dist, rows[b].dist, params, rng);
  });
  for (std::size_t p = 1; p <= k; ++p) {
    const std::size_t idx = order[order.size() - p];
    out.rows.push_back(idx);
    out.coords.push_back(EncryptedCoord{
        he::encrypt_signed(keys.carrier, BigInt(static_cast<long>(rows[idx].coord.x)), rng),
        he::encrypt_signed(keys.carrier, BigInt(static_cast<long>(rows[idx].coord.y)), rng)});
  }
  return out;
}

struct ClientModeRow {
  fp::Coord coord;
  Ciphertext dist;
  friend bool operator==(const ClientModeRow&, const ClientModeRow&) = default;
};

// Coordinates travel in the clear; only the distances are encrypted.
inline std::vector<ClientModeRow> localize_client_mode(const fp::LookupTable& table,
                                                       const EncryptedScan& scan,
                                                       const he::AnyPublicKey& pk, Rng& rng) {
  std::vector<ClientModeRow> out;
  for (auto& r : compute_distance_rows(table, scan, pk, rng)) {
    out.push_back(ClientModeRow{r.coord, std::move(r.dist)});
  }
  return out;
}

struct ArgminResult {
  fp::Coord coord;
  std::size_t index = 0;
  BigInt distance;
  std::vector<std::size_t> failed_rows;
};

// Lowest index wins among equal distances. Rows that fail to decrypt are
// reported and skipped.
inline ArgminResult client_argmin(const std::vector<ClientModeRow>& rows,
                                  const he::AnyPrivateKey& sk) {
  ArgminResult res;
  std::optional<BigInt> best;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    BigInt d;
    try {
      d = he::decrypt(sk, rows[i].dist);
    } catch (const Error&) {
      res.failed_rows.push_back(i);
      continue;
    }
    if (!best || d < *best) {
      best = d;
      res.index = i;
      res.coord = rows[i].coord;
    }
  }
  if (!best) throw DecryptionError("no distance row could be decrypted");
  res.distance = *best;
  return res;
}

inline fp::Coord decrypt_coord(const EncryptedCoord& c, const he::AnyPrivateKey& sk) {
  return fp::Coord{he::decrypt_signed(sk, c.x).get_si(), he::decrypt_signed(sk, c.y).get_si()};
}

}  // namespace encloc::loc

#endif  // ENCLOC_LOCALIZATION_HPP_

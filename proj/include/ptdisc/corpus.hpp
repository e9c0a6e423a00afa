// Copyright 2026 The ptdisc Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Ingestion and normalization of the two raw knowledge sources: the product
// catalog and the search-query log. Both are line-delimited JSON files.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ptdisc/error.hpp"
#include "ptdisc/util.hpp"

namespace ptdisc {

using Tokens = std::vector<std::string>;

namespace detail {

inline bool is_word_byte(unsigned char c) {
  return std::isalnum(c) != 0 || c >= 0x80;
}

inline bool is_digit_byte(unsigned char c) { return std::isdigit(c) != 0; }

}  // namespace detail

/// Splits normalized text into tokens. Empty input gives no tokens.
inline Tokens normalize_tokens(std::string_view raw) {
  Tokens tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto c = static_cast<unsigned char>(raw[i]);
    const auto next = i + 1 < raw.size() ? static_cast<unsigned char>(raw[i + 1]) : 0;
    const bool prev_word = !current.empty() &&
                           detail::is_word_byte(static_cast<unsigned char>(current.back()));
    if (detail::is_word_byte(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '-' || c == '/') {
      // Kept only between two word characters of the same token.
      if (prev_word && detail::is_word_byte(next)) {
        current.push_back(static_cast<char>(c));
      } else {
        flush();
      }
    } else if (c == '.') {
      if (!current.empty() &&
          detail::is_digit_byte(static_cast<unsigned char>(current.back())) &&
          detail::is_digit_byte(next)) {
        current.push_back('.');
      } else {
        flush();
      }
    } else if (c == '\'') {
      // Apostrophes vanish without splitting ("men's" -> "mens").
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

inline std::string join_tokens(const Tokens& tokens, std::size_t begin = 0,
                               std::size_t end = std::string::npos) {
  end = std::min(end, tokens.size());
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

/// Lowercases, collapses whitespace and strips punctuation, keeping hyphens
/// and slashes inside tokens and periods between digits.
/// Throws EmptyPhrase when nothing remains.
inline std::string normalize_phrase(std::string_view raw) {
  const Tokens tokens = normalize_tokens(raw);
  if (tokens.empty()) {
    throw Error(ErrorCode::kEmptyPhrase, "no tokens in \"" + std::string(raw) + "\"");
  }
  return join_tokens(tokens);
}

inline Tokens split_phrase(std::string_view phrase) {
  Tokens tokens;
  std::size_t start = 0;
  while (start < phrase.size()) {
    const std::size_t end = std::min(phrase.find(' ', start), phrase.size());
    if (end > start) tokens.emplace_back(phrase.substr(start, end - start));
    start = end + 1;
  }
  return tokens;
}

struct Sku {
  std::string sku_id;
  Tokens title;
  Tokens description;
  std::string category;
  std::optional<std::string> brand;

  bool operator==(const Sku&) const = default;
};

struct QueryRecord {
  std::string query;
  std::int64_t volume = 0;
  std::map<std::string, std::int64_t> category_volumes;
  std::map<std::string, std::int64_t> sku_clicks;

  bool operator==(const QueryRecord&) const = default;
};

class Catalog {
 public:
  Catalog() = default;

  /// Appends a SKU; throws DuplicateId on a repeated sku_id.
  void add(Sku sku) {
    if (sku.sku_id.empty()) throw Error(ErrorCode::kParseError, "empty sku_id");
    if (sku.title.empty()) throw Error(ErrorCode::kParseError, "empty title for " + sku.sku_id);
    auto [it, inserted] = index_.emplace(sku.sku_id, skus_.size());
    if (!inserted) throw Error(ErrorCode::kDuplicateId, sku.sku_id);
    skus_.push_back(std::move(sku));
  }

  const std::vector<Sku>& skus() const noexcept { return skus_; }
  std::size_t size() const noexcept { return skus_.size(); }
  bool empty() const noexcept { return skus_.empty(); }

  const Sku* find(std::string_view sku_id) const {
    auto it = index_.find(std::string(sku_id));
    return it == index_.end() ? nullptr : &skus_[it->second];
  }

  const std::string& digest() const noexcept { return digest_; }
  void set_digest(std::string digest) { digest_ = std::move(digest); }

  bool operator==(const Catalog& other) const {
    return skus_ == other.skus_ && digest_ == other.digest_;
  }

 private:
  std::vector<Sku> skus_;
  std::unordered_map<std::string, std::size_t> index_;
  std::string digest_;
};

class QueryLog {
 public:
  QueryLog() = default;

  /// Adds a record, merging into an existing record with the same query by
  /// summing volume and both count maps.
  void add(QueryRecord record) {
    auto [it, inserted] = index_.emplace(record.query, records_.size());
    if (inserted) {
      records_.push_back(std::move(record));
      return;
    }
    QueryRecord& merged = records_[it->second];
    merged.volume += record.volume;
    for (const auto& [k, v] : record.category_volumes) merged.category_volumes[k] += v;
    for (const auto& [k, v] : record.sku_clicks) merged.sku_clicks[k] += v;
  }

  const std::vector<QueryRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  const QueryRecord* find(std::string_view query) const {
    auto it = index_.find(std::string(query));
    return it == index_.end() ? nullptr : &records_[it->second];
  }

  const std::string& digest() const noexcept { return digest_; }
  void set_digest(std::string digest) { digest_ = std::move(digest); }

  bool operator==(const QueryLog& other) const {
    return records_ == other.records_ && digest_ == other.digest_;
  }

 private:
  std::vector<QueryRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
  std::string digest_;
};

namespace detail {

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

template <typename Fn>
void for_each_record(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    if (!record.is_object()) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": expected an object", line_no);
    }
    fn(record, line_no);
  }
}

inline std::string required_string(const nlohmann::json& record, const char* field,
                                   std::size_t line_no) {
  auto it = record.find(field);
  if (it == record.end() || !it->is_string()) {
    throw Error(ErrorCode::kParseError,
                "line " + std::to_string(line_no) + ": missing string field \"" + field + "\"",
                line_no);
  }
  return it->get<std::string>();
}

inline std::int64_t count_value(const nlohmann::json& value, const std::string& what,
                                std::size_t line_no) {
  if (!value.is_number_integer()) {
    throw Error(ErrorCode::kParseError,
                "line " + std::to_string(line_no) + ": " + what + " must be an integer",
                line_no);
  }
  const auto count = value.get<std::int64_t>();
  if (count < 0) {
    throw Error(ErrorCode::kNegativeCount,
                "line " + std::to_string(line_no) + ": negative " + what, line_no);
  }
  return count;
}

inline std::map<std::string, std::int64_t> count_map(const nlohmann::json& record,
                                                     const char* field,
                                                     std::size_t line_no) {
  std::map<std::string, std::int64_t> out;
  auto it = record.find(field);
  if (it == record.end() || it->is_null()) return out;
  if (!it->is_object()) {
    throw Error(ErrorCode::kParseError,
                "line " + std::to_string(line_no) + ": \"" + field + "\" must be a map",
                line_no);
  }
  for (const auto& [key, value] : it->items()) {
    const auto count = count_value(value, std::string(field) + "[" + key + "]", line_no);
    out[key] += count;
  }
  return out;
}

}  // namespace detail

/// Parses catalog records from in-memory bytes. The digest covers `text`.
inline Catalog parse_catalog(std::string_view text) {
  Catalog catalog;
  detail::for_each_record(text, [&](const nlohmann::json& record, std::size_t line_no) {
    Sku sku;
    sku.sku_id = detail::required_string(record, "sku_id", line_no);
    sku.title = normalize_tokens(detail::required_string(record, "title", line_no));
    if (auto it = record.find("description"); it != record.end() && !it->is_null()) {
      if (!it->is_string()) {
        throw Error(ErrorCode::kParseError,
                    "line " + std::to_string(line_no) + ": description must be a string",
                    line_no);
      }
      sku.description = normalize_tokens(it->get<std::string>());
    }
    sku.category = detail::required_string(record, "category", line_no);
    if (auto it = record.find("brand"); it != record.end() && !it->is_null()) {
      if (!it->is_string()) {
        throw Error(ErrorCode::kParseError,
                    "line " + std::to_string(line_no) + ": brand must be a string", line_no);
      }
      Tokens brand = normalize_tokens(it->get<std::string>());
      if (!brand.empty()) sku.brand = join_tokens(brand);
    }
    if (sku.sku_id.empty() || sku.title.empty()) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": empty sku_id or title", line_no);
    }
    catalog.add(std::move(sku));
  });
  catalog.set_digest(hex64(fnv1a64(text)));
  return catalog;
}

inline Catalog load_catalog(const std::string& path) {
  return parse_catalog(detail::read_file_bytes(path));
}

/// Parses query-log records, merging records whose queries normalize equal.
inline QueryLog parse_query_log(std::string_view text) {
  QueryLog log;
  detail::for_each_record(text, [&](const nlohmann::json& record, std::size_t line_no) {
    QueryRecord q;
    const std::string raw = detail::required_string(record, "query", line_no);
    const Tokens tokens = normalize_tokens(raw);
    if (tokens.empty()) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": query is empty after normalization",
                  line_no);
    }
    q.query = join_tokens(tokens);
    auto volume = record.find("volume");
    if (volume == record.end()) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": missing \"volume\"", line_no);
    }
    q.volume = detail::count_value(*volume, "volume", line_no);
    if (q.volume < 1) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": volume must be >= 1", line_no);
    }
    q.category_volumes = detail::count_map(record, "category_volumes", line_no);
    q.sku_clicks = detail::count_map(record, "sku_clicks", line_no);
    std::int64_t category_total = 0;
    for (const auto& [_, v] : q.category_volumes) category_total += v;
    if (category_total > q.volume) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": category volumes exceed volume",
                  line_no);
    }
    log.add(std::move(q));
  });
  log.set_digest(hex64(fnv1a64(text)));
  return log;
}

inline QueryLog load_query_log(const std::string& path) {
  return parse_query_log(detail::read_file_bytes(path));
}

inline nlohmann::json to_json(const Sku& sku) {
  nlohmann::json j{{"sku_id", sku.sku_id},
                   {"title", join_tokens(sku.title)},
                   {"description", join_tokens(sku.description)},
                   {"category", sku.category}};
  if (sku.brand) j["brand"] = *sku.brand;
  return j;
}

inline nlohmann::json to_json(const QueryRecord& q) {
  return {{"query", q.query},
          {"volume", q.volume},
          {"category_volumes", q.category_volumes},
          {"sku_clicks", q.sku_clicks}};
}

inline void write_catalog(std::ostream& out, const Catalog& catalog) {
  for (const auto& sku : catalog.skus()) out << to_json(sku).dump() << '\n';
}

inline void write_query_log(std::ostream& out, const QueryLog& log) {
  for (const auto& q : log.records()) out << to_json(q).dump() << '\n';
}

}  // namespace ptdisc

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

// Fixed 30-dimension feature schema for product-type candidates, grouped as
// quality (1), intrinsic (7), catalog context (10), search context (10) and
// source flags (2). Count-like values are log(1 + x) scaled; ratios with a
// zero denominator are 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ptdisc/candidate_pool.hpp"
#include "ptdisc/corpus.hpp"
#include "ptdisc/error.hpp"
#include "ptdisc/util.hpp"

namespace ptdisc {

inline constexpr std::size_t kFeatureCount = 30;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    // quality
    "quality",
    // intrinsic
    "token_count", "char_count", "has_digit", "has_unit", "has_brand", "starts_with_brand",
    "has_stopword",
    // catalog context
    "title_occurrences_log", "description_occurrences_log", "document_frequency_ratio",
    "mean_title_position", "title_final_ratio", "distinct_categories_log",
    "left_neighbor_entropy", "right_neighbor_entropy", "best_split_npmi", "full_title_ratio",
    // search context
    "from_query", "query_volume_log", "global_volume_share", "top_category_share",
    "category_volume_entropy", "distinct_clicked_skus_log", "click_entropy",
    "max_sku_click_share", "clicks_per_volume", "clicked_title_match_ratio",
    // source
    "from_catalog", "in_both_sources"};

inline constexpr std::size_t kSearchFeatureBegin = 18;
inline constexpr std::size_t kSearchFeatureEnd = 28;

inline const std::string& feature_schema_digest() {
  static const std::string digest = [] {
    std::uint64_t h = fnv1a64("ptdisc-features-v1");
    for (auto name : kFeatureNames) {
      h = fnv1a64(name, h);
      h = fnv1a64(",", h);
    }
    return hex64(h);
  }();
  return digest;
}

struct FeatureVector {
  std::array<double, kFeatureCount> values{};

  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  static std::size_t size() { return kFeatureCount; }
  static const std::string& schema_digest() { return feature_schema_digest(); }

  bool operator==(const FeatureVector&) const = default;
};

/// Shannon entropy (bits) of a SKU click distribution.
inline double click_entropy(const std::map<std::string, std::int64_t>& sku_clicks) {
  std::vector<std::int64_t> counts;
  counts.reserve(sku_clicks.size());
  for (const auto& [_, c] : sku_clicks) counts.push_back(c);
  return entropy_bits(counts);
}

struct Lexicons {
  std::set<std::string> brands;
  std::set<std::string> units;
  std::set<std::string> stopwords;
};

inline std::set<std::string> default_unit_lexicon() {
  return {"amp",  "amps",  "btu", "cm",     "cu", "cu ft", "ft",  "gal", "gallon", "gpm",
          "inch", "kw",    "lb",  "lbs",    "mah", "mm",    "oz",  "psi", "qt",     "sq ft",
          "v",    "volt",  "volts", "watt", "watts", "yd"};
}

inline std::set<std::string> default_stopwords() {
  return {"a",  "an", "and", "are", "as",   "at",   "be",   "by",   "for", "from",
          "in", "is", "it",  "of",  "on",   "or",   "that", "the",  "this", "to",
          "with", "your", "you", "our", "into", "its"};
}

/// Reads one term per line, normalizing each; blank lines are skipped.
inline std::set<std::string> load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::set<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    Tokens t = normalize_tokens(line);
    if (!t.empty()) terms.insert(join_tokens(t));
  }
  return terms;
}

inline std::set<std::string> brands_from_catalog(const Catalog& catalog) {
  std::set<std::string> brands;
  for (const auto& sku : catalog.skus()) {
    if (sku.brand) brands.insert(*sku.brand);
  }
  return brands;
}

/// Aggregated search behavior for one query.
struct SearchStats {
  std::int64_t volume = 0;
  double top_category_share = 0.0;
  double category_entropy = 0.0;
  std::int64_t distinct_clicked_skus = 0;
  double click_entropy = 0.0;
  double max_click_share = 0.0;
  std::int64_t total_clicks = 0;
  double clicked_title_match_ratio = 0.0;

  bool operator==(const SearchStats&) const = default;
};

struct CorpusStats {
  NgramTable ngrams;
  std::map<std::string, std::int64_t> category_query_totals;
  std::int64_t global_query_total = 0;
  std::unordered_map<std::string, SearchStats> search;
  Lexicons lexicons;

  const SearchStats* find_search(std::string_view query) const {
    auto it = search.find(std::string(query));
    return it == search.end() ? nullptr : &it->second;
  }
};

namespace detail {

inline bool contains_sequence(const Tokens& haystack, const Tokens& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
         haystack.end();
}

inline bool contains_any_term(const Tokens& tokens, const std::set<std::string>& lexicon) {
  for (const auto& term : lexicon) {
    if (contains_sequence(tokens, split_phrase(term))) return true;
  }
  return false;
}

inline bool starts_with_any_term(const Tokens& tokens, const std::set<std::string>& lexicon) {
  for (const auto& term : lexicon) {
    const Tokens t = split_phrase(term);
    if (!t.empty() && t.size() <= tokens.size() &&
        std::equal(t.begin(), t.end(), tokens.begin())) {
      return true;
    }
  }
  return false;
}

inline double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }
inline double log1p_count(std::int64_t x) { return std::log1p(static_cast<double>(x)); }

}  // namespace detail

/// Aggregates n-gram, query and click statistics. The result does not
/// depend on catalog or query-log record order.
/// Throws EmptyLexicon if any lexicon is empty.
inline CorpusStats compute_corpus_stats(const Catalog& catalog, const QueryLog& log,
                                        Lexicons lexicons, std::size_t parallelism = 1) {
  if (lexicons.brands.empty()) throw Error(ErrorCode::kEmptyLexicon, "brand lexicon is empty");
  if (lexicons.units.empty()) throw Error(ErrorCode::kEmptyLexicon, "unit lexicon is empty");
  if (lexicons.stopwords.empty()) {
    throw Error(ErrorCode::kEmptyLexicon, "stopword lexicon is empty");
  }
  CorpusStats stats;
  stats.lexicons = std::move(lexicons);
  stats.ngrams = count_ngrams(catalog, kMaxPhraseTokens, parallelism);

  for (const auto& q : log.records()) {
    stats.global_query_total += q.volume;
    for (const auto& [cat, v] : q.category_volumes) stats.category_query_totals[cat] += v;

    SearchStats s;
    s.volume = q.volume;
    std::vector<std::int64_t> cat_counts;
    std::int64_t top = 0;
    for (const auto& [_, v] : q.category_volumes) {
      cat_counts.push_back(v);
      top = std::max(top, v);
    }
    s.top_category_share = detail::ratio(static_cast<double>(top), static_cast<double>(q.volume));
    s.category_entropy = entropy_bits(cat_counts);

    const Tokens query_tokens = split_phrase(q.query);
    std::int64_t max_clicks = 0;
    std::int64_t matched = 0;
    for (const auto& [sku_id, c] : q.sku_clicks) {
      if (c <= 0) continue;
      ++s.distinct_clicked_skus;
      s.total_clicks += c;
      max_clicks = std::max(max_clicks, c);
      const Sku* sku = catalog.find(sku_id);
      if (sku && detail::contains_sequence(sku->title, query_tokens)) matched += c;
    }
    s.click_entropy = click_entropy(q.sku_clicks);
    s.max_click_share = detail::ratio(static_cast<double>(max_clicks),
                                      static_cast<double>(s.total_clicks));
    s.clicked_title_match_ratio =
        detail::ratio(static_cast<double>(matched), static_cast<double>(s.total_clicks));
    stats.search.emplace(q.query, s);
  }
  return stats;
}

/// Maps a candidate to its 30 features. Pure given (candidate, stats).
inline FeatureVector extract_features(const Candidate& c, const CorpusStats& stats) {
  if (stats.lexicons.brands.empty() || stats.lexicons.units.empty() ||
      stats.lexicons.stopwords.empty()) {
    throw Error(ErrorCode::kSchemaMismatch, "corpus stats lexicons are unset");
  }
  using detail::log1p_count;
  using detail::ratio;
  FeatureVector f;
  const Tokens tokens = split_phrase(c.phrase);

  f[0] = c.quality;

  f[1] = static_cast<double>(tokens.size());
  f[2] = static_cast<double>(c.phrase.size());
  f[3] = std::any_of(c.phrase.begin(), c.phrase.end(),
                     [](unsigned char ch) { return std::isdigit(ch) != 0; })
             ? 1.0
             : 0.0;
  f[4] = detail::contains_any_term(tokens, stats.lexicons.units) ? 1.0 : 0.0;
  f[5] = detail::contains_any_term(tokens, stats.lexicons.brands) ? 1.0 : 0.0;
  f[6] = detail::starts_with_any_term(tokens, stats.lexicons.brands) ? 1.0 : 0.0;
  f[7] = std::any_of(tokens.begin(), tokens.end(),
                     [&](const std::string& t) { return stats.lexicons.stopwords.count(t) > 0; })
             ? 1.0
             : 0.0;

  const NgramStats* ng = c.ngram ? &*c.ngram : stats.ngrams.find(c.phrase);
  if (ng != nullptr && ng->corpus_count > 0) {
    const double title_occ = static_cast<double>(ng->title_occurrences);
    f[8] = log1p_count(ng->title_occurrences);
    f[9] = log1p_count(ng->description_occurrences);
    f[10] = ratio(static_cast<double>(ng->document_frequency),
                  static_cast<double>(stats.ngrams.n_documents));
    f[11] = ng->mean_title_position();
    f[12] = ratio(static_cast<double>(ng->title_final_occurrences), title_occ);
    f[13] = log1p_count(static_cast<std::int64_t>(ng->distinct_categories()));
    std::vector<std::int64_t> left, right;
    for (const auto& [_, n] : ng->left_neighbor_counts) left.push_back(n);
    for (const auto& [_, n] : ng->right_neighbor_counts) right.push_back(n);
    f[14] = entropy_bits(left);
    f[15] = entropy_bits(right);
    f[16] = best_split_npmi(tokens, stats.ngrams);
    f[17] = ratio(static_cast<double>(ng->full_title_occurrences), title_occ);
  }

  if (c.from_query) {
    if (const SearchStats* s = stats.find_search(c.phrase)) {
      f[18] = 1.0;
      f[19] = log1p_count(s->volume);
      f[20] = ratio(static_cast<double>(s->volume), static_cast<double>(stats.global_query_total));
      f[21] = s->top_category_share;
      f[22] = s->category_entropy;
      f[23] = log1p_count(s->distinct_clicked_skus);
      f[24] = s->click_entropy;
      f[25] = s->max_click_share;
      f[26] = ratio(static_cast<double>(s->total_clicks), static_cast<double>(s->volume));
      f[27] = s->clicked_title_match_ratio;
    }
  }

  f[28] = c.from_catalog ? 1.0 : 0.0;
  f[29] = (c.from_catalog && c.from_query) ? 1.0 : 0.0;
  return f;
}

/// Feature rows aligned with a candidate pool, addressable by phrase.
class FeatureTable {
 public:
  FeatureTable() = default;

  void add(std::string phrase, FeatureVector row) {
    auto [it, inserted] = index_.emplace(phrase, phrases_.size());
    if (!inserted) {
      rows_[it->second] = row;
      return;
    }
    phrases_.push_back(std::move(phrase));
    rows_.push_back(row);
  }

  std::size_t size() const noexcept { return rows_.size(); }
  const std::vector<std::string>& phrases() const noexcept { return phrases_; }
  const std::vector<FeatureVector>& rows() const noexcept { return rows_; }
  const FeatureVector& row(std::size_t i) const { return rows_[i]; }

  std::optional<std::size_t> index_of(std::string_view phrase) const {
    auto it = index_.find(std::string(phrase));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> phrases_;
  std::vector<FeatureVector> rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline FeatureTable build_feature_table(const std::vector<Candidate>& pool,
                                        const CorpusStats& stats, std::size_t parallelism = 1) {
  std::vector<FeatureVector> rows(pool.size());
  parallel_for(pool.size(), parallelism,
               [&](std::size_t i) { rows[i] = extract_features(pool[i], stats); });
  FeatureTable table;
  for (std::size_t i = 0; i < pool.size(); ++i) table.add(pool[i].phrase, rows[i]);
  return table;
}

/// CSV with a phrase column followed by the 30 named features.
inline void write_feature_matrix(std::ostream& out, const FeatureTable& table) {
  out << "phrase";
  for (auto name : kFeatureNames) out << ',' << name;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << '"' << table.phrases()[i] << '"';
    for (double v : table.row(i).values) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace ptdisc

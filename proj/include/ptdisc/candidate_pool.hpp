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

// Candidate generation: frequent search queries plus statistically scored
// phrases mined from catalog titles and descriptions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ptdisc/corpus.hpp"
#include "ptdisc/error.hpp"
#include "ptdisc/util.hpp"

namespace ptdisc {

inline constexpr std::size_t kMaxPhraseTokens = 6;

/// Corpus statistics of one n-gram over titles and descriptions.
struct NgramStats {
  std::string phrase;
  std::int64_t corpus_count = 0;
  std::int64_t title_occurrences = 0;
  std::int64_t description_occurrences = 0;
  std::int64_t title_final_occurrences = 0;
  std::int64_t full_title_occurrences = 0;
  std::int64_t document_frequency = 0;
  /// Sum of title start positions (start / title length) in fixed point,
  /// scaled by kPositionScale, so totals are independent of document order.
  std::int64_t title_position_units = 0;
  std::map<std::string, std::int64_t> left_neighbor_counts;
  std::map<std::string, std::int64_t> right_neighbor_counts;
  /// Sorted ids into NgramTable::categories.
  std::vector<std::uint32_t> category_ids;

  static constexpr double kPositionScale = 68719476736.0;  // 2^36

  double mean_title_position() const {
    if (title_occurrences == 0) return 0.0;
    return static_cast<double>(title_position_units) / kPositionScale /
           static_cast<double>(title_occurrences);
  }
  std::size_t distinct_categories() const { return category_ids.size(); }

  bool operator==(const NgramStats&) const = default;

  // Last SKU index seen while counting; keeps document_frequency per-SKU.
  std::int64_t last_document = -1;
};

struct NgramTable {
  std::unordered_map<std::string, NgramStats> entries;
  std::vector<std::string> categories;  // sorted, unique
  std::int64_t total_tokens = 0;
  std::int64_t n_documents = 0;
  std::size_t max_len = kMaxPhraseTokens;

  const NgramStats* find(std::string_view phrase) const {
    auto it = entries.find(std::string(phrase));
    return it == entries.end() ? nullptr : &it->second;
  }
  std::int64_t count(std::string_view phrase) const {
    const NgramStats* s = find(phrase);
    return s ? s->corpus_count : 0;
  }
};

namespace detail {

inline void count_sequence(NgramTable& table, const Tokens& tokens, bool is_title,
                           std::int64_t doc, std::uint32_t category_id) {
  const std::size_t len = tokens.size();
  for (std::size_t i = 0; i < len; ++i) {
    std::string phrase;
    for (std::size_t n = 1; n <= table.max_len && i + n <= len; ++n) {
      if (n > 1) phrase.push_back(' ');
      phrase += tokens[i + n - 1];
      auto [it, inserted] = table.entries.try_emplace(phrase);
      NgramStats& s = it->second;
      if (inserted) s.phrase = phrase;
      ++s.corpus_count;
      if (i > 0) ++s.left_neighbor_counts[tokens[i - 1]];
      if (i + n < len) ++s.right_neighbor_counts[tokens[i + n]];
      if (s.last_document != doc) {
        s.last_document = doc;
        ++s.document_frequency;
        auto pos = std::lower_bound(s.category_ids.begin(), s.category_ids.end(), category_id);
        if (pos == s.category_ids.end() || *pos != category_id) {
          s.category_ids.insert(pos, category_id);
        }
      }
      if (is_title) {
        ++s.title_occurrences;
        s.title_position_units += std::llround(static_cast<double>(i) /
                                               static_cast<double>(len) *
                                               NgramStats::kPositionScale);
        if (i + n == len) ++s.title_final_occurrences;
        if (i == 0 && n == len) ++s.full_title_occurrences;
      } else {
        ++s.description_occurrences;
      }
    }
  }
}

inline void merge_counts(std::map<std::string, std::int64_t>& into,
                         const std::map<std::string, std::int64_t>& from) {
  for (const auto& [k, v] : from) into[k] += v;
}

inline void merge_table(NgramTable& into, NgramTable&& from) {
  into.total_tokens += from.total_tokens;
  into.n_documents += from.n_documents;
  for (auto& [phrase, src] : from.entries) {
    auto [it, inserted] = into.entries.try_emplace(phrase);
    NgramStats& dst = it->second;
    if (inserted) {
      dst = std::move(src);
      continue;
    }
    dst.corpus_count += src.corpus_count;
    dst.title_occurrences += src.title_occurrences;
    dst.description_occurrences += src.description_occurrences;
    dst.title_final_occurrences += src.title_final_occurrences;
    dst.full_title_occurrences += src.full_title_occurrences;
    dst.document_frequency += src.document_frequency;
    dst.title_position_units += src.title_position_units;
    merge_counts(dst.left_neighbor_counts, src.left_neighbor_counts);
    merge_counts(dst.right_neighbor_counts, src.right_neighbor_counts);
    std::vector<std::uint32_t> ids;
    std::set_union(dst.category_ids.begin(), dst.category_ids.end(), src.category_ids.begin(),
                   src.category_ids.end(), std::back_inserter(ids));
    dst.category_ids = std::move(ids);
  }
}

}  // namespace detail

/// Counts every contiguous n-gram (1..max_len tokens) of every title and
/// description. Documents are counted in fixed-size chunks merged in chunk
/// order, so the result does not depend on `parallelism`.
inline NgramTable count_ngrams(const Catalog& catalog, std::size_t max_len = kMaxPhraseTokens,
                               std::size_t parallelism = 1) {
  constexpr std::size_t kChunk = 256;
  std::set<std::string> category_set;
  for (const auto& sku : catalog.skus()) category_set.insert(sku.category);
  std::vector<std::string> categories(category_set.begin(), category_set.end());
  auto category_id = [&](const std::string& c) {
    return static_cast<std::uint32_t>(
        std::lower_bound(categories.begin(), categories.end(), c) - categories.begin());
  };

  const auto& skus = catalog.skus();
  const std::size_t n_chunks = (skus.size() + kChunk - 1) / kChunk;
  std::vector<NgramTable> partial(n_chunks);
  parallel_for(n_chunks, parallelism, [&](std::size_t chunk) {
    NgramTable& t = partial[chunk];
    t.max_len = max_len;
    const std::size_t end = std::min(skus.size(), (chunk + 1) * kChunk);
    for (std::size_t d = chunk * kChunk; d < end; ++d) {
      const Sku& sku = skus[d];
      const auto cat = category_id(sku.category);
      detail::count_sequence(t, sku.title, true, static_cast<std::int64_t>(d), cat);
      detail::count_sequence(t, sku.description, false, static_cast<std::int64_t>(d), cat);
      t.total_tokens += static_cast<std::int64_t>(sku.title.size() + sku.description.size());
      ++t.n_documents;
    }
  });

  NgramTable table;
  table.max_len = max_len;
  table.categories = std::move(categories);
  for (auto& t : partial) detail::merge_table(table, std::move(t));
  for (auto& [_, s] : table.entries) s.last_document = -1;
  return table;
}

/// Normalized PMI of the phrase's best binary split, using p(x) = count(x) /
/// total tokens. Unigrams get the neutral maximum 1.0; phrases absent from
/// the table get 0.
inline double best_split_npmi(const Tokens& tokens, const NgramTable& table) {
  if (tokens.size() == 1) return 1.0;
  const double total = static_cast<double>(table.total_tokens);
  const double joint = static_cast<double>(table.count(join_tokens(tokens)));
  if (joint <= 0.0 || total <= 0.0) return 0.0;
  const double p_joint = joint / total;
  if (p_joint >= 1.0) return 1.0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < tokens.size(); ++k) {
    const double left = static_cast<double>(table.count(join_tokens(tokens, 0, k)));
    const double right = static_cast<double>(table.count(join_tokens(tokens, k)));
    if (left <= 0.0 || right <= 0.0) continue;
    const double pmi = std::log(p_joint / ((left / total) * (right / total)));
    best = std::max(best, pmi / -std::log(p_joint));
  }
  return std::isfinite(best) ? best : 0.0;
}

/// min(left, right) neighbor entropy in bits.
inline double boundary_entropy(const NgramStats& s) {
  std::vector<std::int64_t> left, right;
  for (const auto& [_, c] : s.left_neighbor_counts) left.push_back(c);
  for (const auto& [_, c] : s.right_neighbor_counts) right.push_back(c);
  return std::min(entropy_bits(left), entropy_bits(right));
}

struct ScoredPhrase {
  std::string phrase;
  double quality = 0.0;
  double log_frequency = 0.0;
  double concordance = 0.0;  // best-split NPMI
  double boundary_entropy = 0.0;
};

/// Min-max bounds of the three quality components over the mined set; also
/// scores phrases outside that set by clamping into [0, 1].
class QualityModel {
 public:
  struct Range {
    double lo = 0.0;
    double hi = 0.0;
    double normalize(double v) const {
      if (!(hi > lo)) return 0.0;
      return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
    }
    void include(double v) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  };

  QualityModel() = default;
  QualityModel(Range frequency, Range concordance, Range entropy)
      : frequency_(frequency), concordance_(concordance), entropy_(entropy) {}

  ScoredPhrase score(const NgramStats& s, const NgramTable& table) const {
    ScoredPhrase out;
    out.phrase = s.phrase;
    out.log_frequency = std::log(static_cast<double>(std::max<std::int64_t>(1, s.corpus_count)));
    out.concordance = best_split_npmi(split_phrase(s.phrase), table);
    out.boundary_entropy = boundary_entropy(s);
    out.quality = (frequency_.normalize(out.log_frequency) +
                   concordance_.normalize(out.concordance) +
                   entropy_.normalize(out.boundary_entropy)) /
                  3.0;
    return out;
  }

  const Range& frequency() const { return frequency_; }
  const Range& concordance() const { return concordance_; }
  const Range& entropy() const { return entropy_; }

 private:
  Range frequency_, concordance_, entropy_;
};

struct MinedPhrases {
  std::vector<ScoredPhrase> phrases;  // sorted by phrase
  QualityModel model;
};

/// Scores every n-gram with corpus_count >= min_count as the mean of three
/// min-max normalized components: log frequency, best-split NPMI and
/// boundary entropy. A constant component normalizes to 0.
/// Throws DegenerateCorpus with fewer than two surviving phrases.
inline MinedPhrases mine_quality_phrases(const NgramTable& table, std::int64_t min_count = 3) {
  std::vector<const NgramStats*> survivors;
  for (const auto& [_, s] : table.entries) {
    if (s.corpus_count >= min_count) survivors.push_back(&s);
  }
  if (survivors.size() < 2) {
    throw Error(ErrorCode::kDegenerateCorpus,
                std::to_string(survivors.size()) + " phrase(s) reach min_count " +
                    std::to_string(min_count));
  }
  std::sort(survivors.begin(), survivors.end(),
            [](const NgramStats* a, const NgramStats* b) { return a->phrase < b->phrase; });

  MinedPhrases out;
  out.phrases.reserve(survivors.size());
  const double inf = std::numeric_limits<double>::infinity();
  QualityModel::Range f{inf, -inf}, c{inf, -inf}, e{inf, -inf};
  for (const NgramStats* s : survivors) {
    ScoredPhrase p;
    p.phrase = s->phrase;
    p.log_frequency = std::log(static_cast<double>(s->corpus_count));
    p.concordance = best_split_npmi(split_phrase(s->phrase), table);
    p.boundary_entropy = boundary_entropy(*s);
    f.include(p.log_frequency);
    c.include(p.concordance);
    e.include(p.boundary_entropy);
    out.phrases.push_back(std::move(p));
  }
  out.model = QualityModel(f, c, e);
  for (auto& p : out.phrases) {
    p.quality = (f.normalize(p.log_frequency) + c.normalize(p.concordance) +
                 e.normalize(p.boundary_entropy)) /
                3.0;
  }
  return out;
}

/// Queries with volume >= min_volume, sorted.
inline std::vector<std::string> extract_query_candidates(const QueryLog& log,
                                                         std::int64_t min_volume) {
  if (min_volume < 1) throw Error(ErrorCode::kConfigError, "min_volume must be >= 1");
  std::vector<std::string> out;
  for (const auto& q : log.records()) {
    if (q.volume >= min_volume) out.push_back(q.query);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct Candidate {
  std::string phrase;
  bool from_query = false;
  bool from_catalog = false;
  std::int64_t query_volume = 0;
  std::optional<NgramStats> ngram;
  double quality = 0.0;

  std::size_t token_count() const { return split_phrase(phrase).size(); }
};

/// Union of query and catalog candidates keyed by phrase, sorted by phrase.
/// Query-only phrases take their n-gram statistics and a clamped quality
/// score when the catalog contains them; otherwise quality is 0. Phrases that
/// are empty or longer than kMaxPhraseTokens are dropped.
inline std::vector<Candidate> build_candidate_pool(const std::vector<std::string>& query_cands,
                                                   const MinedPhrases& phrase_cands,
                                                   const QueryLog& log,
                                                   const NgramTable& table) {
  std::map<std::string, Candidate> pool;
  auto valid = [](const std::string& phrase) {
    const std::size_t n = split_phrase(phrase).size();
    return n >= 1 && n <= kMaxPhraseTokens;
  };
  for (const auto& p : phrase_cands.phrases) {
    if (!valid(p.phrase)) continue;
    Candidate& c = pool[p.phrase];
    c.phrase = p.phrase;
    c.from_catalog = true;
    c.quality = p.quality;
    if (const NgramStats* s = table.find(p.phrase)) c.ngram = *s;
  }
  for (const auto& q : query_cands) {
    if (!valid(q)) continue;
    auto [it, inserted] = pool.try_emplace(q);
    Candidate& c = it->second;
    c.phrase = q;
    c.from_query = true;
    if (const QueryRecord* r = log.find(q)) c.query_volume = r->volume;
    if (inserted) {
      if (const NgramStats* s = table.find(q)) {
        c.ngram = *s;
        c.quality = phrase_cands.model.score(*s, table).quality;
      }
    }
  }
  std::vector<Candidate> out;
  out.reserve(pool.size());
  for (auto& [_, c] : pool) out.push_back(std::move(c));
  return out;
}

inline nlohmann::json to_json(const Candidate& c) {
  return {{"phrase", c.phrase},
          {"from_query", c.from_query},
          {"from_catalog", c.from_catalog},
          {"query_volume", c.query_volume},
          {"quality", c.quality}};
}

inline void write_candidates(std::ostream& out, const std::vector<Candidate>& pool) {
  for (const auto& c : pool) out << to_json(c).dump() << '\n';
}

}  // namespace ptdisc

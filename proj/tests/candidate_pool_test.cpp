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


#include <algorithm>
#include <sstream>

#include <gtest/gtest.h>

#include "ptdisc/candidate_pool.hpp"
#include "testing.hpp"

namespace ptdisc {
namespace {

std::vector<Tokens> all_sequences(const Catalog& c) {
  std::vector<Tokens> seqs;
  for (const auto& s : c.skus()) {
    seqs.push_back(s.title);
    if (!s.description.empty()) seqs.push_back(s.description);
  }
  return seqs;
}

TEST(Ngrams, CountsSharedSpans) {
  const NgramTable t = count_ngrams(testing::catalog_of({"wood glue", "wood glue bottle"}));
  EXPECT_EQ(t.count("wood glue"), 2);
  EXPECT_EQ(t.count("glue bottle"), 1);
  EXPECT_EQ(t.count("wood"), 2);
  EXPECT_EQ(t.total_tokens, 5);
  EXPECT_EQ(t.n_documents, 2);
}

TEST(Ngrams, SpansLongerThanSixAreAbsent) {
  const NgramTable t = count_ngrams(testing::catalog_of({"a b c d e f g"}));
  EXPECT_EQ(t.count("a b c d e f"), 1);
  EXPECT_EQ(t.find("a b c d e f g"), nullptr);
}

TEST(Ngrams, TitleInitialPhraseHasPositionZero) {
  const NgramTable t =
      count_ngrams(testing::catalog_of({"hammer drill", "hammer set", "hammer"}));
  const NgramStats* s = t.find("hammer");
  ASSERT_NE(s, nullptr);
  EXPECT_EQ(s->mean_title_position(), 0.0);
  EXPECT_EQ(s->full_title_occurrences, 1);
  EXPECT_EQ(s->title_final_occurrences, 1);
}

TEST(Ngrams, MeanTitlePosition) {
  const NgramTable t = count_ngrams(testing::catalog_of({"big red drill", "drill"}));
  EXPECT_NEAR(t.find("drill")->mean_title_position(), (2.0 / 3.0 + 0.0) / 2.0, 1e-9);
}

TEST(Ngrams, TitleAndDescriptionOccurrencesMatchRecount) {
  const auto titles = std::vector<std::string>{"cordless drill kit", "drill bit set"};
  const auto descs = std::vector<std::string>{"a drill for the drill bit", ""};
  const Catalog c = testing::catalog_of(titles, descs, {"tools", "accessories"});
  const NgramTable t = count_ngrams(c);
  std::vector<Tokens> title_seqs, desc_seqs;
  for (const auto& s : c.skus()) {
    title_seqs.push_back(s.title);
    desc_seqs.push_back(s.description);
  }
  const auto tc = testing::oracle::ngram_counts(title_seqs, 6);
  const auto dc = testing::oracle::ngram_counts(desc_seqs, 6);
  for (const auto& [phrase, s] : t.entries) {
    const auto ti = tc.find(phrase);
    const auto di = dc.find(phrase);
    EXPECT_EQ(s.title_occurrences, ti == tc.end() ? 0 : ti->second) << phrase;
    EXPECT_EQ(s.description_occurrences, di == dc.end() ? 0 : di->second) << phrase;
  }
  EXPECT_EQ(t.find("drill")->document_frequency, 2);
  EXPECT_EQ(t.find("drill")->distinct_categories(), 2u);
  EXPECT_EQ(t.find("drill bit")->corpus_count, 2);
}

TEST(Ngrams, OrderAndParallelismIndependent) {
  auto titles = testing::twenty_titles();
  const NgramTable a = count_ngrams(testing::catalog_of(titles));
  std::reverse(titles.begin(), titles.end());
  const NgramTable b = count_ngrams(testing::catalog_of(titles), kMaxPhraseTokens, 4);
  ASSERT_EQ(a.entries.size(), b.entries.size());
  for (const auto& [phrase, s] : a.entries) {
    const NgramStats* o = b.find(phrase);
    ASSERT_NE(o, nullptr);
    EXPECT_EQ(s.corpus_count, o->corpus_count);
    EXPECT_EQ(s.title_position_units, o->title_position_units);
    EXPECT_EQ(s.left_neighbor_counts, o->left_neighbor_counts);
    EXPECT_EQ(s.right_neighbor_counts, o->right_neighbor_counts);
  }
}

// Counts, NPMI and neighbor entropy agree with exhaustive recounting.
TEST(OracleEquivalence, TwentyTitleFixture) {
  const Catalog c = testing::catalog_of(testing::twenty_titles());
  const NgramTable t = count_ngrams(c);
  const auto seqs = all_sequences(c);
  const auto counts = testing::oracle::ngram_counts(seqs, kMaxPhraseTokens);
  ASSERT_EQ(t.entries.size(), counts.size());
  EXPECT_EQ(t.total_tokens, testing::oracle::total_tokens(seqs));
  for (const auto& [phrase, n] : counts) {
    const NgramStats* s = t.find(phrase);
    ASSERT_NE(s, nullptr) << phrase;
    EXPECT_EQ(s->corpus_count, n) << phrase;
    const Tokens tokens = split_phrase(phrase);
    EXPECT_NEAR(best_split_npmi(tokens, t), testing::oracle::npmi(seqs, tokens), 1e-9) << phrase;
    const auto nb = testing::oracle::neighbors(seqs, tokens);
    EXPECT_EQ(s->left_neighbor_counts, nb.left) << phrase;
    EXPECT_EQ(s->right_neighbor_counts, nb.right) << phrase;
    EXPECT_NEAR(boundary_entropy(*s),
                std::min(testing::oracle::entropy_bits(nb.left),
                         testing::oracle::entropy_bits(nb.right)),
                1e-9)
        << phrase;
  }
}

TEST(Concordance, CohesivePhraseBeatsScatteredPair) {
  std::vector<std::string> titles = testing::twenty_titles();
  const NgramTable t = count_ngrams(testing::catalog_of(titles));
  // "light" and "bulb" match "ceiling" and "fan" in frequency but never meet.
  ASSERT_EQ(t.count("ceiling"), t.count("fan"));
  const double cohesive = best_split_npmi({"ceiling", "fan"}, t);
  const double scattered = best_split_npmi({"light", "bulb"}, t);
  EXPECT_GT(cohesive, scattered);
  EXPECT_EQ(best_split_npmi({"wood"}, t), 1.0);
}

TEST(Mining, MinCountFilters) {
  const NgramTable t = count_ngrams(testing::catalog_of(testing::twenty_titles()));
  const MinedPhrases m = mine_quality_phrases(t, 3);
  auto has = [&](const std::string& p) {
    return std::any_of(m.phrases.begin(), m.phrases.end(),
                       [&](const ScoredPhrase& s) { return s.phrase == p; });
  };
  ASSERT_EQ(t.count("wood glue"), 2);
  EXPECT_FALSE(has("wood glue"));
  EXPECT_TRUE(has("ceiling fan"));
  EXPECT_TRUE(std::is_sorted(m.phrases.begin(), m.phrases.end(),
                             [](const auto& a, const auto& b) { return a.phrase < b.phrase; }));
  for (const auto& p : m.phrases) {
    EXPECT_GE(p.quality, 0.0);
    EXPECT_LE(p.quality, 1.0);
  }
}

TEST(Mining, SingleSurvivorIsDegenerate) {
  const NgramTable t = count_ngrams(testing::catalog_of({"hammer", "hammer", "hammer", "saw"}));
  try {
    mine_quality_phrases(t, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateCorpus);
  }
}

TEST(Mining, ModelReproducesMinedScores) {
  const NgramTable t = count_ngrams(testing::catalog_of(testing::twenty_titles()));
  const MinedPhrases m = mine_quality_phrases(t, 2);
  for (const auto& p : m.phrases) {
    EXPECT_NEAR(m.model.score(*t.find(p.phrase), t).quality, p.quality, 1e-12) << p.phrase;
  }
}

QueryLog log_of(const std::vector<std::pair<std::string, std::int64_t>>& volumes) {
  QueryLog log;
  for (const auto& [q, v] : volumes) log.add({normalize_phrase(q), v, {}, {}});
  return log;
}

TEST(QueryCandidates, VolumeThreshold) {
  const QueryLog log = log_of({{"hammer", 100}, {"ge", 50}, {"drill bit", 5}});
  EXPECT_EQ(extract_query_candidates(log, 10), (std::vector<std::string>{"ge", "hammer"}));
  EXPECT_EQ(extract_query_candidates(log, 1).size(), 3u);
  EXPECT_TRUE(extract_query_candidates(QueryLog{}, 1).empty());
  EXPECT_THROW(extract_query_candidates(log, 0), Error);
}

TEST(CandidatePool, SharedPhraseMergesSources) {
  const Catalog c = testing::catalog_of({"flashlight", "flashlight", "flashlight", "led lamp",
                                         "led lamp", "led lamp"});
  const NgramTable t = count_ngrams(c);
  const MinedPhrases m = mine_quality_phrases(t, 3);
  const QueryLog log = log_of({{"flashlight", 20}});
  const auto pool = build_candidate_pool({"flashlight"}, m, log, t);
  const auto it = std::find_if(pool.begin(), pool.end(),
                               [](const Candidate& x) { return x.phrase == "flashlight"; });
  ASSERT_NE(it, pool.end());
  EXPECT_TRUE(it->from_query);
  EXPECT_TRUE(it->from_catalog);
  EXPECT_EQ(it->query_volume, 20);
  EXPECT_EQ(std::count_if(pool.begin(), pool.end(),
                          [](const Candidate& x) { return x.phrase == "flashlight"; }),
            1);
}

TEST(CandidatePool, DisjointUnion) {
  const Catalog c = testing::catalog_of(
      {"aa bb", "aa bb", "aa bb", "cc", "cc", "cc"});
  const NgramTable t = count_ngrams(c);
  MinedPhrases m = mine_quality_phrases(t, 3);
  ASSERT_EQ(m.phrases.size(), 4u);  // aa, aa bb, bb, cc
  const auto pool = build_candidate_pool({"q1", "q2", "q3"}, m, QueryLog{}, t);
  EXPECT_EQ(pool.size(), 7u);
  EXPECT_TRUE(std::is_sorted(pool.begin(), pool.end(),
                             [](const auto& a, const auto& b) { return a.phrase < b.phrase; }));
}

TEST(CandidatePool, DropsOverlongQueries) {
  const NgramTable t = count_ngrams(testing::catalog_of({"aa", "aa", "aa", "bb", "bb", "bb"}));
  const MinedPhrases m = mine_quality_phrases(t, 3);
  const auto pool = build_candidate_pool({"one two three four five six seven eight"}, m,
                                         QueryLog{}, t);
  EXPECT_EQ(pool.size(), 2u);
}

TEST(CandidatePool, QueryOnlyPhraseGetsCatalogStats) {
  const Catalog c = testing::catalog_of(testing::twenty_titles());
  const NgramTable t = count_ngrams(c);
  const MinedPhrases m = mine_quality_phrases(t, 3);
  const auto pool = build_candidate_pool({"wood glue", "not in catalog"}, m, QueryLog{}, t);
  for (const auto& cand : pool) {
    if (cand.phrase == "wood glue") {
      ASSERT_TRUE(cand.ngram.has_value());
      EXPECT_EQ(cand.ngram->corpus_count, 2);
      EXPECT_FALSE(cand.from_catalog);
      EXPECT_GE(cand.quality, 0.0);
      EXPECT_LE(cand.quality, 1.0);
    }
    if (cand.phrase == "not in catalog") {
      EXPECT_FALSE(cand.ngram.has_value());
      EXPECT_EQ(cand.quality, 0.0);
    }
  }
}

TEST(CandidatePool, JsonlExport) {
  const NgramTable t = count_ngrams(testing::catalog_of({"aa", "aa", "aa", "bb", "bb", "bb"}));
  const auto pool = build_candidate_pool({}, mine_quality_phrases(t, 3), QueryLog{}, t);
  std::ostringstream out;
  write_candidates(out, pool);
  std::istringstream in(out.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("phrase").get<std::string>(), pool[n].phrase);
    ++n;
  }
  EXPECT_EQ(n, pool.size());
}

}  // namespace
}  // namespace ptdisc

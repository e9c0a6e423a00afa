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

#include "ptdisc/features.hpp"
#include "ptdisc/simulator.hpp"
#include "testing.hpp"

namespace ptdisc {
namespace {

Lexicons lexicons() { return {{"ge", "acme"}, default_unit_lexicon(), default_stopwords()}; }

TEST(ClickEntropy, UniformOverFour) {
  EXPECT_NEAR(click_entropy({{"a", 5}, {"b", 5}, {"c", 5}, {"d", 5}}), 2.0, 1e-12);
}

TEST(ClickEntropy, SingleSku) { EXPECT_EQ(click_entropy({{"a", 9}}), 0.0); }

TEST(ClickEntropy, ThreeToOne) {
  EXPECT_NEAR(click_entropy({{"a", 3}, {"b", 1}}), 0.811278, 1e-6);
  EXPECT_NEAR(click_entropy({{"a", 3}, {"b", 1}}),
              testing::oracle::entropy_bits({{"a", 3}, {"b", 1}}), 1e-12);
}

TEST(ClickEntropy, EmptyAndZeroCounts) {
  EXPECT_EQ(click_entropy({}), 0.0);
  EXPECT_EQ(click_entropy({{"a", 0}, {"b", 4}}), 0.0);
}

struct Fixture {
  Catalog catalog = testing::catalog_of(
      {"GE Refrigerator 7.4 cu ft", "Acme wood glue", "wood glue bottle", "7.4 cu ft freezer"},
      {"", "wood glue for the wood", "", ""}, {"appliances", "paint", "paint", "appliances"});
  QueryLog log;
  CorpusStats stats;

  Fixture() {
    log.add({"wood glue", 40, {{"paint", 30}, {"tools", 10}}, {{"S2", 3}, {"S3", 1}}});
    log.add({"7.4 cu ft", 8, {{"appliances", 8}}, {{"S1", 2}}});
    stats = compute_corpus_stats(catalog, log, lexicons());
  }

  Candidate candidate(const std::string& phrase, bool from_query, bool from_catalog) const {
    Candidate c;
    c.phrase = phrase;
    c.from_query = from_query;
    c.from_catalog = from_catalog;
    if (const NgramStats* s = stats.ngrams.find(phrase)) c.ngram = *s;
    return c;
  }
};

TEST(Features, DimensionAndNames) {
  Fixture fx;
  const FeatureVector f = extract_features(fx.candidate("wood glue", true, true), fx.stats);
  EXPECT_EQ(f.values.size(), 30u);
  EXPECT_EQ(kFeatureNames.size(), 30u);
  EXPECT_EQ(FeatureVector::size(), 30u);
  EXPECT_EQ(feature_schema_digest().size(), 16u);
}

TEST(Features, DigitAndUnit) {
  Fixture fx;
  const FeatureVector f = extract_features(fx.candidate("7.4 cu ft", true, true), fx.stats);
  EXPECT_EQ(f[3], 1.0);
  EXPECT_EQ(f[4], 1.0);
  const FeatureVector g = extract_features(fx.candidate("wood glue", true, true), fx.stats);
  EXPECT_EQ(g[3], 0.0);
  EXPECT_EQ(g[4], 0.0);
}

TEST(Features, BrandFlags) {
  Fixture fx;
  const FeatureVector f = extract_features(fx.candidate("ge refrigerator", false, true), fx.stats);
  EXPECT_EQ(f[5], 1.0);
  EXPECT_EQ(f[6], 1.0);
  const FeatureVector g = extract_features(fx.candidate("glue for", false, true), fx.stats);
  EXPECT_EQ(g[5], 0.0);
  EXPECT_EQ(g[7], 1.0);
}

TEST(Features, NoQueryRecordZeroFillsSearchBlock) {
  Fixture fx;
  const FeatureVector f =
      extract_features(fx.candidate("wood glue bottle", false, true), fx.stats);
  for (std::size_t i = kSearchFeatureBegin; i < kSearchFeatureEnd; ++i) EXPECT_EQ(f[i], 0.0) << i;
  EXPECT_EQ(f[18], 0.0);
  EXPECT_EQ(f[28], 1.0);
  EXPECT_EQ(f[29], 0.0);
}

TEST(Features, SearchBlockValues) {
  Fixture fx;
  const FeatureVector f = extract_features(fx.candidate("wood glue", true, true), fx.stats);
  EXPECT_EQ(f[18], 1.0);
  EXPECT_NEAR(f[19], std::log1p(40.0), 1e-12);
  EXPECT_NEAR(f[20], 40.0 / 48.0, 1e-12);
  EXPECT_NEAR(f[21], 30.0 / 40.0, 1e-12);
  EXPECT_NEAR(f[22], testing::oracle::entropy_bits({{"p", 30}, {"t", 10}}), 1e-12);
  EXPECT_NEAR(f[23], std::log1p(2.0), 1e-12);
  EXPECT_NEAR(f[24], 0.811278, 1e-6);
  EXPECT_NEAR(f[25], 0.75, 1e-12);
  EXPECT_NEAR(f[26], 4.0 / 40.0, 1e-12);
  EXPECT_NEAR(f[27], 1.0, 1e-12);
  EXPECT_EQ(f[29], 1.0);
}

TEST(Features, CatalogBlockMatchesRecount) {
  Fixture fx;
  const FeatureVector f = extract_features(fx.candidate("wood glue", true, true), fx.stats);
  EXPECT_NEAR(f[8], std::log1p(2.0), 1e-12);   // two titles
  EXPECT_NEAR(f[9], std::log1p(1.0), 1e-12);   // one description
  EXPECT_NEAR(f[10], 2.0 / 4.0, 1e-12);        // two of four SKUs
  EXPECT_NEAR(f[11], (1.0 / 3.0 + 0.0) / 2.0, 1e-9);
  EXPECT_NEAR(f[12], 0.5, 1e-12);
  EXPECT_NEAR(f[13], std::log1p(1.0), 1e-12);
}

TEST(CorpusStats, PermutedCatalogGivesSameFeatures) {
  Fixture fx;
  std::vector<std::string> titles;
  for (const auto& s : fx.catalog.skus()) titles.push_back(join_tokens(s.title));
  std::vector<std::size_t> order = {3, 1, 0, 2};
  Catalog permuted;
  for (std::size_t i : order) permuted.add(fx.catalog.skus()[i]);
  const CorpusStats other = compute_corpus_stats(permuted, fx.log, lexicons(), 3);
  for (const std::string p : {"wood glue", "7.4 cu ft", "glue", "cu ft freezer"}) {
    Candidate a = fx.candidate(p, true, true);
    Candidate b = a;
    b.ngram = *other.ngrams.find(p);
    EXPECT_EQ(extract_features(a, fx.stats), extract_features(b, other)) << p;
  }
}

TEST(CorpusStats, EmptyBrandLexicon) {
  Fixture fx;
  try {
    compute_corpus_stats(fx.catalog, fx.log, {{}, default_unit_lexicon(), default_stopwords()});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyLexicon);
  }
}

TEST(Features, UnsetLexiconsAreSchemaMismatch) {
  CorpusStats empty;
  Candidate c;
  c.phrase = "hammer";
  try {
    extract_features(c, empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaMismatch);
  }
}

TEST(FeatureTable, MatrixCsvHasHeaderAndRows) {
  const World w = generate_world(testing::small_world());
  const PreparedCorpus corpus = prepare_corpus(w.catalog, w.query_log, world_lexicons(w), {});
  std::ostringstream out;
  write_feature_matrix(out, corpus.features);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 30);
  EXPECT_EQ(header.rfind("phrase,quality,", 0), 0u);
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, corpus.features.size());
  EXPECT_EQ(corpus.features.size(), corpus.pool.size());
}

TEST(FeatureTable, ParallelismInvariant) {
  const World w = generate_world(testing::small_world());
  const PreparedCorpus a = prepare_corpus(w.catalog, w.query_log, world_lexicons(w), {5, 3, 1});
  const PreparedCorpus b = prepare_corpus(w.catalog, w.query_log, world_lexicons(w), {5, 3, 4});
  EXPECT_EQ(a.features.phrases(), b.features.phrases());
  EXPECT_EQ(a.features.rows(), b.features.rows());
}

}  // namespace
}  // namespace ptdisc

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


#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "ptdisc/corpus.hpp"
#include "testing.hpp"

namespace ptdisc {
namespace {

TEST(Normalize, LowercasesAndCollapsesWhitespace) {
  EXPECT_EQ(normalize_phrase("GE Refrigerator  7.4 Cu Ft"), "ge refrigerator 7.4 cu ft");
}

TEST(Normalize, StripsEdgePunctuation) { EXPECT_EQ(normalize_phrase("Drill-Bit!"), "drill-bit"); }

TEST(Normalize, NothingLeftIsEmptyPhrase) {
  try {
    normalize_phrase("  !! ");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyPhrase);
  }
}

TEST(Normalize, InternalPunctuationRules) {
  EXPECT_EQ(normalize_tokens("2.5 in. x 10 ft"), (Tokens{"2.5", "in", "x", "10", "ft"}));
  EXPECT_EQ(normalize_tokens("1/2-in PVC pipe"), (Tokens{"1/2-in", "pvc", "pipe"}));
  EXPECT_EQ(normalize_tokens("Men's boots, steel-toe"), (Tokens{"mens", "boots", "steel-toe"}));
  EXPECT_EQ(normalize_tokens("a - b"), (Tokens{"a", "b"}));
  EXPECT_EQ(normalize_tokens("end."), (Tokens{"end"}));
  EXPECT_TRUE(normalize_tokens("").empty());
}

TEST(Normalize, KeepsNonAsciiBytes) {
  EXPECT_EQ(normalize_phrase("Caf\xc3\xa9 Table"), "caf\xc3\xa9 table");
}

TEST(Catalog, ParsesWellFormedRecords) {
  const Catalog c = parse_catalog(
      R"({"sku_id":"S1","title":"Utility Sink","category":"plumbing","brand":"Acme"})"
      "\n"
      R"({"sku_id":"S2","title":"Wood Glue","description":"Strong bond.","category":"paint"})"
      "\n");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.skus()[0].title, (Tokens{"utility", "sink"}));
  EXPECT_EQ(c.skus()[0].brand, std::optional<std::string>("acme"));
  EXPECT_EQ(c.skus()[1].description, (Tokens{"strong", "bond"}));
  EXPECT_FALSE(c.skus()[1].brand.has_value());
  EXPECT_EQ(c.find("S2"), &c.skus()[1]);
  EXPECT_EQ(c.find("S9"), nullptr);
  EXPECT_EQ(c.digest().size(), 16u);
}

TEST(Catalog, MissingTitleReportsLine) {
  try {
    parse_catalog(R"({"sku_id":"S1","title":"a","category":"x"})"
                  "\n\n"
                  R"({"sku_id":"S2","category":"x"})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_EQ(e.line(), std::optional<std::size_t>(3));
  }
}

TEST(Catalog, MalformedJsonReportsLine) {
  try {
    parse_catalog("{nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_EQ(e.line(), std::optional<std::size_t>(1));
  }
}

TEST(Catalog, DuplicateSkuId) {
  try {
    parse_catalog(R"({"sku_id":"S1","title":"a","category":"x"})"
                  "\n"
                  R"({"sku_id":"S1","title":"b","category":"x"})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicateId);
    EXPECT_NE(std::string(e.what()).find("S1"), std::string::npos);
  }
}

TEST(Catalog, MissingFileIsIoError) {
  try {
    load_catalog("/nonexistent/catalog.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoError);
    EXPECT_NE(std::string(e.what()).find("/nonexistent/catalog.jsonl"), std::string::npos);
  }
}

TEST(Catalog, WriteThenParseRoundTrips) {
  const Catalog a = testing::catalog_of({"Wood Glue", "Utility Sink 24 in"}, {"for wood"});
  std::ostringstream out;
  write_catalog(out, a);
  const Catalog b = parse_catalog(out.str());
  ASSERT_EQ(b.size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.skus()[i], b.skus()[i]);
}

TEST(QueryLog, MergesNormalizedDuplicates) {
  const QueryLog log = parse_query_log(
      R"({"query":"Hammer","volume":10,"category_volumes":{"tools":6},"sku_clicks":{"S1":2}})"
      "\n"
      R"({"query":"hammer ","volume":5,"category_volumes":{"tools":1},"sku_clicks":{"S1":1,"S2":3}})");
  ASSERT_EQ(log.size(), 1u);
  const QueryRecord& r = log.records()[0];
  EXPECT_EQ(r.query, "hammer");
  EXPECT_EQ(r.volume, 15);
  EXPECT_EQ(r.category_volumes.at("tools"), 7);
  EXPECT_EQ(r.sku_clicks.at("S1"), 3);
  EXPECT_EQ(r.sku_clicks.at("S2"), 3);
}

TEST(QueryLog, NegativeVolume) {
  try {
    parse_query_log(R"({"query":"hammer","volume":-1})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNegativeCount);
  }
}

TEST(QueryLog, NegativeClickCount) {
  try {
    parse_query_log(R"({"query":"hammer","volume":3,"sku_clicks":{"S1":-2}})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNegativeCount);
  }
}

TEST(QueryLog, CategoryVolumesMayNotExceedVolume) {
  try {
    parse_query_log(R"({"query":"hammer","volume":3,"category_volumes":{"a":2,"b":2}})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
  }
}

TEST(QueryLog, EmptyFileIsEmptyLog) {
  EXPECT_TRUE(parse_query_log("").empty());
  EXPECT_TRUE(parse_query_log("\n  \n").empty());
}

TEST(QueryLog, FileRoundTrip) {
  testing::TempDir dir;
  {
    std::ofstream f(dir.file("q.jsonl"));
    f << R"({"query":"Wood Glue","volume":40,"category_volumes":{"paint":30},"sku_clicks":{"S1":12}})"
      << '\n';
  }
  const QueryLog log = load_query_log(dir.file("q.jsonl"));
  std::ostringstream out;
  write_query_log(out, log);
  const QueryLog again = parse_query_log(out.str());
  ASSERT_EQ(again.size(), 1u);
  EXPECT_EQ(again.records()[0], log.records()[0]);
  EXPECT_NE(log.find("wood glue"), nullptr);
}

TEST(Digest, DependsOnBytes) {
  const Catalog a = parse_catalog(R"({"sku_id":"S1","title":"a","category":"x"})");
  const Catalog b = parse_catalog(R"({"sku_id":"S1","title":"a","category":"x"} )");
  EXPECT_NE(a.digest(), b.digest());
  EXPECT_EQ(a.digest(), parse_catalog(R"({"sku_id":"S1","title":"a","category":"x"})").digest());
}

}  // namespace
}  // namespace ptdisc

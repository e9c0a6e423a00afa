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

// Synthetic worlds for desk-scale evaluation: a catalog, a query log and
// three ontology versions (V1 seeds, V2 truth, V2 with injected label
// noise), plus the simulated V1 -> V2 labeling oracle and the paired
// clean/noisy-truth experiment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptdisc/active_loop.hpp"
#include "ptdisc/candidate_pool.hpp"
#include "ptdisc/classifier.hpp"
#include "ptdisc/corpus.hpp"
#include "ptdisc/error.hpp"
#include "ptdisc/features.hpp"

namespace ptdisc {

struct Ontology {
  std::string version;
  std::set<std::string> pts;

  bool operator==(const Ontology&) const = default;
};

struct WorldConfig {
  std::size_t n_true_pts = 300;
  std::size_t n_v1_pts = 60;
  std::size_t n_noise_candidates = 1700;
  std::size_t n_skus = 3000;
  std::size_t n_queries = 1500;
  std::size_t n_categories = 12;
  double signal_strength = 3.0;
  double false_positive_rate = 0.15;
  double missing_positive_rate = 0.15;
  std::uint64_t seed = 1;

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::kConfigError, m); };
    if (n_true_pts < 1 || n_v1_pts < 1 || n_noise_candidates < 1 || n_skus < 1 ||
        n_queries < 1 || n_categories < 1) {
      fail("all world counts must be >= 1");
    }
    if (n_v1_pts >= n_true_pts) fail("n_v1_pts must be < n_true_pts");
    if (n_noise_candidates < 10) fail("n_noise_candidates must be >= 10");
    if (!(false_positive_rate >= 0.0 && false_positive_rate < 1.0) ||
        !(missing_positive_rate >= 0.0 && missing_positive_rate < 1.0)) {
      fail("noise rates must be in [0, 1)");
    }
    if (!(signal_strength >= 0.0)) fail("signal_strength must be >= 0");
  }
};

inline nlohmann::json to_json(const WorldConfig& c) {
  return {{"n_true_pts", c.n_true_pts},
          {"n_v1_pts", c.n_v1_pts},
          {"n_noise_candidates", c.n_noise_candidates},
          {"n_skus", c.n_skus},
          {"n_queries", c.n_queries},
          {"n_categories", c.n_categories},
          {"signal_strength", c.signal_strength},
          {"false_positive_rate", c.false_positive_rate},
          {"missing_positive_rate", c.missing_positive_rate},
          {"seed", c.seed}};
}

inline WorldConfig world_config_from_json(const nlohmann::json& j, WorldConfig c = {}) {
  c.n_true_pts = j.value("n_true_pts", c.n_true_pts);
  c.n_v1_pts = j.value("n_v1_pts", c.n_v1_pts);
  c.n_noise_candidates = j.value("n_noise_candidates", c.n_noise_candidates);
  c.n_skus = j.value("n_skus", c.n_skus);
  c.n_queries = j.value("n_queries", c.n_queries);
  c.n_categories = j.value("n_categories", c.n_categories);
  c.signal_strength = j.value("signal_strength", c.signal_strength);
  c.false_positive_rate = j.value("false_positive_rate", c.false_positive_rate);
  c.missing_positive_rate = j.value("missing_positive_rate", c.missing_positive_rate);
  c.seed = j.value("seed", c.seed);
  return c;
}

struct World {
  WorldConfig config;
  Catalog catalog;
  QueryLog query_log;
  Ontology v1;
  Ontology v2;
  Ontology v2_noisy;
};

namespace detail {

class WordMaker {
 public:
  explicit WordMaker(Rng& rng) : rng_(rng) {
    for (const auto& w : default_stopwords()) taken_.insert(w);
    for (const auto& w : default_unit_lexicon()) taken_.insert(w);
  }

  std::string make(std::size_t min_syllables, std::size_t max_syllables) {
    static constexpr std::string_view kOnsets[] = {"b",  "d",  "f",  "g",  "k",  "l",  "m",
                                                   "n",  "p",  "r",  "s",  "t",  "v",  "z",
                                                   "br", "cr", "dr", "gl", "pl", "st", "tr"};
    static constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
    static constexpr std::string_view kCodas[] = {"", "", "", "n", "r", "l", "x", "s"};
    std::uniform_int_distribution<std::size_t> syl(min_syllables, max_syllables);
    for (;;) {
      std::string w;
      const std::size_t n = syl(rng_);
      for (std::size_t i = 0; i < n; ++i) {
        w += pick(kOnsets);
        w += pick(kVowels);
      }
      w += pick(kCodas);
      if (taken_.insert(w).second) return w;
    }
  }

 private:
  template <typename Array>
  std::string_view pick(const Array& a) {
    std::uniform_int_distribution<std::size_t> d(0, std::size(a) - 1);
    return a[d(rng_)];
  }

  Rng& rng_;
  std::set<std::string> taken_;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

enum class PhraseKind { kTrue, kModifier, kBrand, kDimension, kCompound };

struct PlantedPhrase {
  std::string text;
  PhraseKind kind;
  double strength;  // latent product-type-ness
  std::size_t home_category;
  std::size_t title_occurrences;
};

}  // namespace detail

/// Builds a world fully determined by cfg.seed. True product types receive
/// systematically stronger signals (query volume, click concentration, early
/// title position, category focus, click/title agreement), with the
/// separation scaled by signal_strength.
/// Throws ConfigError on inconsistent counts.
inline World generate_world(const WorldConfig& cfg) {
  cfg.validate();
  using detail::PhraseKind;
  using detail::PlantedPhrase;
  using detail::sigmoid;
  Rng rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform_index = [&](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };
  detail::WordMaker words(rng);
  const double shift = 0.4 * cfg.signal_strength;

  // Phrase inventory. Compound phrases are "modifier head" pairs, so their
  // fragments are themselves planted.
  const std::size_t n_true = cfg.n_true_pts;
  const std::size_t n_true_heads = std::max<std::size_t>(1, (n_true * 9) / 20);
  const std::size_t n_true_compounds = n_true - n_true_heads;
  const std::size_t n_noise = cfg.n_noise_candidates;
  const std::size_t n_brands = std::max<std::size_t>(1, n_noise / 28);
  const std::size_t n_dims = std::max<std::size_t>(1, n_noise / 12);
  const std::size_t n_modifiers = std::max<std::size_t>(1, n_noise / 4);
  if (n_brands + n_dims + n_modifiers >= n_noise) {
    throw Error(ErrorCode::kConfigError, "n_noise_candidates too small");
  }
  const std::size_t n_noise_compounds = n_noise - n_brands - n_dims - n_modifiers;

  std::vector<PlantedPhrase> planted;
  std::set<std::string> used;
  auto plant = [&](std::string text, PhraseKind kind) {
    if (!used.insert(text).second) return false;
    const double strength = gauss(rng) + (kind == PhraseKind::kTrue ? shift : 0.0);
    planted.push_back({std::move(text), kind, strength, uniform_index(cfg.n_categories), 0});
    return true;
  };

  std::vector<std::string> heads, modifiers, brands;
  for (std::size_t i = 0; i < n_true_heads; ++i) {
    heads.push_back(words.make(2, 3));
    plant(heads.back(), PhraseKind::kTrue);
  }
  for (std::size_t i = 0; i < n_modifiers; ++i) {
    modifiers.push_back(words.make(1, 3));
    plant(modifiers.back(), PhraseKind::kModifier);
  }
  for (std::size_t i = 0; i < n_brands; ++i) {
    brands.push_back(words.make(2, 2));
    plant(brands.back(), PhraseKind::kBrand);
  }
  {
    static constexpr std::string_view kNumbers[] = {"1",  "2",   "3",   "4",  "5",   "6",
                                                    "8",  "10",  "12",  "16", "18",  "20",
                                                    "24", "36",  "48",  "1.5", "2.5", "7.4",
                                                    "1/2", "3/4", "5/8", "60", "100", "120"};
    static constexpr std::string_view kUnits[] = {"volt", "mm",  "inch", "ft",  "gal", "lb",
                                                  "oz",   "amp", "watt", "psi", "qt",  "cu ft"};
    std::size_t made = 0;
    while (made < n_dims) {
      std::string text = std::string(kNumbers[uniform_index(std::size(kNumbers))]) + " " +
                         std::string(kUnits[uniform_index(std::size(kUnits))]);
      if (plant(text, PhraseKind::kDimension)) ++made;
      if (used.size() > 100000) break;
    }
  }
  auto plant_compounds = [&](std::size_t count, PhraseKind kind) {
    std::size_t made = 0, attempts = 0;
    while (made < count) {
      if (++attempts > 1000000) throw Error(ErrorCode::kConfigError, "vocabulary exhausted");
      std::string first = modifiers[uniform_index(modifiers.size())];
      // Noise compounds mix modifier pairs with non-product modifier+head pairs.
      const bool with_head = kind == PhraseKind::kTrue || unit(rng) < 0.6;
      std::string second = with_head ? heads[uniform_index(heads.size())]
                                     : modifiers[uniform_index(modifiers.size())];
      if (first == second) continue;
      if (plant(first + " " + second, kind)) ++made;
    }
  };
  plant_compounds(n_true_compounds, PhraseKind::kTrue);
  plant_compounds(n_noise_compounds, PhraseKind::kCompound);

  // Title occurrences: every non-brand phrase at least 3, topped up so that
  // SKUs average ~2.5 phrase slots.
  std::vector<std::size_t> slot_owner;
  {
    const std::size_t n_slot_phrases = planted.size() - n_brands;
    const double target = 2.5 * static_cast<double>(cfg.n_skus);
    const double extra_mean =
        std::max(0.0, target / static_cast<double>(n_slot_phrases) - 3.0);
    std::poisson_distribution<std::size_t> extra(extra_mean > 0.0 ? extra_mean : 1e-9);
    for (std::size_t i = 0; i < planted.size(); ++i) {
      if (planted[i].kind == PhraseKind::kBrand) continue;
      planted[i].title_occurrences = 3 + (extra_mean > 0.0 ? extra(rng) : 0);
      for (std::size_t k = 0; k < planted[i].title_occurrences; ++k) slot_owner.push_back(i);
    }
    std::shuffle(slot_owner.begin(), slot_owner.end(), rng);
  }

  // Distribute slots round-robin over SKUs, skipping repeats within a SKU.
  std::vector<std::vector<std::size_t>> sku_phrases(cfg.n_skus);
  for (std::size_t s = 0, sku = 0; s < slot_owner.size(); ++s) {
    for (std::size_t tries = 0; tries < cfg.n_skus; ++tries, sku = (sku + 1) % cfg.n_skus) {
      auto& list = sku_phrases[sku];
      if (std::find(list.begin(), list.end(), slot_owner[s]) == list.end()) {
        list.push_back(slot_owner[s]);
        sku = (sku + 1) % cfg.n_skus;
        break;
      }
    }
  }

  std::vector<std::string> categories;
  for (std::size_t c = 0; c < cfg.n_categories; ++c) {
    categories.push_back("cat-" + std::to_string(c));
  }
  static constexpr std::string_view kJoiners[] = {"with", "for", "and", "the", "of"};

  World world;
  world.config = cfg;
  std::map<std::size_t, std::vector<std::size_t>> skus_with_phrase;
  std::vector<std::size_t> sku_category(cfg.n_skus, 0);
  for (std::size_t sku = 0; sku < cfg.n_skus; ++sku) {
    auto& list = sku_phrases[sku];
    if (list.empty()) list.push_back(slot_owner[uniform_index(slot_owner.size())]);
    // Stronger phrases tend to come first in the title.
    std::vector<std::pair<double, std::size_t>> keyed;
    for (std::size_t p : list) {
      keyed.emplace_back(-planted[p].strength + 1.2 * gauss(rng), p);
    }
    std::sort(keyed.begin(), keyed.end());
    const std::size_t primary = keyed.front().second;
    const std::string& brand = brands[uniform_index(brands.size())];

    Tokens title;
    if (unit(rng) < 0.7) title.push_back(brand);
    for (const auto& [_, p] : keyed) {
      for (auto& t : split_phrase(planted[p].text)) title.push_back(std::move(t));
    }
    Tokens description;
    std::vector<std::size_t> shuffled(list.begin(), list.end());
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (std::size_t p : shuffled) {
      description.emplace_back(kJoiners[uniform_index(std::size(kJoiners))]);
      for (auto& t : split_phrase(planted[p].text)) description.push_back(std::move(t));
    }

    const std::size_t category = unit(rng) < 0.8 ? planted[primary].home_category
                                                 : uniform_index(cfg.n_categories);
    sku_category[sku] = category;
    Sku record;
    char id[32];
    std::snprintf(id, sizeof id, "SKU%06zu", sku);
    record.sku_id = id;
    record.title = std::move(title);
    record.description = std::move(description);
    record.category = categories[category];
    record.brand = brand;
    for (std::size_t p : list) skus_with_phrase[p].push_back(sku);
    world.catalog.add(std::move(record));
  }

  // Query log: planted phrases are searched with probability and volume
  // rising with strength; remaining records are low-volume long-tail
  // combinations.
  std::vector<QueryRecord> queries;
  auto sku_id = [&](std::size_t sku) { return world.catalog.skus()[sku].sku_id; };
  auto make_query = [&](const std::string& text, double strength, std::size_t home,
                        const std::vector<std::size_t>& containing, std::int64_t volume) {
    QueryRecord q;
    q.query = text;
    q.volume = std::max<std::int64_t>(1, volume);
    // Category attribution: a home share growing with strength, the rest
    // spread over a few other categories; ~5% unattributed.
    const double home_share = 0.35 + 0.6 * sigmoid(strength - 0.5) * unit(rng);
    const auto attributed = static_cast<std::int64_t>(std::floor(0.95 * static_cast<double>(q.volume)));
    const auto home_volume =
        static_cast<std::int64_t>(std::floor(home_share * static_cast<double>(attributed)));
    if (home_volume > 0) q.category_volumes[categories[home]] += home_volume;
    std::int64_t rest = attributed - home_volume;
    const std::size_t spread = 1 + uniform_index(4);
    for (std::size_t i = 0; i < spread && rest > 0; ++i) {
      const std::int64_t share = i + 1 == spread ? rest : rest / 2;
      if (share > 0) q.category_volumes[categories[uniform_index(cfg.n_categories)]] += share;
      rest -= share;
    }
    // Clicks: concentration and title agreement grow with strength.
    const double ctr = std::clamp(0.15 + 0.5 * sigmoid(strength) + 0.1 * gauss(rng), 0.05, 0.95);
    const auto clicks = static_cast<std::int64_t>(std::llround(ctr * static_cast<double>(q.volume)));
    const double match = std::clamp(0.4 + 0.55 * sigmoid(strength) + 0.1 * gauss(rng), 0.0, 1.0);
    const auto matched = containing.empty()
                             ? std::int64_t{0}
                             : static_cast<std::int64_t>(std::llround(match * static_cast<double>(clicks)));
    if (matched > 0) {
      const double kappa = 0.3 + 2.0 * sigmoid(strength);
      std::vector<double> w;
      double w_total = 0.0;
      for (std::size_t i = 0; i < containing.size(); ++i) {
        w.push_back(std::exp(kappa * gauss(rng)));
        w_total += w.back();
      }
      std::int64_t assigned = 0;
      std::size_t top = 0;
      for (std::size_t i = 0; i < containing.size(); ++i) {
        const auto c = static_cast<std::int64_t>(
            std::floor(static_cast<double>(matched) * w[i] / w_total));
        if (c > 0) q.sku_clicks[sku_id(containing[i])] += c;
        assigned += c;
        if (w[i] > w[top]) top = i;
      }
      if (matched > assigned) q.sku_clicks[sku_id(containing[top])] += matched - assigned;
    }
    const std::int64_t stray = clicks - matched;
    const std::size_t n_stray = std::min<std::size_t>(static_cast<std::size_t>(std::max<std::int64_t>(0, stray)), 6);
    for (std::size_t i = 0; i < n_stray; ++i) {
      const std::int64_t c = i + 1 == n_stray ? stray - static_cast<std::int64_t>(i) * (stray / static_cast<std::int64_t>(n_stray))
                                               : stray / static_cast<std::int64_t>(n_stray);
      if (c > 0) q.sku_clicks[sku_id(uniform_index(cfg.n_skus))] += c;
    }
    queries.push_back(std::move(q));
  };

  std::vector<std::size_t> order(planted.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t p : order) {
    if (queries.size() >= cfg.n_queries) break;
    const PlantedPhrase& ph = planted[p];
    if (unit(rng) >= sigmoid(ph.strength - 0.3)) continue;
    const double log_volume = 2.0 + 0.9 * ph.strength + 0.6 * gauss(rng);
    const auto volume = static_cast<std::int64_t>(std::llround(std::exp(log_volume)));
    static const std::vector<std::size_t> kNone;
    auto it = skus_with_phrase.find(p);
    make_query(ph.text, ph.strength, ph.home_category,
               it == skus_with_phrase.end() ? kNone : it->second, volume);
  }
  while (queries.size() < cfg.n_queries) {
    const PlantedPhrase& a = planted[uniform_index(planted.size())];
    const std::string& b = brands[uniform_index(brands.size())];
    const std::string text = unit(rng) < 0.5 ? b + " " + a.text : a.text + " " + b;
    if (split_phrase(text).size() > kMaxPhraseTokens) continue;
    std::geometric_distribution<std::int64_t> tail(0.3);
    make_query(text, -1.0 + 0.5 * gauss(rng), a.home_category, {}, 1 + tail(rng));
  }
  for (auto& q : queries) world.query_log.add(std::move(q));

  // Ontologies.
  std::vector<std::string> truth, noise;
  for (const auto& ph : planted) {
    (ph.kind == PhraseKind::kTrue ? truth : noise).push_back(ph.text);
  }
  std::sort(truth.begin(), truth.end());
  std::sort(noise.begin(), noise.end());
  world.v2 = {"V2", std::set<std::string>(truth.begin(), truth.end())};
  std::vector<std::string> shuffled_truth = truth;
  std::shuffle(shuffled_truth.begin(), shuffled_truth.end(), rng);
  world.v1 = {"V1", std::set<std::string>(shuffled_truth.begin(),
                                          shuffled_truth.begin() +
                                              static_cast<std::ptrdiff_t>(cfg.n_v1_pts))};
  const auto n_missing = static_cast<std::size_t>(
      std::llround(cfg.missing_positive_rate * static_cast<double>(truth.size())));
  const auto n_false = std::min(
      noise.size(), static_cast<std::size_t>(std::llround(cfg.false_positive_rate *
                                                          static_cast<double>(truth.size()))));
  std::shuffle(shuffled_truth.begin(), shuffled_truth.end(), rng);
  std::vector<std::string> shuffled_noise = noise;
  std::shuffle(shuffled_noise.begin(), shuffled_noise.end(), rng);
  world.v2_noisy.version = "V2-noisy";
  world.v2_noisy.pts.insert(shuffled_truth.begin() + static_cast<std::ptrdiff_t>(n_missing),
                            shuffled_truth.end());
  world.v2_noisy.pts.insert(shuffled_noise.begin(),
                            shuffled_noise.begin() + static_cast<std::ptrdiff_t>(n_false));

  std::ostringstream catalog_bytes, query_bytes;
  write_catalog(catalog_bytes, world.catalog);
  write_query_log(query_bytes, world.query_log);
  world.catalog.set_digest(hex64(fnv1a64(catalog_bytes.str())));
  world.query_log.set_digest(hex64(fnv1a64(query_bytes.str())));
  return world;
}

/// Initial positive pool for the noisy-truth arm: V1 members the noisy truth
/// keeps, plus a proportional share of its false positives.
inline std::set<std::string> noisy_seed_set(const World& world) {
  std::set<std::string> seeds;
  for (const auto& p : world.v1.pts) {
    if (world.v2_noisy.pts.count(p)) seeds.insert(p);
  }
  std::vector<std::string> false_positives;
  for (const auto& p : world.v2_noisy.pts) {
    if (!world.v2.pts.count(p)) false_positives.push_back(p);
  }
  const auto n = std::min(
      false_positives.size(),
      static_cast<std::size_t>(std::llround(world.config.false_positive_rate *
                                            static_cast<double>(world.v1.pts.size()))));
  seeds.insert(false_positives.begin(), false_positives.begin() + static_cast<std::ptrdiff_t>(n));
  return seeds;
}

/// Approves exactly the batch phrases found in the truth ontology.
inline std::vector<LabelDecision> simulated_oracle(const std::vector<ScoredCandidate>& batch,
                                                   const Ontology& truth) {
  std::vector<LabelDecision> out;
  out.reserve(batch.size());
  for (const auto& c : batch) {
    out.push_back({c.phrase, truth.pts.count(c.phrase) ? Verdict::kApproved : Verdict::kRejected});
  }
  return out;
}

struct PipelineOptions {
  std::int64_t min_volume = 5;
  std::int64_t min_count = 3;
  std::size_t parallelism = 1;
};

/// Everything the loop needs from a corpus: the candidate pool and its
/// feature rows.
struct PreparedCorpus {
  CorpusStats stats;
  MinedPhrases mined;
  std::vector<Candidate> pool;
  FeatureTable features;

  std::vector<std::string> phrases() const { return features.phrases(); }
};

inline PreparedCorpus prepare_corpus(const Catalog& catalog, const QueryLog& log,
                                     Lexicons lexicons, const PipelineOptions& opt) {
  PreparedCorpus out;
  out.stats = compute_corpus_stats(catalog, log, std::move(lexicons), opt.parallelism);
  out.mined = mine_quality_phrases(out.stats.ngrams, opt.min_count);
  const auto query_cands = extract_query_candidates(log, opt.min_volume);
  out.pool = build_candidate_pool(query_cands, out.mined, log, out.stats.ngrams);
  out.features = build_feature_table(out.pool, out.stats, opt.parallelism);
  return out;
}

inline Lexicons world_lexicons(const World& world) {
  return {brands_from_catalog(world.catalog), default_unit_lexicon(), default_stopwords()};
}

enum class TruthVariant { kClean, kNoisy };

inline std::string_view truth_variant_name(TruthVariant v) {
  return v == TruthVariant::kClean ? "clean" : "noisy";
}

struct SimulationOptions {
  Hyperparams hyperparams;
  SelectionPolicy policy = SelectionPolicy::top_k(20);
  std::size_t n_iterations = 50;
  TruthVariant truth_variant = TruthVariant::kClean;
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;
};

struct SimulationResult {
  std::vector<IterationReport> reports;
  /// Coverage of clean V2 after the last iteration.
  double final_coverage = 0.0;
  PoolState final_state;
};

/// Runs the loop against one truth variant. Both variants use the same world
/// data and loop seed; they differ only in the initial positive pool and in
/// the truth the oracle consults. Coverage is always measured against the
/// clean V2 relative to clean V1.
inline SimulationResult run_simulation(const World& world, const PreparedCorpus& corpus,
                                       const SimulationOptions& opt) {
  if (opt.n_iterations < 1) throw Error(ErrorCode::kConfigError, "n_iterations must be >= 1");
  const bool noisy = opt.truth_variant == TruthVariant::kNoisy;
  const Ontology& truth = noisy ? world.v2_noisy : world.v2;
  const std::set<std::string> seeds = noisy ? noisy_seed_set(world) : world.v1.pts;

  PoolState state = PoolState::initialize(corpus.features.phrases(), seeds);
  LoopOptions loop;
  loop.hyperparams = opt.hyperparams;
  loop.policy = opt.policy;
  loop.seed = opt.seed;
  loop.parallelism = opt.parallelism;
  loop.coverage_truth = &world.v2.pts;
  loop.coverage_baseline = &world.v1.pts;

  const LabelOracle oracle = [&](const std::vector<ScoredCandidate>& batch) {
    return simulated_oracle(batch, truth);
  };
  SimulationResult result;
  for (std::size_t i = 0; i < opt.n_iterations; ++i) {
    auto [next, report] = run_iteration(state, corpus.features, oracle, loop);
    state = std::move(next);
    result.reports.push_back(report);
  }
  result.final_coverage = result.reports.back().coverage.value_or(0.0);
  result.final_state = std::move(state);
  return result;
}

inline SimulationResult run_simulation(const World& world, const SimulationOptions& opt,
                                       const PipelineOptions& pipeline = {}) {
  const PreparedCorpus corpus =
      prepare_corpus(world.catalog, world.query_log, world_lexicons(world), pipeline);
  return run_simulation(world, corpus, opt);
}

inline void write_ontology(const std::string& path, const Ontology& o) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  for (const auto& p : o.pts) out << p << '\n';
}

inline Ontology load_ontology(const std::string& path, std::string version) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  Ontology o{std::move(version), {}};
  std::string line;
  while (std::getline(in, line)) {
    Tokens t = normalize_tokens(line);
    if (!t.empty()) o.pts.insert(join_tokens(t));
  }
  return o;
}

/// Writes catalog.jsonl, queries.jsonl, v1.txt, v2.txt, v2_noisy.txt,
/// brands.txt and world.json into `dir`.
inline void export_world(const World& world, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "catalog.jsonl");
    write_catalog(out, world.catalog);
  }
  {
    std::ofstream out(dir / "queries.jsonl");
    write_query_log(out, world.query_log);
  }
  write_ontology((dir / "v1.txt").string(), world.v1);
  write_ontology((dir / "v2.txt").string(), world.v2);
  write_ontology((dir / "v2_noisy.txt").string(), world.v2_noisy);
  {
    std::ofstream out(dir / "brands.txt");
    for (const auto& b : brands_from_catalog(world.catalog)) out << b << '\n';
  }
  std::ofstream out(dir / "world.json");
  out << to_json(world.config).dump(2) << '\n';
}

/// Re-ingests an exported world through the normal loaders.
inline World import_world(const std::filesystem::path& dir) {
  World world;
  if (std::ifstream in(dir / "world.json"); in) {
    nlohmann::json j;
    in >> j;
    world.config = world_config_from_json(j);
  }
  world.catalog = load_catalog((dir / "catalog.jsonl").string());
  world.query_log = load_query_log((dir / "queries.jsonl").string());
  world.v1 = load_ontology((dir / "v1.txt").string(), "V1");
  world.v2 = load_ontology((dir / "v2.txt").string(), "V2");
  world.v2_noisy = load_ontology((dir / "v2_noisy.txt").string(), "V2-noisy");
  return world;
}

}  // namespace ptdisc

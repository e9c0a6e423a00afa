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

// Randomized invariant checks shared by the property suite and the
// acceptance runner. Each returns the first counterexample, if any.

#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ptdisc/active_loop.hpp"
#include "ptdisc/classifier.hpp"
#include "ptdisc/corpus.hpp"
#include "testing.hpp"

namespace ptdisc::testing {

inline constexpr std::size_t kPropertyCases = 1000;

struct PropertyResult {
  std::size_t cases = 0;
  std::optional<std::string> counterexample;

  bool ok() const { return !counterexample.has_value(); }
};

namespace prop_detail {

inline std::vector<std::string> phrases(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("p" + std::to_string(i));
  return out;
}

inline std::set<std::string> random_subset(const std::vector<std::string>& from, double p,
                                           std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::set<std::string> out;
  for (const auto& x : from) {
    if (coin(rng)) out.insert(x);
  }
  return out;
}

inline Verdict random_verdict(std::mt19937_64& rng) {
  return static_cast<Verdict>(std::uniform_int_distribution<int>(0, 2)(rng));
}

inline Hyperparams tiny_forest(std::mt19937_64& rng) {
  Hyperparams hp;
  hp.n_trees = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
  hp.n_examples_per_tree = std::uniform_int_distribution<std::size_t>(10, 60)(rng);
  hp.positive_fraction = 0.25;
  hp.max_features_fraction = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
  return hp;
}

inline FeatureTable random_table(const std::vector<std::string>& names, std::mt19937_64& rng) {
  FeatureTable t;
  const auto rows = random_rows(names.size(), rng);
  for (std::size_t i = 0; i < names.size(); ++i) t.add(names[i], rows[i]);
  return t;
}

}  // namespace prop_detail

/// Labeling never changes the pool's size or breaks its partition.
inline PropertyResult check_partition_conservation(std::uint64_t seed) {
  using namespace prop_detail;
  std::mt19937_64 rng(seed);
  PropertyResult r;
  for (; r.cases < kPropertyCases; ++r.cases) {
    const auto names = phrases(std::uniform_int_distribution<std::size_t>(1, 60)(rng));
    PoolState s = PoolState::initialize(names, random_subset(names, 0.2, rng));
    const std::size_t size = s.size();
    for (int step = 0; step < 5 && !s.unlabeled.empty(); ++step) {
      std::vector<std::string> unl(s.unlabeled.begin(), s.unlabeled.end());
      std::shuffle(unl.begin(), unl.end(), rng);
      unl.resize(std::uniform_int_distribution<std::size_t>(1, unl.size())(rng));
      std::vector<ScoredCandidate> batch;
      std::vector<LabelDecision> decisions;
      for (const auto& p : unl) {
        batch.push_back({p, 0.0});
        if (std::bernoulli_distribution(0.8)(rng)) decisions.push_back({p, random_verdict(rng)});
      }
      s = complete_iteration(s, batch, decisions, LoopOptions{}).first;
      if (s.size() != size || !s.is_partition()) {
        r.counterexample = "case " + std::to_string(r.cases) + ": size " +
                           std::to_string(s.size()) + " vs " + std::to_string(size);
        return r;
      }
    }
  }
  return r;
}

/// Approved or rejected phrases never reappear in a later batch.
inline PropertyResult check_no_representation(std::uint64_t seed) {
  using namespace prop_detail;
  std::mt19937_64 rng(seed);
  PropertyResult r;
  for (; r.cases < kPropertyCases; ++r.cases) {
    const auto names = phrases(std::uniform_int_distribution<std::size_t>(6, 40)(rng));
    const FeatureTable table = random_table(names, rng);
    std::set<std::string> known = random_subset(names, 0.15, rng);
    known.insert(names.front());
    PoolState s = PoolState::initialize(names, known);
    LoopOptions opt;
    opt.hyperparams = tiny_forest(rng);
    opt.seed = rng();
    const int mode = std::uniform_int_distribution<int>(0, 2)(rng);
    opt.policy = mode == 0   ? SelectionPolicy::top_k(1 + rng() % 6)
                 : mode == 1 ? SelectionPolicy::at_threshold(
                                   std::uniform_real_distribution<double>(0, 1)(rng))
                             : SelectionPolicy::random_k(1 + rng() % 6);
    std::set<std::string> decided;
    for (int it = 0; it < 4 && !s.unlabeled.empty(); ++it) {
      const auto batch = prepare_batch(s, table, opt);
      for (const auto& c : batch) {
        if (decided.count(c.phrase) || !s.unlabeled.count(c.phrase)) {
          r.counterexample = "case " + std::to_string(r.cases) + ": re-presented " + c.phrase;
          return r;
        }
      }
      std::vector<LabelDecision> d;
      for (const auto& c : batch) {
        const Verdict v = random_verdict(rng);
        d.push_back({c.phrase, v});
        if (v != Verdict::kDeferred) decided.insert(c.phrase);
      }
      s = complete_iteration(s, batch, d, opt).first;
    }
  }
  return r;
}

/// Every confidence is k / n_trees for an integer k in [0, n_trees].
inline PropertyResult check_confidence_grid(std::uint64_t seed) {
  using namespace prop_detail;
  std::mt19937_64 rng(seed);
  PropertyResult r;
  for (; r.cases < kPropertyCases; ++r.cases) {
    const auto names = phrases(30);
    const FeatureTable table = random_table(names, rng);
    TrainingPools pools;
    for (std::size_t i = 0; i < names.size(); ++i) {
      (i < 6 ? pools.positive : pools.negative).push_back(i);
    }
    const Hyperparams hp = tiny_forest(rng);
    const Forest f = train_forest(pools, table.rows(), hp, rng());
    for (const auto& x : random_rows(10, rng)) {
      const double c = predict_confidence(f, x);
      const double k = c * static_cast<double>(hp.n_trees);
      if (c < 0.0 || c > 1.0 || std::abs(k - std::round(k)) > 1e-9 ||
          c != static_cast<double>(positive_votes(f, x)) / static_cast<double>(hp.n_trees)) {
        r.counterexample = "case " + std::to_string(r.cases) + ": confidence " + std::to_string(c);
        return r;
      }
    }
  }
  return r;
}

/// Coverage never decreases as labels accumulate.
inline PropertyResult check_coverage_monotone(std::uint64_t seed) {
  using namespace prop_detail;
  std::mt19937_64 rng(seed);
  PropertyResult r;
  for (; r.cases < kPropertyCases; ++r.cases) {
    const auto names = phrases(std::uniform_int_distribution<std::size_t>(2, 50)(rng));
    std::set<std::string> truth = random_subset(names, 0.4, rng);
    truth.insert("outside the pool");
    PoolState s = PoolState::initialize(names, random_subset(names, 0.1, rng));
    double last = compute_coverage(s, truth);
    while (!s.unlabeled.empty()) {
      std::vector<LabelDecision> d;
      for (const auto& p : s.unlabeled) {
        if (std::bernoulli_distribution(0.3)(rng)) d.push_back({p, random_verdict(rng)});
      }
      s = apply_labels(s, d);
      const double now = compute_coverage(s, truth);
      if (now < last || now < 0.0 || now > 1.0) {
        r.counterexample = "case " + std::to_string(r.cases) + ": coverage fell from " +
                           std::to_string(last) + " to " + std::to_string(now);
        return r;
      }
      last = now;
    }
  }
  return r;
}

/// normalize(normalize(x)) == normalize(x) on arbitrary text.
inline PropertyResult check_normalize_idempotent(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  static const std::string alphabet =
      "abcXYZ0189 \t\n-/.'!,;:()&\"_+#\xc3\xa9\xe2\x80\x99";
  PropertyResult r;
  for (; r.cases < kPropertyCases; ++r.cases) {
    std::string text;
    const std::size_t len = std::uniform_int_distribution<std::size_t>(0, 40)(rng);
    for (std::size_t i = 0; i < len; ++i) {
      text.push_back(alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)]);
    }
    const Tokens once = normalize_tokens(text);
    const Tokens twice = normalize_tokens(join_tokens(once));
    if (once != twice) {
      r.counterexample = "case " + std::to_string(r.cases) + ": \"" + text + "\"";
      return r;
    }
    for (const auto& t : once) {
      if (t.empty() || t.find(' ') != std::string::npos) {
        r.counterexample = "case " + std::to_string(r.cases) + ": bad token from \"" + text + "\"";
        return r;
      }
    }
  }
  return r;
}

/// A saved and reloaded model predicts exactly as the original.
inline PropertyResult check_save_load_identity(std::uint64_t seed) {
  using namespace prop_detail;
  std::mt19937_64 rng(seed);
  TempDir dir;
  const std::string path = dir.file("model.json");
  PropertyResult r;
  for (; r.cases < kPropertyCases; ++r.cases) {
    const auto names = phrases(25);
    // Continuous values so thresholds are arbitrary doubles.
    FeatureTable table;
    std::normal_distribution<double> gauss(0.0, 1e3);
    for (const auto& n : names) {
      FeatureVector fv;
      for (auto& v : fv.values) v = gauss(rng);
      table.add(n, fv);
    }
    TrainingPools pools;
    for (std::size_t i = 0; i < names.size(); ++i) {
      (i < 5 ? pools.positive : pools.negative).push_back(i);
    }
    const Forest f = train_forest(pools, table.rows(), tiny_forest(rng), rng());
    save_forest(f, path);
    const Forest g = load_forest(path);
    if (!(f == g)) {
      r.counterexample = "case " + std::to_string(r.cases) + ": structure differs";
      return r;
    }
    for (const auto& x : table.rows()) {
      if (predict_confidence(f, x) != predict_confidence(g, x)) {
        r.counterexample = "case " + std::to_string(r.cases) + ": prediction differs";
        return r;
      }
    }
  }
  return r;
}

}  // namespace ptdisc::testing

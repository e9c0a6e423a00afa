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

// Positive-only distant training: a random forest of unpruned Gini trees,
// each grown on a perturbed set drawn with replacement from the positive
// pool and the noisy negative (unlabeled) pool.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptdisc/error.hpp"
#include "ptdisc/features.hpp"
#include "ptdisc/util.hpp"

namespace ptdisc {

using Rng = std::mt19937_64;

/// Classifier hyperparameters and their defaults.
struct Hyperparams {
  std::size_t n_trees = 256;
  double max_features_fraction = 0.5;
  std::size_t n_examples_per_tree = 2000;
  double positive_fraction = 0.10;

  std::size_t features_per_split() const {
    const auto k = static_cast<std::size_t>(
        std::llround(static_cast<double>(kFeatureCount) * max_features_fraction));
    return std::clamp<std::size_t>(k, 1, kFeatureCount);
  }
  std::size_t positives_per_tree() const {
    return static_cast<std::size_t>(
        std::llround(static_cast<double>(n_examples_per_tree) * positive_fraction));
  }

  void validate() const {
    if (n_trees == 0) throw Error(ErrorCode::kConfigError, "n_trees must be >= 1");
    if (!(max_features_fraction > 0.0 && max_features_fraction <= 1.0)) {
      throw Error(ErrorCode::kConfigError, "max_features_fraction must be in (0, 1]");
    }
    if (n_examples_per_tree == 0) {
      throw Error(ErrorCode::kConfigError, "n_examples_per_tree must be >= 1");
    }
    if (!(positive_fraction > 0.0 && positive_fraction < 1.0)) {
      throw Error(ErrorCode::kConfigError, "positive_fraction must be in (0, 1)");
    }
  }

  bool operator==(const Hyperparams&) const = default;
};

/// Row indices (into a feature matrix) of the two training pools.
struct TrainingPools {
  std::vector<std::size_t> positive;
  std::vector<std::size_t> negative;
};

struct PerturbedSample {
  std::vector<std::size_t> rows;
  std::vector<std::uint8_t> positive;  // 1 = positive label

  std::size_t size() const { return rows.size(); }
  std::size_t positive_count() const {
    return static_cast<std::size_t>(std::count(positive.begin(), positive.end(), 1));
  }
};

/// round(n * positive_fraction) rows drawn with replacement from the positive
/// pool, the rest with replacement from the negative pool.
inline PerturbedSample sample_perturbed_set(const TrainingPools& pools, const Hyperparams& hp,
                                            Rng& rng) {
  if (pools.positive.empty()) throw Error(ErrorCode::kEmptyPool, "positive");
  if (pools.negative.empty()) throw Error(ErrorCode::kEmptyPool, "unlabeled");
  const std::size_t n_pos = std::min(hp.positives_per_tree(), hp.n_examples_per_tree);
  PerturbedSample sample;
  sample.rows.reserve(hp.n_examples_per_tree);
  sample.positive.reserve(hp.n_examples_per_tree);
  std::uniform_int_distribution<std::size_t> pick_pos(0, pools.positive.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_neg(0, pools.negative.size() - 1);
  for (std::size_t i = 0; i < n_pos; ++i) {
    sample.rows.push_back(pools.positive[pick_pos(rng)]);
    sample.positive.push_back(1);
  }
  for (std::size_t i = n_pos; i < hp.n_examples_per_tree; ++i) {
    sample.rows.push_back(pools.negative[pick_neg(rng)]);
    sample.positive.push_back(0);
  }
  return sample;
}

class DecisionTree {
 public:
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    bool positive = false;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const Node&) const = default;
  };

  DecisionTree() = default;
  explicit DecisionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) { validate(); }

  /// Leaf reached by x; values <= threshold descend left.
  std::size_t leaf_index(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const Node& n = nodes_[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold
                                       ? n.left
                                       : n.right);
    }
    return i;
  }

  bool predict(std::span<const double> x) const { return nodes_[leaf_index(x)].positive; }
  bool predict(const FeatureVector& fv) const { return predict(std::span<const double>(fv.values)); }

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
  }
  std::size_t depth() const {
    std::vector<std::size_t> d(nodes_.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      best = std::max(best, d[i]);
      if (!nodes_[i].is_leaf()) {
        d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
        d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
      }
    }
    return best;
  }

  void validate() const {
    if (nodes_.empty()) throw Error(ErrorCode::kParseError, "tree has no nodes");
    const auto n = static_cast<std::int32_t>(nodes_.size());
    for (std::int32_t i = 0; i < n; ++i) {
      const Node& node = nodes_[static_cast<std::size_t>(i)];
      if (node.is_leaf()) continue;
      // Children always follow their parent, so descent terminates.
      if (node.feature >= static_cast<std::int32_t>(kFeatureCount) || node.left <= i ||
          node.right <= i || node.left >= n || node.right >= n) {
        throw Error(ErrorCode::kParseError, "malformed tree node " + std::to_string(i));
      }
    }
  }

  bool operator==(const DecisionTree&) const = default;

 private:
  std::vector<Node> nodes_;
};

/// Per-feature row orderings of a feature matrix, sorted by (value, row).
/// Shared by all trees of one forest so each tree skips the sort.
class PresortedFeatures {
 public:
  explicit PresortedFeatures(std::span<const FeatureVector> rows) : n_rows_(rows.size()) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      auto& order = order_[f];
      order.resize(rows.size());
      std::iota(order.begin(), order.end(), std::uint32_t{0});
      std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        const double va = rows[a][f], vb = rows[b][f];
        return va < vb || (va == vb && a < b);
      });
    }
  }

  std::size_t rows() const { return n_rows_; }
  const std::vector<std::uint32_t>& order(std::size_t feature) const { return order_[feature]; }

 private:
  std::size_t n_rows_;
  std::array<std::vector<std::uint32_t>, kFeatureCount> order_;
};

/// Optional instrumentation filled by train_tree.
struct TreeTrainingTrace {
  /// Number of features scanned at each node that was split.
  std::vector<std::size_t> features_examined;
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const PerturbedSample& sample, std::span<const FeatureVector> features,
              const Hyperparams& hp, Rng& rng, const PresortedFeatures* presorted,
              TreeTrainingTrace* trace)
      : hp_(hp), rng_(rng), trace_(trace) {
    collapse(sample);
    load_columns(features);
    build_orders(presorted, features.size());
  }

  DecisionTree build() {
    std::vector<DecisionTree::Node> nodes;
    struct Pending {
      std::size_t begin, end;
      std::int32_t node;
    };
    nodes.emplace_back();
    std::vector<Pending> stack{{0, n_items_, 0}};
    while (!stack.empty()) {
      const Pending cur = stack.back();
      stack.pop_back();
      double pos = 0.0, neg = 0.0;
      const std::uint32_t* order = orders_[0].data();
      for (std::size_t i = cur.begin; i < cur.end; ++i) {
        pos += pos_weight_[order[i]];
        neg += neg_weight_[order[i]];
      }
      nodes[static_cast<std::size_t>(cur.node)].positive = pos > neg;  // ties go negative
      if (pos == 0.0 || neg == 0.0) continue;

      const Split split = find_split(cur.begin, cur.end, pos, neg);
      if (split.feature < 0) continue;

      const std::size_t mid = partition(cur.begin, cur.end, split);
      const auto left = static_cast<std::int32_t>(nodes.size());
      nodes.emplace_back();
      nodes.emplace_back();
      auto& parent = nodes[static_cast<std::size_t>(cur.node)];
      parent.feature = split.feature;
      parent.threshold = split.threshold;
      parent.left = left;
      parent.right = left + 1;
      stack.push_back({mid, cur.end, left + 1});
      stack.push_back({cur.begin, mid, left});
    }
    return DecisionTree(std::move(nodes));
  }

 private:
  struct Split {
    std::int32_t feature = -1;
    double threshold = 0.0;
  };

  // Duplicate (row, label) pairs become one weighted item; Gini with weights
  // equals Gini over the duplicated rows. Items end up sorted by (row, label).
  void collapse(const PerturbedSample& sample) {
    std::vector<std::uint64_t> keys;
    keys.reserve(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
      keys.push_back((static_cast<std::uint64_t>(sample.rows[i]) << 1) |
                     (sample.positive[i] ? 1U : 0U));
    }
    std::sort(keys.begin(), keys.end());
    for (std::size_t i = 0; i < keys.size();) {
      std::size_t j = i;
      while (j < keys.size() && keys[j] == keys[i]) ++j;
      rows_.push_back(static_cast<std::uint32_t>(keys[i] >> 1));
      const bool positive = (keys[i] & 1U) != 0;
      pos_weight_.push_back(positive ? static_cast<double>(j - i) : 0.0);
      neg_weight_.push_back(positive ? 0.0 : static_cast<double>(j - i));
      i = j;
    }
    n_items_ = rows_.size();
  }

  void load_columns(std::span<const FeatureVector> features) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      auto& col = columns_[f];
      col.resize(n_items_);
      for (std::size_t j = 0; j < n_items_; ++j) col[j] = features[rows_[j]][f];
    }
  }

  void build_orders(const PresortedFeatures* presorted, std::size_t n_rows) {
    const std::size_t m = n_items_;
    if (presorted != nullptr && presorted->rows() == n_rows) {
      // Up to two items (one per label) share a row; they are adjacent.
      std::vector<std::int32_t> first(n_rows, -1);
      std::vector<std::uint8_t> count(n_rows, 0);
      for (std::size_t j = m; j-- > 0;) {
        first[rows_[j]] = static_cast<std::int32_t>(j);
        ++count[rows_[j]];
      }
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        auto& out = orders_[f];
        out.resize(m);
        std::uint32_t* dst = out.data();
        for (std::uint32_t row : presorted->order(f)) {
          const std::int32_t j = first[row];
          if (j < 0) continue;
          for (std::uint8_t c = 0; c < count[row]; ++c) {
            *dst++ = static_cast<std::uint32_t>(j) + c;
          }
        }
      }
    } else {
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        auto& out = orders_[f];
        const auto& col = columns_[f];
        out.resize(m);
        std::iota(out.begin(), out.end(), std::uint32_t{0});
        std::sort(out.begin(), out.end(), [&](std::uint32_t a, std::uint32_t b) {
          return col[a] < col[b] || (col[a] == col[b] && a < b);
        });
      }
    }
    goes_left_.assign(m, 0);
    scratch_.resize(m);
  }

  // Maximizes sum over children of (p^2 + n^2) / t, i.e. minimizes weighted
  // Gini impurity. A split is accepted only if it strictly beats the parent.
  Split find_split(std::size_t begin, std::size_t end, double pos, double neg) {
    const double total = pos + neg;
    const double parent_score = (pos * pos + neg * neg) / total;
    const double eps = 1e-12 * total;

    std::array<std::int32_t, kFeatureCount> candidates;
    std::iota(candidates.begin(), candidates.end(), 0);
    const std::size_t k = hp_.features_per_split();
    std::size_t drawn = 0;
    auto draw_next = [&] {
      std::uniform_int_distribution<std::size_t> pick(drawn, kFeatureCount - 1);
      std::swap(candidates[drawn], candidates[pick(rng_)]);
      return candidates[drawn++];
    };

    Split best;
    double best_score = parent_score + eps;
    std::size_t examined = 0;
    const double* wp = pos_weight_.data();
    const double* wn = neg_weight_.data();
    // The first k features form this node's random subset. The remaining
    // features are only visited if none of those reduces impurity.
    while (drawn < kFeatureCount && (examined < k || best.feature < 0)) {
      const std::int32_t f = draw_next();
      ++examined;
      const std::uint32_t* order = orders_[static_cast<std::size_t>(f)].data();
      const double* col = columns_[static_cast<std::size_t>(f)].data();
      double lp = 0.0, ln = 0.0;
      double v = col[order[begin]];
      for (std::size_t i = begin; i + 1 < end; ++i) {
        const std::uint32_t item = order[i];
        lp += wp[item];
        ln += wn[item];
        const double v_next = col[order[i + 1]];
        if (v < v_next) {
          const double lt = lp + ln;
          const double rp = pos - lp, rn = neg - ln, rt = total - lt;
          const double score = (lp * lp + ln * ln) / lt + (rp * rp + rn * rn) / rt;
          if (score > best_score) {
            best_score = score;
            best.feature = f;
            double mid = v + (v_next - v) / 2.0;
            if (!(mid < v_next)) mid = v;
            best.threshold = mid;
          }
        }
        v = v_next;
      }
    }
    if (trace_ != nullptr && best.feature >= 0) trace_->features_examined.push_back(examined);
    return best;
  }

  // Stable-partitions every feature ordering of [begin, end) into left
  // (value <= threshold) then right; returns the boundary.
  std::size_t partition(std::size_t begin, std::size_t end, const Split& split) {
    const auto f = static_cast<std::size_t>(split.feature);
    const double* col = columns_[f].data();
    std::uint8_t* goes_left = goes_left_.data();
    std::size_t n_left = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint32_t item = orders_[f][i];
      const std::uint8_t left = col[item] <= split.threshold ? 1 : 0;
      goes_left[item] = left;
      n_left += left;
    }
    std::uint32_t* scratch = scratch_.data();
    for (auto& ordering : orders_) {
      std::uint32_t* order = ordering.data();
      std::size_t l = begin, r = 0;
      for (std::size_t i = begin; i < end; ++i) {
        const std::uint32_t item = order[i];
        if (goes_left[item]) {
          order[l++] = item;
        } else {
          scratch[r++] = item;
        }
      }
      std::copy(scratch, scratch + r, order + l);
    }
    return begin + n_left;
  }

  const Hyperparams& hp_;
  Rng& rng_;
  TreeTrainingTrace* trace_;
  std::size_t n_items_ = 0;
  std::vector<std::uint32_t> rows_;
  std::vector<double> pos_weight_;
  std::vector<double> neg_weight_;
  std::array<std::vector<double>, kFeatureCount> columns_;
  std::array<std::vector<std::uint32_t>, kFeatureCount> orders_;
  std::vector<std::uint8_t> goes_left_;
  std::vector<std::uint32_t> scratch_;
};

}  // namespace detail

/// Grows an unpruned tree by recursive Gini splitting. Each node considers a
/// fresh random subset of hp.features_per_split() features with midpoint
/// thresholds; growth stops at purity or when no split reduces impurity.
/// Leaves take the majority label, ties negative.
inline DecisionTree train_tree(const PerturbedSample& sample,
                               std::span<const FeatureVector> features, const Hyperparams& hp,
                               Rng& rng, const PresortedFeatures* presorted = nullptr,
                               TreeTrainingTrace* trace = nullptr) {
  if (sample.size() == 0) throw Error(ErrorCode::kEmptyPool, "empty training sample");
  return detail::TreeBuilder(sample, features, hp, rng, presorted, trace).build();
}

struct Forest {
  Hyperparams hyperparams;
  std::string schema_digest;
  std::uint64_t seed = 0;
  std::vector<DecisionTree> trees;

  bool operator==(const Forest&) const = default;
};

/// Trains hp.n_trees trees. Tree i draws its sample and feature subsets from
/// a generator seeded by (master_seed, i), so the forest is identical for any
/// `parallelism`.
inline Forest train_forest(const TrainingPools& pools, std::span<const FeatureVector> features,
                           const Hyperparams& hp, std::uint64_t master_seed,
                           std::size_t parallelism = 1) {
  hp.validate();
  if (pools.positive.empty()) throw Error(ErrorCode::kEmptyPool, "positive");
  if (pools.negative.empty()) throw Error(ErrorCode::kEmptyPool, "unlabeled");
  Forest forest;
  forest.hyperparams = hp;
  forest.schema_digest = feature_schema_digest();
  forest.seed = master_seed;
  forest.trees.resize(hp.n_trees);
  const PresortedFeatures presorted(features);
  parallel_for(hp.n_trees, parallelism, [&](std::size_t i) {
    Rng rng(mix_seed(master_seed, i));
    const PerturbedSample sample = sample_perturbed_set(pools, hp, rng);
    forest.trees[i] = train_tree(sample, features, hp, rng, &presorted);
  });
  return forest;
}

inline void check_schema(const Forest& forest) {
  if (forest.schema_digest != feature_schema_digest()) {
    throw Error(ErrorCode::kSchemaMismatch,
                "model schema " + forest.schema_digest + " != " + feature_schema_digest());
  }
}

/// Number of trees voting positive.
inline std::size_t positive_votes(const Forest& forest, const FeatureVector& fv) {
  check_schema(forest);
  std::size_t votes = 0;
  for (const auto& tree : forest.trees) votes += tree.predict(fv) ? 1 : 0;
  return votes;
}

/// Fraction of trees voting positive: k / n_trees.
inline double predict_confidence(const Forest& forest, const FeatureVector& fv) {
  if (forest.trees.empty()) return 0.0;
  return static_cast<double>(positive_votes(forest, fv)) /
         static_cast<double>(forest.trees.size());
}

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const Hyperparams& hp) {
  return {{"n_trees", hp.n_trees},
          {"max_features_fraction", hp.max_features_fraction},
          {"n_examples_per_tree", hp.n_examples_per_tree},
          {"positive_fraction", hp.positive_fraction}};
}

inline Hyperparams hyperparams_from_json(const nlohmann::json& j, Hyperparams hp = {}) {
  hp.n_trees = j.value("n_trees", hp.n_trees);
  hp.max_features_fraction = j.value("max_features_fraction", hp.max_features_fraction);
  hp.n_examples_per_tree = j.value("n_examples_per_tree", hp.n_examples_per_tree);
  hp.positive_fraction = j.value("positive_fraction", hp.positive_fraction);
  return hp;
}

/// Versioned model document with flattened per-tree node arrays.
inline nlohmann::json forest_to_json(const Forest& forest) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : forest.trees) {
    nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(),
                   left = nlohmann::json::array(), right = nlohmann::json::array(),
                   positive = nlohmann::json::array();
    for (const auto& n : tree.nodes()) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      positive.push_back(n.positive ? 1 : 0);
    }
    trees.push_back({{"feature", feature},
                     {"threshold", threshold},
                     {"left", left},
                     {"right", right},
                     {"positive", positive}});
  }
  return {{"format", "ptdisc-forest"},
          {"version", kModelFormatVersion},
          {"hyperparams", to_json(forest.hyperparams)},
          {"schema_digest", forest.schema_digest},
          {"seed", forest.seed},
          {"trees", trees}};
}

inline Forest forest_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "ptdisc-forest") {
      throw Error(ErrorCode::kParseError, "not a ptdisc forest");
    }
    if (j.at("version").get<int>() != kModelFormatVersion) {
      throw Error(ErrorCode::kParseError,
                  "unsupported model version " + std::to_string(j.at("version").get<int>()));
    }
    Forest forest;
    forest.hyperparams = hyperparams_from_json(j.at("hyperparams"));
    forest.schema_digest = j.at("schema_digest").get<std::string>();
    forest.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& t : j.at("trees")) {
      const auto& feature = t.at("feature");
      const std::size_t n = feature.size();
      std::vector<DecisionTree::Node> nodes(n);
      for (std::size_t i = 0; i < n; ++i) {
        nodes[i].feature = feature.at(i).get<std::int32_t>();
        nodes[i].threshold = t.at("threshold").at(i).get<double>();
        nodes[i].left = t.at("left").at(i).get<std::int32_t>();
        nodes[i].right = t.at("right").at(i).get<std::int32_t>();
        nodes[i].positive = t.at("positive").at(i).get<int>() != 0;
      }
      forest.trees.emplace_back(std::move(nodes));
    }
    check_schema(forest);
    return forest;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("model file: ") + e.what());
  }
}

inline void save_forest(const Forest& forest, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  out << forest_to_json(forest).dump() << '\n';
}

inline Forest load_forest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, path + ": " + e.what());
  }
  return forest_from_json(j);
}

}  // namespace ptdisc

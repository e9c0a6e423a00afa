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

// The discovery loop: train on the current pools, score the unlabeled set,
// present a high-confidence batch, apply the verdicts, report.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ptdisc/classifier.hpp"
#include "ptdisc/error.hpp"
#include "ptdisc/features.hpp"

namespace ptdisc {

/// Partition of the candidate universe. The four sets are pairwise disjoint
/// and their union never changes.
struct PoolState {
  std::set<std::string> positive;
  std::set<std::string> unlabeled;
  std::set<std::string> rejected;
  std::set<std::string> deferred;
  /// Known product types the positive pool was seeded with.
  std::set<std::string> initial_known;
  std::size_t iteration = 0;

  /// Known phrases that are not candidates are ignored; they have no
  /// features to train on.
  static PoolState initialize(const std::vector<std::string>& candidates,
                              const std::set<std::string>& known) {
    PoolState s;
    for (const auto& c : candidates) {
      if (known.count(c)) {
        s.positive.insert(c);
        s.initial_known.insert(c);
      } else {
        s.unlabeled.insert(c);
      }
    }
    return s;
  }

  std::size_t size() const {
    return positive.size() + unlabeled.size() + rejected.size() + deferred.size();
  }

  std::set<std::string> universe() const {
    std::set<std::string> all = positive;
    all.insert(unlabeled.begin(), unlabeled.end());
    all.insert(rejected.begin(), rejected.end());
    all.insert(deferred.begin(), deferred.end());
    return all;
  }

  /// Disjointness check: the union has as many members as the parts.
  bool is_partition() const { return universe().size() == size(); }

  std::size_t discovered() const {
    std::size_t n = 0;
    for (const auto& p : positive) n += initial_known.count(p) ? 0 : 1;
    return n;
  }

  bool operator==(const PoolState&) const = default;
};

enum class Verdict { kApproved, kRejected, kDeferred };

inline std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kApproved: return "approved";
    case Verdict::kRejected: return "rejected";
    case Verdict::kDeferred: return "deferred";
  }
  return "deferred";
}

inline Verdict parse_verdict(std::string_view s) {
  if (s == "approved" || s == "approve" || s == "Approved") return Verdict::kApproved;
  if (s == "rejected" || s == "reject" || s == "Rejected") return Verdict::kRejected;
  if (s == "deferred" || s == "defer" || s == "Deferred") return Verdict::kDeferred;
  throw Error(ErrorCode::kParseError, "unknown verdict \"" + std::string(s) + "\"");
}

struct LabelDecision {
  std::string phrase;
  Verdict verdict = Verdict::kDeferred;

  bool operator==(const LabelDecision&) const = default;
};

struct ScoredCandidate {
  std::string phrase;
  double confidence = 0.0;

  bool operator==(const ScoredCandidate&) const = default;
};

struct SelectionPolicy {
  enum class Mode { kTopK, kThreshold, kRandomK };
  Mode mode = Mode::kTopK;
  std::size_t k = 200;
  double threshold = 0.5;

  static SelectionPolicy top_k(std::size_t k) {
    if (k < 1) throw Error(ErrorCode::kConfigError, "top_k requires k >= 1");
    return {Mode::kTopK, k, 0.0};
  }
  static SelectionPolicy at_threshold(double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) {
      throw Error(ErrorCode::kConfigError, "threshold must be in [0, 1]");
    }
    return {Mode::kThreshold, 0, tau};
  }
  /// Uniform sample of k unlabeled candidates; a baseline, not a loop policy.
  static SelectionPolicy random_k(std::size_t k) {
    if (k < 1) throw Error(ErrorCode::kConfigError, "random_k requires k >= 1");
    return {Mode::kRandomK, k, 0.0};
  }
};

struct IterationReport {
  std::size_t iteration = 0;
  std::size_t presented = 0;
  std::size_t approved = 0;
  std::size_t rejected = 0;
  std::size_t deferred = 0;
  double precision = 0.0;
  std::size_t cumulative_discovered = 0;
  std::optional<double> coverage;

  bool operator==(const IterationReport&) const = default;
};

/// Rows of the positive pool and of the noisy negative pool (unlabeled,
/// rejected and deferred candidates).
inline TrainingPools training_pools(const PoolState& pools, const FeatureTable& features) {
  TrainingPools out;
  auto add = [&](const std::set<std::string>& from, std::vector<std::size_t>& into) {
    for (const auto& p : from) {
      if (auto row = features.index_of(p)) into.push_back(*row);
    }
  };
  add(pools.positive, out.positive);
  add(pools.unlabeled, out.negative);
  add(pools.rejected, out.negative);
  add(pools.deferred, out.negative);
  std::sort(out.negative.begin(), out.negative.end());
  return out;
}

/// Confidence-ranked batch from the unlabeled set: descending confidence,
/// ties by ascending phrase. Top-k keeps the first k; threshold keeps every
/// candidate scoring >= tau.
inline std::vector<ScoredCandidate> select_batch(const Forest& forest, const PoolState& pools,
                                                 const FeatureTable& features,
                                                 const SelectionPolicy& policy,
                                                 std::size_t parallelism = 1) {
  std::vector<std::string> phrases(pools.unlabeled.begin(), pools.unlabeled.end());
  std::vector<ScoredCandidate> scored(phrases.size());
  parallel_for(phrases.size(), parallelism, [&](std::size_t i) {
    scored[i].phrase = phrases[i];
    if (auto row = features.index_of(phrases[i])) {
      scored[i].confidence = predict_confidence(forest, features.row(*row));
    }
  });
  std::stable_sort(scored.begin(), scored.end(),
                   [](const ScoredCandidate& a, const ScoredCandidate& b) {
                     if (a.confidence != b.confidence) return a.confidence > b.confidence;
                     return a.phrase < b.phrase;
                   });
  switch (policy.mode) {
    case SelectionPolicy::Mode::kThreshold: {
      auto end = std::find_if(scored.begin(), scored.end(), [&](const ScoredCandidate& c) {
        return c.confidence < policy.threshold;
      });
      scored.erase(end, scored.end());
      break;
    }
    case SelectionPolicy::Mode::kTopK:
    case SelectionPolicy::Mode::kRandomK:
      if (scored.size() > policy.k) scored.resize(policy.k);
      break;
  }
  return scored;
}

/// Uniformly random batch of up to k unlabeled candidates, confidence 0.
inline std::vector<ScoredCandidate> select_random_batch(const PoolState& pools, std::size_t k,
                                                        Rng& rng) {
  std::vector<std::string> phrases(pools.unlabeled.begin(), pools.unlabeled.end());
  const std::size_t n = std::min(k, phrases.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, phrases.size() - 1);
    std::swap(phrases[i], phrases[pick(rng)]);
  }
  std::vector<ScoredCandidate> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({phrases[i], 0.0});
  return out;
}

/// Moves each decided phrase out of the unlabeled set. All decisions are
/// validated before any is applied.
inline PoolState apply_labels(const PoolState& pools, const std::vector<LabelDecision>& decisions) {
  std::set<std::string> seen;
  for (const auto& d : decisions) {
    if (!seen.insert(d.phrase).second) throw Error(ErrorCode::kDuplicateDecision, d.phrase);
    if (!pools.unlabeled.count(d.phrase)) throw Error(ErrorCode::kUnknownPhrase, d.phrase);
  }
  PoolState next = pools;
  for (const auto& d : decisions) {
    next.unlabeled.erase(d.phrase);
    switch (d.verdict) {
      case Verdict::kApproved: next.positive.insert(d.phrase); break;
      case Verdict::kRejected: next.rejected.insert(d.phrase); break;
      case Verdict::kDeferred: next.deferred.insert(d.phrase); break;
    }
  }
  return next;
}

/// Share of discoverable targets found so far:
///   |(positive \ baseline) ∩ T| / |T \ baseline|,  T = truth ∩ candidates.
/// `baseline` defaults to the pool's initial known set. A truth set with
/// nothing left to discover has coverage 1.
inline double compute_coverage(const PoolState& pools, const std::set<std::string>& truth,
                               const std::set<std::string>* baseline = nullptr) {
  if (truth.empty()) throw Error(ErrorCode::kEmptyTruth, "truth set is empty");
  const std::set<std::string>& known = baseline ? *baseline : pools.initial_known;
  auto in_universe = [&](const std::string& p) {
    return pools.positive.count(p) || pools.unlabeled.count(p) || pools.rejected.count(p) ||
           pools.deferred.count(p);
  };
  std::size_t targets = 0, found = 0;
  for (const auto& t : truth) {
    if (known.count(t) || !in_universe(t)) continue;
    ++targets;
    if (pools.positive.count(t)) ++found;
  }
  if (targets == 0) return 1.0;
  return static_cast<double>(found) / static_cast<double>(targets);
}

using LabelOracle = std::function<std::vector<LabelDecision>(const std::vector<ScoredCandidate>&)>;

struct LoopOptions {
  Hyperparams hyperparams;
  SelectionPolicy policy;
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;
  /// When set, each report carries coverage against this truth.
  const std::set<std::string>* coverage_truth = nullptr;
  const std::set<std::string>* coverage_baseline = nullptr;
};

/// Trains a fresh forest on the current pools and selects the next batch.
/// Returns an empty batch when nothing is left to present.
inline std::vector<ScoredCandidate> prepare_batch(const PoolState& state,
                                                  const FeatureTable& features,
                                                  const LoopOptions& opt) {
  if (state.unlabeled.empty()) return {};
  const std::uint64_t iteration_seed = mix_seed(opt.seed, state.iteration + 1);
  if (opt.policy.mode == SelectionPolicy::Mode::kRandomK) {
    Rng rng(iteration_seed);
    return select_random_batch(state, opt.policy.k, rng);
  }
  const Forest forest = train_forest(training_pools(state, features), features.rows(),
                                     opt.hyperparams, iteration_seed, opt.parallelism);
  return select_batch(forest, state, features, opt.policy, opt.parallelism);
}

/// Applies decisions for `batch` (phrases without a decision are Deferred)
/// and summarizes the iteration.
inline std::pair<PoolState, IterationReport> complete_iteration(
    const PoolState& state, const std::vector<ScoredCandidate>& batch,
    const std::vector<LabelDecision>& decisions, const LoopOptions& opt) {
  std::set<std::string> in_batch;
  for (const auto& c : batch) in_batch.insert(c.phrase);
  std::set<std::string> decided;
  std::vector<LabelDecision> all;
  for (const auto& d : decisions) {
    if (!in_batch.count(d.phrase)) {
      throw Error(ErrorCode::kUnknownPhrase, d.phrase + " is not in the presented batch");
    }
    if (!decided.insert(d.phrase).second) throw Error(ErrorCode::kDuplicateDecision, d.phrase);
    all.push_back(d);
  }
  for (const auto& c : batch) {
    if (!decided.count(c.phrase)) all.push_back({c.phrase, Verdict::kDeferred});
  }

  PoolState next = apply_labels(state, all);
  next.iteration = state.iteration + 1;

  IterationReport report;
  report.iteration = next.iteration;
  report.presented = batch.size();
  for (const auto& d : all) {
    switch (d.verdict) {
      case Verdict::kApproved: ++report.approved; break;
      case Verdict::kRejected: ++report.rejected; break;
      case Verdict::kDeferred: ++report.deferred; break;
    }
  }
  report.precision = report.presented == 0 ? 0.0
                                           : static_cast<double>(report.approved) /
                                                 static_cast<double>(report.presented);
  report.cumulative_discovered = next.discovered();
  if (opt.coverage_truth != nullptr && !opt.coverage_truth->empty()) {
    report.coverage = compute_coverage(next, *opt.coverage_truth, opt.coverage_baseline);
  }
  return {std::move(next), report};
}

/// One full cycle: train, select, label via `oracle`, apply, report.
inline std::pair<PoolState, IterationReport> run_iteration(const PoolState& state,
                                                           const FeatureTable& features,
                                                           const LabelOracle& oracle,
                                                           const LoopOptions& opt) {
  const auto batch = prepare_batch(state, features, opt);
  const auto decisions = batch.empty() ? std::vector<LabelDecision>{} : oracle(batch);
  return complete_iteration(state, batch, decisions, opt);
}

inline constexpr const char* kReportCsvHeader =
    "iteration,presented,approved,precision,cumulative_discovered,coverage";

inline std::string report_csv_row(const IterationReport& r) {
  char buf[160];
  if (r.coverage) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.6f,%zu,%.6f", r.iteration, r.presented,
                  r.approved, r.precision, r.cumulative_discovered, *r.coverage);
  } else {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.6f,%zu,", r.iteration, r.presented,
                  r.approved, r.precision, r.cumulative_discovered);
  }
  return buf;
}

inline void write_report_csv(std::ostream& out, const std::vector<IterationReport>& reports) {
  out << kReportCsvHeader << '\n';
  for (const auto& r : reports) out << report_csv_row(r) << '\n';
}

}  // namespace ptdisc

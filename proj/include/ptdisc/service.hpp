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

// HTTP facade over the discovery loop for human labeling sessions.
//
// All sessions expand one shared pool state. Batches are fenced by an
// opaque token: a submission is applied only if its token names the
// session's open batch and the pool has not changed since that batch was
// built. Readers always see the last committed snapshot.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "ptdisc/active_loop.hpp"
#include "ptdisc/classifier.hpp"
#include "ptdisc/corpus.hpp"
#include "ptdisc/error.hpp"
#include "ptdisc/features.hpp"
#include "ptdisc/simulator.hpp"

namespace ptdisc {

struct CandidateContext {
  std::string phrase;
  std::optional<double> confidence;
  std::vector<std::string> sample_titles;
  std::vector<std::string> sample_queries;
  std::int64_t query_volume = 0;
  double quality = 0.0;
  double click_entropy = 0.0;
};

inline nlohmann::json to_json(const CandidateContext& c) {
  nlohmann::json j{{"phrase", c.phrase},
                   {"sample_titles", c.sample_titles},
                   {"sample_queries", c.sample_queries},
                   {"features",
                    {{"query_volume", c.query_volume},
                     {"quality", c.quality},
                     {"click_entropy", c.click_entropy}}}};
  j["confidence"] = c.confidence ? nlohmann::json(*c.confidence) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const IterationReport& r) {
  nlohmann::json j{{"iteration", r.iteration},
                   {"presented", r.presented},
                   {"approved", r.approved},
                   {"rejected", r.rejected},
                   {"deferred", r.deferred},
                   {"precision", r.precision},
                   {"cumulative_discovered", r.cumulative_discovered}};
  j["coverage"] = r.coverage ? nlohmann::json(*r.coverage) : nlohmann::json(nullptr);
  return j;
}

struct SessionSettings {
  SelectionPolicy policy = SelectionPolicy::top_k(10);
  Hyperparams hyperparams;
  std::uint64_t seed = 0;
};

struct BatchView {
  std::string batch_token;
  std::vector<CandidateContext> candidates;
};

class LabelingService {
 public:
  LabelingService(Catalog catalog, QueryLog log, PreparedCorpus corpus,
                  const std::set<std::string>& known, std::size_t parallelism = 1)
      : catalog_(std::move(catalog)),
        log_(std::move(log)),
        corpus_(std::move(corpus)),
        parallelism_(parallelism) {
    auto snap = std::make_shared<Snapshot>();
    snap->pools = PoolState::initialize(corpus_.features.phrases(), known);
    snapshot_ = std::move(snap);
  }

  std::string create_session(SessionSettings settings) {
    settings.hyperparams.validate();
    std::lock_guard<std::mutex> lock(sessions_mutex_);
    const std::string id = "s" + std::to_string(++session_counter_);
    sessions_[id].settings = std::move(settings);
    return id;
  }

  /// Returns the session's open batch, building one if none is open.
  BatchView get_batch(const std::string& session_id) {
    std::lock_guard<std::mutex> writer(write_mutex_);
    Session& session = find_session(session_id);
    if (session.open && session.open->version == snapshot()->version) return session.open->view;

    auto snap = snapshot();
    std::vector<ScoredCandidate> batch;
    if (!snap->pools.unlabeled.empty()) {
      const Forest& forest = forest_for(*snap, session.settings);
      batch = select_batch(forest, snap->pools, corpus_.features, session.settings.policy,
                           parallelism_);
    }
    OpenBatch open;
    open.version = snap->version;
    open.items = batch;
    open.view.batch_token = make_token(session_id);
    for (const auto& c : batch) open.view.candidates.push_back(context(c.phrase, c.confidence));
    std::lock_guard<std::mutex> lock(sessions_mutex_);
    session.open = std::move(open);
    return session.open->view;
  }

  /// Applies a batch's decisions exactly once; omitted phrases are Deferred.
  IterationReport post_labels(const std::string& session_id, const std::string& batch_token,
                              const std::vector<LabelDecision>& decisions) {
    std::lock_guard<std::mutex> writer(write_mutex_);
    Session& session = find_session(session_id);
    auto snap = snapshot();
    if (!session.open || session.open->view.batch_token != batch_token) {
      throw Error(ErrorCode::kStaleBatch, "batch token does not name the open batch");
    }
    if (session.open->version != snap->version) {
      session.open.reset();
      throw Error(ErrorCode::kStaleBatch, "another submission changed the pool; refetch");
    }
    const LoopOptions opt = loop_options(session.settings);
    auto [pools, report] = complete_iteration(snap->pools, session.open->items, decisions, opt);

    auto next = std::make_shared<Snapshot>();
    next->pools = std::move(pools);
    next->history = snap->history;
    next->history.push_back(report);
    next->version = snap->version + 1;
    // Retrain on the updated pools so the next batch and context lookups
    // use the latest labels.
    if (!next->pools.unlabeled.empty() && !next->pools.positive.empty()) {
      next->forest = std::make_shared<Forest>(
          train_forest(training_pools(next->pools, corpus_.features), corpus_.features.rows(),
                       session.settings.hyperparams,
                       mix_seed(session.settings.seed, next->pools.iteration + 1), parallelism_));
      next->forest_key = forest_key(session.settings);
    }
    {
      std::lock_guard<std::mutex> lock(sessions_mutex_);
      session.open.reset();
    }
    publish(std::move(next));
    return report;
  }

  std::vector<IterationReport> metrics() const { return snapshot()->history; }

  PoolState pools() const { return snapshot()->pools; }

  /// Evidence for one phrase; confidence comes from the latest trained model.
  CandidateContext candidate_context(const std::string& phrase) const {
    const std::string normalized = normalize_phrase(phrase);
    if (!corpus_.features.index_of(normalized)) throw Error(ErrorCode::kUnknownPhrase, normalized);
    auto snap = snapshot();
    std::optional<double> confidence;
    if (snap->forest) {
      confidence =
          predict_confidence(*snap->forest, corpus_.features.row(*corpus_.features.index_of(normalized)));
    }
    return context(normalized, confidence);
  }

 private:
  struct Snapshot {
    PoolState pools;
    std::vector<IterationReport> history;
    std::uint64_t version = 0;
    std::shared_ptr<const Forest> forest;
    std::string forest_key;
  };
  struct OpenBatch {
    std::uint64_t version = 0;
    std::vector<ScoredCandidate> items;
    BatchView view;
  };
  struct Session {
    SessionSettings settings;
    std::optional<OpenBatch> open;
  };

  std::shared_ptr<const Snapshot> snapshot() const {
    std::shared_lock<std::shared_mutex> lock(snapshot_mutex_);
    return snapshot_;
  }

  void publish(std::shared_ptr<const Snapshot> next) {
    std::unique_lock<std::shared_mutex> lock(snapshot_mutex_);
    snapshot_ = std::move(next);
  }

  Session& find_session(const std::string& id) {
    std::lock_guard<std::mutex> lock(sessions_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::kUnknownSession, id);
    return it->second;
  }

  LoopOptions loop_options(const SessionSettings& s) const {
    LoopOptions opt;
    opt.hyperparams = s.hyperparams;
    opt.policy = s.policy;
    opt.seed = s.seed;
    opt.parallelism = parallelism_;
    return opt;
  }

  static std::string forest_key(const SessionSettings& s) {
    return to_json(s.hyperparams).dump() + "/" + std::to_string(s.seed);
  }

  // Model for the snapshot under the session's settings; reuses the cached
  // one when it was trained with the same settings. Caller holds write_mutex_.
  const Forest& forest_for(const Snapshot& snap, const SessionSettings& settings) {
    const std::string key = forest_key(settings);
    if (snap.forest && snap.forest_key == key) return *snap.forest;
    auto next = std::make_shared<Snapshot>(snap);
    next->forest = std::make_shared<Forest>(
        train_forest(training_pools(snap.pools, corpus_.features), corpus_.features.rows(),
                     settings.hyperparams, mix_seed(settings.seed, snap.pools.iteration + 1),
                     parallelism_));
    next->forest_key = key;
    const Forest& forest = *next->forest;
    publish(std::move(next));
    return forest;
  }

  std::string make_token(const std::string& session_id) {
    const std::uint64_t n = ++batch_counter_;
    return hex64(mix_seed(fnv1a64(session_id), n ^ (snapshot()->version << 32)));
  }

  CandidateContext context(const std::string& phrase, std::optional<double> confidence) const {
    CandidateContext c;
    c.phrase = phrase;
    c.confidence = confidence;
    const Tokens tokens = split_phrase(phrase);
    for (const auto& sku : catalog_.skus()) {
      if (c.sample_titles.size() >= 5) break;
      if (std::search(sku.title.begin(), sku.title.end(), tokens.begin(), tokens.end()) !=
          sku.title.end()) {
        c.sample_titles.push_back(join_tokens(sku.title));
      }
    }
    for (const auto& q : log_.records()) {
      if (c.sample_queries.size() >= 5) break;
      const Tokens qt = split_phrase(q.query);
      if (std::search(qt.begin(), qt.end(), tokens.begin(), tokens.end()) != qt.end()) {
        c.sample_queries.push_back(q.query);
      }
    }
    if (auto row = corpus_.features.index_of(phrase)) {
      const FeatureVector& f = corpus_.features.row(*row);
      c.quality = f[0];
      c.click_entropy = f[24];
    }
    if (const QueryRecord* q = log_.find(phrase)) c.query_volume = q->volume;
    return c;
  }

  Catalog catalog_;
  QueryLog log_;
  PreparedCorpus corpus_;
  std::size_t parallelism_;

  mutable std::shared_mutex snapshot_mutex_;
  std::shared_ptr<const Snapshot> snapshot_;
  std::mutex write_mutex_;
  std::mutex sessions_mutex_;
  std::map<std::string, Session> sessions_;
  std::uint64_t session_counter_ = 0;
  std::uint64_t batch_counter_ = 0;
};

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownSession:
    case ErrorCode::kUnknownPhrase: return 404;
    case ErrorCode::kStaleBatch:
    case ErrorCode::kEmptyPool: return 409;
    case ErrorCode::kDuplicateDecision: return 422;
    case ErrorCode::kParseError:
    case ErrorCode::kConfigError:
    case ErrorCode::kEmptyPhrase: return 400;
    default: return 500;
  }
}

inline SelectionPolicy policy_from_json(const nlohmann::json& j, SelectionPolicy fallback) {
  if (!j.is_object()) return fallback;
  const std::string mode = j.value("mode", std::string("top_k"));
  if (mode == "top_k") return SelectionPolicy::top_k(j.value("k", fallback.k));
  if (mode == "threshold") return SelectionPolicy::at_threshold(j.value("threshold", 0.5));
  throw Error(ErrorCode::kConfigError, "unknown policy mode \"" + mode + "\"");
}

/// Registers the REST routes on `server`. Bodies are JSON; failures return
/// {"error": {"code": <ErrorCode name>, "message": ...}}.
inline void register_routes(httplib::Server& server, LabelingService& service) {
  auto guarded = [](auto handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const Error& e) {
        res.status = http_status(e.code());
        res.set_content(nlohmann::json{{"error",
                                        {{"code", std::string(e.code_name())},
                                         {"message", e.what()}}}}
                            .dump(),
                        "application/json");
      } catch (const nlohmann::json::exception& e) {
        res.status = 400;
        res.set_content(
            nlohmann::json{{"error", {{"code", "ParseError"}, {"message", e.what()}}}}.dump(),
            "application/json");
      }
    };
  };
  auto body_json = [](const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    try {
      return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kParseError, std::string("request body: ") + e.what());
    }
  };

  server.Post("/api/session", guarded([&service, body_json](const httplib::Request& req,
                                                           httplib::Response& res) {
    const auto body = body_json(req);
    SessionSettings settings;
    if (body.contains("policy")) settings.policy = policy_from_json(body["policy"], settings.policy);
    if (body.contains("hyperparams")) {
      settings.hyperparams = hyperparams_from_json(body["hyperparams"], settings.hyperparams);
    }
    settings.seed = body.value("seed", settings.seed);
    const std::string id = service.create_session(settings);
    res.status = 201;
    res.set_content(nlohmann::json{{"session_id", id}}.dump(), "application/json");
  }));

  server.Get(R"(/api/session/([^/]+)/batch)",
             guarded([&service](const httplib::Request& req, httplib::Response& res) {
               const BatchView view = service.get_batch(req.matches[1]);
               nlohmann::json items = nlohmann::json::array();
               for (const auto& c : view.candidates) items.push_back(to_json(c));
               res.set_content(
                   nlohmann::json{{"batch_token", view.batch_token}, {"candidates", items}}.dump(),
                   "application/json");
             }));

  server.Post(R"(/api/session/([^/]+)/labels)",
              guarded([&service, body_json](const httplib::Request& req, httplib::Response& res) {
                const auto body = body_json(req);
                if (!body.contains("batch_token") || !body["batch_token"].is_string()) {
                  throw Error(ErrorCode::kParseError, "missing batch_token");
                }
                std::vector<LabelDecision> decisions;
                for (const auto& d : body.value("decisions", nlohmann::json::array())) {
                  decisions.push_back({d.at("phrase").get<std::string>(),
                                       parse_verdict(d.at("verdict").get<std::string>())});
                }
                const IterationReport report =
                    service.post_labels(req.matches[1], body["batch_token"], decisions);
                res.set_content(to_json(report).dump(), "application/json");
              }));

  server.Get("/api/metrics", guarded([&service](const httplib::Request&, httplib::Response& res) {
               nlohmann::json reports = nlohmann::json::array();
               for (const auto& r : service.metrics()) reports.push_back(to_json(r));
               res.set_content(nlohmann::json{{"reports", reports}}.dump(), "application/json");
             }));

  server.Get(R"(/api/candidates/([^/]+)/context)",
             guarded([&service](const httplib::Request& req, httplib::Response& res) {
               const std::string phrase = httplib::detail::decode_url(req.matches[1], true);
               res.set_content(to_json(service.candidate_context(phrase)).dump(),
                               "application/json");
             }));
}

}  // namespace ptdisc

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

// Command-line entry point. Settings come from an optional JSON config file;
// flags override it.

#include <atomic>
#include <csignal>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ptdisc/active_loop.hpp"
#include "ptdisc/candidate_pool.hpp"
#include "ptdisc/classifier.hpp"
#include "ptdisc/corpus.hpp"
#include "ptdisc/error.hpp"
#include "ptdisc/features.hpp"
#include "ptdisc/service.hpp"
#include "ptdisc/simulator.hpp"

namespace ptdisc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsage = 2;

struct RunConfig {
  std::string catalog;
  std::string query_log;
  std::string known;
  std::string brands;
  std::string units;
  std::string stopwords;
  std::string out = ".";
  Hyperparams hyperparams;
  SelectionPolicy policy = SelectionPolicy::top_k(20);
  std::int64_t min_volume = 5;
  std::int64_t min_count = 3;
  std::size_t iterations = 50;
  std::size_t parallelism = 1;
  std::optional<std::uint64_t> seed;
  WorldConfig world;
  std::string arm = "clean";
};

inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c = {}) {
  c.catalog = j.value("catalog", c.catalog);
  c.query_log = j.value("query_log", c.query_log);
  c.known = j.value("known", c.known);
  c.brands = j.value("brands", c.brands);
  c.units = j.value("units", c.units);
  c.stopwords = j.value("stopwords", c.stopwords);
  c.out = j.value("out", c.out);
  if (j.contains("hyperparams")) c.hyperparams = hyperparams_from_json(j["hyperparams"], c.hyperparams);
  if (j.contains("policy")) c.policy = policy_from_json(j["policy"], c.policy);
  c.min_volume = j.value("min_volume", c.min_volume);
  c.min_count = j.value("min_count", c.min_count);
  c.iterations = j.value("iterations", c.iterations);
  c.parallelism = j.value("parallelism", c.parallelism);
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("world")) c.world = world_config_from_json(j["world"], c.world);
  c.arm = j.value("arm", c.arm);
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  const std::string text = detail::read_file_bytes(path);
  try {
    return run_config_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError, path + ": " + e.what());
  }
}

namespace cli_detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  return out;
}

inline std::string require_path(const std::string& value, const char* what) {
  if (value.empty()) throw Error(ErrorCode::kConfigError, std::string("no ") + what + " path given");
  return value;
}

inline Lexicons load_lexicons(const RunConfig& cfg, const Catalog& catalog) {
  Lexicons lex;
  lex.brands = cfg.brands.empty() ? brands_from_catalog(catalog) : load_lexicon(cfg.brands);
  lex.units = cfg.units.empty() ? default_unit_lexicon() : load_lexicon(cfg.units);
  lex.stopwords = cfg.stopwords.empty() ? default_stopwords() : load_lexicon(cfg.stopwords);
  return lex;
}

struct Inputs {
  Catalog catalog;
  QueryLog log;
};

inline Inputs load_inputs(const RunConfig& cfg) {
  return {load_catalog(require_path(cfg.catalog, "catalog")),
          load_query_log(require_path(cfg.query_log, "query log"))};
}

inline PipelineOptions pipeline_options(const RunConfig& cfg) {
  return {cfg.min_volume, cfg.min_count, cfg.parallelism};
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const std::string& path) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw Error(ErrorCode::kParseError, path + ": missing column " + name);
  }
};

inline Table read_csv(const std::filesystem::path& path) {
  std::istringstream in(detail::read_file_bytes(path.string()));
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, path.string() + ": empty file");
  t.header = split_csv_line(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    t.rows.push_back(split_csv_line(line));
    if (t.rows.back().size() != t.header.size()) {
      throw Error(ErrorCode::kParseError, path.string() + ": ragged row", line_no);
    }
  }
  return t;
}

inline std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline double mean_precision(const std::vector<IterationReport>& r, std::size_t begin,
                             std::size_t end) {
  end = std::min(end, r.size());
  if (begin >= end) return 0.0;
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += r[i].precision;
  return s / static_cast<double>(end - begin);
}

inline std::atomic<httplib::Server*> g_server{nullptr};

inline void stop_server(int) {
  if (auto* s = g_server.load()) s->stop();
}

}  // namespace cli_detail

inline int cmd_ingest(const RunConfig& cfg, std::ostream& out) {
  using namespace cli_detail;
  const Inputs in = load_inputs(cfg);
  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  {
    auto f = open_output(dir / "catalog.jsonl");
    write_catalog(f, in.catalog);
  }
  {
    auto f = open_output(dir / "queries.jsonl");
    write_query_log(f, in.log);
  }
  nlohmann::json summary{{"skus", in.catalog.size()},
                         {"queries", in.log.size()},
                         {"catalog_digest", in.catalog.digest()},
                         {"query_log_digest", in.log.digest()}};
  auto f = open_output(dir / "ingest.json");
  f << summary.dump(2) << '\n';
  out << "ingested " << in.catalog.size() << " skus, " << in.log.size() << " queries\n";
  return kExitOk;
}

inline int cmd_mine(const RunConfig& cfg, std::ostream& out) {
  using namespace cli_detail;
  const Inputs in = load_inputs(cfg);
  const NgramTable table = count_ngrams(in.catalog, kMaxPhraseTokens, cfg.parallelism);
  const MinedPhrases mined = mine_quality_phrases(table, cfg.min_count);
  const auto pool =
      build_candidate_pool(extract_query_candidates(in.log, cfg.min_volume), mined, in.log, table);
  std::filesystem::create_directories(cfg.out);
  auto f = open_output(std::filesystem::path(cfg.out) / "candidates.jsonl");
  write_candidates(f, pool);
  out << pool.size() << " candidates\n";
  return kExitOk;
}

inline int cmd_features(const RunConfig& cfg, std::ostream& out) {
  using namespace cli_detail;
  const Inputs in = load_inputs(cfg);
  const PreparedCorpus corpus = prepare_corpus(in.catalog, in.log, load_lexicons(cfg, in.catalog),
                                               pipeline_options(cfg));
  std::filesystem::create_directories(cfg.out);
  auto f = open_output(std::filesystem::path(cfg.out) / "features.csv");
  write_feature_matrix(f, corpus.features);
  out << corpus.features.size() << " rows x " << kFeatureCount << " features\n";
  return kExitOk;
}

inline int cmd_train(const RunConfig& cfg, std::uint64_t seed, std::ostream& out) {
  using namespace cli_detail;
  const Inputs in = load_inputs(cfg);
  const Ontology known = load_ontology(require_path(cfg.known, "known product type"), "known");
  const PreparedCorpus corpus = prepare_corpus(in.catalog, in.log, load_lexicons(cfg, in.catalog),
                                               pipeline_options(cfg));
  const PoolState pools = PoolState::initialize(corpus.features.phrases(), known.pts);
  const Forest forest = train_forest(training_pools(pools, corpus.features),
                                     corpus.features.rows(), cfg.hyperparams, seed,
                                     cfg.parallelism);
  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  save_forest(forest, (dir / "model.json").string());

  std::vector<ScoredCandidate> scored;
  for (const auto& p : pools.unlabeled) {
    scored.push_back({p, predict_confidence(forest, corpus.features.row(*corpus.features.index_of(p)))});
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.confidence > b.confidence; });
  auto f = open_output(dir / "scores.csv");
  f << "phrase,confidence\n";
  for (const auto& s : scored) f << '"' << s.phrase << "\"," << fmt6(s.confidence) << '\n';
  out << "trained " << forest.trees.size() << " trees on " << pools.positive.size()
      << " positives; scored " << scored.size() << " unlabeled candidates\n";
  return kExitOk;
}

inline int cmd_simulate(const RunConfig& cfg, std::uint64_t seed, std::ostream& out) {
  using namespace cli_detail;
  std::vector<TruthVariant> arms;
  if (cfg.arm == "clean" || cfg.arm == "both") arms.push_back(TruthVariant::kClean);
  if (cfg.arm == "noisy" || cfg.arm == "both") arms.push_back(TruthVariant::kNoisy);
  if (arms.empty()) throw Error(ErrorCode::kConfigError, "arm must be clean, noisy or both");

  WorldConfig wc = cfg.world;
  wc.seed = seed;
  const World world = generate_world(wc);
  const PreparedCorpus corpus = prepare_corpus(world.catalog, world.query_log,
                                               world_lexicons(world), pipeline_options(cfg));
  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  export_world(world, dir / "world");

  auto summary = open_output(dir / "summary.csv");
  summary << "seed,arm,iterations,precision_first3,precision_last3,cumulative_discovered,"
             "final_coverage\n";
  for (std::size_t a = 0; a < arms.size(); ++a) {
    SimulationOptions opt;
    opt.hyperparams = cfg.hyperparams;
    opt.policy = cfg.policy;
    opt.n_iterations = cfg.iterations;
    opt.truth_variant = arms[a];
    opt.seed = seed;
    opt.parallelism = cfg.parallelism;
    const SimulationResult r = run_simulation(world, corpus, opt);
    const std::string name(truth_variant_name(arms[a]));
    {
      auto f = open_output(dir / ("report_" + name + ".csv"));
      write_report_csv(f, r.reports);
    }
    if (a == 0) {
      auto f = open_output(dir / "report.csv");
      write_report_csv(f, r.reports);
    }
    const std::size_t n = r.reports.size();
    summary << seed << ',' << name << ',' << n << ',' << fmt6(mean_precision(r.reports, 0, 3))
            << ',' << fmt6(mean_precision(r.reports, n >= 3 ? n - 3 : 0, n)) << ','
            << r.reports.back().cumulative_discovered << ',' << fmt6(r.final_coverage) << '\n';
    out << name << ": " << n << " iterations, final coverage " << fmt6(r.final_coverage) << '\n';
  }
  return kExitOk;
}

/// Aggregates simulate output directories into per-run and mean curves.
inline int cmd_report(const RunConfig& cfg, const std::vector<std::string>& runs,
                      std::ostream& out) {
  using namespace cli_detail;
  if (runs.empty()) throw Error(ErrorCode::kConfigError, "report needs at least one run directory");
  struct Point {
    double precision = 0.0;
    double coverage = 0.0;
    double discovered = 0.0;
    std::size_t n = 0;
  };
  std::map<std::pair<std::string, std::size_t>, Point> mean;
  std::map<std::string, std::vector<double>> finals;
  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  auto curves = open_output(dir / "curves.csv");
  curves << "run,seed,arm,iteration,precision,coverage,cumulative_discovered\n";
  for (const auto& run : runs) {
    const std::filesystem::path rd(run);
    const Table summary = read_csv(rd / "summary.csv");
    const std::size_t seed_col = summary.column("seed", (rd / "summary.csv").string());
    const std::size_t arm_col = summary.column("arm", (rd / "summary.csv").string());
    for (const auto& row : summary.rows) {
      const std::string& arm = row[arm_col];
      const auto path = rd / ("report_" + arm + ".csv");
      const Table rep = read_csv(path);
      const std::size_t it = rep.column("iteration", path.string());
      const std::size_t pr = rep.column("precision", path.string());
      const std::size_t cv = rep.column("coverage", path.string());
      const std::size_t cd = rep.column("cumulative_discovered", path.string());
      for (const auto& r : rep.rows) {
        curves << rd.filename().string() << ',' << row[seed_col] << ',' << arm << ',' << r[it]
               << ',' << r[pr] << ',' << r[cv] << ',' << r[cd] << '\n';
        Point& p = mean[{arm, std::stoul(r[it])}];
        p.precision += std::stod(r[pr]);
        p.coverage += r[cv].empty() ? 0.0 : std::stod(r[cv]);
        p.discovered += std::stod(r[cd]);
        ++p.n;
      }
      if (!rep.rows.empty()) {
        const auto& last = rep.rows.back()[cv];
        finals[arm].push_back(last.empty() ? 0.0 : std::stod(last));
      }
    }
  }
  auto m = open_output(dir / "curves_mean.csv");
  m << "arm,iteration,runs,mean_precision,mean_coverage,mean_cumulative_discovered\n";
  for (const auto& [key, p] : mean) {
    const double n = static_cast<double>(p.n);
    m << key.first << ',' << key.second << ',' << p.n << ',' << fmt6(p.precision / n) << ','
      << fmt6(p.coverage / n) << ',' << fmt6(p.discovered / n) << '\n';
  }
  auto f = open_output(dir / "final.csv");
  f << "arm,runs,mean_final_coverage\n";
  for (const auto& [arm, v] : finals) {
    double s = 0.0;
    for (double x : v) s += x;
    f << arm << ',' << v.size() << ',' << fmt6(s / static_cast<double>(v.size())) << '\n';
    out << arm << ": mean final coverage " << fmt6(s / static_cast<double>(v.size())) << " over "
        << v.size() << " runs\n";
  }
  return kExitOk;
}

inline int cmd_serve(const RunConfig& cfg, std::uint64_t seed, const std::string& host, int port,
                     std::ostream& out) {
  using namespace cli_detail;
  Inputs in = load_inputs(cfg);
  const Ontology known = load_ontology(require_path(cfg.known, "known product type"), "known");
  PreparedCorpus corpus = prepare_corpus(in.catalog, in.log, load_lexicons(cfg, in.catalog),
                                         pipeline_options(cfg));
  LabelingService service(std::move(in.catalog), std::move(in.log), std::move(corpus), known.pts,
                          cfg.parallelism);
  (void)seed;
  httplib::Server server;
  register_routes(server, service);
  g_server = &server;
  std::signal(SIGINT, stop_server);
  std::signal(SIGTERM, stop_server);
  out << "listening on http://" << host << ':' << port << std::endl;
  const bool ok = server.listen(host, port);
  g_server = nullptr;
  if (!ok) throw Error(ErrorCode::kIoError, "cannot listen on " + host + ":" + std::to_string(port));
  return kExitOk;
}

/// Runs one subcommand. `args` excludes the program name.
inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Product-type discovery toolkit", "ptdisc"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> top_k;
  std::optional<double> threshold;
  std::optional<std::int64_t> min_volume;
  std::optional<std::size_t> parallelism;
  std::optional<std::string> catalog, query_log, known, arm, brands, units, stopwords;
  std::vector<std::string> runs;
  std::string host = "127.0.0.1";
  int port = 8080;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "random seed; a random one is printed if omitted");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--iterations", iterations, "loop iterations");
    sub->add_option("--top-k", top_k, "batch size for top-k selection")->check(CLI::PositiveNumber);
    sub->add_option("--threshold", threshold, "confidence threshold selection")
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--min-volume", min_volume, "minimum query volume for query candidates");
    sub->add_option("--parallelism", parallelism, "worker threads")->check(CLI::PositiveNumber);
  };
  auto data = [&](CLI::App* sub) {
    sub->add_option("--catalog", catalog, "catalog JSONL");
    sub->add_option("--queries", query_log, "query log JSONL");
    sub->add_option("--brands", brands, "brand lexicon; defaults to catalog brands");
    sub->add_option("--units", units, "unit lexicon");
    sub->add_option("--stopwords", stopwords, "stopword lexicon");
  };
  auto* ingest = app.add_subcommand("ingest", "validate and normalize catalog and query log");
  auto* mine = app.add_subcommand("mine-candidates", "write the candidate pool");
  auto* features = app.add_subcommand("features", "write the feature matrix");
  auto* train = app.add_subcommand("train", "train a forest from known product types");
  auto* simulate = app.add_subcommand("simulate", "run the loop on a synthetic world");
  auto* serve = app.add_subcommand("serve", "serve the labeling API");
  auto* report = app.add_subcommand("report", "aggregate simulate runs into curve data");
  for (auto* sub : {ingest, mine, features, train, simulate, serve, report}) common(sub);
  for (auto* sub : {ingest, mine, features, train, serve}) data(sub);
  for (auto* sub : {train, serve}) sub->add_option("--known", known, "known product types, one per line");
  simulate->add_option("--arm", arm, "truth variant: clean, noisy or both");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port");
  report->add_option("runs", runs, "simulate output directories")->required();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (out_dir) cfg.out = *out_dir;
    if (iterations) cfg.iterations = *iterations;
    if (top_k) cfg.policy = SelectionPolicy::top_k(*top_k);
    if (threshold) cfg.policy = SelectionPolicy::at_threshold(*threshold);
    if (min_volume) cfg.min_volume = *min_volume;
    if (parallelism) cfg.parallelism = *parallelism;
    if (catalog) cfg.catalog = *catalog;
    if (query_log) cfg.query_log = *query_log;
    if (known) cfg.known = *known;
    if (brands) cfg.brands = *brands;
    if (units) cfg.units = *units;
    if (stopwords) cfg.stopwords = *stopwords;
    if (arm) cfg.arm = *arm;
    if (seed) cfg.seed = *seed;
    if (!cfg.seed) {
      cfg.seed = std::uniform_int_distribution<std::uint64_t>()(
          *std::make_unique<std::random_device>());
    }
    out << "seed: " << *cfg.seed << '\n';
    cfg.hyperparams.validate();
    if (cfg.iterations < 1) throw Error(ErrorCode::kConfigError, "iterations must be >= 1");
    if (cfg.parallelism < 1) throw Error(ErrorCode::kConfigError, "parallelism must be >= 1");

    if (ingest->parsed()) return cmd_ingest(cfg, out);
    if (mine->parsed()) return cmd_mine(cfg, out);
    if (features->parsed()) return cmd_features(cfg, out);
    if (train->parsed()) return cmd_train(cfg, *cfg.seed, out);
    if (simulate->parsed()) return cmd_simulate(cfg, *cfg.seed, out);
    if (report->parsed()) return cmd_report(cfg, runs, out);
    return cmd_serve(cfg, *cfg.seed, host, port, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kConfigError ? kExitUsage : kExitDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  }
}

}  // namespace ptdisc

#pragma once

// Command implementations behind the CLI binary.  They live here, not in
// main.cpp, so the test suite can drive the exact code paths users hit,
// including exit codes and the files written.
//
// Seed discipline: every command takes one seed and derives fixed substreams
// from it (0: graph skeleton, 1: truth parameters, 2: observation noise,
// 3: initial order).  The MLP simulator draws truth and noise from stream 1
// in one pass.  Rerunning a command with the same seed reproduces identical
// bytes.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "toposwap/datagen.hpp"
#include "toposwap/graph.hpp"
#include "toposwap/io.hpp"
#include "toposwap/scores.hpp"
#include "toposwap/search.hpp"
#include "toposwap/solver.hpp"

namespace toposwap {

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitNotCertified = 1;  // learn/kkt-check: kkt_flag == 0
inline constexpr int kExitBadConfig = 2;
inline constexpr int kExitFailure = 3;

struct GenerateConfig {
  std::string graph = "er";
  int d = 10;
  int k = 1;
  std::string noise = "gauss-ev";  // linear noises plus the "logistic" / "mlp" SEMs
  int n = 1000;
  int m1 = 30;
  std::uint64_t seed = 0;
  std::filesystem::path out = ".";
};

struct LearnConfig {
  std::filesystem::path data;
  std::optional<std::filesystem::path> truth;  // required by the population score
  std::string score = "ls";
  std::string h = "poly";
  std::string model = "linear";
  int m1 = 30;
  std::string init = "random";  // "random" or a warm-start matrix path
  double threshold_omega = 0.3;
  std::uint64_t seed = 0;
  SearchConfig search;
  SolveOptions solve;
  std::filesystem::path out = ".";
};

struct EvalConfig {
  std::filesystem::path est;
  std::filesystem::path truth;
  std::optional<std::filesystem::path> data;
  std::string score = "ls";
  std::string h = "poly";
  double threshold_omega = 0.3;
};

struct BenchConfig {
  std::string graph = "er";
  std::vector<int> d_list = {10};
  int k = 1;
  std::string noise = "gauss-ev";
  int n = 1000;
  int m1 = 30;
  std::string score = "ls";
  std::string h = "poly";
  std::string model = "linear";
  std::vector<std::uint64_t> seeds = {0};
  double threshold_omega = 0.3;
  SearchConfig search;
  SolveOptions solve;
  std::filesystem::path out = ".";
};

struct KktCheckConfig {
  std::filesystem::path weights;
  std::filesystem::path data;
  std::optional<std::filesystem::path> truth;
  std::string score = "ls";
  std::string h = "poly";
  double kkt_tol = 1e-6;
};

namespace detail {

struct Instance {
  Matrix truth_weights;            // aggregated |weights| for MLP truth
  std::optional<ParamSet> truth_model;  // set for MLP instances
  Matrix data;
  IntMatrix truth_support;
};

inline bool is_linear_noise(const std::string& noise) {
  return noise == "gauss-ev" || noise == "gauss-nv" || noise == "exp" || noise == "gumbel";
}

inline Instance make_instance(const std::string& graph, int d, int k, const std::string& noise,
                              int n, int m1, std::uint64_t seed) {
  GraphSpec gspec{graph_from_string(graph), d, k};
  Rng graph_rng = Rng::stream(seed, 0);
  Rng truth_rng = Rng::stream(seed, 1);
  Rng noise_rng = Rng::stream(seed, 2);
  const IntMatrix b = random_dag(gspec, graph_rng);

  Instance inst;
  inst.truth_support = b;
  if (noise == "mlp") {
    auto [model, x] = simulate_mlp(b, HiddenSpec{m1}, n, truth_rng);
    inst.truth_weights = weight_matrix(model);
    inst.truth_model = std::move(model);
    inst.data = std::move(x);
    return inst;
  }
  const Matrix w = assign_weights(b, truth_rng);
  inst.truth_weights = w;
  if (noise == "logistic") {
    inst.data = simulate_logistic(w, n, noise_rng);
    return inst;
  }
  if (!is_linear_noise(noise)) throw ConfigError("unknown noise kind: " + noise);
  NoiseSpec nspec;
  nspec.kind = noise_from_string(noise);
  inst.data = simulate_linear(w, nspec, n, noise_rng);
  return inst;
}

inline ScoreSpec make_score_spec(const std::string& score,
                                 const std::optional<Matrix>& truth) {
  ScoreSpec spec;
  spec.kind = score_from_string(score);
  if (spec.kind == ScoreKind::kPopulationLs) {
    if (!truth) throw ConfigError("population score needs --truth");
    spec.population_truth = truth;
  }
  return spec;
}

inline ModelKind model_from_string(const std::string& name) {
  if (name == "linear") return ModelKind::kLinear;
  if (name == "mlp") return ModelKind::kMlp;
  throw ConfigError("unknown model kind: " + name);
}

}  // namespace detail

inline int run_generate(const GenerateConfig& cfg, std::ostream& out = std::cout) {
  const auto inst =
      detail::make_instance(cfg.graph, cfg.d, cfg.k, cfg.noise, cfg.n, cfg.m1, cfg.seed);
  std::filesystem::create_directories(cfg.out);

  write_matrix_csv(cfg.out / "truth.csv", inst.truth_weights);
  if (inst.truth_model) write_json(cfg.out / "truth_model.json", mlp_to_json(*inst.truth_model));
  write_matrix_csv(cfg.out / "data.csv", inst.data);

  Json manifest{{"format_version", 1},
                {"graph", {{"kind", cfg.graph}, {"d", cfg.d}, {"k", cfg.k}}},
                {"noise", cfg.noise},
                {"n", cfg.n},
                {"seed", cfg.seed},
                {"files", {{"truth", "truth.csv"}, {"data", "data.csv"}}}};
  if (cfg.graph == "er")
    manifest["graph"]["er_probability"] =
        er_edge_probability(GraphSpec{GraphKind::kErdosRenyi, cfg.d, cfg.k});
  if (cfg.noise == "mlp") {
    manifest["m1"] = cfg.m1;
    manifest["files"]["truth_model"] = "truth_model.json";
  }
  write_json(cfg.out / "manifest.json", manifest);
  out << "wrote truth.csv data.csv manifest.json to " << cfg.out.string() << "\n";
  return kExitOk;
}

inline int run_learn(const LearnConfig& cfg, std::ostream& out = std::cout) {
  const ModelKind model = detail::model_from_string(cfg.model);
  std::optional<Matrix> truth;
  if (cfg.truth) truth = read_square_matrix_csv(*cfg.truth);
  const ScoreSpec spec = detail::make_score_spec(cfg.score, truth);

  Matrix x;
  int d = 0;
  if (spec.kind == ScoreKind::kPopulationLs && cfg.data.empty()) {
    d = static_cast<int>(truth->rows());
    x = Matrix::Zero(0, d);
  } else {
    x = read_matrix_csv(cfg.data);
    d = static_cast<int>(x.cols());
  }

  Permutation pi0 = Permutation::identity(d);
  if (cfg.init == "random") {
    Rng order_rng = Rng::stream(cfg.seed, 3);
    pi0 = Permutation::random(d, order_rng);
  } else {
    pi0 = topological_sort(read_square_matrix_csv(cfg.init));
    if (pi0.size() != d) throw ConfigError("--init matrix size does not match the data");
  }

  SearchConfig search = cfg.search;
  search.h_kind = acyclicity_from_string(cfg.h);
  SolveOptions solve = cfg.solve;
  solve.init_seed = cfg.seed;

  const RunReport report = topo_search(pi0, spec, model, x, search, solve, HiddenSpec{cfg.m1});

  std::filesystem::create_directories(cfg.out);
  const Matrix west = model == ModelKind::kLinear ? report.final_solution.theta.theta
                                                  : weight_matrix(report.final_solution.theta);
  write_matrix_csv(cfg.out / "weights.csv", west);
  if (model == ModelKind::kMlp)
    write_json(cfg.out / "model.json", mlp_to_json(report.final_solution.theta));

  Json config_echo{{"score", cfg.score},     {"h", cfg.h},
                   {"model", cfg.model},     {"init", cfg.init},
                   {"threshold", cfg.threshold_omega}, {"greedy", search.greedy},
                   {"s_small", report.sizes.s_small},  {"s_large", report.sizes.s_large},
                   {"s0", report.sizes.s0}};
  write_json(cfg.out / "report.json", report_to_json(report, config_echo, "weights.csv", cfg.seed));

  out << "final_score=" << format_double(report.final_solution.score_value)
      << " kkt_flag=" << report.kkt
      << " kkt_max_violation=" << format_double(report.kkt_max_violation)
      << " iterations=" << report.iterations.size() - 1
      << " wall_time_s=" << format_double(report.total_wall_time_s) << "\n";
  return report.kkt == 1 ? kExitOk : kExitNotCertified;
}

inline int run_eval(const EvalConfig& cfg, std::ostream& out = std::cout) {
  const Matrix est = read_square_matrix_csv(cfg.est);
  const Matrix truth = read_square_matrix_csv(cfg.truth);
  if (est.rows() != truth.rows())
    throw DimensionMismatchError("eval: estimate and truth have different sizes");

  const IntMatrix est_b = threshold(est, cfg.threshold_omega);
  const IntMatrix truth_b = threshold(truth, 0.0);  // truth support = nonzero entries
  const int distance = shd(est_b, truth_b);
  out << "shd=" << distance << " est_edges=" << est_b.sum() << " true_edges=" << truth_b.sum();

  if (cfg.data) {
    const Matrix x = read_matrix_csv(*cfg.data);
    ParamSet params = ParamSet::linear_zero(static_cast<int>(est.rows()));
    params.theta = est;
    params.theta.diagonal().setZero();
    const ScoreSpec spec = detail::make_score_spec(cfg.score, truth);
    const ScoreEval eval = evaluate_score(spec, params, x, /*floor_residuals=*/true);
    out << " loss=" << format_double(eval.value);
    try {
      const Matrix kkt = kkt_matrix(params, eval.grad, acyclicity_from_string(cfg.h));
      out << " kkt_max_violation=" << format_double(kkt.cwiseAbs().maxCoeff());
    } catch (const NotADagError&) {
      out << " kkt_max_violation=nan(cyclic estimate)";
    }
  }
  out << "\n";
  return kExitOk;
}

struct BenchRow {
  std::string method;
  int d = 0;
  std::uint64_t seed = 0;
  double loss = 0.0;
  int shd_value = 0;
  int kkt = 0;
  double wall_time_s = 0.0;
};

inline std::vector<BenchRow> bench_rows(const BenchConfig& cfg) {
  const ModelKind model = detail::model_from_string(cfg.model);
  std::vector<BenchRow> rows;
  for (int d : cfg.d_list) {
    for (std::uint64_t seed : cfg.seeds) {
      const auto inst = detail::make_instance(cfg.graph, d, cfg.k, cfg.noise, cfg.n, cfg.m1, seed);
      std::optional<Matrix> truth;
      if (cfg.score == "population") truth = inst.truth_weights;
      const ScoreSpec spec = detail::make_score_spec(cfg.score, truth);

      Rng order_rng = Rng::stream(seed, 3);
      const Permutation pi0 = Permutation::random(d, order_rng);

      SearchConfig search = cfg.search;
      search.h_kind = acyclicity_from_string(cfg.h);
      SolveOptions solve = cfg.solve;
      solve.init_seed = seed;

      const RunReport report =
          topo_search(pi0, spec, model, inst.data, search, solve, HiddenSpec{cfg.m1});

      BenchRow row;
      row.method = cfg.search.greedy ? "topo-greedy" : "topo";
      row.d = d;
      row.seed = seed;
      row.loss = report.final_solution.score_value;
      const Matrix west = model == ModelKind::kLinear ? report.final_solution.theta.theta
                                                      : weight_matrix(report.final_solution.theta);
      row.shd_value = shd(threshold(west, cfg.threshold_omega), inst.truth_support);
      row.kkt = report.kkt;
      row.wall_time_s = report.total_wall_time_s;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

struct SummaryStat {
  double mean = 0.0;
  double stderr_ = 0.0;  // standard error of the mean (sample stddev / sqrt(m))
};

inline SummaryStat summarize(const std::vector<double>& values) {
  SummaryStat s;
  const double m = static_cast<double>(values.size());
  if (values.empty()) return s;
  double total = 0.0;
  for (double v : values) total += v;
  s.mean = total / m;
  if (values.size() < 2) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stderr_ = std::sqrt(ss / (m - 1.0)) / std::sqrt(m);
  return s;
}

inline int run_bench(const BenchConfig& cfg, std::ostream& out = std::cout) {
  const std::vector<BenchRow> rows = bench_rows(cfg);
  std::filesystem::create_directories(cfg.out);

  std::string csv = "method,d,seed,loss,shd,kkt,wall_time_s\n";
  for (const auto& row : rows) {
    csv += row.method + "," + std::to_string(row.d) + "," + std::to_string(row.seed) + "," +
           format_double(row.loss) + "," + std::to_string(row.shd_value) + "," +
           std::to_string(row.kkt) + "," + format_double(row.wall_time_s) + "\n";
  }
  {
    std::ofstream file(cfg.out / "bench.csv", std::ios::binary);
    if (!file) throw IoError("cannot open for writing: " + (cfg.out / "bench.csv").string());
    file << csv;
  }

  Json summary = Json::array();
  for (int d : cfg.d_list) {
    std::vector<double> losses, shds, walls;
    int kkt_hits = 0, count = 0;
    for (const auto& row : rows) {
      if (row.d != d) continue;
      losses.push_back(row.loss);
      shds.push_back(static_cast<double>(row.shd_value));
      walls.push_back(row.wall_time_s);
      kkt_hits += row.kkt;
      ++count;
    }
    const SummaryStat loss = summarize(losses), dist = summarize(shds), wall = summarize(walls);
    summary.push_back({{"d", d},
                       {"runs", count},
                       {"loss_mean", loss.mean},
                       {"loss_stderr", loss.stderr_},
                       {"shd_mean", dist.mean},
                       {"shd_stderr", dist.stderr_},
                       {"kkt_rate", count ? static_cast<double>(kkt_hits) / count : 0.0},
                       {"wall_time_mean_s", wall.mean}});
    out << "d=" << d << " loss=" << format_double(loss.mean) << "+-" << format_double(loss.stderr_)
        << " shd=" << format_double(dist.mean) << "+-" << format_double(dist.stderr_)
        << " kkt_rate=" << format_double(count ? static_cast<double>(kkt_hits) / count : 0.0)
        << " wall_s=" << format_double(wall.mean) << "\n";
  }
  write_json(cfg.out / "summary.json", summary);
  return kExitOk;
}

inline int run_kkt_check(const KktCheckConfig& cfg, std::ostream& out = std::cout) {
  const Matrix weights = read_square_matrix_csv(cfg.weights);
  ParamSet params = ParamSet::linear_zero(static_cast<int>(weights.rows()));
  params.theta = weights;
  if (params.theta.diagonal().cwiseAbs().maxCoeff() != 0.0)
    throw ConfigError("kkt-check: weight matrix must have a zero diagonal");

  std::optional<Matrix> truth;
  if (cfg.truth) truth = read_square_matrix_csv(*cfg.truth);
  const ScoreSpec spec = detail::make_score_spec(cfg.score, truth);
  Matrix x;
  if (spec.kind == ScoreKind::kPopulationLs && cfg.data.empty())
    x = Matrix::Zero(0, weights.rows());
  else
    x = read_matrix_csv(cfg.data);

  const ScoreEval eval = evaluate_score(spec, params, x, /*floor_residuals=*/true);
  const Matrix kkt = kkt_matrix(params, eval.grad, acyclicity_from_string(cfg.h));
  const double max_violation = kkt.size() == 0 ? 0.0 : kkt.cwiseAbs().maxCoeff();
  const int flag = kkt_flag(kkt, cfg.kkt_tol);
  out << "kkt_flag=" << flag << " kkt_max_violation=" << format_double(max_violation) << "\n";
  return flag == 1 ? kExitOk : kExitNotCertified;
}

// --- JSON config overlays: file values fill fields the command line left
// untouched; explicit flags always win.  The caller passes the set of keys
// the user set on the command line. ---

namespace detail {

template <typename T>
void maybe_set(const Json& j, const char* key, T& target, const std::vector<std::string>& given) {
  if (!j.contains(key)) return;
  for (const auto& g : given)
    if (g == key) return;
  target = j.at(key).get<T>();
}

inline void overlay_search(const Json& j, SearchConfig& search,
                           const std::vector<std::string>& given) {
  if (j.contains("s_small") && !j.at("s_small").is_null()) {
    int v = 0;
    maybe_set(j, "s_small", v, given);
    if (v > 0) search.s_small = v;
  }
  if (j.contains("s_large") && !j.at("s_large").is_null()) {
    int v = 0;
    maybe_set(j, "s_large", v, given);
    if (v > 0) search.s_large = v;
  }
  if (j.contains("s0") && !j.at("s0").is_null()) {
    int v = -1;
    maybe_set(j, "s0", v, given);
    if (v >= 0) search.s0 = v;
  }
  bool greedy = search.greedy;
  maybe_set(j, "greedy", greedy, given);
  search.greedy = greedy;
  std::vector<double> grid;
  if (j.contains("tau_grid")) {
    maybe_set(j, "tau_grid", grid, given);
    if (!grid.empty()) search.tau_grid = grid;
  }
  grid.clear();
  if (j.contains("xi_grid")) {
    maybe_set(j, "xi_grid", grid, given);
    if (!grid.empty()) search.xi_grid = grid;
  }
  maybe_set(j, "kkt_tol", search.kkt_tol, given);
  maybe_set(j, "max_outer_iters", search.max_outer_iters, given);
}

inline void overlay_solve(const Json& j, SolveOptions& solve,
                          const std::vector<std::string>& given) {
  if (j.contains("stationarity_tol") && !j.at("stationarity_tol").is_null()) {
    double v = 0.0;
    maybe_set(j, "stationarity_tol", v, given);
    if (v > 0.0) solve.stationarity_tol = v;
  }
  maybe_set(j, "max_iters", solve.max_iters, given);
  maybe_set(j, "learning_rate", solve.learning_rate, given);
  std::string rule;
  maybe_set(j, "optimizer", rule, given);
  if (rule == "gd") solve.step_rule = StepRule::kBacktracking;
  if (rule == "adam") solve.step_rule = StepRule::kAdaptiveMoment;
}

}  // namespace detail

}  // namespace toposwap

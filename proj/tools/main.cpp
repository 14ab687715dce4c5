// Command line front end.  All real work happens in the library; this file
// only wires flags and an optional JSON config file into the config structs.

#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "toposwap/toposwap.hpp"

namespace {

using namespace toposwap;

// Names of options the user set explicitly; these beat config-file values.
std::vector<std::string> keys_given(const CLI::App& cmd) {
  std::vector<std::string> keys;
  for (const CLI::Option* opt : cmd.get_options()) {
    if (opt->count() == 0) continue;
    std::string name = opt->get_single_name();
    for (char& c : name)
      if (c == '-') c = '_';
    keys.push_back(std::move(name));
  }
  return keys;
}

struct SearchFlags {
  int s_small = -1;
  int s_large = -1;
  int s0 = -1;

  void add(CLI::App* cmd, SearchConfig& search) {
    cmd->add_option("--s-small", s_small, "target size of the tight candidate set");
    cmd->add_option("--s-large", s_large, "target size of the escape candidate set");
    cmd->add_option("--s0", s0, "how many escape rounds to allow");
    cmd->add_flag("--greedy", search.greedy, "accept the first improving swap");
    cmd->add_option("--tau-grid", search.tau_grid, "walk-weight thresholds to scan");
    cmd->add_option("--xi-grid", search.xi_grid, "score-gradient thresholds to scan");
    cmd->add_option("--kkt-tol", search.kkt_tol, "violation bound for the final certificate");
    cmd->add_option("--max-outer-iters", search.max_outer_iters, "outer iteration hard stop");
    cmd->add_flag("--parallel", search.parallel_swaps, "probe candidate swaps on threads");
  }

  void apply(SearchConfig& search) const {
    if (s_small > 0) search.s_small = s_small;
    if (s_large > 0) search.s_large = s_large;
    if (s0 >= 0) search.s0 = s0;
  }
};

struct SolveFlags {
  double stationarity_tol = -1.0;
  std::string optimizer;

  void add(CLI::App* cmd, SolveOptions& solve) {
    cmd->add_option("--stationarity-tol", stationarity_tol,
                    "gradient sup-norm declaring an inner solve done");
    cmd->add_option("--max-iters", solve.max_iters, "inner solver iteration cap");
    cmd->add_option("--learning-rate", solve.learning_rate, "initial iterative step size");
    cmd->add_option("--optimizer", optimizer, "iterative step rule: adam or gd")
        ->check(CLI::IsMember({"adam", "gd"}));
  }

  void apply(SolveOptions& solve) const {
    if (stationarity_tol > 0.0) solve.stationarity_tol = stationarity_tol;
    if (optimizer == "gd") solve.step_rule = StepRule::kBacktracking;
    if (optimizer == "adam") solve.step_rule = StepRule::kAdaptiveMoment;
  }
};

Json load_config(const std::string& path) { return path.empty() ? Json::object() : read_json(path); }

}  // namespace

int main(int argc, char** argv) {
  using namespace toposwap;

  CLI::App app{"DAG structure learning by swapping topological orders"};
  // --h names the acyclicity function on several subcommands, so help gets
  // the long spelling only.
  app.set_help_flag("--help", "print help and exit");
  app.require_subcommand(1);
  int code = kExitOk;

  // generate
  GenerateConfig gen;
  std::string gen_config;
  CLI::App* generate = app.add_subcommand("generate", "sample a ground-truth model and data");
  generate->set_help_flag("--help", "print help and exit");
  generate->add_option("--graph", gen.graph, "graph kind: er, sf, or full")
      ->check(CLI::IsMember({"er", "sf", "full"}));
  generate->add_option("--d", gen.d, "number of nodes");
  generate->add_option("--k", gen.k, "expected edges per node (er) or attachments (sf)");
  generate->add_option("--noise", gen.noise,
                       "observation model: gauss-ev, gauss-nv, exp, gumbel, logistic, mlp");
  generate->add_option("--n", gen.n, "sample count");
  generate->add_option("--m1", gen.m1, "hidden width of the mlp truth");
  generate->add_option("--seed", gen.seed, "rng seed");
  generate->add_option("--out", gen.out, "output directory");
  generate->add_option("--config", gen_config, "JSON file with the same keys as the flags");
  generate->callback([&] {
    const Json j = load_config(gen_config);
    const auto given = keys_given(*generate);
    detail::maybe_set(j, "graph", gen.graph, given);
    detail::maybe_set(j, "d", gen.d, given);
    detail::maybe_set(j, "k", gen.k, given);
    detail::maybe_set(j, "noise", gen.noise, given);
    detail::maybe_set(j, "n", gen.n, given);
    detail::maybe_set(j, "m1", gen.m1, given);
    detail::maybe_set(j, "seed", gen.seed, given);
    std::string out = gen.out.string();
    detail::maybe_set(j, "out", out, given);
    gen.out = out;
    code = run_generate(gen);
  });

  // learn
  LearnConfig learn;
  std::string learn_config, learn_data, learn_truth;
  SearchFlags learn_search;
  SolveFlags learn_solve;
  CLI::App* learn_cmd = app.add_subcommand("learn", "run the order search on a data set");
  learn_cmd->set_help_flag("--help", "print help and exit");
  learn_cmd->add_option("--data", learn_data, "observations, one row per sample");
  learn_cmd->add_option("--truth", learn_truth, "true weights (needed by the population score)");
  learn_cmd->add_option("--score", learn.score, "ls, nll-mcp, logistic, or population")
      ->check(CLI::IsMember({"ls", "nll-mcp", "logistic", "population"}));
  learn_cmd->add_option("--h", learn.h, "acyclicity function: expm, poly, or logdet")
      ->check(CLI::IsMember({"expm", "poly", "logdet"}));
  learn_cmd->add_option("--model", learn.model, "fitted model: linear or mlp")
      ->check(CLI::IsMember({"linear", "mlp"}));
  learn_cmd->add_option("--m1", learn.m1, "hidden width of the fitted mlp");
  learn_cmd->add_option("--init", learn.init, "'random' or a warm-start weight matrix path");
  learn_cmd->add_option("--threshold", learn.threshold_omega, "edge threshold for reporting");
  learn_cmd->add_option("--seed", learn.seed, "rng seed (initial order, mlp init)");
  learn_cmd->add_option("--out", learn.out, "output directory");
  learn_cmd->add_option("--config", learn_config, "JSON file with the same keys as the flags");
  learn_search.add(learn_cmd, learn.search);
  learn_solve.add(learn_cmd, learn.solve);
  learn_cmd->callback([&] {
    const Json j = load_config(learn_config);
    const auto given = keys_given(*learn_cmd);
    detail::maybe_set(j, "data", learn_data, given);
    detail::maybe_set(j, "truth", learn_truth, given);
    detail::maybe_set(j, "score", learn.score, given);
    detail::maybe_set(j, "h", learn.h, given);
    detail::maybe_set(j, "model", learn.model, given);
    detail::maybe_set(j, "m1", learn.m1, given);
    detail::maybe_set(j, "init", learn.init, given);
    detail::maybe_set(j, "threshold", learn.threshold_omega, given);
    detail::maybe_set(j, "seed", learn.seed, given);
    std::string out = learn.out.string();
    detail::maybe_set(j, "out", out, given);
    learn.out = out;
    detail::overlay_search(j, learn.search, given);
    detail::overlay_solve(j, learn.solve, given);
    learn_search.apply(learn.search);
    learn_solve.apply(learn.solve);
    learn.data = learn_data;
    if (!learn_truth.empty()) learn.truth = learn_truth;
    code = run_learn(learn);
  });

  // eval
  EvalConfig eval;
  std::string eval_est, eval_truth, eval_data;
  CLI::App* eval_cmd = app.add_subcommand("eval", "compare an estimate against the truth");
  eval_cmd->set_help_flag("--help", "print help and exit");
  eval_cmd->add_option("--est", eval_est, "estimated weight matrix")->required();
  eval_cmd->add_option("--truth", eval_truth, "true weight matrix")->required();
  eval_cmd->add_option("--data", eval_data, "observations, to also report the loss");
  eval_cmd->add_option("--score", eval.score, "score used for the loss column");
  eval_cmd->add_option("--h", eval.h, "acyclicity function for the certificate");
  eval_cmd->add_option("--threshold", eval.threshold_omega, "edge threshold");
  eval_cmd->callback([&] {
    eval.est = eval_est;
    eval.truth = eval_truth;
    if (!eval_data.empty()) eval.data = eval_data;
    code = run_eval(eval);
  });

  // bench
  BenchConfig bench;
  std::string bench_config;
  SearchFlags bench_search;
  SolveFlags bench_solve;
  CLI::App* bench_cmd = app.add_subcommand("bench", "synthetic end-to-end benchmark grid");
  bench_cmd->set_help_flag("--help", "print help and exit");
  bench_cmd->add_option("--graph", bench.graph, "graph kind: er, sf, or full")
      ->check(CLI::IsMember({"er", "sf", "full"}));
  bench_cmd->add_option("--d-list", bench.d_list, "node counts to sweep");
  bench_cmd->add_option("--k", bench.k, "edge density parameter");
  bench_cmd->add_option("--noise", bench.noise, "observation model");
  bench_cmd->add_option("--n", bench.n, "sample count");
  bench_cmd->add_option("--m1", bench.m1, "mlp hidden width (truth and fit)");
  bench_cmd->add_option("--score", bench.score, "fitting score");
  bench_cmd->add_option("--h", bench.h, "acyclicity function");
  bench_cmd->add_option("--model", bench.model, "fitted model: linear or mlp");
  bench_cmd->add_option("--seeds", bench.seeds, "one run per seed");
  bench_cmd->add_option("--threshold", bench.threshold_omega, "edge threshold for shd");
  bench_cmd->add_option("--out", bench.out, "output directory");
  bench_cmd->add_option("--config", bench_config, "JSON file with the same keys as the flags");
  bench_search.add(bench_cmd, bench.search);
  bench_solve.add(bench_cmd, bench.solve);
  bench_cmd->callback([&] {
    const Json j = load_config(bench_config);
    const auto given = keys_given(*bench_cmd);
    detail::maybe_set(j, "graph", bench.graph, given);
    detail::maybe_set(j, "d_list", bench.d_list, given);
    detail::maybe_set(j, "k", bench.k, given);
    detail::maybe_set(j, "noise", bench.noise, given);
    detail::maybe_set(j, "n", bench.n, given);
    detail::maybe_set(j, "m1", bench.m1, given);
    detail::maybe_set(j, "score", bench.score, given);
    detail::maybe_set(j, "h", bench.h, given);
    detail::maybe_set(j, "model", bench.model, given);
    detail::maybe_set(j, "seeds", bench.seeds, given);
    detail::maybe_set(j, "threshold", bench.threshold_omega, given);
    std::string out = bench.out.string();
    detail::maybe_set(j, "out", out, given);
    bench.out = out;
    detail::overlay_search(j, bench.search, given);
    detail::overlay_solve(j, bench.solve, given);
    bench_search.apply(bench.search);
    bench_solve.apply(bench.solve);
    code = run_bench(bench);
  });

  // kkt-check
  KktCheckConfig check;
  std::string check_weights, check_data, check_truth;
  CLI::App* check_cmd = app.add_subcommand("kkt-check", "certify a weight matrix");
  check_cmd->set_help_flag("--help", "print help and exit");
  check_cmd->add_option("--weights", check_weights, "weight matrix to certify")->required();
  check_cmd->add_option("--data", check_data, "observations the score is taken on");
  check_cmd->add_option("--truth", check_truth, "true weights (population score)");
  check_cmd->add_option("--score", check.score, "score whose gradient enters the certificate");
  check_cmd->add_option("--h", check.h, "acyclicity function");
  check_cmd->add_option("--kkt-tol", check.kkt_tol, "violation bound");
  check_cmd->callback([&] {
    check.weights = check_weights;
    check.data = check_data;
    if (!check_truth.empty()) check.truth = check_truth;
    code = run_kkt_check(check);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitBadConfig;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return code;
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "testutil.hpp"
#include "toposwap/datagen.hpp"
#include "toposwap/search.hpp"

using namespace toposwap;

namespace {

Matrix gaussian_matrix(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < n; ++i) x(i, j) = rng.normal();
  return x;
}

// Population score for the 2-edge chain 0 -> 1 -> 2 with weights a, b.
ScoreSpec chain_population(double a, double b) {
  Matrix w_true = Matrix::Zero(3, 3);
  w_true(0, 1) = a;
  w_true(1, 2) = b;
  ScoreSpec spec;
  spec.kind = ScoreKind::kPopulationLs;
  spec.population_truth = w_true;
  return spec;
}

}  // namespace

TEST_CASE("candidate set keys on walk-free pairs with live gradients") {
  // One fitted edge 0 -> 1.  The backward pair (1, 0) sees a walk and is
  // blocked at tau = 0 no matter how loud its gradient is; (2, 1) is
  // walk-free and enters once its gradient clears xi.
  ParamSet params = ParamSet::linear_zero(3);
  params.theta(0, 1) = 0.8;
  ParamSet grad = ParamSet::linear_zero(3);
  grad.theta(1, 0) = 0.9;
  grad.theta(2, 1) = 0.7;
  grad.theta(2, 0) = 0.05;

  const auto tight = candidate_set(params, grad, 0.0, 0.1, AcyclicityKind::kExpTrace);
  REQUIRE(tight == std::vector<std::pair<int, int>>{{2, 1}});

  const auto lower_xi = candidate_set(params, grad, 0.0, 0.01, AcyclicityKind::kExpTrace);
  REQUIRE(lower_xi == std::vector<std::pair<int, int>>{{2, 0}, {2, 1}});  // lexicographic

  // A generous tau admits the walk-carrying pair as well.
  const auto relaxed = candidate_set(params, grad, 1.0, 0.1, AcyclicityKind::kExpTrace);
  REQUIRE(relaxed == std::vector<std::pair<int, int>>{{1, 0}, {2, 1}});

  // Gradients at numerical-noise scale count as zero.
  grad.theta(2, 1) = 1e-10;
  REQUIRE(candidate_set(params, grad, 0.0, 0.0, AcyclicityKind::kExpTrace) ==
          std::vector<std::pair<int, int>>{{2, 0}});
}

TEST_CASE("candidate set agrees across acyclicity kinds") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    ParamSet params = ParamSet::linear_zero(5);
    const IntMatrix b = random_dag(GraphSpec{GraphKind::kErdosRenyi, 5, 2}, rng);
    params.theta = b.cast<double>() * 0.7;
    ParamSet grad = ParamSet::linear_zero(5);
    grad.theta = gaussian_matrix(5, 5, 100 + trial);
    grad.theta.diagonal().setZero();
    const auto expm = candidate_set(params, grad, 0.0, 0.2, AcyclicityKind::kExpTrace);
    const auto poly = candidate_set(params, grad, 0.0, 0.2, AcyclicityKind::kPolynomial);
    const auto logdet = candidate_set(params, grad, 0.0, 0.2, AcyclicityKind::kLogDet);
    REQUIRE(expm == poly);
    REQUIRE(expm == logdet);
  }
}

TEST_CASE("find_params hits the target count with the documented tie-break") {
  detail::PairTable table;
  table.d = 3;
  table.h_gradient = Matrix::Zero(3, 3);
  table.h_gradient(1, 0) = 0.5;  // pair (1,0) needs tau >= 0.5
  table.edge_grads = Matrix::Zero(3, 3);
  table.edge_grads(2, 1) = 0.7;
  table.edge_grads(2, 0) = 0.3;
  table.edge_grads(1, 0) = 0.9;

  SearchConfig config;
  config.tau_grid = {0.0, 1.0};
  config.xi_grid = {0.1, 0.5};

  // Counts: (tau 0, xi .5) -> {(2,1)} = 1; (tau 0, xi .1) -> 2;
  //         (tau 1, xi .5) -> {(2,1),(1,0)} = 2; (tau 1, xi .1) -> 3.
  REQUIRE(detail::find_params_on(table, 1, config) == std::pair<double, double>{0.0, 0.5});
  REQUIRE(detail::find_params_on(table, 3, config) == std::pair<double, double>{1.0, 0.1});
  // q = 2 is tied between (0, .1) and (1, .5): smallest tau wins.
  REQUIRE(detail::find_params_on(table, 2, config) == std::pair<double, double>{0.0, 0.1});
  // Unreachable q = 5 still picks the closest count (3).
  REQUIRE(detail::find_params_on(table, 5, config) == std::pair<double, double>{1.0, 0.1});

  ParamSet params = ParamSet::linear_zero(3);
  ParamSet grad = ParamSet::linear_zero(3);
  SearchConfig empty_grid;
  empty_grid.tau_grid.clear();
  REQUIRE_THROWS_AS(find_params(params, grad, 1, empty_grid, AcyclicityKind::kExpTrace),
                    ConfigError);
}

TEST_CASE("update_sort opt 1 is the positional swap") {
  ParamSet params = ParamSet::linear_zero(4);
  ParamSet grad = ParamSet::linear_zero(4);
  const Permutation pi(std::vector<int>{3, 1, 0, 2});
  REQUIRE(update_sort(params, grad, pi, {3, 0}, 1) == swap_nodes(pi, 3, 0));
  REQUIRE_THROWS_AS(update_sort(params, grad, pi, {0, 4}, 1), ConfigError);
  REQUIRE_THROWS_AS(update_sort(params, grad, pi, {2, 2}, 1), ConfigError);
  REQUIRE_THROWS_AS(update_sort(params, grad, pi, {0, 1}, 3), ConfigError);
}

TEST_CASE("update_sort opt 2 inserts the probed edge and re-sorts") {
  // Single fitted edge 0 -> 1; probing (2, 0) hangs a fresh edge 2 -> 0 and
  // the sort must place 2 first.
  ParamSet params = ParamSet::linear_zero(3);
  params.theta(0, 1) = 0.9;
  ParamSet grad = ParamSet::linear_zero(3);
  grad.theta(2, 0) = -1.5;
  const Permutation pi(std::vector<int>{0, 1, 2});
  const Permutation next = update_sort(params, grad, pi, {2, 0}, 2);
  REQUIRE(next.order() == std::vector<int>{2, 0, 1});

  // Probing the reverse of an existing edge closes a cycle.
  grad.theta(1, 0) = 2.0;
  REQUIRE_THROWS_AS(update_sort(params, grad, pi, {1, 0}, 2), CyclicProbeError);
}

TEST_CASE("kkt matrix splits into gradient and weight residuals") {
  const Matrix x = gaussian_matrix(300, 4, 51);
  const Permutation pi = Permutation::identity(4);
  const ScoreSpec spec;
  const OrderSolution sol = solve_order(pi, spec, ModelKind::kLinear, x);
  const ScoreEval eval = evaluate_score(spec, sol.theta, x);

  for (AcyclicityKind kind :
       {AcyclicityKind::kExpTrace, AcyclicityKind::kPolynomial, AcyclicityKind::kLogDet}) {
    const Matrix k = kkt_matrix(sol.theta, eval.grad, kind);
    // A complete-order optimum is a KKT point: free coordinates carry no
    // gradient and backward coordinates carry no weight.
    REQUIRE(kkt_flag(k, 1e-6) == 1);
    REQUIRE(k.cwiseAbs().maxCoeff() <= 1e-8);
  }

  // Knocking a fitted coefficient off its optimum surfaces as a gradient
  // residual at exactly that entry's scale.
  ParamSet off = sol.theta;
  off.theta(0, 3) += 0.25;
  const ScoreEval off_eval = evaluate_score(spec, off, x);
  const Matrix k_off = kkt_matrix(off, off_eval.grad, AcyclicityKind::kExpTrace);
  REQUIRE(kkt_flag(k_off, 1e-6) == 0);
  REQUIRE(k_off.cwiseAbs().maxCoeff() > 1e-2);

  ParamSet cyclic = ParamSet::linear_zero(2);
  cyclic.theta(0, 1) = cyclic.theta(1, 0) = 0.5;
  REQUIRE_THROWS_AS(kkt_matrix(cyclic, ParamSet::linear_zero(2), AcyclicityKind::kExpTrace),
                    NotADagError);
}

TEST_CASE("connected estimator detection") {
  const Matrix x = gaussian_matrix(200, 3, 61);
  const Permutation pi = Permutation::identity(3);
  const OrderSolution sol = solve_order(pi, ScoreSpec{}, ModelKind::kLinear, x);
  REQUIRE(is_connected_estimator(sol.theta, pi, AcyclicityKind::kExpTrace));
  REQUIRE_FALSE(is_connected_estimator(ParamSet::linear_zero(3), pi, AcyclicityKind::kExpTrace));
}

TEST_CASE("search sizes follow the pinned table with interpolation") {
  REQUIRE(default_search_sizes(3).s_small == 30);
  REQUIRE(default_search_sizes(10).s_small == 30);
  REQUIRE(default_search_sizes(10).s_large == 45);
  REQUIRE(default_search_sizes(10).s0 == 10);
  REQUIRE(default_search_sizes(20).s_small == 50);
  REQUIRE(default_search_sizes(20).s_large == 190);
  REQUIRE(default_search_sizes(20).s0 == 20);
  REQUIRE(default_search_sizes(50).s_small == 100);
  REQUIRE(default_search_sizes(50).s_large == 1000);
  REQUIRE(default_search_sizes(50).s0 == 10);
  REQUIRE(default_search_sizes(100).s_small == 150);
  REQUIRE(default_search_sizes(100).s_large == 2500);
  REQUIRE(default_search_sizes(100).s0 == 15);
  REQUIRE(default_search_sizes(240).s_large == 2500);
  // Midpoint of the 20 -> 50 row.
  REQUIRE(default_search_sizes(35).s_small == 75);
  REQUIRE(default_search_sizes(35).s_large == 595);
  REQUIRE(default_search_sizes(35).s0 == 15);
}

TEST_CASE("search config validation") {
  const Matrix x = gaussian_matrix(50, 3, 71);
  const Permutation pi = Permutation::identity(3);
  auto run = [&](SearchConfig config) {
    return topo_search(pi, ScoreSpec{}, ModelKind::kLinear, x, config);
  };
  SearchConfig bad;
  bad.s_small = 10;
  bad.s_large = 10;
  REQUIRE_THROWS_AS(run(bad), ConfigError);
  SearchConfig no_zero;
  no_zero.tau_grid = {1e-6, 1.0};
  REQUIRE_THROWS_AS(run(no_zero), ConfigError);
  SearchConfig neg;
  neg.xi_grid = {-0.5, 1.0};
  REQUIRE_THROWS_AS(run(neg), ConfigError);
  SearchConfig cap;
  cap.max_outer_iters = 0;
  REQUIRE_THROWS_AS(run(cap), ConfigError);
  SearchConfig tol;
  tol.kkt_tol = 0.0;
  REQUIRE_THROWS_AS(run(tol), ConfigError);
}

TEST_CASE("3-node population instance solves to the analytic table") {
  const double a = 1.0, b = -0.55;
  const ScoreSpec spec = chain_population(a, b);

  // Per-order optima of the order-constrained program, derived by eliminating
  // each node's regression in closed form.
  const double bb = b * b, ab2 = a * a * b * b;
  std::map<std::vector<int>, double> expected;
  expected[{0, 1, 2}] = 3.0;
  expected[{0, 2, 1}] = 2.0 + bb + 1.0 / (1.0 + bb);
  expected[{1, 0, 2}] = 2.0 + a * a + 1.0 / (1.0 + a * a);
  expected[{1, 2, 0}] = 2.0 + a * a + 1.0 / (1.0 + a * a);
  expected[{2, 0, 1}] =
      1.0 + bb + ab2 + 1.0 / (1.0 + bb) + (1.0 + bb) / (1.0 + bb + ab2);
  expected[{2, 1, 0}] =
      1.0 / (1.0 + a * a) + (1.0 + a * a) / (1.0 + bb + ab2) + 1.0 + bb + ab2;

  for (const auto& [order, value] : expected) {
    const OrderSolution sol =
        solve_order(Permutation(order), spec, ModelKind::kLinear, Matrix::Zero(0, 3));
    REQUIRE(sol.score_value == Catch::Approx(value).epsilon(1e-10));
  }

  // The full search reaches the ground truth from every starting order.
  for (const auto& [order, value] : expected) {
    const RunReport report =
        topo_search(Permutation(order), spec, ModelKind::kLinear, Matrix::Zero(0, 3));
    REQUIRE(report.iterations.front().score == Catch::Approx(value).epsilon(1e-10));
    REQUIRE(report.final_solution.score_value == Catch::Approx(3.0).margin(1e-6));
    REQUIRE((report.final_solution.theta.theta - *spec.population_truth).cwiseAbs().maxCoeff() <
            1e-6);
    REQUIRE(report.kkt == 1);
    REQUIRE_FALSE(report.hard_stop);
    // Accepted iterations descend strictly.
    for (std::size_t t = 1; t < report.iterations.size(); ++t)
      REQUIRE(report.iterations[t].score < report.iterations[t - 1].score);
  }
}

TEST_CASE("sample least-squares search descends to a certified point") {
  Rng rng(81);
  const IntMatrix b = random_dag(GraphSpec{GraphKind::kErdosRenyi, 6, 2}, rng);
  const Matrix w = assign_weights(b, rng);
  NoiseSpec noise;
  const Matrix x = simulate_linear(w, noise, 400, rng);

  Rng order_rng(5);
  const Permutation pi0 = Permutation::random(6, order_rng);
  const RunReport report = topo_search(pi0, ScoreSpec{}, ModelKind::kLinear, x);
  REQUIRE(report.kkt == 1);
  REQUIRE(report.kkt_max_violation <= 1e-6);
  REQUIRE_FALSE(report.hard_stop);
  for (std::size_t t = 1; t < report.iterations.size(); ++t)
    REQUIRE(report.iterations[t].score < report.iterations[t - 1].score);

  // Bitwise determinism of the whole run.
  const RunReport again = topo_search(pi0, ScoreSpec{}, ModelKind::kLinear, x);
  REQUIRE(again.final_solution.score_value == report.final_solution.score_value);
  REQUIRE(again.iterations.size() == report.iterations.size());
  REQUIRE(again.final_order == report.final_order);
}

TEST_CASE("outer iteration cap raises the hard-stop flag") {
  const ScoreSpec spec = chain_population(1.0, -0.55);
  SearchConfig config;
  config.max_outer_iters = 1;
  // The worst starting order needs more than one swap to finish.
  const RunReport report = topo_search(Permutation(std::vector<int>{2, 1, 0}), spec,
                                       ModelKind::kLinear, Matrix::Zero(0, 3), config);
  REQUIRE(report.hard_stop);
  REQUIRE(report.iterations.size() == 2);  // initial solve plus the one swap
}

TEST_CASE("exhaustive oracle agrees with the search on small instances") {
  const ScoreSpec spec = chain_population(1.0, -0.55);
  const auto [best_order, best] =
      exhaustive_oracle(spec, ModelKind::kLinear, Matrix::Zero(0, 3), 3);
  REQUIRE(best_order.order() == std::vector<int>{0, 1, 2});
  REQUIRE(best.score_value == Catch::Approx(3.0).margin(1e-10));

  Rng rng(91);
  const IntMatrix b = random_dag(GraphSpec{GraphKind::kErdosRenyi, 4, 1}, rng);
  const Matrix w = assign_weights(b, rng);
  NoiseSpec noise;
  const Matrix x = simulate_linear(w, noise, 300, rng);
  const auto [oracle_order, oracle] = exhaustive_oracle(ScoreSpec{}, ModelKind::kLinear, x, 4);
  Rng order_rng(6);
  const RunReport report =
      topo_search(Permutation::random(4, order_rng), ScoreSpec{}, ModelKind::kLinear, x);
  REQUIRE(report.final_solution.score_value >= oracle.score_value - 1e-8);

  REQUIRE_THROWS_AS(exhaustive_oracle(ScoreSpec{}, ModelKind::kLinear, Matrix::Zero(1, 9), 9),
                    TooLargeError);
}

TEST_CASE("greedy variant also reaches a certified point") {
  Rng rng(101);
  const IntMatrix b = random_dag(GraphSpec{GraphKind::kErdosRenyi, 6, 2}, rng);
  const Matrix w = assign_weights(b, rng);
  NoiseSpec noise;
  const Matrix x = simulate_linear(w, noise, 400, rng);
  Rng order_rng(7);
  const Permutation pi0 = Permutation::random(6, order_rng);

  SearchConfig greedy;
  greedy.greedy = true;
  const RunReport fast = topo_search(pi0, ScoreSpec{}, ModelKind::kLinear, x, greedy);
  const RunReport best = topo_search(pi0, ScoreSpec{}, ModelKind::kLinear, x);
  REQUIRE(fast.kkt == 1);
  REQUIRE(best.kkt == 1);
  for (std::size_t t = 1; t < fast.iterations.size(); ++t)
    REQUIRE(fast.iterations[t].score < fast.iterations[t - 1].score);
}

TEST_CASE("parallel swap evaluation changes nothing") {
  Rng rng(111);
  const IntMatrix b = random_dag(GraphSpec{GraphKind::kErdosRenyi, 5, 2}, rng);
  const Matrix w = assign_weights(b, rng);
  NoiseSpec noise;
  const Matrix x = simulate_linear(w, noise, 250, rng);
  Rng order_rng(8);
  const Permutation pi0 = Permutation::random(5, order_rng);

  SearchConfig parallel;
  parallel.parallel_swaps = true;
  const RunReport seq = topo_search(pi0, ScoreSpec{}, ModelKind::kLinear, x);
  const RunReport par = topo_search(pi0, ScoreSpec{}, ModelKind::kLinear, x, parallel);
  REQUIRE(seq.final_solution.score_value == par.final_solution.score_value);
  REQUIRE(seq.final_order == par.final_order);
  REQUIRE(seq.iterations.size() == par.iterations.size());
}

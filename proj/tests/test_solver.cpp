#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <utility>
#include <vector>

#include "testutil.hpp"
#include "toposwap/datagen.hpp"
#include "toposwap/solver.hpp"

using namespace toposwap;

namespace {

Matrix gaussian_matrix(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < n; ++i) x(i, j) = rng.normal();
  return x;
}

// Straight per-node least squares on the raw design matrix, no Gram
// shortcut: the oracle for the closed-form path.
Matrix ols_by_qr(const Matrix& x, const Permutation& pi) {
  const int d = pi.size();
  Matrix theta = Matrix::Zero(d, d);
  for (int pos = 1; pos < d; ++pos) {
    const int j = pi.node_at(pos);
    Matrix design(x.rows(), pos);
    for (int p = 0; p < pos; ++p) design.col(p) = x.col(pi.node_at(p));
    const Vector beta = design.colPivHouseholderQr().solve(x.col(j));
    for (int p = 0; p < pos; ++p) theta(pi.node_at(p), j) = beta(p);
  }
  return theta;
}

}  // namespace

TEST_CASE("exact least squares matches per-node QR regression") {
  const Matrix x = gaussian_matrix(200, 5, 41);
  Rng rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    const Permutation pi = Permutation::random(5, rng);
    const ScoreSpec spec;
    const OrderSolution sol = solve_order(pi, spec, ModelKind::kLinear, x);
    const Matrix oracle = ols_by_qr(x, pi);
    REQUIRE((sol.theta.theta - oracle).cwiseAbs().maxCoeff() < 1e-8);
    REQUIRE(sol.converged);
    REQUIRE(sol.grad_inf_norm <= 1e-6);
    REQUIRE_FALSE(sol.jitter_applied);

    // Reported value is the actual score at the reported parameters.
    REQUIRE(sol.score_value ==
            Catch::Approx(least_squares(sol.theta, x).value).epsilon(1e-12));
    // Coordinates pointing backward under pi stay exactly zero.
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        if (i == j || !pi.before(i, j)) REQUIRE(sol.theta.theta(i, j) == 0.0);
  }
}

TEST_CASE("population solve recovers the truth under a consistent order") {
  Matrix w_true = Matrix::Zero(3, 3);
  w_true(0, 1) = 1.0;
  w_true(1, 2) = -0.55;
  ScoreSpec spec;
  spec.kind = ScoreKind::kPopulationLs;
  spec.population_truth = w_true;

  const OrderSolution sol =
      solve_order(Permutation::identity(3), spec, ModelKind::kLinear, Matrix::Zero(0, 3));
  REQUIRE((sol.theta.theta - w_true).cwiseAbs().maxCoeff() < 1e-10);
  REQUIRE(sol.score_value == Catch::Approx(3.0).margin(1e-10));
  REQUIRE(sol.converged);
}

TEST_CASE("exactly collinear predecessors still solve cleanly") {
  // Normal equations built from a true Gram stay consistent even when the
  // Gram is singular, so the factorization's small-pivot handling absorbs the
  // degeneracy and no regularization is needed.
  Matrix x = gaussian_matrix(50, 3, 5);
  x.col(1) = x.col(0);
  const ScoreSpec spec;
  const OrderSolution sol = solve_order(Permutation::identity(3), spec, ModelKind::kLinear, x);
  REQUIRE_FALSE(sol.jitter_applied);
  REQUIRE(sol.converged);
  REQUIRE(std::isfinite(sol.score_value));
  // The fit itself is still the least-squares optimum.
  const Matrix residual = x - model_forward(sol.theta, x);
  REQUIRE(residual.col(2).dot(x.col(0)) == Catch::Approx(0.0).margin(1e-6));
}

TEST_CASE("an inconsistent normal system falls back to the jittered solve") {
  // No Gram produces this (a zero-variance predictor with nonzero covariance),
  // so drive the exact solver directly to pin the fallback contract.
  detail::QuadraticContext ctx;
  ctx.m = Matrix{{0.0, 1.0}, {1.0, 2.0}};
  ctx.scale = 0.5;
  const OrderSolution sol = detail::solve_order_exact(Permutation::identity(2), ctx, 1e-6);
  REQUIRE(sol.jitter_applied);
  REQUIRE(std::isfinite(sol.theta.theta(0, 1)));
}

TEST_CASE("score_value_only agrees with the full evaluation") {
  const Matrix x = gaussian_matrix(30, 3, 6);
  ParamSet p = ParamSet::linear_zero(3);
  p.theta(0, 1) = 0.4;
  p.theta(1, 2) = -0.2;
  bool floor_hit = false;

  ScoreSpec ls;
  REQUIRE(detail::score_value_only(ls, p, x, &floor_hit) ==
          Catch::Approx(evaluate_score(ls, p, x).value).epsilon(1e-14));

  ScoreSpec nll;
  nll.kind = ScoreKind::kGaussianNll;
  REQUIRE(detail::score_value_only(nll, p, x, &floor_hit) ==
          Catch::Approx(evaluate_score(nll, p, x).value).epsilon(1e-14));

  ScoreSpec pop;
  pop.kind = ScoreKind::kPopulationLs;
  pop.population_truth = Matrix::Zero(3, 3);
  REQUIRE(detail::score_value_only(pop, p, x, &floor_hit) ==
          Catch::Approx(evaluate_score(pop, p, x, true).value).epsilon(1e-14));

  Matrix xb(4, 3);
  xb << 1, 0, 1, 0, 1, 1, 1, 1, 0, 0, 0, 0;
  ScoreSpec logi;
  logi.kind = ScoreKind::kLogistic;
  REQUIRE(detail::score_value_only(logi, p, xb, &floor_hit) ==
          Catch::Approx(evaluate_score(logi, p, xb).value).epsilon(1e-14));
}

TEST_CASE("iterative solver reaches the exact linear optimum") {
  const Matrix x = gaussian_matrix(120, 4, 7);
  const Permutation pi(std::vector<int>{2, 0, 3, 1});
  const ScoreSpec spec;
  const OrderSolution exact = solve_order(pi, spec, ModelKind::kLinear, x);

  for (StepRule rule : {StepRule::kBacktracking, StepRule::kAdaptiveMoment}) {
    SolveOptions opts;
    opts.step_rule = rule;
    const OrderSolution it =
        detail::solve_order_iterative(pi, spec, ModelKind::kLinear, x, opts, HiddenSpec{});
    REQUIRE(it.converged);
    REQUIRE(it.grad_inf_norm <= 1e-5);
    REQUIRE(it.score_value <= exact.score_value + 1e-5);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        if (i == j || !pi.before(i, j)) REQUIRE(it.theta.theta(i, j) == 0.0);
  }
}

TEST_CASE("mlp solve converges, masks, and warm-starts deterministically") {
  Rng rng(11);
  const IntMatrix b = random_dag(GraphSpec{GraphKind::kErdosRenyi, 3, 1}, rng);
  auto [truth, x] = simulate_mlp(b, HiddenSpec{5}, 120, rng);
  (void)truth;

  const Permutation pi = Permutation::identity(3);
  const ScoreSpec spec;
  SolveOptions opts;
  opts.init_seed = 3;
  const OrderSolution cold = solve_order(pi, spec, ModelKind::kMlp, x, opts, HiddenSpec{5});
  REQUIRE(cold.converged);
  REQUIRE(cold.grad_inf_norm <= 1e-5);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i)
      if (i == j || !pi.before(i, j)) REQUIRE(cold.theta.a1[j].col(i).isZero());

  const OrderSolution again = solve_order(pi, spec, ModelKind::kMlp, x, opts, HiddenSpec{5});
  REQUIRE(again.score_value == cold.score_value);

  SolveOptions warm = opts;
  warm.warm_start = cold.theta;
  const OrderSolution rewarmed = solve_order(pi, spec, ModelKind::kMlp, x, warm, HiddenSpec{5});
  REQUIRE(rewarmed.converged);
  REQUIRE(rewarmed.score_value <= cold.score_value + 1e-8);
}

TEST_CASE("warm starts are masked to the new order") {
  const Matrix x = gaussian_matrix(60, 3, 9);
  ScoreSpec nll;
  nll.kind = ScoreKind::kGaussianNll;
  SolveOptions opts;
  ParamSet stale = ParamSet::linear_zero(3);
  stale.theta(2, 0) = 5.0;  // backward under the identity order
  stale.theta(0, 1) = 0.3;
  opts.warm_start = stale;
  opts.max_iters = 1;  // the masking must hold even without optimization
  const OrderSolution sol =
      detail::solve_order_iterative(Permutation::identity(3), nll, ModelKind::kLinear, x, opts, {});
  REQUIRE(sol.theta.theta(2, 0) == 0.0);
}

TEST_CASE("solve_all_swaps is index-stable and thread-invariant") {
  const Matrix x = gaussian_matrix(100, 5, 10);
  const Permutation pi = Permutation::identity(5);
  const ScoreSpec spec;
  const OrderSolution base = solve_order(pi, spec, ModelKind::kLinear, x);
  const std::vector<std::pair<int, int>> pairs = {{0, 4}, {1, 2}, {3, 0}, {2, 4}};

  const auto seq = solve_all_swaps(base, pi, pairs, spec, ModelKind::kLinear, x, {}, {}, false);
  const auto par = solve_all_swaps(base, pi, pairs, spec, ModelKind::kLinear, x, {}, {}, true);
  REQUIRE(seq.size() == pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    REQUIRE(seq[k].pair == pairs[k]);
    REQUIRE(seq[k].error.empty());
    REQUIRE(seq[k].solution.has_value());
    REQUIRE(par[k].solution.has_value());
    REQUIRE(seq[k].solution->score_value == par[k].solution->score_value);
    // Each solve is the exact optimum of the swapped order.
    const Permutation swapped = swap_nodes(pi, pairs[k].first, pairs[k].second);
    const OrderSolution direct = solve_order(swapped, spec, ModelKind::kLinear, x);
    REQUIRE(seq[k].solution->score_value == Catch::Approx(direct.score_value).epsilon(1e-12));
  }
}

TEST_CASE("dimension guards") {
  const ScoreSpec spec;
  REQUIRE_THROWS_AS(
      solve_order(Permutation::identity(3), spec, ModelKind::kLinear, Matrix::Zero(5, 4)),
      DimensionMismatchError);
  ScoreSpec pop;
  pop.kind = ScoreKind::kPopulationLs;
  pop.population_truth = Matrix::Zero(4, 4);
  REQUIRE_THROWS_AS(
      solve_order(Permutation::identity(3), pop, ModelKind::kLinear, Matrix::Zero(0, 3)),
      DimensionMismatchError);
}

#include <catch2/catch_amalgamated.hpp>

#include "toposwap/toposwap.hpp"

using namespace toposwap;

TEST_CASE("library headers compile and basic objects construct") {
  Rng rng(7);
  const Permutation pi = Permutation::random(4, rng);
  REQUIRE(pi.size() == 4);
  const ParamSet params = ParamSet::linear_zero(4);
  REQUIRE(weight_matrix(params).isZero());
  REQUIRE(h_value(AcyclicityKind::kExpTrace, Matrix::Zero(4, 4)) == 0.0);
}

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <string>

#include "toposwap/io.hpp"
#include "toposwap/rng.hpp"
#include "toposwap/search.hpp"

using namespace toposwap;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "toposwap_io_test") {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Matrix gaussian_matrix(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < n; ++i) x(i, j) = rng.normal();
  return x;
}

}  // namespace

TEST_CASE("doubles print in shortest round-trip form") {
  REQUIRE(format_double(1.0) == "1");
  REQUIRE(format_double(0.5) == "0.5");
  REQUIRE(format_double(-2.25) == "-2.25");
  REQUIRE(format_double(3e-07) == "3e-07");
  REQUIRE(format_double(0.1) == "0.1");

  Matrix m(2, 2);
  m << 1.0, 0.5, -2.25, 3e-07;
  REQUIRE(matrix_to_csv(m) == "1,0.5\n-2.25,3e-07\n");
}

TEST_CASE("csv round trip is bitwise exact") {
  TempDir dir;
  const Matrix m = gaussian_matrix(7, 4, 13);
  const fs::path file = dir.path / "m.csv";
  write_matrix_csv(file, m);
  const Matrix back = read_matrix_csv(file);
  REQUIRE(back.rows() == 7);
  REQUIRE(back.cols() == 4);
  REQUIRE((back - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("csv parser tolerates line-ending and spacing variants") {
  const Matrix crlf = matrix_from_csv("1,2\r\n3,4\r\n", "test");
  REQUIRE(crlf(0, 1) == 2.0);
  REQUIRE(crlf(1, 0) == 3.0);

  // Missing trailing newline and blank interior lines are fine.
  REQUIRE(matrix_from_csv("1,2\n3,4", "test").rows() == 2);
  REQUIRE(matrix_from_csv("1,2\n\n3,4\n", "test").rows() == 2);
}

TEST_CASE("csv parser rejects malformed input") {
  REQUIRE_THROWS_AS(matrix_from_csv("", "test"), ParseError);
  REQUIRE_THROWS_AS(matrix_from_csv("\n\n", "test"), ParseError);
  REQUIRE_THROWS_AS(matrix_from_csv("1,2\n3\n", "test"), ParseError);       // ragged
  REQUIRE_THROWS_AS(matrix_from_csv("1,abc\n", "test"), ParseError);        // not a number
  REQUIRE_THROWS_AS(matrix_from_csv("1,2,\n", "test"), ParseError);         // empty field
  REQUIRE_THROWS_AS(matrix_from_csv("1, 2\n", "test"), ParseError);         // stray space
}

TEST_CASE("file helpers surface io errors") {
  TempDir dir;
  REQUIRE_THROWS_AS(read_matrix_csv(dir.path / "missing.csv"), IoError);
  REQUIRE_THROWS_AS(read_json(dir.path / "missing.json"), IoError);
  REQUIRE_THROWS_AS(write_matrix_csv(dir.path / "no_such_dir" / "m.csv", Matrix::Zero(1, 1)),
                    IoError);

  const fs::path bad = dir.path / "bad.json";
  std::ofstream(bad) << "{ not json";
  REQUIRE_THROWS_AS(read_json(bad), ParseError);

  const fs::path rect = dir.path / "rect.csv";
  write_matrix_csv(rect, Matrix::Zero(2, 3));
  REQUIRE_THROWS_AS(read_square_matrix_csv(rect), ParseError);
  const fs::path square = dir.path / "square.csv";
  write_matrix_csv(square, Matrix::Zero(3, 3));
  REQUIRE(read_square_matrix_csv(square).rows() == 3);
}

TEST_CASE("mlp models survive the json round trip") {
  Rng rng(17);
  const ParamSet params = mlp_random_init(3, HiddenSpec{4}, rng);
  const Json j = mlp_to_json(params);
  const ParamSet back = mlp_from_json(j);
  REQUIRE(back.kind == ModelKind::kMlp);
  REQUIRE(back.d == 3);
  REQUIRE(back.m1() == 4);
  for (int node = 0; node < 3; ++node) {
    REQUIRE((back.a1[node] - params.a1[node]).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((back.a2[node] - params.a2[node]).cwiseAbs().maxCoeff() == 0.0);
  }

  // Through a file as well.
  TempDir dir;
  const fs::path file = dir.path / "model.json";
  write_json(file, j);
  const ParamSet from_file = mlp_from_json(read_json(file));
  REQUIRE((from_file.a1[2] - params.a1[2]).cwiseAbs().maxCoeff() == 0.0);

  REQUIRE_THROWS_AS(mlp_to_json(ParamSet::linear_zero(3)), ConfigError);
}

TEST_CASE("mlp json validation") {
  Rng rng(19);
  Json j = mlp_to_json(mlp_random_init(2, HiddenSpec{3}, rng));

  Json missing = j;
  missing.erase("m1");
  REQUIRE_THROWS_AS(mlp_from_json(missing), ParseError);

  Json wrong_count = j;
  wrong_count["nodes"].erase(1);
  REQUIRE_THROWS_AS(mlp_from_json(wrong_count), ParseError);

  Json wrong_layer = j;
  wrong_layer["nodes"][0]["a2"].erase(0);
  REQUIRE_THROWS_AS(mlp_from_json(wrong_layer), ParseError);

  Json bad_dims = j;
  bad_dims["d"] = 0;
  REQUIRE_THROWS_AS(mlp_from_json(bad_dims), ParseError);
}

TEST_CASE("run reports serialize every field the cli prints") {
  Matrix w_true = Matrix::Zero(3, 3);
  w_true(0, 1) = 1.0;
  w_true(1, 2) = -0.55;
  ScoreSpec spec;
  spec.kind = ScoreKind::kPopulationLs;
  spec.population_truth = w_true;
  const RunReport report = topo_search(Permutation(std::vector<int>{2, 1, 0}), spec,
                                       ModelKind::kLinear, Matrix::Zero(0, 3));

  const Json config_echo{{"score", "population"}};
  const Json j = report_to_json(report, config_echo, "weights.csv", 42);

  REQUIRE(j.at("seed").get<std::uint64_t>() == 42);
  REQUIRE(j.at("config").at("score") == "population");
  REQUIRE(j.at("weights_csv") == "weights.csv");
  REQUIRE(j.at("final_score").get<double>() == report.final_solution.score_value);
  REQUIRE(j.at("kkt_flag").get<int>() == report.kkt);
  REQUIRE(j.at("kkt_max_violation").get<double>() == report.kkt_max_violation);
  REQUIRE(j.at("hard_stop").get<bool>() == report.hard_stop);
  REQUIRE(j.at("final_order").get<std::vector<int>>() == report.final_order.order());
  REQUIRE(j.at("search_sizes").at("s_small").get<int>() == report.sizes.s_small);

  const auto& iterations = j.at("iterations");
  REQUIRE(iterations.size() == report.iterations.size());
  REQUIRE(iterations.at(0).at("swap").is_null());
  REQUIRE(iterations.at(1).at("swap").is_array());
  for (std::size_t t = 0; t < iterations.size(); ++t) {
    REQUIRE(iterations.at(t).at("score").get<double>() == report.iterations[t].score);
    REQUIRE(iterations.at(t).at("order").get<std::vector<int>>() == report.iterations[t].order);
  }
}

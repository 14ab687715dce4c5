#pragma once

// File formats.  Matrices travel as headerless CSV (row i = outgoing weights
// of node i; data files are n x d with one row per sample).  Doubles are
// printed with std::to_chars shortest round-trip form, so output is
// locale-independent, byte-stable, and parses back to the identical value.
// Structured artifacts (manifest, run report, MLP models) are JSON.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "toposwap/errors.hpp"
#include "toposwap/graph.hpp"
#include "toposwap/models.hpp"
#include "toposwap/search.hpp"

namespace toposwap {

using Json = nlohmann::json;

inline std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

inline std::string matrix_to_csv(const Matrix& m) {
  std::string out;
  out.reserve(static_cast<std::size_t>(m.size()) * 8);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out.push_back(',');
      out += format_double(m(i, j));
    }
    out.push_back('\n');
  }
  return out;
}

inline void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream file(path, std::ios::binary);  // binary: keep \n on every platform
  if (!file) throw IoError("cannot open for writing: " + path.string());
  file << matrix_to_csv(m);
  if (!file) throw IoError("write failed: " + path.string());
}

inline Matrix matrix_from_csv(const std::string& text, const std::string& origin) {
  std::vector<std::vector<double>> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t field_start = 0;
    for (std::size_t c = 0; c <= line.size(); ++c) {
      if (c != line.size() && line[c] != ',') continue;
      std::string_view field = line.substr(field_start, c - field_start);
      field_start = c + 1;
      double value = 0.0;
      const char* first = field.data();
      const auto parsed = std::from_chars(first, first + field.size(), value);
      if (parsed.ec != std::errc() || parsed.ptr != first + field.size())
        throw ParseError(origin + ": malformed number '" + std::string(field) + "'");
      row.push_back(value);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(origin + ": ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(origin + ": empty matrix");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

inline Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open: " + path.string());
  std::stringstream buffer;
  buffer << file.rdbuf();
  return matrix_from_csv(buffer.str(), path.string());
}

inline Matrix read_square_matrix_csv(const std::filesystem::path& path) {
  Matrix m = read_matrix_csv(path);
  if (m.rows() != m.cols())
    throw ParseError(path.string() + ": expected a square matrix, got " +
                     std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  return m;
}

// --- MLP model files ---

inline Json mlp_to_json(const ParamSet& params) {
  if (params.kind != ModelKind::kMlp) throw ConfigError("mlp_to_json: not an MLP parameter set");
  Json nodes = Json::array();
  for (int j = 0; j < params.d; ++j) {
    const auto& a1 = params.a1[static_cast<std::size_t>(j)];
    const auto& a2 = params.a2[static_cast<std::size_t>(j)];
    Json a1_flat = Json::array();
    for (Eigen::Index r = 0; r < a1.rows(); ++r)
      for (Eigen::Index c = 0; c < a1.cols(); ++c) a1_flat.push_back(a1(r, c));
    Json a2_flat = Json::array();
    for (Eigen::Index r = 0; r < a2.size(); ++r) a2_flat.push_back(a2(r));
    nodes.push_back({{"a1", std::move(a1_flat)}, {"a2", std::move(a2_flat)}});
  }
  return Json{{"d", params.d}, {"m1", params.m1()}, {"nodes", std::move(nodes)}};
}

inline ParamSet mlp_from_json(const Json& j) {
  try {
    const int d = j.at("d").get<int>();
    const int m1 = j.at("m1").get<int>();
    if (d < 1 || m1 < 1) throw ParseError("mlp model: d and m1 must be positive");
    ParamSet params = ParamSet::mlp_zero(d, m1);
    const auto& nodes = j.at("nodes");
    if (static_cast<int>(nodes.size()) != d) throw ParseError("mlp model: node count != d");
    for (int node = 0; node < d; ++node) {
      const auto& a1_flat = nodes.at(static_cast<std::size_t>(node)).at("a1");
      const auto& a2_flat = nodes.at(static_cast<std::size_t>(node)).at("a2");
      if (static_cast<int>(a1_flat.size()) != m1 * d || static_cast<int>(a2_flat.size()) != m1)
        throw ParseError("mlp model: layer size mismatch");
      auto& a1 = params.a1[static_cast<std::size_t>(node)];
      for (int r = 0; r < m1; ++r)
        for (int c = 0; c < d; ++c) a1(r, c) = a1_flat.at(static_cast<std::size_t>(r * d + c)).get<double>();
      auto& a2 = params.a2[static_cast<std::size_t>(node)];
      for (int r = 0; r < m1; ++r) a2(r) = a2_flat.at(static_cast<std::size_t>(r)).get<double>();
    }
    return params;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("mlp model: ") + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open for writing: " + path.string());
  file << j.dump(2) << '\n';
  if (!file) throw IoError("write failed: " + path.string());
}

inline Json read_json(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open: " + path.string());
  try {
    return Json::parse(file);
  } catch (const Json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// --- run report ---

inline Json report_to_json(const RunReport& report, const Json& config_echo,
                           const std::string& weights_path, std::uint64_t seed) {
  Json iterations = Json::array();
  for (const auto& it : report.iterations) {
    Json record{{"order", it.order},
                {"score", it.score},
                {"candidate_count", it.candidate_count},
                {"large_space", it.large_space},
                {"wall_time_s", it.wall_time_s}};
    if (it.swap)
      record["swap"] = Json::array({it.swap->first, it.swap->second});
    else
      record["swap"] = nullptr;
    iterations.push_back(std::move(record));
  }
  return Json{{"config", config_echo},
              {"seed", seed},
              {"iterations", std::move(iterations)},
              {"final_order", report.final_order.order()},
              {"final_score", report.final_solution.score_value},
              {"converged", report.final_solution.converged},
              {"residual_floor_hit", report.final_solution.residual_floor_hit},
              {"jitter_applied", report.final_solution.jitter_applied},
              {"kkt_flag", report.kkt},
              {"kkt_max_violation", report.kkt_max_violation},
              {"hard_stop", report.hard_stop},
              {"search_sizes",
               {{"s_small", report.sizes.s_small},
                {"s_large", report.sizes.s_large},
                {"s0", report.sizes.s0}}},
              {"total_wall_time_s", report.total_wall_time_s},
              {"weights_csv", weights_path}};
}

}  // namespace toposwap

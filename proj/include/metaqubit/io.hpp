#pragma once
// JSON documents for detection matrices, counts and population estimates,
// plus fixed-precision CSV helpers.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "metaqubit/tomography.hpp"

namespace metaqubit {

using json = nlohmann::ordered_json;

/// %.17g; non-finite values become "inf", "-inf" or "nan".
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// JSON has no infinity; such values are written as strings.
inline json number(double x) { return std::isfinite(x) ? json(x) : json(format_double(x)); }

inline double read_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw std::runtime_error("expected a number, got " + j.dump());
}

inline json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(number(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw std::runtime_error("matrix must be a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw std::runtime_error("matrix rows differ in length");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = read_number(row.at(static_cast<std::size_t>(c)));
  }
  return m;
}

inline json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

inline Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = read_number(j.at(i));
  return v;
}

inline json to_json(const DetectionMatrix& m) {
  return json{{"kind", "detection_matrix"},
              {"rows", m.rows},
              {"cols", m.cols},
              {"trials", m.trials},
              {"mean", matrix_json(m.mean)},
              {"std_error", matrix_json(m.std_error)},
              {"warnings", m.warnings}};
}

inline DetectionMatrix detection_matrix_from_json(const json& j) {
  DetectionMatrix m;
  m.rows = j.at("rows").get<std::vector<std::string>>();
  m.cols = j.at("cols").get<std::vector<std::string>>();
  m.mean = matrix_from_json(j.at("mean"));
  m.std_error = j.contains("std_error") ? matrix_from_json(j.at("std_error"))
                                        : Eigen::MatrixXd::Zero(m.mean.rows(), m.mean.cols());
  m.trials = j.value("trials", std::uint64_t{0});
  if (j.contains("warnings")) m.warnings = j.at("warnings").get<std::vector<std::string>>();
  if (static_cast<Eigen::Index>(m.rows.size()) != m.mean.rows() ||
      static_cast<Eigen::Index>(m.cols.size()) != m.mean.cols())
    throw std::runtime_error("detection matrix labels do not match its shape");
  return m;
}

inline json to_json(const CountsVector& c) {
  json j{{"kind", "counts"}, {"settings", c.settings}, {"trials", c.trials}, {"means", vector_json(c.means)}};
  if (!c.raw.empty()) j["raw"] = c.raw;
  return j;
}

inline CountsVector counts_from_json(const json& j) {
  CountsVector c;
  if (j.contains("settings")) c.settings = j.at("settings").get<std::vector<std::string>>();
  c.trials = j.at("trials").get<std::uint64_t>();
  c.means = vector_from_json(j.at("means"));
  if (j.contains("raw")) c.raw = j.at("raw").get<std::vector<std::vector<std::uint64_t>>>();
  return c;
}

inline json to_json(const PopulationEstimate& e) {
  return json{{"kind", "population_estimate"},
              {"method", e.method},
              {"d", vector_json(e.d)},
              {"C_b", number(e.background)},
              {"C_b_sigma", number(e.background_sigma)},
              {"E_d", number(e.efficiency)},
              {"covariance", matrix_json(e.covariance)},
              {"out_of_bounds", e.out_of_bounds},
              {"active_constraints", e.active_constraints},
              {"objective", number(e.objective)}};
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// CSV with one comment line, one header row and %.17g cells.
inline std::string csv_table(const std::string& comment, const std::vector<std::string>& header,
                             const Eigen::MatrixXd& data) {
  std::string s = "# " + comment + "\n";
  for (std::size_t i = 0; i < header.size(); ++i) s += (i ? "," : "") + header[i];
  s += "\n";
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) s += (c ? "," : "") + format_double(data(r, c));
    s += "\n";
  }
  return s;
}

}  // namespace metaqubit

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cio {

enum class ColumnRole { covariate, treatment, source, u_flag, outcome, ignore };

inline ColumnRole parse_role(const std::string& name) {
  if (name == "covariate") return ColumnRole::covariate;
  if (name == "treatment") return ColumnRole::treatment;
  if (name == "source") return ColumnRole::source;
  if (name == "u_flag") return ColumnRole::u_flag;
  if (name == "outcome") return ColumnRole::outcome;
  if (name == "ignore") return ColumnRole::ignore;
  throw std::invalid_argument("unknown column role: " + name);
}

// Row-aligned precursor table; optional columns are empty when undeclared.
struct IngestTable {
  Eigen::MatrixXd X;
  std::vector<int> t;
  std::vector<int> s;
  std::vector<int> u;
  std::vector<double> y;
  std::size_t dropped = 0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::optional<double> parse_finite(const std::string& s) {
  if (s.empty() || s == "NA" || s == "nan" || s == "NaN") return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

// Reads a UTF-8 comma-separated file with a header row. The schema maps
// column names to roles; every schema column must exist in the header. Rows
// missing any declared field are dropped and counted.
inline IngestTable ingest_covariates_csv(const std::string& path,
                                         const std::map<std::string, ColumnRole>& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": missing header row");
  const std::vector<std::string> header = detail::split_csv_line(line);

  std::vector<int> cov_cols;
  int t_col = -1, s_col = -1, u_col = -1, y_col = -1;
  for (const auto& [name, role] : schema) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw std::invalid_argument("schema column not present in file: " + name);
    const int col = static_cast<int>(it - header.begin());
    switch (role) {
      case ColumnRole::covariate: cov_cols.push_back(col); break;
      case ColumnRole::treatment: t_col = col; break;
      case ColumnRole::source: s_col = col; break;
      case ColumnRole::u_flag: u_col = col; break;
      case ColumnRole::outcome: y_col = col; break;
      case ColumnRole::ignore: break;
    }
  }
  if (cov_cols.empty()) throw std::invalid_argument("schema declares no covariate columns");

  IngestTable tbl;
  std::vector<std::vector<double>> rows;
  auto need_binary = [&](double v, const char* what, std::size_t rowno) {
    if (v != 0.0 && v != 1.0)
      throw std::invalid_argument(std::string("non-binary ") + what + " at data row " +
                                  std::to_string(rowno));
    return static_cast<int>(v);
  };

  std::size_t rowno = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    bool missing = false;
    std::vector<double> xs;
    xs.reserve(cov_cols.size());
    auto get = [&](int col) -> std::optional<double> {
      if (col >= static_cast<int>(fields.size())) return std::nullopt;
      return detail::parse_finite(fields[static_cast<std::size_t>(col)]);
    };
    for (int col : cov_cols) {
      auto v = get(col);
      if (!v) { missing = true; break; }
      xs.push_back(*v);
    }
    std::optional<double> tv, sv, uv, yv;
    if (!missing && t_col >= 0 && !(tv = get(t_col))) missing = true;
    if (!missing && s_col >= 0 && !(sv = get(s_col))) missing = true;
    if (!missing && u_col >= 0 && !(uv = get(u_col))) missing = true;
    if (!missing && y_col >= 0 && !(yv = get(y_col))) missing = true;
    if (missing) {
      ++tbl.dropped;
      ++rowno;
      continue;
    }
    rows.push_back(std::move(xs));
    if (t_col >= 0) tbl.t.push_back(need_binary(*tv, "treatment", rowno));
    if (s_col >= 0) tbl.s.push_back(need_binary(*sv, "source", rowno));
    if (u_col >= 0) tbl.u.push_back(need_binary(*uv, "u_flag", rowno));
    if (y_col >= 0) tbl.y.push_back(*yv);
    ++rowno;
  }
  if (rows.empty()) throw std::runtime_error(path + ": zero surviving rows");

  tbl.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cov_cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      tbl.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return tbl;
}

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace cio

#ifndef METRICDEP_IO_HPP_
#define METRICDEP_IO_HPP_

#include "metricdep/common.hpp"
#include "metricdep/estimators.hpp"
#include "metricdep/exact_oracle.hpp"
#include "metricdep/scenarios.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

namespace metricdep::io {

using Json = nlohmann::ordered_json;

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = line.find(',');
    out.push_back(trim(line.substr(0, comma)));
    if (comma == std::string_view::npos) {
      break;
    }
    line.remove_prefix(comma + 1);
  }
  return out;
}

inline double parse_cell(std::string_view text, std::size_t row,
                         std::size_t col) {
  double value = 0.0;
  if (!text.empty() && text.front() == '+') {
    text.remove_prefix(1);
  }
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() ||
      !std::isfinite(value)) {
    throw InputError("row " + std::to_string(row) + ", column " +
                     std::to_string(col) + ": invalid number '" +
                     std::string(text) + "'");
  }
  return value;
}

/// Non-blank lines with their 1-based line numbers.
inline std::vector<std::pair<std::size_t, std::string>>
read_lines(std::istream &in) {
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!trim(line).empty()) {
      lines.emplace_back(number, line);
    }
  }
  return lines;
}

} // namespace detail

inline std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Square numeric matrix, comma-separated, no header.
inline Matrix parse_matrix_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  const auto lines = detail::read_lines(in);
  metricdep::detail::require(!lines.empty(), "matrix CSV: no rows");
  const std::size_t n = lines.size();
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const auto &[line_no, line] = lines[r];
    const auto fields = detail::split_fields(line);
    if (fields.size() != n) {
      throw InputError("row " + std::to_string(line_no) + ": expected " +
                       std::to_string(n) + " columns for a square matrix, got " +
                       std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < n; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          detail::parse_cell(fields[c], line_no, c + 1);
    }
  }
  return m;
}

/*
 * Paired sample with a header row naming columns x_1..x_p and y_1..y_q
 * (any order; the numeric suffix gives the coordinate).
 */
inline PairedSample parse_paired_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  const auto lines = detail::read_lines(in);
  metricdep::detail::require(!lines.empty(), "paired CSV: missing header row");
  const auto header = detail::split_fields(lines.front().second);

  struct Slot {
    bool is_x;
    std::size_t coord;
  };
  std::vector<Slot> slots;
  std::size_t p = 0;
  std::size_t q = 0;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto name = header[c];
    const bool is_x = name.starts_with("x_");
    const bool is_y = name.starts_with("y_");
    std::size_t coord = 0;
    const auto digits = name.substr(std::min<std::size_t>(2, name.size()));
    const auto [ptr, ec] =
        std::from_chars(digits.data(), digits.data() + digits.size(), coord);
    if (!(is_x || is_y) || ec != std::errc() ||
        ptr != digits.data() + digits.size() || coord < 1) {
      throw InputError("header column " + std::to_string(c + 1) +
                       ": expected x_<k> or y_<k>, got '" + std::string(name) +
                       "'");
    }
    slots.push_back({is_x, coord - 1});
    (is_x ? p : q) = std::max(is_x ? p : q, coord);
  }
  metricdep::detail::require(p >= 1 && q >= 1,
                             "paired CSV: header needs x_ and y_ columns");
  std::vector<std::vector<char>> seen(2);
  seen[0].assign(p, 0);
  seen[1].assign(q, 0);
  for (std::size_t c = 0; c < slots.size(); ++c) {
    char &flag = seen[slots[c].is_x ? 0 : 1][slots[c].coord];
    if (flag) {
      throw InputError("header column " + std::to_string(c + 1) +
                       ": duplicate name '" + std::string(header[c]) + "'");
    }
    flag = 1;
  }
  for (std::size_t k = 0; k < p; ++k) {
    metricdep::detail::require(seen[0][k], "paired CSV: missing column x_" +
                                               std::to_string(k + 1));
  }
  for (std::size_t k = 0; k < q; ++k) {
    metricdep::detail::require(seen[1][k], "paired CSV: missing column y_" +
                                               std::to_string(k + 1));
  }

  const auto n = static_cast<Eigen::Index>(lines.size() - 1);
  PairedSample s{PointSet(n, static_cast<Eigen::Index>(p)),
                 PointSet(n, static_cast<Eigen::Index>(q))};
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto &[line_no, line] = lines[static_cast<std::size_t>(r) + 1];
    const auto fields = detail::split_fields(line);
    if (fields.size() != slots.size()) {
      throw InputError("row " + std::to_string(line_no) + ": expected " +
                       std::to_string(slots.size()) + " columns, got " +
                       std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const double v = detail::parse_cell(fields[c], line_no, c + 1);
      const auto coord = static_cast<Eigen::Index>(slots[c].coord);
      (slots[c].is_x ? s.x : s.y)(r, coord) = v;
    }
  }
  return s;
}

inline std::string to_paired_csv(const PairedSample &s) {
  std::string out;
  for (Eigen::Index c = 0; c < s.x.cols(); ++c) {
    out += (c ? ",x_" : "x_") + std::to_string(c + 1);
  }
  for (Eigen::Index c = 0; c < s.y.cols(); ++c) {
    out += ",y_" + std::to_string(c + 1);
  }
  out += '\n';
  for (Eigen::Index r = 0; r < s.size(); ++r) {
    for (Eigen::Index c = 0; c < s.x.cols(); ++c) {
      out += (c ? "," : "") + metricdep::detail::format_number(s.x(r, c));
    }
    for (Eigen::Index c = 0; c < s.y.cols(); ++c) {
      out += "," + metricdep::detail::format_number(s.y(r, c));
    }
    out += '\n';
  }
  return out;
}

namespace detail {

inline Matrix json_matrix(const Json &j, const char *field) {
  if (!j.is_array() || j.empty()) {
    throw InputError(std::string(field) + ": expected a nonempty array of rows");
  }
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  Matrix m;
  for (std::size_t r = 0; r < rows; ++r) {
    const Json &row = j[r];
    if (!row.is_array()) {
      throw InputError(std::string(field) + " row " + std::to_string(r + 1) +
                       ": expected an array");
    }
    if (r == 0) {
      cols = row.size();
      metricdep::detail::require(cols >= 1, std::string(field) + ": empty row");
      m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    }
    if (row.size() != cols) {
      throw InputError(std::string(field) + " row " + std::to_string(r + 1) +
                       ": expected " + std::to_string(cols) + " entries, got " +
                       std::to_string(row.size()));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row[c].is_number()) {
        throw InputError(std::string(field) + " row " + std::to_string(r + 1) +
                         ", column " + std::to_string(c + 1) +
                         ": expected a number");
      }
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          row[c].get<double>();
    }
  }
  return m;
}

} // namespace detail

/// {"support_x": [[...]], "support_y": [[...]], "P": [[...]]}
inline DiscreteJoint parse_joint_json(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    throw InputError(std::string("joint JSON: ") + e.what());
  }
  for (const char *key : {"support_x", "support_y", "P"}) {
    if (!doc.is_object() || !doc.contains(key)) {
      throw InputError(std::string("joint JSON: missing field '") + key + "'");
    }
  }
  return {detail::json_matrix(doc["support_x"], "support_x"),
          detail::json_matrix(doc["support_y"], "support_y"),
          detail::json_matrix(doc["P"], "P")};
}

inline Json to_json(const Vector &v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(v(i));
  }
  return out;
}

inline Json to_json(const Matrix &m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out.push_back(to_json(Vector(m.row(r).transpose())));
  }
  return out;
}

inline Json to_json(const DiscreteJoint &j) {
  return Json{{"support_x", to_json(j.support_x)},
              {"support_y", to_json(j.support_y)},
              {"P", to_json(j.p)}};
}

inline Json to_json(const TestResult &r, Estimator e, const std::string &spec) {
  return Json{{"statistic", r.statistic},
              {"p_value", r.p_value},
              {"B", r.permutations},
              {"seed", r.seed},
              {"estimator", std::string(to_string(e))},
              {"kernel_or_metric_spec", spec},
              {"alternative", std::string(to_string(r.alternative))}};
}

inline Json to_json(const PowerReport &r) {
  return Json{{"scenario", std::string(to_string(r.scenario.name))},
              {"n", r.scenario.n},
              {"sigma", r.scenario.sigma},
              {"seed", r.scenario.seed},
              {"estimator", std::string(to_string(r.estimator))},
              {"kernel_or_metric_spec", r.spec},
              {"alpha", r.alpha},
              {"reps", r.reps},
              {"B", r.permutations},
              {"rejections", r.rejections},
              {"rejection_rate", r.rejection_rate},
              {"monte_carlo_se", r.monte_carlo_se}};
}

inline Json to_json(const NormStudyReport &r) {
  Json out{{"scenario", std::string(to_string(r.scenario.name))},
           {"n", r.scenario.n},
           {"sigma", r.scenario.sigma},
           {"seed", r.scenario.seed},
           {"study", "norm"},
           {"alpha", r.alpha},
           {"reps", r.reps},
           {"rejections", r.rejections},
           {"rejection_rate", r.rejection_rate},
           {"monte_carlo_se", r.monte_carlo_se}};
  if (r.reps == 1) {
    out["ks_statistic"] = r.first.ks_statistic;
    out["p_value"] = r.first.p_value;
  }
  return out;
}

inline std::string norm_csv_header() {
  return "scenario,n,sigma,seed,alpha,reps,rejections,rejection_rate,"
         "monte_carlo_se";
}

inline std::string to_csv_row(const NormStudyReport &r) {
  using metricdep::detail::format_number;
  return std::string(to_string(r.scenario.name)) + "," +
         std::to_string(r.scenario.n) + "," + format_number(r.scenario.sigma) +
         "," + std::to_string(r.scenario.seed) + "," + format_number(r.alpha) +
         "," + std::to_string(r.reps) + "," + std::to_string(r.rejections) + "," +
         format_number(r.rejection_rate) + "," + format_number(r.monte_carlo_se);
}

inline std::string power_csv_header() {
  return "scenario,n,sigma,seed,estimator,kernel_or_metric_spec,alpha,reps,B,"
         "rejections,rejection_rate,monte_carlo_se";
}

inline std::string to_csv_row(const PowerReport &r) {
  using metricdep::detail::format_number;
  return std::string(to_string(r.scenario.name)) + "," +
         std::to_string(r.scenario.n) + "," + format_number(r.scenario.sigma) +
         "," + std::to_string(r.scenario.seed) + "," +
         std::string(to_string(r.estimator)) + ",\"" + r.spec + "\"," +
         format_number(r.alpha) + "," + std::to_string(r.reps) + "," +
         std::to_string(r.permutations) + "," + std::to_string(r.rejections) +
         "," + format_number(r.rejection_rate) + "," +
         format_number(r.monte_carlo_se);
}

} // namespace metricdep::io

#endif // METRICDEP_IO_HPP_

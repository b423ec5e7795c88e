#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <cfm/common.hpp>
#include <cfm/dataset.hpp>
#include <cfm/sampler.hpp>
#include <cfm/training.hpp>

namespace cfm {

namespace detail {

// Shortest decimal form that parses back to the same double.
inline std::string fmt_double(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  return f;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path.string());
  return f;
}

}  // namespace detail

// Matrix CSV with named columns; `# key=value` comment lines may precede
// the header and are skipped on read.
inline void write_matrix_csv(const std::filesystem::path& path, const Mat& m,
                             const std::vector<std::string>& columns,
                             const std::vector<std::string>& comments = {}) {
  require(static_cast<Eigen::Index>(columns.size()) == m.cols(),
          "write_matrix_csv: column name count mismatch");
  auto f = detail::open_out(path);
  for (const auto& c : comments) f << "# " << c << "\n";
  for (std::size_t j = 0; j < columns.size(); ++j)
    f << columns[j] << (j + 1 < columns.size() ? "," : "\n");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      f << detail::fmt_double(m(i, j)) << (j + 1 < m.cols() ? "," : "\n");
  }
  if (!f) throw IoError("write failed: " + path.string());
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::string> comments;
  Mat values;
};

inline CsvTable read_matrix_csv(const std::filesystem::path& path) {
  auto f = detail::open_in(path);
  CsvTable table;
  std::string line;
  bool header_read = false;
  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      table.comments.push_back(line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1));
      continue;
    }
    if (!header_read) {
      table.columns = detail::split_csv_line(line);
      header_read = true;
      continue;
    }
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != table.columns.size())
      throw IoError("csv row width mismatch in " + path.string());
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& s : fields) {
      if (s.empty()) {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      char* end = nullptr;
      row.push_back(std::strtod(s.c_str(), &end));
      if (end == s.c_str())
        throw IoError("csv numeric parse error in " + path.string() + ": " + s);
    }
    rows.push_back(std::move(row));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.columns.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      table.values(static_cast<Eigen::Index>(i),
                   static_cast<Eigen::Index>(j)) = rows[i][j];
  return table;
}

inline std::vector<std::string> numbered_columns(const std::string& prefix,
                                                 Eigen::Index n) {
  std::vector<std::string> cols;
  for (Eigen::Index i = 0; i < n; ++i)
    cols.push_back(prefix + std::to_string(i));
  return cols;
}

// Joint dataset as one CSV: x0..x{d-1}, y0..y{D-1}.
inline void write_paired_csv(const std::filesystem::path& path,
                             const PairedDataset& data) {
  Mat joined(data.size(), data.dim_x() + data.dim_y());
  joined << data.x, data.y;
  auto cols = numbered_columns("x", data.dim_x());
  const auto ycols = numbered_columns("y", data.dim_y());
  cols.insert(cols.end(), ycols.begin(), ycols.end());
  write_matrix_csv(path, joined, cols);
}

inline PairedDataset read_paired_csv(const std::filesystem::path& path) {
  const CsvTable t = read_matrix_csv(path);
  Eigen::Index d = 0;
  while (d < t.values.cols() && t.columns[static_cast<std::size_t>(d)][0] == 'x')
    ++d;
  require(d >= 1 && d < t.values.cols(),
          "read_paired_csv: expected x* then y* columns in " + path.string());
  return {t.values.leftCols(d), t.values.rightCols(t.values.cols() - d)};
}

// One row per sample; the comment line carries the ensemble summary.
inline void write_ensemble_csv(const std::filesystem::path& path,
                               const PosteriorEnsemble& ens) {
  std::string meta = "y_hat=";
  for (Eigen::Index i = 0; i < ens.y_condition.size(); ++i)
    meta += (i ? ";" : "") + detail::fmt_double(ens.y_condition(i));
  meta += " avg_n_steps=" + detail::fmt_double(ens.avg_n_steps);
  meta += " avg_path_length=" + detail::fmt_double(ens.avg_path_length);
  write_matrix_csv(path, ens.samples,
                   numbered_columns("x", ens.samples.cols()), {meta});
}

inline void write_loss_history_csv(const std::filesystem::path& path,
                                   const LossHistory& h) {
  auto f = detail::open_out(path);
  f << "iteration,train_loss,test_loss,test_loss_ma\n";
  std::size_t e = 0;
  for (std::size_t i = 0; i < h.train_loss.size(); ++i) {
    const long iter = static_cast<long>(i) + 1;
    f << iter << "," << detail::fmt_double(h.train_loss[i]);
    if (e < h.eval_iterations.size() && h.eval_iterations[e] == iter) {
      f << "," << detail::fmt_double(h.test_loss[e]) << ","
        << detail::fmt_double(h.test_loss_ma[e]);
      ++e;
    } else {
      f << ",,";
    }
    f << "\n";
  }
  if (!f) throw IoError("write failed: " + path.string());
}

inline LossHistory read_loss_history_csv(const std::filesystem::path& path) {
  const CsvTable t = read_matrix_csv(path);
  require(t.columns.size() == 4, "loss history csv needs 4 columns");
  LossHistory h;
  for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
    h.train_loss.push_back(t.values(i, 1));
    if (!std::isnan(t.values(i, 2))) {
      h.eval_iterations.push_back(static_cast<long>(t.values(i, 0)));
      h.test_loss.push_back(t.values(i, 2));
      h.test_loss_ma.push_back(t.values(i, 3));
    }
  }
  return h;
}

}  // namespace cfm

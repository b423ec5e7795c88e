#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace cfm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Thrown when a computation produces or receives non-finite values.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown on file-system failures (missing files, short reads, bad writes).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

inline bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace cfm

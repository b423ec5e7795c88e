#pragma once

#include <string>
#include <vector>

#include <cfm/common.hpp>
#include <cfm/rng.hpp>

namespace cfm {

// Row-aligned joint samples: row i of x pairs with row i of y.
struct PairedDataset {
  Mat x;  // N x d
  Mat y;  // N x D

  PairedDataset() = default;
  PairedDataset(Mat x_, Mat y_) : x(std::move(x_)), y(std::move(y_)) {
    require(x.rows() == y.rows() && x.rows() >= 1,
            "PairedDataset: rows must align and be nonempty");
    if (!(x.allFinite() && y.allFinite()))
      throw NumericError("PairedDataset: non-finite entries");
  }

  Eigen::Index size() const { return x.rows(); }
  Eigen::Index dim_x() const { return x.cols(); }
  Eigen::Index dim_y() const { return y.cols(); }
};

// Per-dimension affine map of [min, max] onto [-1, 1], fit on the training
// split. Dimensions with max == min map to 0 and invert back to the
// constant; their indices are kept as warnings.
class Normalizer {
 public:
  static Normalizer fit(const PairedDataset& train) {
    Normalizer n;
    n.x_min_ = train.x.colwise().minCoeff();
    n.x_max_ = train.x.colwise().maxCoeff();
    n.y_min_ = train.y.colwise().minCoeff();
    n.y_max_ = train.y.colwise().maxCoeff();
    for (Eigen::Index j = 0; j < n.x_min_.size(); ++j)
      if (n.x_max_(j) == n.x_min_(j)) n.constant_x_dims_.push_back(j);
    for (Eigen::Index j = 0; j < n.y_min_.size(); ++j)
      if (n.y_max_(j) == n.y_min_(j)) n.constant_y_dims_.push_back(j);
    return n;
  }

  Mat apply_x(const Mat& v) const { return apply(v, x_min_, x_max_); }
  Mat apply_y(const Mat& v) const { return apply(v, y_min_, y_max_); }
  Mat invert_x(const Mat& v) const { return invert(v, x_min_, x_max_); }
  Mat invert_y(const Mat& v) const { return invert(v, y_min_, y_max_); }

  PairedDataset apply(const PairedDataset& d) const {
    return {apply_x(d.x), apply_y(d.y)};
  }

  const std::vector<Eigen::Index>& constant_x_dims() const {
    return constant_x_dims_;
  }
  const std::vector<Eigen::Index>& constant_y_dims() const {
    return constant_y_dims_;
  }

  const Vec& x_min() const { return x_min_; }
  const Vec& x_max() const { return x_max_; }
  const Vec& y_min() const { return y_min_; }
  const Vec& y_max() const { return y_max_; }

  // Reconstruction from stored bounds (for checkpoint/metadata round trips).
  static Normalizer from_bounds(Vec x_min, Vec x_max, Vec y_min, Vec y_max) {
    Normalizer n;
    n.x_min_ = std::move(x_min);
    n.x_max_ = std::move(x_max);
    n.y_min_ = std::move(y_min);
    n.y_max_ = std::move(y_max);
    for (Eigen::Index j = 0; j < n.x_min_.size(); ++j)
      if (n.x_max_(j) == n.x_min_(j)) n.constant_x_dims_.push_back(j);
    for (Eigen::Index j = 0; j < n.y_min_.size(); ++j)
      if (n.y_max_(j) == n.y_min_(j)) n.constant_y_dims_.push_back(j);
    return n;
  }

 private:
  static Mat apply(const Mat& v, const Vec& lo, const Vec& hi) {
    require(v.cols() == lo.size(), "Normalizer: dimension mismatch");
    Mat out(v.rows(), v.cols());
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      const double span = hi(j) - lo(j);
      if (span == 0.0)
        out.col(j).setZero();
      else
        out.col(j) = 2.0 * (v.col(j).array() - lo(j)) / span - 1.0;
    }
    return out;
  }

  static Mat invert(const Mat& v, const Vec& lo, const Vec& hi) {
    require(v.cols() == lo.size(), "Normalizer: dimension mismatch");
    Mat out(v.rows(), v.cols());
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      const double span = hi(j) - lo(j);
      if (span == 0.0)
        out.col(j).setConstant(lo(j));
      else
        out.col(j) = (v.col(j).array() + 1.0) * 0.5 * span + lo(j);
    }
    return out;
  }

  Vec x_min_, x_max_, y_min_, y_max_;
  std::vector<Eigen::Index> constant_x_dims_, constant_y_dims_;
};

// Source distribution for the transport's t = 0 end. `gaussian` draws
// i.i.d. standard normals; `prior_scrambled` reuses the minibatch's x rows
// under a cyclic shift (a derangement, so no row pairs with itself and the
// interpolant rate never vanishes on distinct rows).
enum class SourceKind { gaussian, prior_scrambled };

inline std::string to_string(SourceKind k) {
  return k == SourceKind::gaussian ? "gaussian" : "prior_scrambled";
}

inline SourceKind source_kind_from_string(const std::string& s) {
  if (s == "gaussian") return SourceKind::gaussian;
  if (s == "prior_scrambled" || s == "prior") return SourceKind::prior_scrambled;
  throw std::invalid_argument("unknown source kind: " + s);
}

inline Mat sample_source_batch(SourceKind kind, const Mat& batch_x, Rng& rng) {
  const Eigen::Index b = batch_x.rows();
  if (kind == SourceKind::gaussian)
    return rng.normal_matrix(b, batch_x.cols());
  require(b >= 2, "prior_scrambled needs a batch of at least 2 rows");
  Mat z(b, batch_x.cols());
  z.topRows(b - 1) = batch_x.bottomRows(b - 1);
  z.row(b - 1) = batch_x.row(0);
  return z;
}

}  // namespace cfm

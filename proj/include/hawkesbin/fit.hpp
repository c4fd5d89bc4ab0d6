#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "hawkesbin/errors.hpp"

namespace hawkesbin {

/// Result of the binned least-squares estimator. `excitement[k-1](i,j)` is
/// the estimate of the excitement kernel entry (i,j) at lag k*delta, for
/// 1 <= k <= p; `baseline` is the estimated background intensity per unit
/// time. `covariance`, when present, is the estimated covariance of the
/// stacked coefficient vector laid out by `excitement_index` /
/// `baseline_index` below.
struct HawkesFit {
  double delta = 0.0;
  double support = 0.0;
  Eigen::Index p = 0;
  Eigen::Index n = 0;
  Eigen::Index d = 0;
  std::vector<Eigen::MatrixXd> excitement;
  Eigen::VectorXd baseline;
  Eigen::MatrixXd covariance;  // (p*d*d + d) square, or empty
  double condition = 0.0;      // condition estimate of the design Gram matrix
  std::size_t dropped_tail = 0;

  [[nodiscard]] bool has_covariance() const { return covariance.size() > 0; }
};

/// Coefficient addresses, 1-based to match the usual lag/component notation:
/// lag index 1 <= k <= p, components 1 <= i, j <= d.
struct ExcitementEntry {
  Eigen::Index k = 1;
  Eigen::Index i = 1;
  Eigen::Index j = 1;
};

struct BaselineEntry {
  Eigen::Index i = 1;
};

/// 0-based position of excitement entry (k,i,j) in the stacked coefficient
/// vector (column-major over the d x (d*p+1) coefficient matrix).
inline Eigen::Index excitement_index(Eigen::Index d, Eigen::Index p,
                                     const ExcitementEntry& e) {
  require(e.k >= 1 && e.k <= p, ErrorCode::invalid_parameter,
          "lag index out of range");
  require(e.i >= 1 && e.i <= d && e.j >= 1 && e.j <= d,
          ErrorCode::invalid_parameter, "component index out of range");
  return (e.k - 1) * d * d + (e.j - 1) * d + (e.i - 1);
}

/// 0-based position of baseline entry i in the stacked coefficient vector.
inline Eigen::Index baseline_index(Eigen::Index d, Eigen::Index p,
                                   const BaselineEntry& e) {
  require(e.i >= 1 && e.i <= d, ErrorCode::invalid_parameter,
          "component index out of range");
  return p * d * d + (e.i - 1);
}

inline double covariance_entry(const HawkesFit& fit, Eigen::Index row,
                               Eigen::Index col) {
  require(fit.has_covariance(), ErrorCode::invalid_parameter,
          "fit carries no covariance estimate");
  return fit.covariance(row, col);
}

}  // namespace hawkesbin

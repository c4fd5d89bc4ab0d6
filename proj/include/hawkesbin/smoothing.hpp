#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hawkesbin/errors.hpp"
#include "hawkesbin/fit.hpp"

namespace hawkesbin {

struct SmoothedValue {
  double value = 0.0;
  bool empty_window = false;
};

/// Box moving average over the fitted excitement grid: at time t the value is
/// the mean of the grid estimates whose lag k*delta falls inside the closed
/// window [t - tau/2, t + tau/2]. The result is piecewise constant with
/// breakpoints at k*delta +- tau/2 and zero outside [0, p*delta]. A window
/// holding no grid point evaluates to zero and is flagged.
class SmoothedExcitement {
 public:
  SmoothedExcitement(const HawkesFit& fit, double tau)
      : delta_(fit.delta), tau_(tau), p_(fit.p), d_(fit.d) {
    require(std::isfinite(tau) && tau > 0.0, ErrorCode::invalid_parameter,
            "smoothing window must be positive");
    require(p_ >= 1 && d_ >= 1 && delta_ > 0.0, ErrorCode::invalid_parameter,
            "fit carries no excitement grid");
    require(static_cast<Eigen::Index>(fit.excitement.size()) == p_,
            ErrorCode::invalid_parameter,
            "fit excitement grid does not match its order");
    prefix_.reserve(static_cast<std::size_t>(p_) + 1);
    prefix_.push_back(Eigen::MatrixXd::Zero(d_, d_));
    for (Eigen::Index k = 0; k < p_; ++k) {
      require(fit.excitement[static_cast<std::size_t>(k)].rows() == d_ &&
                  fit.excitement[static_cast<std::size_t>(k)].cols() == d_,
              ErrorCode::invalid_parameter,
              "fit excitement grid has inconsistent dimensions");
      prefix_.push_back(prefix_.back() +
                        fit.excitement[static_cast<std::size_t>(k)]);
    }
  }

  [[nodiscard]] Eigen::Index dimension() const { return d_; }
  [[nodiscard]] double delta() const { return delta_; }
  [[nodiscard]] double tau() const { return tau_; }
  [[nodiscard]] double support() const {
    return static_cast<double>(p_) * delta_;
  }
  [[nodiscard]] const std::string& method() const { return method_; }

  [[nodiscard]] SmoothedValue at(Eigen::Index i, Eigen::Index j,
                                 double t) const {
    require(i >= 0 && i < d_ && j >= 0 && j < d_,
            ErrorCode::invalid_parameter, "component index out of range");
    require(std::isfinite(t), ErrorCode::invalid_parameter,
            "evaluation time must be finite");
    const double edge = 1e-9 * std::max(1.0, support());
    if (t < -edge || t > support() + edge) return {0.0, false};
    auto k_lo = static_cast<Eigen::Index>(
        std::ceil((t - tau_ / 2.0) / delta_ - 1e-9));
    auto k_hi = static_cast<Eigen::Index>(
        std::floor((t + tau_ / 2.0) / delta_ + 1e-9));
    k_lo = std::max<Eigen::Index>(k_lo, 1);
    k_hi = std::min(k_hi, p_);
    if (k_lo > k_hi) return {0.0, true};
    const double sum = prefix_[static_cast<std::size_t>(k_hi)](i, j) -
                       prefix_[static_cast<std::size_t>(k_lo - 1)](i, j);
    return {sum / static_cast<double>(k_hi - k_lo + 1), false};
  }

  [[nodiscard]] double value(Eigen::Index i, Eigen::Index j, double t) const {
    return at(i, j, t).value;
  }

  /// Sorted times in [0, p*delta] between which the smoothed function is
  /// constant; shared by every component pair.
  [[nodiscard]] std::vector<double> breakpoints() const {
    std::vector<double> points = {0.0, support()};
    for (Eigen::Index k = 1; k <= p_; ++k) {
      const double center = static_cast<double>(k) * delta_;
      for (double t : {center - tau_ / 2.0, center + tau_ / 2.0}) {
        if (t > 0.0 && t < support()) points.push_back(t);
      }
    }
    std::sort(points.begin(), points.end());
    const double merge = 1e-12 * std::max(1.0, support());
    std::vector<double> unique;
    for (double t : points) {
      if (unique.empty() || t - unique.back() > merge) unique.push_back(t);
    }
    return unique;
  }

 private:
  double delta_;
  double tau_;
  Eigen::Index p_;
  Eigen::Index d_;
  std::vector<Eigen::MatrixXd> prefix_;
  std::string method_ = "box";
};

inline SmoothedExcitement box_smooth(const HawkesFit& fit, double tau) {
  return SmoothedExcitement(fit, tau);
}

/// Integral of the fitted excitement over its support, taken directly on the
/// grid estimates: delta times the sum of the grid values for entry (i, j).
/// Agrees exactly with the corresponding branching-matrix entry.
inline double integrate_pointwise(const HawkesFit& fit, Eigen::Index i,
                                  Eigen::Index j) {
  require(i >= 0 && i < fit.d && j >= 0 && j < fit.d,
          ErrorCode::invalid_parameter, "component index out of range");
  double sum = 0.0;
  for (Eigen::Index k = 0; k < fit.p; ++k) {
    sum += fit.excitement[static_cast<std::size_t>(k)](i, j);
  }
  return fit.delta * sum;
}

}  // namespace hawkesbin

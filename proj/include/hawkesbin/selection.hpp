#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "hawkesbin/cls.hpp"
#include "hawkesbin/errors.hpp"
#include "hawkesbin/events.hpp"
#include "hawkesbin/parallel.hpp"

namespace hawkesbin {

/// Information criterion for the order-p count regression given the residual
/// covariance estimate `sigma` from m = n - p usable bins:
/// log det(sigma) + 2 p d^2 / m.
inline double aic_from_residual_covariance(const Eigen::MatrixXd& sigma,
                                           Eigen::Index p, Eigen::Index m) {
  require(sigma.rows() == sigma.cols() && sigma.rows() >= 1,
          ErrorCode::invalid_parameter, "residual covariance must be square");
  require(p >= 1 && m >= 1, ErrorCode::invalid_parameter,
          "order and sample size must be positive");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma,
                                                     Eigen::EigenvaluesOnly);
  require(eig.info() == Eigen::Success, ErrorCode::evaluation_error,
          "residual covariance eigendecomposition failed");
  const double floor =
      1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff());
  require(eig.eigenvalues().minCoeff() > floor,
          ErrorCode::degenerate_residual_covariance,
          "residual covariance is singular");
  const double log_det = eig.eigenvalues().array().log().sum();
  const double d = static_cast<double>(sigma.rows());
  return log_det +
         2.0 * static_cast<double>(p) * d * d / static_cast<double>(m);
}

/// Fits the order-p regression and evaluates the information criterion on its
/// count-scale residuals.
inline double aic_value(const BinCountSequence& bc, Eigen::Index p) {
  DesignMatrices design = build_design(bc, p);
  auto fit = cls_fit(design);
  const Eigen::MatrixXd residuals = cls_residuals(design, fit.coefficients);
  const Eigen::Index m = residuals.cols();
  const Eigen::MatrixXd sigma =
      residuals * residuals.transpose() / static_cast<double>(m);
  return aic_from_residual_covariance(sigma, p, m);
}

struct AicPoint {
  Eigen::Index p = 0;
  double support = 0.0;
  double aic = std::numeric_limits<double>::infinity();
  bool feasible = false;  // false: degenerate residuals or unusable design
};

struct SupportSelection {
  std::vector<AicPoint> scan;
  Eigen::Index best_p = 0;
  double support = 0.0;
  double delta0 = 0.0;
};

/// Criterion values for orders p = 1 .. ceil(s_max / delta0) on counts
/// binned at delta0. Candidates whose design is unusable (too short,
/// collinear) or whose residual covariance is singular stay in the scan as
/// infeasible.
inline std::vector<AicPoint> support_scan(const BinCountSequence& bc,
                                          double s_max) {
  const double delta0 = bc.delta;
  require(std::isfinite(s_max) && s_max > delta0, ErrorCode::invalid_parameter,
          "support bound must exceed the bin width");
  require(s_max < static_cast<double>(bc.counts.cols()) * delta0,
          ErrorCode::invalid_parameter,
          "support bound must stay below the observed span");
  const auto p_max =
      static_cast<Eigen::Index>(std::ceil(s_max / delta0 - 1e-9));
  std::vector<AicPoint> scan;
  scan.reserve(static_cast<std::size_t>(p_max));
  for (Eigen::Index p = 1; p <= p_max; ++p) {
    AicPoint point;
    point.p = p;
    point.support = static_cast<double>(p) * delta0;
    try {
      point.aic = aic_value(bc, p);
      point.feasible = true;
    } catch (const Error&) {
      point.feasible = false;
    }
    scan.push_back(point);
  }
  return scan;
}

/// Picks the order with the smallest criterion value from a scan, ties going
/// to the smaller order. The selected support is best_p * delta0.
inline SupportSelection selection_from_scan(std::vector<AicPoint> scan,
                                            double delta0) {
  SupportSelection out;
  out.delta0 = delta0;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& point : scan) {
    if (point.feasible && point.aic < best) {
      best = point.aic;
      out.best_p = point.p;
      out.support = point.support;
    }
  }
  out.scan = std::move(scan);
  require(out.best_p >= 1, ErrorCode::selection_failed,
          "no usable order in the scanned range");
  return out;
}

inline SupportSelection select_support(const BinCountSequence& bc,
                                       double s_max) {
  return selection_from_scan(support_scan(bc, s_max), bc.delta);
}

/// Bin width giving about one event per bin and component, based on the
/// average component rate.
inline double preliminary_bin_size(const EventStream& stream) {
  require(stream.total_events() > 0, ErrorCode::insufficient_events,
          "cannot size bins for an empty stream");
  return static_cast<double>(stream.dimension()) * stream.window().length() /
         static_cast<double>(stream.total_events());
}

struct BinSizeCandidate {
  double delta = 0.0;
  Eigen::Index p = 0;
  Eigen::VectorXd baseline;
  Eigen::VectorXd half_width;
  bool usable = false;
};

struct BinSizeSelection {
  std::vector<BinSizeCandidate> scan;
  bool has_recommendation = false;
  double recommended = 0.0;
  /// Per component: +1 when baseline estimates rise monotonically as delta
  /// shrinks, -1 when they fall, 0 when mixed.
  std::vector<int> trend;
};

/// Refits the estimator on the raw stream at every candidate width (largest
/// first) and looks for the widths where the baseline has stopped moving: a
/// successive pair counts as stable when every component's baseline change is
/// smaller than both candidates' confidence half-widths. Recommended is the
/// largest width opening the maximal stable suffix of the scan. Candidate
/// fits are independent; `threads` 1 stays serial, 0 defers to
/// default_thread_count(), and the scan order is fixed either way.
inline BinSizeSelection select_bin_size(const EventStream& stream,
                                        double support,
                                        const std::vector<double>& deltas,
                                        double level = 0.95,
                                        unsigned threads = 1) {
  require(!deltas.empty(), ErrorCode::invalid_parameter,
          "need at least one candidate bin width");
  for (std::size_t m = 0; m + 1 < deltas.size(); ++m) {
    require(deltas[m] > deltas[m + 1], ErrorCode::invalid_parameter,
            "candidate bin widths must be strictly decreasing");
  }

  const Eigen::Index d = static_cast<Eigen::Index>(stream.dimension());
  BinSizeSelection out;
  out.scan.resize(deltas.size());
  parallel_for(
      deltas.size(),
      [&](std::size_t m) {
        BinSizeCandidate candidate;
        candidate.delta = deltas[m];
        try {
          auto fit = hawkes_estimator(bin_counts(stream, deltas[m]), support);
          candidate.p = fit.p;
          candidate.baseline = fit.baseline;
          candidate.half_width.resize(d);
          for (Eigen::Index i = 0; i < d; ++i) {
            candidate.half_width(i) =
                confidence_interval(fit, BaselineEntry{i + 1}, level)
                    .half_width;
          }
          candidate.usable = true;
        } catch (const Error&) {
          candidate.usable = false;
        }
        out.scan[m] = std::move(candidate);
      },
      threads);

  auto pair_stable = [&](std::size_t m) {
    const auto& a = out.scan[m];
    const auto& b = out.scan[m + 1];
    if (!a.usable || !b.usable) return false;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double change = std::fabs(a.baseline(i) - b.baseline(i));
      if (change >= a.half_width(i) || change >= b.half_width(i)) return false;
    }
    return true;
  };

  if (out.scan.size() >= 2) {
    std::size_t suffix_start = out.scan.size() - 1;
    for (std::size_t m = out.scan.size() - 1; m-- > 0;) {
      if (pair_stable(m)) {
        suffix_start = m;
      } else {
        break;
      }
    }
    if (suffix_start + 1 < out.scan.size()) {
      out.has_recommendation = true;
      out.recommended = out.scan[suffix_start].delta;
    }
  }

  out.trend.assign(static_cast<std::size_t>(d), 0);
  for (Eigen::Index i = 0; i < d; ++i) {
    bool has_up = false;
    bool has_down = false;
    for (std::size_t m = 0; m + 1 < out.scan.size(); ++m) {
      if (!out.scan[m].usable || !out.scan[m + 1].usable) continue;
      const double diff = out.scan[m + 1].baseline(i) - out.scan[m].baseline(i);
      if (diff > 0.0) has_up = true;
      if (diff < 0.0) has_down = true;
    }
    out.trend[static_cast<std::size_t>(i)] =
        has_up == has_down ? 0 : (has_up ? 1 : -1);
  }
  return out;
}

}  // namespace hawkesbin

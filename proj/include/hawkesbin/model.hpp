#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <variant>
#include <vector>

#include "hawkesbin/errors.hpp"
#include "hawkesbin/fit.hpp"
#include "hawkesbin/stats.hpp"

namespace hawkesbin {

/// Spectral radii this close to 1 or beyond count as unstable.
inline constexpr double kStabilityTolerance = 1e-9;

/// One excitement kernel entry: a non-negative function on (0, support],
/// zero elsewhere. Families cover the usual parametric shapes plus a
/// piecewise-constant grid (the value at k*step holds on ((k-1)*step, k*step]).
class ExcitementFunction {
 public:
  struct Zero {};
  struct ExpDecay {
    double scale = 0.0;
    double rate = 0.0;
    double support = 0.0;
  };
  struct PowerLaw {
    double scale = 0.0;
    double exponent = 0.0;
    double support = 0.0;
  };
  struct ConstantOnInterval {
    double level = 0.0;
    double start = 0.0;
    double end = 0.0;
  };
  struct SineOnInterval {
    double amplitude = 0.0;
    double omega = 1.0;
    double end = 0.0;
  };
  struct Grid {
    double step = 0.0;
    std::vector<double> values;
  };

  ExcitementFunction() : family_(Zero{}) {}

  static ExcitementFunction zero() { return ExcitementFunction(Zero{}); }

  static ExcitementFunction exp_decay(double scale, double rate, double support) {
    require(scale >= 0.0 && rate >= 0.0, ErrorCode::invalid_parameter,
            "exp-decay needs non-negative scale and rate");
    require(support > 0.0 && std::isfinite(support), ErrorCode::invalid_parameter,
            "exp-decay needs a finite positive support");
    return ExcitementFunction(ExpDecay{scale, rate, support});
  }

  static ExcitementFunction power_law(double scale, double exponent, double support) {
    require(scale >= 0.0 && exponent >= 0.0, ErrorCode::invalid_parameter,
            "power-law needs non-negative scale and exponent");
    require(support > 0.0 && std::isfinite(support), ErrorCode::invalid_parameter,
            "power-law needs a finite positive support");
    return ExcitementFunction(PowerLaw{scale, exponent, support});
  }

  static ExcitementFunction constant_on_interval(double level, double start,
                                                 double end) {
    require(level >= 0.0, ErrorCode::invalid_parameter,
            "constant-on-interval needs a non-negative level");
    require(start >= 0.0 && end > start && std::isfinite(end),
            ErrorCode::invalid_parameter,
            "constant-on-interval needs 0 <= start < end < infinity");
    return ExcitementFunction(ConstantOnInterval{level, start, end});
  }

  static ExcitementFunction sine_on_interval(double amplitude, double omega,
                                             double end) {
    require(amplitude >= 0.0 && omega > 0.0, ErrorCode::invalid_parameter,
            "sine-on-interval needs non-negative amplitude and positive omega");
    require(end > 0.0 && omega * end <= M_PI * (1.0 + 1e-12),
            ErrorCode::invalid_parameter,
            "sine-on-interval must stay non-negative: need end <= pi/omega");
    return ExcitementFunction(SineOnInterval{amplitude, omega, end});
  }

  static ExcitementFunction grid(double step, std::vector<double> values) {
    require(step > 0.0 && std::isfinite(step), ErrorCode::invalid_parameter,
            "grid needs a positive step");
    require(!values.empty(), ErrorCode::invalid_parameter,
            "grid needs at least one value");
    for (double v : values) {
      require(std::isfinite(v) && v >= 0.0, ErrorCode::invalid_parameter,
              "grid values must be finite and non-negative");
    }
    return ExcitementFunction(Grid{step, std::move(values)});
  }

  /// Kernel value at lag t; zero for t <= 0 and t > support().
  [[nodiscard]] double value(double t) const {
    if (t <= 0.0 || t > support()) return 0.0;
    if (const auto* f = std::get_if<ExpDecay>(&family_)) {
      return f->scale * std::exp(-f->rate * t);
    }
    if (const auto* f = std::get_if<PowerLaw>(&family_)) {
      return f->scale * std::pow(1.0 + t, -f->exponent);
    }
    if (const auto* f = std::get_if<ConstantOnInterval>(&family_)) {
      return t > f->start ? f->level : 0.0;
    }
    if (const auto* f = std::get_if<SineOnInterval>(&family_)) {
      return f->amplitude * std::max(std::sin(f->omega * t), 0.0);
    }
    if (const auto* f = std::get_if<Grid>(&family_)) {
      auto k = static_cast<std::ptrdiff_t>(std::ceil(t / f->step - 1e-12));
      if (k < 1) k = 1;
      if (k > static_cast<std::ptrdiff_t>(f->values.size())) return 0.0;
      return f->values[static_cast<std::size_t>(k - 1)];
    }
    return 0.0;
  }

  [[nodiscard]] double support() const {
    if (std::holds_alternative<Zero>(family_)) return 0.0;
    if (const auto* f = std::get_if<ExpDecay>(&family_)) return f->support;
    if (const auto* f = std::get_if<PowerLaw>(&family_)) return f->support;
    if (const auto* f = std::get_if<ConstantOnInterval>(&family_)) return f->end;
    if (const auto* f = std::get_if<SineOnInterval>(&family_)) return f->end;
    return std::get<Grid>(family_).step *
           static_cast<double>(std::get<Grid>(family_).values.size());
  }

  /// Tight upper bound for the kernel on its support, used as a thinning
  /// envelope. Exact for every built-in family; a 10000-point scan backs any
  /// family without a closed form.
  [[nodiscard]] double max_value() const {
    if (std::holds_alternative<Zero>(family_)) return 0.0;
    if (const auto* f = std::get_if<ExpDecay>(&family_)) return f->scale;
    if (const auto* f = std::get_if<PowerLaw>(&family_)) return f->scale;
    if (const auto* f = std::get_if<ConstantOnInterval>(&family_)) return f->level;
    if (const auto* f = std::get_if<SineOnInterval>(&family_)) {
      const double peak = M_PI / 2.0 / f->omega;
      return f->end >= peak ? f->amplitude
                            : f->amplitude * std::sin(f->omega * f->end);
    }
    if (const auto* f = std::get_if<Grid>(&family_)) {
      return *std::max_element(f->values.begin(), f->values.end());
    }
    double best = 0.0;
    const double s = support();
    for (int m = 0; m < 10000; ++m) {
      best = std::max(best, value(s * (m + 0.5) / 10000.0));
    }
    return best;
  }

  [[nodiscard]] bool is_grid() const {
    return std::holds_alternative<Grid>(family_);
  }
  [[nodiscard]] bool is_zero() const {
    return std::holds_alternative<Zero>(family_);
  }

  using Family = std::variant<Zero, ExpDecay, PowerLaw, ConstantOnInterval,
                              SineOnInterval, Grid>;
  [[nodiscard]] const Family& family() const { return family_; }

 private:
  explicit ExcitementFunction(Family family) : family_(std::move(family)) {}

  Family family_;
};

/// Full model description: baseline intensities and the d x d matrix of
/// excitement kernels, entry (i,j) being the effect of component-j events on
/// the component-i intensity.
class HawkesSpec {
 public:
  HawkesSpec(Eigen::VectorXd eta, std::vector<ExcitementFunction> excitement)
      : eta_(std::move(eta)), excitement_(std::move(excitement)) {
    require(eta_.size() >= 1, ErrorCode::invalid_parameter,
            "model needs at least one component");
    require(excitement_.size() ==
                static_cast<std::size_t>(eta_.size() * eta_.size()),
            ErrorCode::invalid_parameter,
            "excitement matrix must be d x d");
    require((eta_.array() >= 0.0).all(), ErrorCode::invalid_parameter,
            "baseline intensities must be non-negative");
    require(eta_.maxCoeff() > 0.0, ErrorCode::invalid_parameter,
            "at least one baseline intensity must be positive");
  }

  [[nodiscard]] Eigen::Index dimension() const { return eta_.size(); }
  [[nodiscard]] const Eigen::VectorXd& eta() const { return eta_; }

  [[nodiscard]] const ExcitementFunction& excitement(Eigen::Index i,
                                                     Eigen::Index j) const {
    require(i >= 0 && i < dimension() && j >= 0 && j < dimension(),
            ErrorCode::invalid_parameter, "component index out of range");
    return excitement_[static_cast<std::size_t>(i * dimension() + j)];
  }

  [[nodiscard]] double max_support() const {
    double s = 0.0;
    for (const auto& f : excitement_) s = std::max(s, f.support());
    return s;
  }

 private:
  Eigen::VectorXd eta_;
  std::vector<ExcitementFunction> excitement_;  // row-major d x d
};

/// Spectral radius of a square matrix: closed forms for d <= 2, power
/// iteration (meant for entrywise non-negative matrices) above that.
inline double spectral_radius(const Eigen::MatrixXd& m) {
  require(m.rows() == m.cols() && m.rows() >= 1, ErrorCode::invalid_parameter,
          "spectral radius needs a square matrix");
  const Eigen::Index d = m.rows();
  if (d == 1) return std::fabs(m(0, 0));
  if (d == 2) {
    const double tr = m(0, 0) + m(1, 1);
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    const double disc = tr * tr - 4.0 * det;
    if (disc >= 0.0) {
      const double root = std::sqrt(disc);
      return std::max(std::fabs((tr + root) / 2.0),
                      std::fabs((tr - root) / 2.0));
    }
    return std::sqrt(det);  // complex pair, common modulus
  }
  Eigen::VectorXd v = Eigen::VectorXd::Ones(d);
  double radius = 0.0;
  for (int iter = 0; iter < 10000; ++iter) {
    Eigen::VectorXd w = m * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (std::fabs(norm - radius) <= 1e-12 * std::max(1.0, norm)) return norm;
    radius = norm;
  }
  return radius;
}

struct BranchingMatrix {
  Eigen::MatrixXd K;
  double spectral_radius = 0.0;
};

/// Integrates each excitement kernel over its support by the midpoint rule.
/// `step` 0 picks a default: the kernel's own grid step for grid kernels
/// (making the rule exact there), support/10000 otherwise.
inline BranchingMatrix branching_matrix(const HawkesSpec& spec,
                                        double step = 0.0) {
  require(step >= 0.0 && std::isfinite(step), ErrorCode::invalid_parameter,
          "quadrature step must be non-negative and finite");
  const Eigen::Index d = spec.dimension();
  BranchingMatrix result;
  result.K = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto& f = spec.excitement(i, j);
      const double s = f.support();
      if (s <= 0.0) continue;
      double h = step;
      if (h == 0.0) {
        h = f.is_grid() ? std::get<ExcitementFunction::Grid>(f.family()).step
                        : s / 10000.0;
      }
      const auto cells =
          std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(s / h - 1e-9)));
      const double w = s / static_cast<double>(cells);
      double sum = 0.0;
      for (std::int64_t c = 0; c < cells; ++c) {
        const double v = f.value((static_cast<double>(c) + 0.5) * w);
        require(std::isfinite(v), ErrorCode::evaluation_error,
                "excitement kernel evaluated to a non-finite value");
        sum += v;
      }
      result.K(i, j) = sum * w;
    }
  }
  result.spectral_radius = spectral_radius(result.K);
  return result;
}

struct StabilityReport {
  double spectral_radius = 0.0;
  bool stable = false;
};

/// A model counts as stable when the branching matrix has spectral radius
/// strictly below 1 - kStabilityTolerance.
inline StabilityReport stability_check(const BranchingMatrix& branching) {
  return StabilityReport{branching.spectral_radius,
                         branching.spectral_radius < 1.0 - kStabilityTolerance};
}

inline StabilityReport stability_check(const HawkesSpec& spec) {
  return stability_check(branching_matrix(spec));
}

struct FittedBranching {
  Eigen::MatrixXd K;
  Eigen::MatrixXd half_width;  // same shape; zero when the fit lacks covariance
  double spectral_radius = 0.0;
};

/// Branching matrix implied by a fit: entry (i,j) is delta times the sum of
/// the fitted excitement values over all lags, with a normal-approximation
/// confidence half-width propagated from the coefficient covariance.
inline FittedBranching branching_from_fit(const HawkesFit& fit,
                                          double level = 0.95) {
  require(level > 0.0 && level < 1.0, ErrorCode::invalid_parameter,
          "confidence level must lie strictly between 0 and 1");
  const Eigen::Index d = fit.d;
  const Eigen::Index p = fit.p;
  FittedBranching out;
  out.K = Eigen::MatrixXd::Zero(d, d);
  out.half_width = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      double sum = 0.0;
      for (Eigen::Index k = 0; k < p; ++k) sum += fit.excitement[k](i, j);
      out.K(i, j) = fit.delta * sum;
    }
  }
  if (fit.has_covariance()) {
    const double z = normal_inverse_cdf(0.5 + level / 2.0);
    for (Eigen::Index i = 1; i <= d; ++i) {
      for (Eigen::Index j = 1; j <= d; ++j) {
        double var = 0.0;
        for (Eigen::Index k1 = 1; k1 <= p; ++k1) {
          const auto row = excitement_index(d, p, {k1, i, j});
          for (Eigen::Index k2 = 1; k2 <= p; ++k2) {
            var += fit.covariance(row, excitement_index(d, p, {k2, i, j}));
          }
        }
        var *= fit.delta * fit.delta;
        require(var >= -1e-8, ErrorCode::evaluation_error,
                "propagated branching variance is negative");
        out.half_width(i - 1, j - 1) = z * std::sqrt(std::max(var, 0.0));
      }
    }
  }
  out.spectral_radius = spectral_radius(out.K);
  return out;
}

}  // namespace hawkesbin

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hawkesbin/errors.hpp"
#include "hawkesbin/events.hpp"
#include "hawkesbin/fit.hpp"
#include "hawkesbin/model.hpp"
#include "hawkesbin/smoothing.hpp"
#include "hawkesbin/stats.hpp"

namespace hawkesbin {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One excitement kernel entry as seen by the diagnostics engine: an
/// evaluable lag function plus the structure hints the integrator exploits.
/// `value` must return 0 outside (0, support]. For piecewise-constant
/// kernels, `breakpoints` lists the ascending lags (0 and support included)
/// between which the value does not change.
struct PairKernel {
  std::function<double(double)> value;
  double support = 0.0;
  bool piecewise_constant = false;
  std::vector<double> breakpoints;
};

inline PairKernel pair_kernel(const ExcitementFunction& f) {
  PairKernel k;
  k.value = [f](double t) { return f.value(t); };
  k.support = f.support();
  if (f.is_zero()) {
    k.piecewise_constant = true;
  } else if (const auto* c = std::get_if<ExcitementFunction::ConstantOnInterval>(
                 &f.family())) {
    k.piecewise_constant = true;
    k.breakpoints = {0.0};
    if (c->start > 0.0) k.breakpoints.push_back(c->start);
    k.breakpoints.push_back(c->end);
  } else if (const auto* g =
                 std::get_if<ExcitementFunction::Grid>(&f.family())) {
    k.piecewise_constant = true;
    for (std::size_t m = 0; m <= g->values.size(); ++m) {
      k.breakpoints.push_back(g->step * static_cast<double>(m));
    }
  }
  return k;
}

/// Conditional-intensity model assembled for diagnostics: baseline vector plus
/// a d x d kernel matrix (row-major, entry (i,j) = effect of component-j
/// events on component i). Baselines and kernel values may be negative when
/// they come from a fit; the intensity is clamped at 0 during integration.
class IntensityModel {
 public:
  IntensityModel(Eigen::VectorXd eta, std::vector<PairKernel> kernels)
      : eta_(std::move(eta)), kernels_(std::move(kernels)) {
    const Eigen::Index d = eta_.size();
    require(d >= 1, ErrorCode::invalid_parameter,
            "model needs at least one component");
    require(kernels_.size() == static_cast<std::size_t>(d * d),
            ErrorCode::invalid_parameter,
            "kernel matrix does not match the baseline dimension");
    for (Eigen::Index i = 0; i < d; ++i) {
      require(std::isfinite(eta_(i)), ErrorCode::invalid_parameter,
              "baseline entries must be finite");
    }
    for (const auto& k : kernels_) {
      require(static_cast<bool>(k.value), ErrorCode::invalid_parameter,
              "kernel entries must be evaluable");
      require(std::isfinite(k.support) && k.support >= 0.0,
              ErrorCode::invalid_parameter,
              "kernel supports must be finite and non-negative");
      max_support_ = std::max(max_support_, k.support);
      all_piecewise_constant_ = all_piecewise_constant_ && k.piecewise_constant;
    }
  }

  [[nodiscard]] Eigen::Index dimension() const { return eta_.size(); }
  [[nodiscard]] const Eigen::VectorXd& eta() const { return eta_; }
  [[nodiscard]] const PairKernel& kernel(Eigen::Index i,
                                         Eigen::Index j) const {
    const Eigen::Index d = dimension();
    require(i >= 0 && i < d && j >= 0 && j < d, ErrorCode::invalid_parameter,
            "component index out of range");
    return kernels_[static_cast<std::size_t>(i * d + j)];
  }
  [[nodiscard]] double max_support() const { return max_support_; }
  [[nodiscard]] bool piecewise_constant() const {
    return all_piecewise_constant_;
  }

 private:
  Eigen::VectorXd eta_;
  std::vector<PairKernel> kernels_;
  double max_support_ = 0.0;
  bool all_piecewise_constant_ = true;
};

inline IntensityModel intensity_model(const Eigen::VectorXd& eta,
                                      const HawkesSpec& spec) {
  const Eigen::Index d = spec.dimension();
  require(eta.size() == d, ErrorCode::invalid_parameter,
          "baseline dimension does not match the model");
  std::vector<PairKernel> kernels;
  kernels.reserve(static_cast<std::size_t>(d * d));
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      kernels.push_back(pair_kernel(spec.excitement(i, j)));
    }
  }
  return IntensityModel(eta, std::move(kernels));
}

inline IntensityModel intensity_model(const HawkesSpec& spec) {
  return intensity_model(spec.eta(), spec);
}

inline IntensityModel intensity_model(const Eigen::VectorXd& eta,
                                      const SmoothedExcitement& smoothed) {
  const Eigen::Index d = smoothed.dimension();
  require(eta.size() == d, ErrorCode::invalid_parameter,
          "baseline dimension does not match the smoothed excitement");
  auto shared = std::make_shared<const SmoothedExcitement>(smoothed);
  const auto breaks = shared->breakpoints();
  std::vector<PairKernel> kernels;
  kernels.reserve(static_cast<std::size_t>(d * d));
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      PairKernel k;
      k.value = [shared, i, j](double t) { return shared->value(i, j, t); };
      k.support = shared->support();
      k.piecewise_constant = true;
      k.breakpoints = breaks;
      kernels.push_back(std::move(k));
    }
  }
  return IntensityModel(eta, std::move(kernels));
}

/// Views the raw fitted grid as a step-function kernel: the estimate at lag
/// k*delta holds on ((k-1)*delta, k*delta].
inline IntensityModel intensity_model(const Eigen::VectorXd& eta,
                                      const HawkesFit& fit) {
  const Eigen::Index d = fit.d;
  require(eta.size() == d, ErrorCode::invalid_parameter,
          "baseline dimension does not match the fit");
  require(fit.p >= 1 && fit.delta > 0.0 &&
              static_cast<Eigen::Index>(fit.excitement.size()) == fit.p,
          ErrorCode::invalid_parameter, "fit carries no excitement grid");
  std::vector<double> breaks;
  for (Eigen::Index k = 0; k <= fit.p; ++k) {
    breaks.push_back(fit.delta * static_cast<double>(k));
  }
  std::vector<PairKernel> kernels;
  kernels.reserve(static_cast<std::size_t>(d * d));
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      std::vector<double> values;
      values.reserve(static_cast<std::size_t>(fit.p));
      for (Eigen::Index k = 0; k < fit.p; ++k) {
        values.push_back(fit.excitement[static_cast<std::size_t>(k)](i, j));
      }
      PairKernel k;
      const double delta = fit.delta;
      const auto p = fit.p;
      k.value = [values = std::move(values), delta, p](double t) {
        if (t <= 0.0) return 0.0;
        auto idx = static_cast<Eigen::Index>(std::ceil(t / delta - 1e-12));
        if (idx < 1 || idx > p) return 0.0;
        return values[static_cast<std::size_t>(idx - 1)];
      };
      k.support = fit.delta * static_cast<double>(fit.p);
      k.piecewise_constant = true;
      k.breakpoints = breaks;
      kernels.push_back(std::move(k));
    }
  }
  return IntensityModel(eta, std::move(kernels));
}

inline IntensityModel intensity_model(const HawkesFit& fit) {
  return intensity_model(fit.baseline, fit);
}

namespace detail {

inline constexpr double kQuadratureTolerance = 1e-6;
inline constexpr int kQuadratureMaxDepth = 30;

template <typename F>
double simpson_refine(const F& f, double a, double b, double fa, double fm,
                      double fb, double whole, double tol, int depth) {
  const double m = (a + b) / 2.0;
  const double lm = (a + m) / 2.0;
  const double rm = (m + b) / 2.0;
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double refined = left + right;
  if (depth >= kQuadratureMaxDepth ||
      std::fabs(refined - whole) <= 15.0 * tol) {
    return refined + (refined - whole) / 15.0;
  }
  return simpson_refine(f, a, m, fa, flm, fm, left, tol / 2.0, depth + 1) +
         simpson_refine(f, m, b, fm, frm, fb, right, tol / 2.0, depth + 1);
}

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double tol) {
  if (!(b > a)) return 0.0;
  const double fa = f(a);
  const double fm = f((a + b) / 2.0);
  const double fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_refine(f, a, b, fa, fm, fb, whole, std::max(tol, 1e-12), 0);
}

class ResidualEngine {
 public:
  ResidualEngine(const EventStream& stream, const IntensityModel& model)
      : stream_(stream), model_(model) {
    const Eigen::Index d = model_.dimension();
    seed_lags_.resize(static_cast<std::size_t>(d * d));
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) {
        const auto& kernel = model_.kernel(i, j);
        if (kernel.support <= 0.0) continue;
        auto& lags = seed_lags_[static_cast<std::size_t>(i * d + j)];
        lags = kernel.breakpoints;
        std::sort(lags.begin(), lags.end());
        if (lags.empty() || lags.front() > 0.0) {
          lags.insert(lags.begin(), 0.0);
        }
        if (lags.size() == 1 &&
            std::fabs(kernel.value(kernel.support)) > 1e-9) {
          lags.push_back(kernel.support);
        }
      }
    }
  }

  [[nodiscard]] double clamped_intensity(Eigen::Index i, double t) const {
    double total = model_.eta()(i);
    const Eigen::Index d = model_.dimension();
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto& kernel = model_.kernel(i, j);
      if (kernel.support <= 0.0) continue;
      const auto& ev = stream_.component(static_cast<std::size_t>(j));
      auto lo = std::lower_bound(ev.begin(), ev.end(), t - kernel.support);
      auto hi = std::lower_bound(ev.begin(), ev.end(), t);
      for (auto it = lo; it != hi; ++it) total += kernel.value(t - *it);
    }
    return std::max(0.0, total);
  }

  [[nodiscard]] double integrate(Eigen::Index i, double a, double b) const {
    if (!(b > a)) return 0.0;
    return model_.piecewise_constant() ? integrate_exact(i, a, b)
                                       : integrate_quadrature(i, a, b);
  }

 private:
  /// Times in (a, b) where the summed intensity is non-smooth: each history
  /// event shifted by its kernel's breakpoints (piecewise-constant case) or
  /// by its entry lag and, when the kernel is truncated to a nonzero value,
  /// its support edge.
  [[nodiscard]] std::vector<double> cut_points(Eigen::Index i, double a,
                                               double b) const {
    std::vector<double> cuts = {a, b};
    const Eigen::Index d = model_.dimension();
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto& lags = seed_lags_[static_cast<std::size_t>(i * d + j)];
      if (lags.empty()) continue;
      const double support = model_.kernel(i, j).support;
      const auto& ev = stream_.component(static_cast<std::size_t>(j));
      auto lo = std::lower_bound(ev.begin(), ev.end(), a - support);
      auto hi = std::lower_bound(ev.begin(), ev.end(), b);
      for (auto it = lo; it != hi; ++it) {
        for (double lag : lags) {
          const double t = *it + lag;
          if (t > a && t < b) cuts.push_back(t);
        }
      }
    }
    std::sort(cuts.begin(), cuts.end());
    return cuts;
  }

  [[nodiscard]] double integrate_exact(Eigen::Index i, double a,
                                       double b) const {
    const auto cuts = cut_points(i, a, b);
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double width = cuts[k + 1] - cuts[k];
      if (width <= 0.0) continue;
      total += clamped_intensity(i, (cuts[k] + cuts[k + 1]) / 2.0) * width;
    }
    return total;
  }

  [[nodiscard]] double integrate_quadrature(Eigen::Index i, double a,
                                            double b) const {
    const auto cuts = cut_points(i, a, b);
    const auto f = [this, i](double t) { return clamped_intensity(i, t); };
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double width = cuts[k + 1] - cuts[k];
      if (width <= 0.0) continue;
      total += adaptive_simpson(f, cuts[k], cuts[k + 1],
                                kQuadratureTolerance * width / (b - a));
    }
    return total;
  }

  const EventStream& stream_;
  const IntensityModel& model_;
  std::vector<std::vector<double>> seed_lags_;
};

}  // namespace detail

struct ComponentResiduals {
  std::vector<double> residuals;
  std::size_t events_used = 0;
  std::size_t events_discarded = 0;
};

/// Transforms interarrival times through the fitted (or true) conditional
/// intensity: the residual between consecutive same-component events is the
/// integral of the clamped intensity over that gap, a standard-exponential
/// draw under a correct model. Events inside the first max-support worth of
/// the window only feed the intensity reconstruction and yield no residuals.
inline std::vector<ComponentResiduals> time_change_residuals(
    const EventStream& stream, const IntensityModel& model) {
  require(model.dimension() == static_cast<Eigen::Index>(stream.dimension()),
          ErrorCode::invalid_parameter,
          "model dimension does not match the event stream");
  const double burn = stream.window().t_start + model.max_support();
  const double edge = 1e-12 * std::max(1.0, std::fabs(burn));
  detail::ResidualEngine engine(stream, model);

  std::vector<ComponentResiduals> out(stream.dimension());
  for (std::size_t i = 0; i < stream.dimension(); ++i) {
    const auto& ev = stream.component(i);
    const auto first =
        std::lower_bound(ev.begin(), ev.end(), burn + edge) - ev.begin();
    auto& comp = out[i];
    comp.events_discarded = static_cast<std::size_t>(first);
    comp.events_used = ev.size() - comp.events_discarded;
    require(comp.events_used >= 2, ErrorCode::insufficient_events,
            "component " + std::to_string(i + 1) +
                " has fewer than two events after burn-in");
    comp.residuals.reserve(comp.events_used - 1);
    for (std::size_t k = static_cast<std::size_t>(first) + 1; k < ev.size();
         ++k) {
      comp.residuals.push_back(engine.integrate(static_cast<Eigen::Index>(i),
                                                ev[k - 1], ev[k]));
    }
  }
  return out;
}

inline std::vector<ComponentResiduals> time_change_residuals(
    const EventStream& stream, const HawkesSpec& spec) {
  return time_change_residuals(stream, intensity_model(spec));
}

inline std::vector<ComponentResiduals> time_change_residuals(
    const EventStream& stream, const Eigen::VectorXd& eta,
    const HawkesSpec& spec) {
  return time_change_residuals(stream, intensity_model(eta, spec));
}

inline std::vector<ComponentResiduals> time_change_residuals(
    const EventStream& stream, const Eigen::VectorXd& eta,
    const SmoothedExcitement& smoothed) {
  return time_change_residuals(stream, intensity_model(eta, smoothed));
}

inline std::vector<ComponentResiduals> time_change_residuals(
    const EventStream& stream, const HawkesFit& fit) {
  return time_change_residuals(stream, intensity_model(fit));
}

/// One-sample Kolmogorov-Smirnov test against the standard exponential
/// distribution, with the asymptotic p-value.
inline TestResult ks_exp1(const std::vector<double>& residuals) {
  require(!residuals.empty(), ErrorCode::insufficient_events,
          "need at least one residual");
  std::vector<double> sorted = residuals;
  std::sort(sorted.begin(), sorted.end());
  const auto m = static_cast<double>(sorted.size());
  double d_stat = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const double cdf =
        sorted[k] <= 0.0 ? 0.0 : 1.0 - std::exp(-sorted[k]);
    const double above = static_cast<double>(k + 1) / m - cdf;
    const double below = cdf - static_cast<double>(k) / m;
    d_stat = std::max({d_stat, above, below});
  }
  return {d_stat, kolmogorov_tail(std::sqrt(m) * d_stat)};
}

/// Ljung-Box portmanteau test for serial correlation over the given number of
/// lags, with the chi-square p-value.
inline TestResult serial_independence(const std::vector<double>& residuals,
                                      int lags = 20) {
  require(lags >= 1, ErrorCode::invalid_parameter,
          "need at least one lag to test");
  const auto m = static_cast<std::ptrdiff_t>(residuals.size());
  require(m > lags, ErrorCode::insufficient_events,
          "need more residuals than tested lags");
  double mean = 0.0;
  for (double r : residuals) mean += r;
  mean /= static_cast<double>(m);
  double denom = 0.0;
  for (double r : residuals) denom += (r - mean) * (r - mean);
  require(denom > 0.0, ErrorCode::insufficient_events,
          "residuals have zero variance");
  double statistic = 0.0;
  for (int lag = 1; lag <= lags; ++lag) {
    double num = 0.0;
    for (std::ptrdiff_t k = 0; k + lag < m; ++k) {
      num += (residuals[static_cast<std::size_t>(k)] - mean) *
             (residuals[static_cast<std::size_t>(k + lag)] - mean);
    }
    const double rho = num / denom;
    statistic += rho * rho / static_cast<double>(m - lag);
  }
  statistic *= static_cast<double>(m) * (static_cast<double>(m) + 2.0);
  return {statistic, chi_square_sf(statistic, lags)};
}

/// Splits the residual sequence into consecutive full chunks and tests each
/// against Exp(1), the window-subdivision recipe for long streams. Partial
/// tail chunks are dropped.
inline std::vector<TestResult> chunked_ks(const std::vector<double>& residuals,
                                          std::size_t chunk) {
  require(chunk >= 2, ErrorCode::invalid_parameter,
          "chunk size must be at least two");
  require(residuals.size() >= chunk, ErrorCode::insufficient_events,
          "need at least one full chunk of residuals");
  std::vector<TestResult> out;
  for (std::size_t start = 0; start + chunk <= residuals.size();
       start += chunk) {
    std::vector<double> piece(residuals.begin() + static_cast<std::ptrdiff_t>(start),
                              residuals.begin() +
                                  static_cast<std::ptrdiff_t>(start + chunk));
    out.push_back(ks_exp1(piece));
  }
  return out;
}

struct QqPoint {
  double theoretical = 0.0;
  double empirical = 0.0;
};

/// Sorted empirical residual quantiles paired with the Exp(1) quantiles at
/// the midpoint plotting positions (k - 0.5)/m.
inline std::vector<QqPoint> qq_exp1(const std::vector<double>& residuals) {
  require(!residuals.empty(), ErrorCode::insufficient_events,
          "need at least one residual");
  std::vector<double> sorted = residuals;
  std::sort(sorted.begin(), sorted.end());
  const auto m = static_cast<double>(sorted.size());
  std::vector<QqPoint> out;
  out.reserve(sorted.size());
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const double prob = (static_cast<double>(k) + 0.5) / m;
    out.push_back({-std::log(1.0 - prob), sorted[k]});
  }
  return out;
}

struct ComponentDiagnostics {
  std::vector<double> residuals;
  std::size_t events_used = 0;
  std::size_t events_discarded = 0;
  TestResult ks;
  TestResult serial;
  std::vector<QqPoint> qq;
};

struct DiagnosticsReport {
  double burn_in_time = 0.0;
  int lags = 0;
  std::vector<ComponentDiagnostics> components;
};

inline DiagnosticsReport diagnose(const EventStream& stream,
                                  const IntensityModel& model, int lags = 20) {
  DiagnosticsReport report;
  report.burn_in_time = stream.window().t_start + model.max_support();
  report.lags = lags;
  auto residuals = time_change_residuals(stream, model);
  report.components.reserve(residuals.size());
  for (auto& comp : residuals) {
    ComponentDiagnostics entry;
    entry.events_used = comp.events_used;
    entry.events_discarded = comp.events_discarded;
    entry.ks = ks_exp1(comp.residuals);
    entry.serial = serial_independence(comp.residuals, lags);
    entry.qq = qq_exp1(comp.residuals);
    entry.residuals = std::move(comp.residuals);
    report.components.push_back(std::move(entry));
  }
  return report;
}

}  // namespace hawkesbin

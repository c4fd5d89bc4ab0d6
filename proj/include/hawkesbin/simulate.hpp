#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "hawkesbin/errors.hpp"
#include "hawkesbin/events.hpp"
#include "hawkesbin/model.hpp"
#include "hawkesbin/rng.hpp"

namespace hawkesbin {

/// Integer-autoregression model: X_n = sum_k A_k thinned against X_{n-k}
/// plus an innovation with mean a0, all thinnings Poisson.
class InarSpec {
 public:
  InarSpec(Eigen::VectorXd a0, std::vector<Eigen::MatrixXd> coefficients)
      : a0_(std::move(a0)), coefficients_(std::move(coefficients)) {
    require(a0_.size() >= 1, ErrorCode::invalid_parameter,
            "model needs at least one component");
    require((a0_.array() >= 0.0).all(), ErrorCode::invalid_parameter,
            "innovation means must be non-negative");
    require(!coefficients_.empty(), ErrorCode::invalid_parameter,
            "model needs at least one lag matrix");
    for (const auto& a : coefficients_) {
      require(a.rows() == a0_.size() && a.cols() == a0_.size(),
              ErrorCode::invalid_parameter, "lag matrices must be d x d");
      require((a.array() >= 0.0).all(), ErrorCode::invalid_parameter,
              "thinning coefficients must be non-negative");
    }
  }

  [[nodiscard]] Eigen::Index dimension() const { return a0_.size(); }
  [[nodiscard]] Eigen::Index order() const {
    return static_cast<Eigen::Index>(coefficients_.size());
  }
  [[nodiscard]] const Eigen::VectorXd& a0() const { return a0_; }
  [[nodiscard]] const Eigen::MatrixXd& coefficient(Eigen::Index k) const {
    return coefficients_[static_cast<std::size_t>(k)];
  }

  [[nodiscard]] Eigen::MatrixXd coefficient_sum() const {
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(dimension(), dimension());
    for (const auto& a : coefficients_) sum += a;
    return sum;
  }

 private:
  Eigen::VectorXd a0_;
  std::vector<Eigen::MatrixXd> coefficients_;
};

/// Poisson thinning: the count of survivors when y items are each replaced by
/// an independent Poisson(alpha) number of copies, i.e. a Poisson(alpha*y)
/// draw.
inline std::int64_t thin(double alpha, std::int64_t y, RngStream& rng) {
  require(alpha >= 0.0, ErrorCode::invalid_parameter,
          "thinning coefficient must be non-negative");
  require(y >= 0, ErrorCode::invalid_parameter,
          "thinned count must be non-negative");
  return rng.poisson(alpha * static_cast<double>(y));
}

/// Simulates n steps of the integer autoregression after a warm-up from the
/// all-zero presample. `burn_in` < 0 picks the default of 10 times the order.
/// Returns the d x n count matrix, one column per step.
inline Eigen::MatrixXi simulate_inar(const InarSpec& spec, Eigen::Index n,
                                     RngStream& rng,
                                     Eigen::Index burn_in = -1) {
  require(n >= 1, ErrorCode::invalid_parameter,
          "need at least one step to simulate");
  require(spectral_radius(spec.coefficient_sum()) < 1.0 - kStabilityTolerance,
          ErrorCode::rejected_spec,
          "lag matrices sum to an unstable mean recursion");
  const Eigen::Index d = spec.dimension();
  const Eigen::Index p = spec.order();
  if (burn_in < 0) burn_in = 10 * p;

  Eigen::MatrixXi out(d, n);
  std::vector<Eigen::VectorXd> history(
      static_cast<std::size_t>(p), Eigen::VectorXd::Zero(d));  // newest first
  for (Eigen::Index step = 0; step < burn_in + n; ++step) {
    Eigen::VectorXd mean = spec.a0();
    for (Eigen::Index k = 0; k < p; ++k) {
      mean += spec.coefficient(k) * history[static_cast<std::size_t>(k)];
    }
    Eigen::VectorXd draw(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      draw(i) = static_cast<double>(rng.poisson(mean(i)));
    }
    for (Eigen::Index k = p - 1; k > 0; --k) {
      history[static_cast<std::size_t>(k)] =
          history[static_cast<std::size_t>(k - 1)];
    }
    if (p > 0) history[0] = draw;
    if (step >= burn_in) {
      out.col(step - burn_in) = draw.cast<int>();
    }
  }
  return out;
}

/// Genealogy tallies from one cluster simulation. `offspring(i,j)` counts all
/// direct children in component i of parents in component j, including
/// children past the window end (they are generated, tallied, then dropped),
/// so offspring per parent stays an unbiased Poisson(K(i,j)) sample.
struct SimulationStats {
  Eigen::MatrixXd offspring;
  Eigen::VectorXd parents;
};

/// Simulates the self-exciting process on (0, T] by its cluster
/// representation: immigrants arrive as homogeneous Poisson streams with the
/// baseline rates, and every event spawns children from each kernel by
/// thinning uniform candidates against the kernel's envelope. The stream
/// starts with empty history at time 0; wrap with simulate_hawkes_burned for
/// an approximately stationary sample.
inline EventStream simulate_hawkes(const HawkesSpec& spec, double t_end,
                                   const RngStream& root,
                                   SimulationStats* stats = nullptr) {
  require(std::isfinite(t_end) && t_end > 0.0, ErrorCode::invalid_parameter,
          "window end must be positive and finite");
  const auto stability = stability_check(spec);
  require(stability.stable, ErrorCode::rejected_spec,
          "excitement spectral radius must stay below 1");

  const Eigen::Index d = spec.dimension();
  if (stats != nullptr) {
    stats->offspring = Eigen::MatrixXd::Zero(d, d);
    stats->parents = Eigen::VectorXd::Zero(d);
  }

  struct PendingEvent {
    double t;
    Eigen::Index component;
  };

  std::vector<std::vector<double>> times(static_cast<std::size_t>(d));
  std::vector<std::vector<double>> immigrants(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    RngStream stream = root.split(static_cast<std::uint64_t>(i));
    const std::int64_t count = stream.poisson(spec.eta()(i) * t_end);
    auto& arrivals = immigrants[static_cast<std::size_t>(i)];
    arrivals.resize(static_cast<std::size_t>(count));
    for (auto& t : arrivals) t = stream.uniform_positive() * t_end;
    std::sort(arrivals.begin(), arrivals.end());
  }

  const RngStream clusters_root = root.split(static_cast<std::uint64_t>(d));
  std::uint64_t cluster_id = 0;
  std::vector<PendingEvent> queue;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (double t0 : immigrants[static_cast<std::size_t>(i)]) {
      RngStream cluster = clusters_root.split(cluster_id++);
      queue.clear();
      queue.push_back({t0, i});
      for (std::size_t head = 0; head < queue.size(); ++head) {
        const PendingEvent parent = queue[head];
        times[static_cast<std::size_t>(parent.component)].push_back(parent.t);
        if (stats != nullptr) stats->parents(parent.component) += 1.0;
        for (Eigen::Index child_comp = 0; child_comp < d; ++child_comp) {
          const auto& kernel = spec.excitement(child_comp, parent.component);
          const double envelope = kernel.max_value();
          const double span = kernel.support();
          if (envelope <= 0.0 || span <= 0.0) continue;
          const std::int64_t candidates = cluster.poisson(envelope * span);
          for (std::int64_t c = 0; c < candidates; ++c) {
            const double lag = cluster.uniform_positive() * span;
            if (cluster.uniform() * envelope >= kernel.value(lag)) continue;
            if (stats != nullptr) {
              stats->offspring(child_comp, parent.component) += 1.0;
            }
            const double t_child = parent.t + lag;
            if (t_child <= t_end) queue.push_back({t_child, child_comp});
          }
        }
      }
    }
  }

  for (auto& comp : times) std::sort(comp.begin(), comp.end());
  return EventStream(Window{0.0, t_end}, std::move(times));
}

/// Simulates on (0, T + burn_in], discards the warm-up prefix and shifts the
/// remainder back to (0, T]. `burn_in` < 0 picks the default of 10 times the
/// largest kernel support.
inline EventStream simulate_hawkes_burned(const HawkesSpec& spec, double t_end,
                                          const RngStream& root,
                                          double burn_in = -1.0) {
  if (burn_in < 0.0) burn_in = 10.0 * spec.max_support();
  if (burn_in == 0.0) return simulate_hawkes(spec, t_end, root);
  EventStream full = simulate_hawkes(spec, t_end + burn_in, root);
  std::vector<std::vector<double>> times(full.dimension());
  for (std::size_t i = 0; i < full.dimension(); ++i) {
    for (double t : full.component(i)) {
      if (t > burn_in) times[i].push_back(t - burn_in);
    }
  }
  return EventStream(Window{0.0, t_end}, std::move(times));
}

}  // namespace hawkesbin

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hawkesbin/cls.hpp"
#include "hawkesbin/errors.hpp"
#include "hawkesbin/model.hpp"
#include "hawkesbin/parallel.hpp"
#include "hawkesbin/rng.hpp"
#include "hawkesbin/simulate.hpp"
#include "hawkesbin/stats.hpp"

namespace hawkesbin {

/// One coefficient tracked across Monte-Carlo replications, addressed in the
/// published 1-based convention (lag index k, target component i, source
/// component j for excitement entries).
struct ReplicationTarget {
  enum class Kind { excitement, baseline };
  Kind kind = Kind::baseline;
  Eigen::Index k = 1;
  Eigen::Index i = 1;
  Eigen::Index j = 1;

  [[nodiscard]] std::string label() const {
    if (kind == Kind::baseline) return "eta" + std::to_string(i);
    return "h" + std::to_string(k) + "_" + std::to_string(i) + "_" +
           std::to_string(j);
  }
};

/// Parses "eta:i" or "h:k,i,j".
inline ReplicationTarget parse_replication_target(std::string_view text) {
  const auto colon = text.find(':');
  require(colon != std::string_view::npos, ErrorCode::invalid_parameter,
          "target must look like 'eta:i' or 'h:k,i,j'");
  const auto head = text.substr(0, colon);
  const auto rest = text.substr(colon + 1);
  auto parse_index = [](std::string_view piece) {
    Eigen::Index value = 0;
    bool any = false;
    for (char c : piece) {
      require(c >= '0' && c <= '9', ErrorCode::invalid_parameter,
              "target indices must be positive integers");
      value = value * 10 + (c - '0');
      any = true;
    }
    require(any && value >= 1, ErrorCode::invalid_parameter,
            "target indices must be positive integers");
    return value;
  };
  ReplicationTarget target;
  if (head == "eta") {
    target.kind = ReplicationTarget::Kind::baseline;
    target.i = parse_index(rest);
    return target;
  }
  require(head == "h", ErrorCode::invalid_parameter,
          "target must start with 'eta' or 'h'");
  target.kind = ReplicationTarget::Kind::excitement;
  const auto first = rest.find(',');
  const auto second = first == std::string_view::npos
                          ? std::string_view::npos
                          : rest.find(',', first + 1);
  require(second != std::string_view::npos, ErrorCode::invalid_parameter,
          "excitement target must look like 'h:k,i,j'");
  target.k = parse_index(rest.substr(0, first));
  target.i = parse_index(rest.substr(first + 1, second - first - 1));
  target.j = parse_index(rest.substr(second + 1));
  return target;
}

struct TargetSummary {
  ReplicationTarget target;
  double truth = 0.0;
  double mean_estimate = 0.0;
  double empirical_variance = 0.0;
  double mean_estimated_variance = 0.0;
  double coverage = 0.0;
  int covered = 0;
};

struct ReplicationResult {
  /// per_rep[r] holds one interval per target; empty when replication r's
  /// fit failed.
  std::vector<std::vector<ConfidenceInterval>> per_rep;
  std::vector<TargetSummary> summaries;
  int replications = 0;
  int failures = 0;
};

/// Simulate-then-fit Monte Carlo: each replication draws its stream from an
/// independently keyed generator, so results are identical for a given seed
/// regardless of thread count. Replications whose fit fails (for example a
/// singular design on an unlucky draw) are counted and excluded from the
/// summaries.
inline ReplicationResult replicate(const HawkesSpec& spec, double t_end,
                                   double burn_in, double delta,
                                   double support,
                                   const std::vector<ReplicationTarget>& targets,
                                   int replications, RandomSource source,
                                   double level = 0.95, unsigned threads = 0) {
  require(replications >= 1, ErrorCode::invalid_parameter,
          "need at least one replication");
  require(!targets.empty(), ErrorCode::invalid_parameter,
          "need at least one target to track");
  require(std::isfinite(delta) && delta > 0.0 && support > delta,
          ErrorCode::invalid_parameter,
          "need a positive bin width below the support");
  const Eigen::Index d = spec.dimension();
  const auto p = static_cast<Eigen::Index>(std::ceil(support / delta - 1e-9));
  for (const auto& target : targets) {
    require(target.i >= 1 && target.i <= d, ErrorCode::invalid_parameter,
            "target component out of range");
    if (target.kind == ReplicationTarget::Kind::excitement) {
      require(target.j >= 1 && target.j <= d && target.k >= 1 && target.k <= p,
              ErrorCode::invalid_parameter,
              "target lag or source component out of range");
    }
  }

  ReplicationResult result;
  result.replications = replications;
  result.per_rep.resize(static_cast<std::size_t>(replications));

  auto root = source.root();
  parallel_for(
      static_cast<std::size_t>(replications),
      [&](std::size_t rep) {
        auto rng = root.split(static_cast<std::uint64_t>(rep));
        auto stream = simulate_hawkes_burned(spec, t_end, rng, burn_in);
        HawkesFit fit;
        try {
          fit = hawkes_estimator(stream, delta, support);
        } catch (const Error&) {
          return;
        }
        auto& slot = result.per_rep[rep];
        slot.reserve(targets.size());
        for (const auto& target : targets) {
          if (target.kind == ReplicationTarget::Kind::baseline) {
            slot.push_back(
                confidence_interval(fit, BaselineEntry{target.i}, level));
          } else {
            slot.push_back(confidence_interval(
                fit, ExcitementEntry{target.k, target.i, target.j}, level));
          }
        }
      },
      threads);

  const double z = normal_inverse_cdf(0.5 + level / 2.0);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    TargetSummary summary;
    summary.target = targets[t];
    if (targets[t].kind == ReplicationTarget::Kind::baseline) {
      summary.truth = spec.eta()(targets[t].i - 1);
    } else {
      summary.truth = spec.excitement(targets[t].i - 1, targets[t].j - 1)
                          .value(delta * static_cast<double>(targets[t].k));
    }
    std::vector<double> estimates;
    double variance_sum = 0.0;
    int covered = 0;
    for (const auto& slot : result.per_rep) {
      if (slot.empty()) continue;
      const auto& ci = slot[t];
      estimates.push_back(ci.estimate);
      const double sd = ci.half_width / z;
      variance_sum += sd * sd;
      if (ci.lower <= summary.truth && summary.truth <= ci.upper) ++covered;
    }
    const auto used = static_cast<double>(estimates.size());
    require(!estimates.empty(), ErrorCode::insufficient_events,
            "every replication failed to fit");
    double mean = 0.0;
    for (double e : estimates) mean += e;
    mean /= used;
    double ssq = 0.0;
    for (double e : estimates) ssq += (e - mean) * (e - mean);
    summary.mean_estimate = mean;
    summary.empirical_variance = used > 1.0 ? ssq / (used - 1.0) : 0.0;
    summary.mean_estimated_variance = variance_sum / used;
    summary.covered = covered;
    summary.coverage = static_cast<double>(covered) / used;
    result.summaries.push_back(summary);
  }
  result.failures = static_cast<int>(std::count_if(
      result.per_rep.begin(), result.per_rep.end(),
      [](const auto& slot) { return slot.empty(); }));
  return result;
}

}  // namespace hawkesbin

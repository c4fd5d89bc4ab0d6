#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "hawkesbin/errors.hpp"

namespace hawkesbin {

/// Half-open-on-the-left observation window (t_start, t_end].
struct Window {
  double t_start = 0.0;
  double t_end = 0.0;

  [[nodiscard]] double length() const { return t_end - t_start; }
};

/// Immutable multivariate point-process sample: per-component ascending event
/// times inside a common observation window. Times may repeat within a
/// component (ties are collapsed by dedupe, not rejected here).
class EventStream {
 public:
  EventStream(Window window, std::vector<std::vector<double>> times)
      : window_(window), times_(std::move(times)) {
    require(!times_.empty(), ErrorCode::invalid_parameter,
            "event stream needs at least one component");
    require(window_.t_start < window_.t_end, ErrorCode::invalid_parameter,
            "observation window must have positive length");
    for (const auto& comp : times_) {
      for (std::size_t k = 0; k < comp.size(); ++k) {
        require(std::isfinite(comp[k]), ErrorCode::invalid_parameter,
                "event times must be finite");
        require(comp[k] > window_.t_start && comp[k] <= window_.t_end,
                ErrorCode::invalid_parameter,
                "event time outside the observation window");
        require(k == 0 || comp[k - 1] <= comp[k], ErrorCode::invalid_parameter,
                "event times must be ascending within a component");
      }
    }
  }

  [[nodiscard]] std::size_t dimension() const { return times_.size(); }
  [[nodiscard]] const Window& window() const { return window_; }

  /// Event times of component `i` (0-based), ascending.
  [[nodiscard]] const std::vector<double>& component(std::size_t i) const {
    require(i < times_.size(), ErrorCode::invalid_parameter,
            "component index out of range");
    return times_[i];
  }

  [[nodiscard]] std::size_t total_events() const {
    std::size_t total = 0;
    for (const auto& comp : times_) total += comp.size();
    return total;
  }

 private:
  Window window_;
  std::vector<std::vector<double>> times_;
};

struct DedupeResult {
  EventStream stream;
  /// Number of events removed per component.
  std::vector<std::size_t> removed;
};

/// Collapses runs of exactly equal consecutive timestamps within each
/// component to a single event. Afterwards every component is strictly
/// increasing.
inline DedupeResult dedupe(const EventStream& stream) {
  std::vector<std::vector<double>> times(stream.dimension());
  std::vector<std::size_t> removed(stream.dimension(), 0);
  for (std::size_t i = 0; i < stream.dimension(); ++i) {
    const auto& comp = stream.component(i);
    times[i].reserve(comp.size());
    for (double t : comp) {
      if (!times[i].empty() && times[i].back() == t) {
        ++removed[i];
      } else {
        times[i].push_back(t);
      }
    }
  }
  return DedupeResult{EventStream(stream.window(), std::move(times)),
                      std::move(removed)};
}

/// Per-bin event counts of a stream on a regular grid: bin k (1-based) covers
/// (t_start + (k-1)*delta, t_start + k*delta]. Counts are stored as the d x n
/// matrix `counts` with one column per bin. Events beyond the last full bin
/// are not counted; their number is surfaced as `dropped_tail`.
struct BinCountSequence {
  double delta = 0.0;
  Eigen::MatrixXi counts;  // d rows, n columns
  std::size_t dropped_tail = 0;

  [[nodiscard]] Eigen::Index dimension() const { return counts.rows(); }
  [[nodiscard]] Eigen::Index bins() const { return counts.cols(); }
};

/// Bins `stream` at width `delta`, anchored at the window start. The number
/// of bins is floor(window length / delta); a ratio within one part in 1e9 of
/// the next integer is treated as exact so that commensurate windows do not
/// lose their last bin to rounding.
inline BinCountSequence bin_counts(const EventStream& stream, double delta) {
  require(std::isfinite(delta) && delta > 0.0, ErrorCode::invalid_parameter,
          "bin width must be positive");
  const double length = stream.window().length();
  const auto n = static_cast<std::int64_t>(std::floor(length / delta + 1e-9));
  require(n >= 1, ErrorCode::window_too_short,
          "observation window shorter than one bin");

  BinCountSequence bc;
  bc.delta = delta;
  bc.counts = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(stream.dimension()), n);
  for (std::size_t i = 0; i < stream.dimension(); ++i) {
    for (double t : stream.component(i)) {
      auto k = static_cast<std::int64_t>(std::ceil((t - stream.window().t_start) / delta));
      if (k < 1) k = 1;
      if (k > n) {
        // Keep boundary events that land just past the last bin edge through
        // last-bit rounding; everything genuinely past n*delta is tail.
        const double edge = static_cast<double>(n) * delta;
        if (t - stream.window().t_start <= edge * (1.0 + 1e-12)) {
          k = n;
        } else {
          ++bc.dropped_tail;
          continue;
        }
      }
      bc.counts(static_cast<Eigen::Index>(i), k - 1) += 1;
    }
  }
  return bc;
}

}  // namespace hawkesbin

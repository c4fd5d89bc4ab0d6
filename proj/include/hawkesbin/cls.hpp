#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "hawkesbin/errors.hpp"
#include "hawkesbin/events.hpp"
#include "hawkesbin/fit.hpp"
#include "hawkesbin/stats.hpp"

namespace hawkesbin {

/// Lagged regression layout for bin counts x_1..x_n at order p. Column t of
/// Z stacks the p preceding count vectors of target bin p+1+t (newest lag
/// first) with a trailing constant row of ones; column t of Y is the target
/// bin itself.
struct DesignMatrices {
  Eigen::MatrixXd Z;  // (d*p + 1) x (n - p)
  Eigen::MatrixXd Y;  // d x (n - p)
  Eigen::Index d = 0;
  Eigen::Index p = 0;
  Eigen::Index n = 0;
};

namespace detail {

inline void validate_design_shape(Eigen::Index d, Eigen::Index n,
                                  Eigen::Index p) {
  require(p >= 1 && p < n, ErrorCode::invalid_order,
          "lag order must satisfy 1 <= p < n");
  require(n - p >= d * p + 1 + 5, ErrorCode::underdetermined,
          "not enough bins for this order: need n - p >= d*p + 6");
}

/// Nonzero rows of one design column; the constant row is always present.
struct SparseColumn {
  std::vector<std::pair<Eigen::Index, double>> entries;
};

/// Visits design columns without materializing Z. `f` receives the column
/// index t (0-based) and the 0-based target bin k = p + t alongside the
/// column's nonzero entries.
template <class F>
void for_each_design_column(const BinCountSequence& bc, Eigen::Index p, F&& f) {
  const Eigen::Index d = bc.dimension();
  const Eigen::Index n = bc.bins();
  SparseColumn column;
  for (Eigen::Index t = 0; t + p < n; ++t) {
    const Eigen::Index k = p + t;
    column.entries.clear();
    for (Eigen::Index lag = 1; lag <= p; ++lag) {
      for (Eigen::Index j = 0; j < d; ++j) {
        const double value = bc.counts(j, k - lag);
        if (value != 0.0) {
          column.entries.emplace_back((lag - 1) * d + j, value);
        }
      }
    }
    column.entries.emplace_back(d * p, 1.0);
    f(t, k, column);
  }
}

struct Gram {
  Eigen::MatrixXd ZZt;  // (d*p + 1) square
  Eigen::MatrixXd YZt;  // d x (d*p + 1)
  Eigen::Index d = 0;
  Eigen::Index p = 0;
  Eigen::Index m = 0;  // number of design columns
};

inline Gram gram_from_design(const DesignMatrices& design) {
  Gram g;
  g.d = design.d;
  g.p = design.p;
  g.m = design.Z.cols();
  g.ZZt = design.Z * design.Z.transpose();
  g.YZt = design.Y * design.Z.transpose();
  return g;
}

inline Gram gram_sparse(const BinCountSequence& bc, Eigen::Index p) {
  const Eigen::Index d = bc.dimension();
  const Eigen::Index rows = d * p + 1;
  Gram g;
  g.d = d;
  g.p = p;
  g.m = bc.bins() - p;
  g.ZZt = Eigen::MatrixXd::Zero(rows, rows);
  g.YZt = Eigen::MatrixXd::Zero(d, rows);
  for_each_design_column(bc, p, [&](Eigen::Index, Eigen::Index k,
                                    const SparseColumn& column) {
    for (const auto& [r1, v1] : column.entries) {
      for (const auto& [r2, v2] : column.entries) {
        g.ZZt(r1, r2) += v1 * v2;
      }
      for (Eigen::Index i = 0; i < d; ++i) {
        g.YZt(i, r1) += static_cast<double>(bc.counts(i, k)) * v1;
      }
    }
  });
  return g;
}

struct NormalEquationSolution {
  Eigen::MatrixXd coefficients;  // d x (d*p + 1)
  Eigen::MatrixXd gram_inverse;  // (d*p + 1) square
  double condition = 0.0;
};

inline NormalEquationSolution solve_normal_equations(const Gram& gram) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram.ZZt,
                                                     Eigen::EigenvaluesOnly);
  require(eig.info() == Eigen::Success, ErrorCode::singular_design,
          "design Gram eigendecomposition failed");
  const double ev_min = eig.eigenvalues().minCoeff();
  const double ev_max = eig.eigenvalues().maxCoeff();
  const double condition =
      ev_min > 0.0 ? ev_max / ev_min : std::numeric_limits<double>::infinity();
  require(ev_min > 0.0 && condition <= 1e12, ErrorCode::singular_design,
          "design Gram is numerically singular; widen the bins or lower the "
          "order");

  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram.ZZt);
  require(ldlt.info() == Eigen::Success, ErrorCode::singular_design,
          "design Gram factorization failed");
  NormalEquationSolution out;
  out.coefficients = ldlt.solve(gram.YZt.transpose()).transpose();
  out.gram_inverse = ldlt.solve(
      Eigen::MatrixXd::Identity(gram.ZZt.rows(), gram.ZZt.cols()));
  out.condition = condition;
  return out;
}

/// Robust covariance of the stacked coefficient vector (column-major over the
/// d x (d*p+1) coefficient matrix): with G the Gram inverse and u_t the
/// count-scale residual of column t, the (i,j) component block is
/// G (sum_t u_ti u_tj Z_t Z_t') G.
inline Eigen::MatrixXd assemble_sandwich(
    const std::vector<Eigen::MatrixXd>& blocks, Eigen::Index d,
    Eigen::Index rows) {
  const Eigen::Index dim = d * rows;
  Eigen::MatrixXd s2(dim, dim);
  auto block_at = [&](Eigen::Index i, Eigen::Index j) -> const Eigen::MatrixXd& {
    if (i > j) std::swap(i, j);
    return blocks[static_cast<std::size_t>(i * d + j)];
  };
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const Eigen::MatrixXd& c = block_at(i, j);
      for (Eigen::Index a = 0; a < rows; ++a) {
        for (Eigen::Index b = 0; b < rows; ++b) {
          s2(a * d + i, b * d + j) = c(a, b);
        }
      }
    }
  }
  return ((s2 + s2.transpose()) / 2.0).eval();
}

inline Eigen::MatrixXd sandwich_dense(const DesignMatrices& design,
                                      const Eigen::MatrixXd& residuals,
                                      const Eigen::MatrixXd& gram_inverse) {
  const Eigen::Index d = design.d;
  const Eigen::Index rows = design.Z.rows();
  std::vector<Eigen::MatrixXd> blocks(static_cast<std::size_t>(d * d));
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) {
      const Eigen::Array<double, 1, Eigen::Dynamic> weights =
          residuals.row(i).array() * residuals.row(j).array();
      const Eigen::MatrixXd weighted =
          (design.Z.array().rowwise() * weights).matrix();
      const Eigen::MatrixXd w = weighted * design.Z.transpose();
      blocks[static_cast<std::size_t>(i * d + j)] =
          gram_inverse * w * gram_inverse;
    }
  }
  return assemble_sandwich(blocks, d, rows);
}

inline Eigen::MatrixXd sandwich_sparse(const BinCountSequence& bc,
                                       Eigen::Index p,
                                       const Eigen::MatrixXd& coefficients,
                                       const Eigen::MatrixXd& gram_inverse) {
  const Eigen::Index d = bc.dimension();
  const Eigen::Index rows = d * p + 1;
  std::vector<Eigen::MatrixXd> weighted(
      static_cast<std::size_t>(d * d), Eigen::MatrixXd::Zero(rows, rows));
  Eigen::VectorXd u(d);
  for_each_design_column(bc, p, [&](Eigen::Index, Eigen::Index k,
                                    const SparseColumn& column) {
    for (Eigen::Index i = 0; i < d; ++i) {
      u(i) = static_cast<double>(bc.counts(i, k));
    }
    for (const auto& [r, v] : column.entries) {
      u -= coefficients.col(r) * v;
    }
    for (const auto& [r1, v1] : column.entries) {
      for (const auto& [r2, v2] : column.entries) {
        const double zz = v1 * v2;
        for (Eigen::Index i = 0; i < d; ++i) {
          for (Eigen::Index j = i; j < d; ++j) {
            weighted[static_cast<std::size_t>(i * d + j)](r1, r2) +=
                u(i) * u(j) * zz;
          }
        }
      }
    }
  });
  std::vector<Eigen::MatrixXd> blocks(static_cast<std::size_t>(d * d));
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) {
      blocks[static_cast<std::size_t>(i * d + j)] =
          gram_inverse * weighted[static_cast<std::size_t>(i * d + j)] *
          gram_inverse;
    }
  }
  return assemble_sandwich(blocks, d, rows);
}

}  // namespace detail

inline DesignMatrices build_design(const BinCountSequence& bc,
                                   Eigen::Index p) {
  const Eigen::Index d = bc.dimension();
  const Eigen::Index n = bc.bins();
  detail::validate_design_shape(d, n, p);
  DesignMatrices design;
  design.d = d;
  design.p = p;
  design.n = n;
  design.Z = Eigen::MatrixXd::Zero(d * p + 1, n - p);
  design.Y = Eigen::MatrixXd::Zero(d, n - p);
  for (Eigen::Index t = 0; t + p < n; ++t) {
    const Eigen::Index k = p + t;
    for (Eigen::Index lag = 1; lag <= p; ++lag) {
      design.Z.block((lag - 1) * d, t, d, 1) =
          bc.counts.col(k - lag).cast<double>();
    }
    design.Z(d * p, t) = 1.0;
    design.Y.col(t) = bc.counts.col(k).cast<double>();
  }
  return design;
}

struct ClsFitResult {
  Eigen::MatrixXd coefficients;  // d x (d*p + 1): lag blocks then intercept
  double condition = 0.0;
};

/// Least-squares coefficients B = Y Z' (Z Z')^{-1}, solved through a
/// factorization of the Gram matrix rather than an explicit inverse.
inline ClsFitResult cls_fit(const DesignMatrices& design) {
  auto solved = detail::solve_normal_equations(detail::gram_from_design(design));
  return ClsFitResult{std::move(solved.coefficients), solved.condition};
}

inline Eigen::MatrixXd cls_residuals(const DesignMatrices& design,
                                     const Eigen::MatrixXd& coefficients) {
  return design.Y - coefficients * design.Z;
}

struct EstimatorOptions {
  bool compute_covariance = true;
  enum class Storage { automatic, dense, sparse };
  Storage storage = Storage::automatic;
};

namespace detail {

inline bool use_dense(const BinCountSequence& bc, Eigen::Index p,
                      EstimatorOptions::Storage storage) {
  switch (storage) {
    case EstimatorOptions::Storage::dense: return true;
    case EstimatorOptions::Storage::sparse: return false;
    case EstimatorOptions::Storage::automatic: break;
  }
  const auto entries = static_cast<std::int64_t>(bc.dimension() * p + 1) *
                       static_cast<std::int64_t>(bc.bins() - p);
  return entries <= 8'000'000;
}

}  // namespace detail

/// Binned nonparametric estimator: fits the order-p count regression with
/// p = ceil(support / delta) and rescales by 1/delta, so excitement values
/// are per unit time. The covariance follows the heteroskedasticity-robust
/// sandwich form with per-bin residual weights.
inline HawkesFit hawkes_estimator(const BinCountSequence& bc, double support,
                                  const EstimatorOptions& options = {}) {
  const double delta = bc.delta;
  require(std::isfinite(support) && support > delta,
          ErrorCode::invalid_parameter,
          "the excitement support must exceed the bin width");
  const auto p = static_cast<Eigen::Index>(std::ceil(support / delta - 1e-9));
  const Eigen::Index d = bc.dimension();
  const Eigen::Index n = bc.bins();
  detail::validate_design_shape(d, n, p);

  HawkesFit fit;
  fit.delta = delta;
  fit.support = support;
  fit.p = p;
  fit.n = n;
  fit.d = d;
  fit.dropped_tail = bc.dropped_tail;

  const bool dense = detail::use_dense(bc, p, options.storage);
  if (dense) {
    DesignMatrices design = build_design(bc, p);
    auto solved =
        detail::solve_normal_equations(detail::gram_from_design(design));
    fit.condition = solved.condition;
    fit.baseline = solved.coefficients.col(d * p) / delta;
    fit.excitement.reserve(static_cast<std::size_t>(p));
    for (Eigen::Index k = 0; k < p; ++k) {
      fit.excitement.push_back(solved.coefficients.middleCols(k * d, d) / delta);
    }
    if (options.compute_covariance) {
      const Eigen::MatrixXd residuals =
          design.Y - solved.coefficients * design.Z;
      fit.covariance =
          detail::sandwich_dense(design, residuals, solved.gram_inverse) /
          (delta * delta);
    }
  } else {
    auto solved = detail::solve_normal_equations(detail::gram_sparse(bc, p));
    fit.condition = solved.condition;
    fit.baseline = solved.coefficients.col(d * p) / delta;
    fit.excitement.reserve(static_cast<std::size_t>(p));
    for (Eigen::Index k = 0; k < p; ++k) {
      fit.excitement.push_back(solved.coefficients.middleCols(k * d, d) / delta);
    }
    if (options.compute_covariance) {
      fit.covariance = detail::sandwich_sparse(bc, p, solved.coefficients,
                                               solved.gram_inverse) /
                       (delta * delta);
    }
  }
  return fit;
}

inline HawkesFit hawkes_estimator(const EventStream& stream, double delta,
                                  double support,
                                  const EstimatorOptions& options = {}) {
  return hawkes_estimator(bin_counts(stream, delta), support, options);
}

/// Recomputes and attaches the sandwich covariance to a fit obtained without
/// one. The counts must be the ones the fit was computed from.
inline HawkesFit covariance_estimate(
    HawkesFit fit, const BinCountSequence& bc,
    EstimatorOptions::Storage storage = EstimatorOptions::Storage::automatic) {
  require(fit.delta == bc.delta, ErrorCode::invalid_parameter,
          "bin width mismatch between fit and counts");
  require(fit.d == bc.dimension() && fit.n == bc.bins(),
          ErrorCode::invalid_parameter,
          "count shape mismatch between fit and counts");
  const Eigen::Index d = fit.d;
  const Eigen::Index p = fit.p;
  Eigen::MatrixXd coefficients(d, d * p + 1);
  for (Eigen::Index k = 0; k < p; ++k) {
    coefficients.middleCols(k * d, d) = fit.excitement[static_cast<std::size_t>(k)] * fit.delta;
  }
  coefficients.col(d * p) = fit.baseline * fit.delta;

  Eigen::MatrixXd gram_inverse;
  if (detail::use_dense(bc, p, storage)) {
    DesignMatrices design = build_design(bc, p);
    auto gram = detail::gram_from_design(design);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram.ZZt);
    require(ldlt.info() == Eigen::Success, ErrorCode::singular_design,
            "design Gram factorization failed");
    gram_inverse =
        ldlt.solve(Eigen::MatrixXd::Identity(gram.ZZt.rows(), gram.ZZt.cols()));
    const Eigen::MatrixXd residuals = design.Y - coefficients * design.Z;
    fit.covariance = detail::sandwich_dense(design, residuals, gram_inverse) /
                     (fit.delta * fit.delta);
  } else {
    auto gram = detail::gram_sparse(bc, p);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram.ZZt);
    require(ldlt.info() == Eigen::Success, ErrorCode::singular_design,
            "design Gram factorization failed");
    gram_inverse =
        ldlt.solve(Eigen::MatrixXd::Identity(gram.ZZt.rows(), gram.ZZt.cols()));
    fit.covariance =
        detail::sandwich_sparse(bc, p, coefficients, gram_inverse) /
        (fit.delta * fit.delta);
  }
  return fit;
}

using CoefficientTarget = std::variant<ExcitementEntry, BaselineEntry>;

struct ConfidenceInterval {
  double estimate = 0.0;
  double half_width = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.0;
};

/// Normal-approximation interval for one coefficient. Entry addresses are
/// 1-based. Tiny negative variances (roundoff from the sandwich product, down
/// to -1e-8) are clamped to zero; anything more negative is refused.
inline ConfidenceInterval confidence_interval(const HawkesFit& fit,
                                              const CoefficientTarget& target,
                                              double level = 0.95) {
  require(level > 0.0 && level < 1.0, ErrorCode::invalid_parameter,
          "confidence level must lie strictly between 0 and 1");
  require(fit.has_covariance(), ErrorCode::invalid_parameter,
          "fit carries no covariance estimate");
  double estimate = 0.0;
  Eigen::Index index = 0;
  if (const auto* e = std::get_if<ExcitementEntry>(&target)) {
    index = excitement_index(fit.d, fit.p, *e);
    estimate = fit.excitement[static_cast<std::size_t>(e->k - 1)](e->i - 1, e->j - 1);
  } else {
    const auto& b = std::get<BaselineEntry>(target);
    index = baseline_index(fit.d, fit.p, b);
    estimate = fit.baseline(b.i - 1);
  }
  double variance = fit.covariance(index, index);
  require(variance >= -1e-8, ErrorCode::evaluation_error,
          "negative variance on the covariance diagonal");
  variance = std::max(variance, 0.0);

  ConfidenceInterval ci;
  ci.estimate = estimate;
  ci.level = level;
  ci.half_width = normal_inverse_cdf(0.5 + level / 2.0) * std::sqrt(variance);
  ci.lower = estimate - ci.half_width;
  ci.upper = estimate + ci.half_width;
  return ci;
}

}  // namespace hawkesbin

#pragma once

// Brute-force reference implementations used to cross-check the estimation
// code. Everything here works from first principles with plain loops and
// cofactor expansions, deliberately sharing no code with the library.

#include <array>
#include <cstddef>
#include <vector>

namespace oracle {

inline double determinant(std::vector<std::vector<double>> m) {
  const std::size_t n = m.size();
  if (n == 1) return m[0][0];
  double det = 0.0;
  double sign = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::vector<std::vector<double>> minor;
    minor.reserve(n - 1);
    for (std::size_t r = 1; r < n; ++r) {
      std::vector<double> row;
      row.reserve(n - 1);
      for (std::size_t c = 0; c < n; ++c) {
        if (c != col) row.push_back(m[r][c]);
      }
      minor.push_back(std::move(row));
    }
    det += sign * m[0][col] * determinant(minor);
    sign = -sign;
  }
  return det;
}

inline std::vector<double> cramer_solve(
    const std::vector<std::vector<double>>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  const double det = determinant(a);
  std::vector<double> x(n);
  for (std::size_t col = 0; col < n; ++col) {
    auto replaced = a;
    for (std::size_t r = 0; r < n; ++r) replaced[r][col] = b[r];
    x[col] = determinant(replaced) / det;
  }
  return x;
}

/// Least-squares coefficients of the lagged count regression, row by row:
/// normal equations assembled by definition and solved by Cramer's rule.
/// counts[j][t] is the count of component j in bin t (0-based). The returned
/// rows hold the d*p lag weights (newest lag first) followed by the
/// intercept.
inline std::vector<std::vector<double>> cls_coefficients(
    const std::vector<std::vector<double>>& counts, std::size_t p) {
  const std::size_t d = counts.size();
  const std::size_t n = counts[0].size();
  const std::size_t rows = d * p + 1;

  auto design_entry = [&](std::size_t row, std::size_t t) {
    if (row == d * p) return 1.0;
    const std::size_t lag = row / d + 1;
    const std::size_t j = row % d;
    return counts[j][t - lag];
  };

  std::vector<std::vector<double>> gram(rows, std::vector<double>(rows, 0.0));
  for (std::size_t t = p; t < n; ++t) {
    for (std::size_t r1 = 0; r1 < rows; ++r1) {
      for (std::size_t r2 = 0; r2 < rows; ++r2) {
        gram[r1][r2] += design_entry(r1, t) * design_entry(r2, t);
      }
    }
  }

  std::vector<std::vector<double>> coefficients;
  coefficients.reserve(d);
  for (std::size_t i = 0; i < d; ++i) {
    std::vector<double> rhs(rows, 0.0);
    for (std::size_t t = p; t < n; ++t) {
      for (std::size_t r = 0; r < rows; ++r) {
        rhs[r] += counts[i][t] * design_entry(r, t);
      }
    }
    coefficients.push_back(cramer_solve(gram, rhs));
  }
  return coefficients;
}

struct ScalarSandwich {
  double slope = 0.0;
  double intercept = 0.0;
  std::array<std::array<double, 2>, 2> covariance{};  // lag entry, then intercept
};

/// Fully hand-rolled univariate lag-1 fit with its robust covariance: closed
/// 2x2 inversions, per-step residual weights, everything in scalars. The
/// covariance is on the per-unit-time scale, i.e. divided by delta squared.
inline ScalarSandwich scalar_sandwich(const std::vector<double>& counts,
                                      double delta) {
  const std::size_t n = counts.size();
  double sxx = 0.0;
  double sx = 0.0;
  double sxy = 0.0;
  double sy = 0.0;
  double m = 0.0;
  for (std::size_t t = 1; t < n; ++t) {
    const double x = counts[t - 1];
    const double y = counts[t];
    sxx += x * x;
    sx += x;
    sxy += x * y;
    sy += y;
    m += 1.0;
  }
  const double det = sxx * m - sx * sx;
  ScalarSandwich out;
  out.slope = (sxy * m - sy * sx) / det;
  out.intercept = (sxx * sy - sx * sxy) / det;

  const double g11 = m / det;
  const double g12 = -sx / det;
  const double g22 = sxx / det;

  double w11 = 0.0;
  double w12 = 0.0;
  double w22 = 0.0;
  for (std::size_t t = 1; t < n; ++t) {
    const double x = counts[t - 1];
    const double u = counts[t] - out.slope * x - out.intercept;
    w11 += u * u * x * x;
    w12 += u * u * x;
    w22 += u * u;
  }

  // G W G, spelled out entry by entry.
  const double a11 = g11 * w11 + g12 * w12;
  const double a12 = g11 * w12 + g12 * w22;
  const double a21 = g12 * w11 + g22 * w12;
  const double a22 = g12 * w12 + g22 * w22;
  out.covariance[0][0] = (a11 * g11 + a12 * g12) / (delta * delta);
  out.covariance[0][1] = (a11 * g12 + a12 * g22) / (delta * delta);
  out.covariance[1][0] = (a21 * g11 + a22 * g12) / (delta * delta);
  out.covariance[1][1] = (a21 * g12 + a22 * g22) / (delta * delta);
  return out;
}

}  // namespace oracle

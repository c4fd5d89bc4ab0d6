#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "hawkesbin/cls.hpp"
#include "hawkesbin/rng.hpp"
#include "hawkesbin/simulate.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using Catch::Matchers::WithinAbs;
using hawkesbin::BaselineEntry;
using hawkesbin::BinCountSequence;
using hawkesbin::build_design;
using hawkesbin::cls_fit;
using hawkesbin::cls_residuals;
using hawkesbin::confidence_interval;
using hawkesbin::covariance_estimate;
using hawkesbin::Error;
using hawkesbin::ErrorCode;
using hawkesbin::EstimatorOptions;
using hawkesbin::ExcitementEntry;
using hawkesbin::hawkes_estimator;
using hawkesbin::HawkesFit;

namespace {

BinCountSequence make_counts(const std::vector<std::vector<int>>& values,
                             double delta) {
  BinCountSequence bc;
  bc.delta = delta;
  const auto d = static_cast<Eigen::Index>(values.size());
  const auto n = static_cast<Eigen::Index>(values[0].size());
  bc.counts.resize(d, n);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      bc.counts(i, k) = values[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    }
  }
  return bc;
}

BinCountSequence poisson_counts(std::uint64_t seed, Eigen::Index d,
                                Eigen::Index n, double mean, double delta) {
  hawkesbin::RngStream rng(seed);
  std::vector<std::vector<int>> values(static_cast<std::size_t>(d),
                                       std::vector<int>(static_cast<std::size_t>(n)));
  for (auto& comp : values) {
    for (auto& v : comp) v = static_cast<int>(rng.poisson(mean));
  }
  return make_counts(values, delta);
}

}  // namespace

TEST_CASE("design matrices stack lagged counts with a constant row") {
  std::vector<std::vector<int>> values = {{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}};
  auto bc = make_counts(values, 1.0);
  auto design = build_design(bc, 2);
  REQUIRE(design.Z.rows() == 3);
  REQUIRE(design.Z.cols() == 10);
  REQUIRE(design.Y.cols() == 10);
  // First column targets bin 3 (1-based): lags (2, 1), then the constant.
  CHECK(design.Z(0, 0) == 2.0);
  CHECK(design.Z(1, 0) == 1.0);
  CHECK(design.Z(2, 0) == 1.0);
  CHECK(design.Y(0, 0) == 3.0);
  // Last column targets bin 12.
  CHECK(design.Z(0, 9) == 11.0);
  CHECK(design.Z(1, 9) == 10.0);
  CHECK(design.Y(0, 9) == 12.0);
}

TEST_CASE("design construction rejects bad orders and short samples") {
  auto bc = poisson_counts(1, 2, 30, 2.0, 0.5);
  CHECK_THROWS_AS(build_design(bc, 0), Error);
  CHECK_THROWS_AS(build_design(bc, 30), Error);
  try {
    build_design(bc, 12);  // 30 - 12 = 18 < 2*12 + 6
    FAIL("expected underdetermined");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::underdetermined);
  }
}

TEST_CASE("a deterministic ramp is fitted exactly with zero residuals") {
  std::vector<std::vector<int>> values(1, std::vector<int>(30));
  for (int k = 0; k < 30; ++k) values[0][static_cast<std::size_t>(k)] = k + 1;
  auto bc = make_counts(values, 1.0);
  auto design = build_design(bc, 1);
  auto fit = cls_fit(design);
  CHECK_THAT(fit.coefficients(0, 0), WithinAbs(1.0, 1e-10));
  CHECK_THAT(fit.coefficients(0, 1), WithinAbs(1.0, 1e-9));
  CHECK(cls_residuals(design, fit.coefficients).cwiseAbs().maxCoeff() < 1e-9);

  // Two lags of a ramp are collinear with the constant row.
  CHECK_THROWS_AS(hawkes_estimator(bc, 1.5), Error);

  auto quadratic = values;
  for (int k = 0; k < 30; ++k) {
    quadratic[0][static_cast<std::size_t>(k)] = (k + 1) * (k + 1);
  }
  // x_k = 2 x_{k-1} - x_{k-2} + 2 exactly, so residuals stay at zero.
  auto hawkes = hawkes_estimator(make_counts(quadratic, 1.0), 1.5);
  REQUIRE(hawkes.p == 2);
  CHECK_THAT(hawkes.excitement[0](0, 0), WithinAbs(2.0, 1e-7));
  CHECK_THAT(hawkes.excitement[1](0, 0), WithinAbs(-1.0, 1e-7));
  CHECK(hawkes.covariance.cwiseAbs().maxCoeff() < 1e-10);
  auto ci = confidence_interval(hawkes, ExcitementEntry{1, 1, 1});
  CHECK_THAT(ci.half_width, WithinAbs(0.0, 1e-10));
}

TEST_CASE("constant counts make the design singular") {
  std::vector<std::vector<int>> values(1, std::vector<int>(40, 3));
  auto bc = make_counts(values, 1.0);
  try {
    cls_fit(build_design(bc, 1));
    FAIL("expected singular-design");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::singular_design);
  }
}

TEST_CASE("coefficients match the cofactor-expansion oracle") {
  std::mt19937_64 layout(7);
  int checked = 0;
  for (std::uint64_t seed = 100; seed < 150; ++seed) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(layout() % 2);
    const Eigen::Index p = 1 + static_cast<Eigen::Index>(layout() % 3);
    const Eigen::Index n = d * p + 20 + static_cast<Eigen::Index>(layout() % 20);
    auto bc = poisson_counts(seed, d, n, 2.0, 0.5);

    std::vector<std::vector<double>> raw(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index k = 0; k < n; ++k) {
        raw[static_cast<std::size_t>(i)].push_back(bc.counts(i, k));
      }
    }
    auto expected = oracle::cls_coefficients(raw, static_cast<std::size_t>(p));
    auto fit = cls_fit(build_design(bc, p));
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index c = 0; c < d * p + 1; ++c) {
        CHECK_THAT(fit.coefficients(i, c),
                   WithinAbs(expected[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)], 1e-10));
      }
    }
    ++checked;
  }
  CHECK(checked == 50);
}

TEST_CASE("residuals are orthogonal to the design") {
  auto bc = poisson_counts(55, 2, 200, 3.0, 1.0);
  auto design = build_design(bc, 2);
  auto fit = cls_fit(design);
  const Eigen::MatrixXd cross =
      cls_residuals(design, fit.coefficients) * design.Z.transpose();
  CHECK(cross.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("scaling all counts rescales only the intercept") {
  auto bc = poisson_counts(56, 1, 100, 2.0, 1.0);
  auto tripled = bc;
  tripled.counts *= 3;
  auto fit = cls_fit(build_design(bc, 2));
  auto fit3 = cls_fit(build_design(tripled, 2));
  CHECK_THAT(fit3.coefficients(0, 0), WithinAbs(fit.coefficients(0, 0), 1e-9));
  CHECK_THAT(fit3.coefficients(0, 1), WithinAbs(fit.coefficients(0, 1), 1e-9));
  CHECK_THAT(fit3.coefficients(0, 2), WithinAbs(3.0 * fit.coefficients(0, 2), 1e-8));
}

TEST_CASE("the estimator rescales coefficients by the bin width") {
  auto bc = poisson_counts(57, 1, 400, 2.0, 0.5);
  auto fit = hawkes_estimator(bc, 1.0);
  REQUIRE(fit.p == 2);
  auto raw = cls_fit(build_design(bc, 2));
  CHECK_THAT(fit.excitement[0](0, 0), WithinAbs(raw.coefficients(0, 0) / 0.5, 1e-12));
  CHECK_THAT(fit.excitement[1](0, 0), WithinAbs(raw.coefficients(0, 1) / 0.5, 1e-12));
  CHECK_THAT(fit.baseline(0), WithinAbs(raw.coefficients(0, 2) / 0.5, 1e-12));
  CHECK(fit.condition == raw.condition);
}

TEST_CASE("the estimator recovers an autoregression within sampling noise") {
  // Counts follow the order-2 recursion matching excitement values (0.8, 0.4)
  // and baseline 2 at bin width 0.5.
  hawkesbin::InarSpec spec(Eigen::VectorXd::Constant(1, 1.0),
                           {Eigen::MatrixXd::Constant(1, 1, 0.4),
                            Eigen::MatrixXd::Constant(1, 1, 0.2)});
  hawkesbin::RngStream rng(321);
  BinCountSequence bc;
  bc.delta = 0.5;
  bc.counts = simulate_inar(spec, 20000, rng);
  auto fit = hawkes_estimator(bc, 1.0);
  REQUIRE(fit.p == 2);
  const double se1 = std::sqrt(fit.covariance(0, 0));
  const double se2 = std::sqrt(fit.covariance(1, 1));
  const double se0 = std::sqrt(fit.covariance(2, 2));
  CHECK(std::fabs(fit.excitement[0](0, 0) - 0.8) < 4.0 * se1);
  CHECK(std::fabs(fit.excitement[1](0, 0) - 0.4) < 4.0 * se2);
  CHECK(std::fabs(fit.baseline(0) - 2.0) < 4.0 * se0);
}

TEST_CASE("the sandwich covariance matches the scalar oracle") {
  for (std::uint64_t seed : {61u, 62u, 63u}) {
    auto bc = poisson_counts(seed, 1, 60, 2.5, 0.5);
    std::vector<double> raw(static_cast<std::size_t>(bc.bins()));
    for (Eigen::Index k = 0; k < bc.bins(); ++k) {
      raw[static_cast<std::size_t>(k)] = bc.counts(0, k);
    }
    auto expected = oracle::scalar_sandwich(raw, 0.5);
    // The estimator front end always uses at least two lags, so assemble the
    // lag-1 fit by hand and attach its covariance through the public path.
    auto raw_fit = cls_fit(build_design(bc, 1));
    HawkesFit fit;
    fit.delta = 0.5;
    fit.support = 0.5;
    fit.p = 1;
    fit.n = bc.bins();
    fit.d = 1;
    fit.excitement = {Eigen::MatrixXd::Constant(1, 1, raw_fit.coefficients(0, 0) / 0.5)};
    fit.baseline = Eigen::VectorXd::Constant(1, raw_fit.coefficients(0, 1) / 0.5);
    fit = covariance_estimate(fit, bc);
    CHECK_THAT(fit.excitement[0](0, 0), WithinAbs(expected.slope / 0.5, 1e-11));
    CHECK_THAT(fit.baseline(0), WithinAbs(expected.intercept / 0.5, 1e-11));
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        CHECK_THAT(fit.covariance(a, b),
                   WithinAbs(expected.covariance[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)], 1e-12));
      }
    }
  }
}

TEST_CASE("covariance is symmetric with a non-negative diagonal") {
  auto bc = poisson_counts(71, 2, 500, 2.0, 0.2);
  auto fit = hawkes_estimator(bc, 0.6);
  const Eigen::MatrixXd& s2 = fit.covariance;
  CHECK((s2 - s2.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(s2.diagonal().minCoeff() >= -1e-8);
}

TEST_CASE("dense and sparse design paths agree to ten decimals") {
  auto stream = hawkesbin::simulate_hawkes(test_util::bivariate_spec(10.0),
                                           500.0, hawkesbin::RngStream(81));
  auto bc = hawkesbin::bin_counts(stream, 0.25);
  EstimatorOptions dense_opts;
  dense_opts.storage = EstimatorOptions::Storage::dense;
  EstimatorOptions sparse_opts;
  sparse_opts.storage = EstimatorOptions::Storage::sparse;
  auto dense = hawkes_estimator(bc, 1.25, dense_opts);
  auto sparse = hawkes_estimator(bc, 1.25, sparse_opts);
  REQUIRE(dense.p == sparse.p);
  for (Eigen::Index k = 0; k < dense.p; ++k) {
    CHECK((dense.excitement[static_cast<std::size_t>(k)] -
           sparse.excitement[static_cast<std::size_t>(k)])
              .cwiseAbs()
              .maxCoeff() < 1e-10);
  }
  CHECK((dense.baseline - sparse.baseline).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((dense.covariance - sparse.covariance).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("covariance can be attached after a point-only fit") {
  auto bc = poisson_counts(91, 1, 300, 2.0, 0.5);
  EstimatorOptions no_cov;
  no_cov.compute_covariance = false;
  auto bare = hawkes_estimator(bc, 1.0, no_cov);
  CHECK_FALSE(bare.has_covariance());
  auto full = hawkes_estimator(bc, 1.0);
  auto attached = covariance_estimate(bare, bc);
  CHECK((attached.covariance - full.covariance).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("interval targets address the stacked coefficient layout") {
  // d = 2, p = 5: lag-5 entry (2,1) sits at stacked position 18 (1-based).
  CHECK(hawkesbin::excitement_index(2, 5, {5, 2, 1}) == 17);
  CHECK(hawkesbin::excitement_index(2, 5, {1, 1, 1}) == 0);
  CHECK(hawkesbin::baseline_index(2, 5, {1}) == 20);
  CHECK(hawkesbin::baseline_index(2, 5, {2}) == 21);
  CHECK_THROWS_AS(hawkesbin::excitement_index(2, 5, {6, 1, 1}), Error);
  CHECK_THROWS_AS(hawkesbin::excitement_index(2, 5, {0, 1, 1}), Error);
  CHECK_THROWS_AS(hawkesbin::baseline_index(2, 5, {3}), Error);
}

TEST_CASE("confidence intervals read the matching covariance diagonal") {
  auto bc = poisson_counts(95, 2, 400, 2.0, 0.5);
  auto fit = hawkes_estimator(bc, 1.0);
  REQUIRE(fit.p == 2);
  auto ci = confidence_interval(fit, ExcitementEntry{2, 1, 2}, 0.95);
  const Eigen::Index idx = hawkesbin::excitement_index(2, 2, {2, 1, 2});
  CHECK_THAT(ci.half_width,
             WithinAbs(1.959963984540054 * std::sqrt(fit.covariance(idx, idx)), 1e-9));
  CHECK_THAT(ci.estimate, WithinAbs(fit.excitement[1](0, 1), 1e-15));
  CHECK_THAT(ci.upper - ci.lower, WithinAbs(2.0 * ci.half_width, 1e-12));

  auto base = confidence_interval(fit, BaselineEntry{2}, 0.99);
  const Eigen::Index bidx = hawkesbin::baseline_index(2, 2, {2});
  CHECK_THAT(base.half_width,
             WithinAbs(2.5758293035489004 * std::sqrt(fit.covariance(bidx, bidx)), 1e-9));

  CHECK_THROWS_AS(confidence_interval(fit, ExcitementEntry{3, 1, 1}), Error);
  CHECK_THROWS_AS(confidence_interval(fit, BaselineEntry{1}, 1.5), Error);
}

TEST_CASE("fit-implied branching widths follow the stacked layout") {
  auto bc = poisson_counts(97, 2, 400, 2.0, 0.5);
  auto fit = hawkes_estimator(bc, 1.0);
  REQUIRE(fit.p == 2);
  auto branching = hawkesbin::branching_from_fit(fit, 0.95);
  CHECK_THAT(branching.K(0, 1),
             WithinAbs(fit.delta * (fit.excitement[0](0, 1) + fit.excitement[1](0, 1)),
                       1e-15));
  double variance = 0.0;
  for (Eigen::Index k = 1; k <= 2; ++k) {
    for (Eigen::Index l = 1; l <= 2; ++l) {
      variance += fit.covariance(hawkesbin::excitement_index(2, 2, {k, 1, 2}),
                                 hawkesbin::excitement_index(2, 2, {l, 1, 2}));
    }
  }
  variance *= fit.delta * fit.delta;
  CHECK_THAT(branching.half_width(0, 1),
             WithinAbs(1.959963984540054 * std::sqrt(variance), 1e-12));
  CHECK_THROWS_AS(hawkesbin::branching_from_fit(fit, 1.5), Error);
}

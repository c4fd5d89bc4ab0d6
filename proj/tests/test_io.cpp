#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hawkesbin/cls.hpp"
#include "hawkesbin/diagnostics.hpp"
#include "hawkesbin/events.hpp"
#include "hawkesbin/io.hpp"
#include "hawkesbin/model.hpp"
#include "hawkesbin/rng.hpp"
#include "hawkesbin/simulate.hpp"
#include "test_util.hpp"

using namespace hawkesbin;

namespace {

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  throw std::runtime_error("completed without an error");
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/hawkesbin_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("doubles survive the text round trip bit for bit") {
  const std::vector<double> values = {0.0,
                                      1.0,
                                      -1.0,
                                      0.1,
                                      1.0 / 3.0,
                                      3.141592653589793,
                                      1e-300,
                                      -2.5e17,
                                      123456.789012345678,
                                      5e-324};
  for (double x : values) {
    CHECK(parse_double(format_double(x)) == x);
  }
  CHECK(code_of([] { format_double(std::nan("")); }) ==
        ErrorCode::invalid_parameter);
  CHECK(code_of([] { parse_double("abc"); }) == ErrorCode::parse);
  CHECK(code_of([] { parse_double("1.5x"); }) == ErrorCode::parse);
}

TEST_CASE("fnv1a64 matches the published vectors") {
  CHECK(fnv1a64_hex("") == "cbf29ce484222325");
  CHECK(fnv1a64_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a64_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("events survive the csv round trip") {
  EventStream stream(Window{0.0, 10.0},
                     {{0.5, 2.25, 2.25, 7.125}, {1.0 / 3.0, 9.875}});
  std::ostringstream out;
  write_events_csv(out, stream);
  const auto text = out.str();
  CHECK(text.rfind("component,time\n", 0) == 0);

  std::istringstream in(text);
  auto back = read_events_csv(in, Window{0.0, 10.0});
  REQUIRE(back.dimension() == 2);
  CHECK(back.component(0) == stream.component(0));
  CHECK(back.component(1) == stream.component(1));
}

TEST_CASE("events csv reads headerless and unordered rows") {
  std::istringstream in("2,4.5\n1,1.25\n1,0.75\n");
  auto stream = read_events_csv(in);
  CHECK(stream.window().t_start == 0.0);
  CHECK(stream.window().t_end == 4.5);
  REQUIRE(stream.dimension() == 2);
  CHECK(stream.component(0) == std::vector<double>{0.75, 1.25});
  CHECK(stream.component(1) == std::vector<double>{4.5});

  std::istringstream forced("1,0.5\n");
  auto padded = read_events_csv(forced, Window{0.0, 1.0}, 3);
  CHECK(padded.dimension() == 3);
  CHECK(padded.component(2).empty());
}

TEST_CASE("events csv rejects malformed rows") {
  std::istringstream zero_component("0,1.5\n");
  CHECK(code_of([&] { read_events_csv(zero_component); }) == ErrorCode::parse);

  std::istringstream bad_time("1,notatime\n1,2.0\n");
  CHECK(code_of([&] { read_events_csv(bad_time); }) == ErrorCode::parse);

  std::istringstream wide("1,2.0,3.0\n");
  CHECK(code_of([&] { read_events_csv(wide); }) == ErrorCode::parse);

  std::istringstream empty("component,time\n");
  CHECK(code_of([&] { read_events_csv(empty); }) == ErrorCode::parse);

  std::istringstream overflow("5,1.0\n");
  CHECK(code_of([&] { read_events_csv(overflow, Window{0.0, 2.0}, 2); }) ==
        ErrorCode::parse);
}

TEST_CASE("model spec survives the json round trip") {
  auto spec = test_util::bivariate_spec();
  auto doc = spec_to_json(spec);
  auto back = spec_from_json(doc);

  REQUIRE(back.dimension() == spec.dimension());
  CHECK(back.eta() == spec.eta());
  for (Eigen::Index i = 0; i < 2; ++i) {
    for (Eigen::Index j = 0; j < 2; ++j) {
      const auto& original = spec.excitement(i, j);
      const auto& restored = back.excitement(i, j);
      CHECK(restored.support() == original.support());
      for (double t : {0.1, 0.5, 1.5, 2.5, 3.0, 5.0, 29.5}) {
        CHECK(restored.value(t) == original.value(t));
      }
    }
  }
  CHECK(branching_matrix(back).spectral_radius ==
        branching_matrix(spec).spectral_radius);
}

TEST_CASE("grid and exp-decay families round trip through json") {
  Eigen::VectorXd eta(1);
  eta << 0.7;
  HawkesSpec grid_spec(eta,
                       {ExcitementFunction::grid(0.25, {0.4, 0.1, 0.05})});
  auto grid_back = spec_from_json(spec_to_json(grid_spec));
  for (double t : {0.1, 0.25, 0.3, 0.5, 0.75, 1.0}) {
    CHECK(grid_back.excitement(0, 0).value(t) ==
          grid_spec.excitement(0, 0).value(t));
  }

  HawkesSpec exp_spec(eta, {ExcitementFunction::exp_decay(0.5, 1.1, 12.0)});
  auto exp_back = spec_from_json(spec_to_json(exp_spec));
  CHECK(exp_back.excitement(0, 0).value(2.0) ==
        exp_spec.excitement(0, 0).value(2.0));
}

TEST_CASE("model json validation rejects bad documents") {
  CHECK(code_of([] { spec_from_json(parse_json_text(R"({})")); }) ==
        ErrorCode::parse);
  CHECK(code_of([] {
          spec_from_json(parse_json_text(
              R"({"baseline":[1.0],"excitement":[{"row":1,"col":1,"family":"mystery"}]})"));
        }) == ErrorCode::parse);
  CHECK(code_of([] {
          spec_from_json(parse_json_text(
              R"({"baseline":[1.0],"excitement":[{"row":2,"col":1,"family":"zero"}]})"));
        }) == ErrorCode::parse);
  CHECK(code_of([] {
          spec_from_json(parse_json_text(
              R"({"baseline":[1.0],"excitement":[
                   {"row":1,"col":1,"family":"zero"},
                   {"row":1,"col":1,"family":"zero"}]})"));
        }) == ErrorCode::parse);
  CHECK(code_of([] {
          spec_from_json(parse_json_text(
              R"({"baseline":[1.0],"excitement":[{"row":1,"col":1,
                   "family":"grid","points":[[0.5,0.1],[1.2,0.2]]}]})"));
        }) == ErrorCode::parse);
  CHECK(code_of([] { parse_json_text("{not json"); }) == ErrorCode::parse);
}

TEST_CASE("fit json round trip preserves every field") {
  auto spec = test_util::bivariate_spec();
  auto root = RandomSource{4201}.root();
  auto stream = simulate_hawkes_burned(spec, 300.0, root, 60.0);
  auto fit = hawkes_estimator(stream, 0.5, 4.0);

  auto doc = fit_to_json(fit);
  auto back = fit_from_json(doc);
  CHECK(back.delta == fit.delta);
  CHECK(back.support == fit.support);
  CHECK(back.p == fit.p);
  CHECK(back.n == fit.n);
  CHECK(back.d == fit.d);
  CHECK(back.dropped_tail == fit.dropped_tail);
  CHECK(back.condition == fit.condition);
  CHECK(back.baseline == fit.baseline);
  REQUIRE(back.excitement.size() == fit.excitement.size());
  for (std::size_t k = 0; k < fit.excitement.size(); ++k) {
    CHECK(back.excitement[k] == fit.excitement[k]);
  }
  REQUIRE(back.has_covariance());
  CHECK(back.covariance == fit.covariance);

  HawkesFit bare = fit;
  bare.covariance.resize(0, 0);
  auto bare_back = fit_from_json(fit_to_json(bare));
  CHECK_FALSE(bare_back.has_covariance());

  auto broken = doc;
  broken["excitement"] = nlohmann::json::array();
  CHECK(code_of([&] { fit_from_json(broken); }) == ErrorCode::parse);
}

TEST_CASE("fit json file io reports missing and malformed files") {
  CHECK(code_of([] { read_fit_json("/tmp/hawkesbin_absent.json"); }) ==
        ErrorCode::io);
  TempFile file("broken_fit.json");
  write_text_file(file.path, "{\"delta\": oops");
  CHECK(code_of([&] { read_fit_json(file.path); }) == ErrorCode::parse);
}

TEST_CASE("estimates csv lists every lag with intervals") {
  auto spec = test_util::bivariate_spec();
  auto root = RandomSource{4202}.root();
  auto stream = simulate_hawkes_burned(spec, 300.0, root, 60.0);
  auto fit = hawkes_estimator(stream, 0.5, 2.0);
  REQUIRE(fit.p == 4);

  std::ostringstream out;
  write_estimates_csv(out, fit);
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "t,i,j,estimate,ci_low,ci_high");
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  REQUIRE(rows.size() == static_cast<std::size_t>(fit.p * 4));

  const auto ci = confidence_interval(fit, ExcitementEntry{1, 1, 1});
  const std::string expected_first =
      "0.5,1,1," + format_double(fit.excitement[0](0, 0)) + ',' +
      format_double(ci.lower) + ',' + format_double(ci.upper);
  CHECK(rows[0] == expected_first);

  HawkesFit bare = fit;
  bare.covariance.resize(0, 0);
  std::ostringstream bare_out;
  write_estimates_csv(bare_out, bare);
  std::istringstream bare_lines(bare_out.str());
  std::getline(bare_lines, line);
  std::getline(bare_lines, line);
  CHECK(line.substr(line.size() - 2) == ",,");
}

TEST_CASE("scan artifacts serialize candidates and summaries") {
  SupportSelection support;
  support.delta0 = 0.5;
  support.best_p = 2;
  support.support = 1.0;
  support.scan = {{1, 0.5, 0.25, true},
                  {2, 1.0, 0.125, true},
                  {3, 1.5, std::numeric_limits<double>::infinity(), false}};
  std::ostringstream out;
  write_support_scan_csv(out, support);
  CHECK(out.str() ==
        "p,support,aic,feasible\n"
        "1,0.5,0.25,1\n"
        "2,1,0.125,1\n"
        "3,1.5,,0\n");
  auto summary = support_selection_to_json(support);
  CHECK(summary["delta0"] == 0.5);
  CHECK(summary["best_p"] == 2);
  CHECK(summary["support"] == 1.0);

  BinSizeSelection bins;
  bins.has_recommendation = true;
  bins.recommended = 0.5;
  bins.trend = {-1};
  BinSizeCandidate good;
  good.delta = 0.5;
  good.p = 4;
  good.baseline = Eigen::VectorXd::Constant(1, 1.5);
  good.half_width = Eigen::VectorXd::Constant(1, 0.25);
  good.usable = true;
  BinSizeCandidate bad;
  bad.delta = 0.25;
  bins.scan = {good, bad};
  std::ostringstream bin_out;
  write_bin_size_scan_csv(bin_out, bins);
  CHECK(bin_out.str() ==
        "delta,p,component,baseline,ci_low,ci_high,usable\n"
        "0.5,4,1,1.5,1.25,1.75,1\n"
        "0.25,,,,,,0\n");
  auto bin_summary = bin_size_selection_to_json(bins);
  CHECK(bin_summary["has_recommendation"] == true);
  CHECK(bin_summary["recommended"] == 0.5);
  CHECK(bin_summary["trend"] == nlohmann::json::array({-1}));
}

TEST_CASE("smoothed curve csv evaluates on the given grid") {
  HawkesFit fit;
  fit.delta = 0.5;
  fit.p = 2;
  fit.support = 1.0;
  fit.d = 1;
  fit.excitement = {Eigen::MatrixXd::Constant(1, 1, 0.4),
                    Eigen::MatrixXd::Constant(1, 1, 0.2)};
  fit.baseline = Eigen::VectorXd::Constant(1, 1.0);
  auto smoothed = box_smooth(fit, 0.5);

  std::ostringstream out;
  write_smoothed_csv(out, smoothed, {0.25, 0.75});
  CHECK(out.str() ==
        "t,i,j,value\n"
        "0.25,1,1," + format_double(smoothed.value(0, 0, 0.25)) + "\n" +
            "0.75,1,1," + format_double(smoothed.value(0, 0, 0.75)) + "\n");
}

TEST_CASE("diagnostics report serializes tests and qq pairs") {
  Eigen::VectorXd eta(1);
  eta << 2.0;
  HawkesSpec spec(eta, {ExcitementFunction::zero()});
  auto rng = RandomSource{4203}.root();
  std::vector<double> times;
  double t = 0.0;
  for (int k = 0; k < 40; ++k) {
    t += rng.exponential(2.0);
    times.push_back(t);
  }
  EventStream stream(Window{0.0, t + 1.0}, {times});
  auto report = diagnose(stream, intensity_model(spec), 5);

  auto doc = diagnostics_to_json(report);
  CHECK(doc["burn_in_time"] == 0.0);
  CHECK(doc["lags"] == 5);
  REQUIRE(doc["components"].size() == 1);
  const auto& comp = doc["components"][0];
  CHECK(comp["component"] == 1);
  CHECK(comp["events_used"] == 40);
  CHECK(comp["residual_count"] == 39);
  double mean = 0.0;
  for (double r : report.components[0].residuals) mean += r;
  CHECK(comp["mean_residual"] == mean / 39.0);
  CHECK(comp["ks"]["statistic"] ==
        report.components[0].ks.statistic);
  CHECK_FALSE(comp.contains("residuals"));

  auto with_residuals = diagnostics_to_json(report, true);
  CHECK(with_residuals["components"][0]["residuals"].size() == 39);

  std::ostringstream qq;
  write_qq_csv(qq, report);
  std::istringstream lines(qq.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "component,theoretical,empirical");
  std::size_t rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 39);
}

TEST_CASE("manifest records config and input checksums") {
  TempFile input("manifest_input.csv");
  write_text_file(input.path, "component,time\n1,0.5\n");

  auto doc = manifest_json("fit", {{"delta", 0.2}, {"support", 6.0}},
                           {input.path});
  CHECK(doc["tool"] == "hawkesbin");
  CHECK(doc["command"] == "fit");
  CHECK(doc["config"]["delta"] == 0.2);
  REQUIRE(doc["inputs"].size() == 1);
  CHECK(doc["inputs"][0]["path"] == input.path);
  CHECK(doc["inputs"][0]["fnv1a64"] ==
        fnv1a64_hex("component,time\n1,0.5\n"));

  CHECK(code_of([] {
          manifest_json("fit", {}, {"/tmp/hawkesbin_missing_input.csv"});
        }) == ErrorCode::io);
}

TEST_CASE("text file io round trips bytes and reports failures") {
  TempFile file("roundtrip.txt");
  const std::string payload = "line one\nline two\n";
  write_text_file(file.path, payload);
  CHECK(read_text_file(file.path) == payload);
  CHECK(code_of([] { read_text_file("/tmp/hawkesbin_nope.txt"); }) ==
        ErrorCode::io);
  CHECK(code_of([] { write_text_file("/nonexistent_dir/x.txt", "y"); }) ==
        ErrorCode::io);
}

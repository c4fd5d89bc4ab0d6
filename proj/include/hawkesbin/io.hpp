#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hawkesbin/cls.hpp"
#include "hawkesbin/diagnostics.hpp"
#include "hawkesbin/errors.hpp"
#include "hawkesbin/events.hpp"
#include "hawkesbin/fit.hpp"
#include "hawkesbin/model.hpp"
#include "hawkesbin/selection.hpp"
#include "hawkesbin/smoothing.hpp"

namespace hawkesbin {

/// Shortest decimal string that parses back to exactly the same double, the
/// format every CSV and JSON artifact uses so reruns are byte-identical.
inline std::string format_double(double x) {
  require(std::isfinite(x), ErrorCode::invalid_parameter,
          "cannot serialize a non-finite number");
  char buffer[32];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), x);
  require(ec == std::errc(), ErrorCode::io, "number formatting failed");
  return std::string(buffer, end);
}

inline double parse_double(std::string_view text) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  require(ec == std::errc() && ptr == end, ErrorCode::parse,
          "not a number: '" + std::string(text) + "'");
  return value;
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= static_cast<std::uint64_t>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::string fnv1a64_hex(std::string_view bytes) {
  char buffer[17];
  auto hash = fnv1a64(bytes);
  for (int k = 15; k >= 0; --k) {
    buffer[k] = "0123456789abcdef"[hash & 0xf];
    hash >>= 4;
  }
  return std::string(buffer, 16);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::io, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  require(!in.bad(), ErrorCode::io, "failed reading " + path);
  return buffer.str();
}

inline void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::io, "cannot open " + path + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  require(out.good(), ErrorCode::io, "failed writing " + path);
}

namespace detail {

inline std::string trimmed(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r");
  return std::string(text.substr(first, last - first + 1));
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trimmed(line.substr(start)));
      return fields;
    }
    fields.push_back(trimmed(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

inline bool parses_as_double(const std::string& text) {
  double value = 0.0;
  auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace detail

inline void write_events_csv(std::ostream& out, const EventStream& stream) {
  out << "component,time\n";
  struct Row {
    double time;
    std::size_t component;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < stream.dimension(); ++i) {
    for (double t : stream.component(i)) rows.push_back({t, i + 1});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.time < b.time || (a.time == b.time && a.component < b.component);
  });
  for (const auto& row : rows) {
    out << row.component << ',' << format_double(row.time) << '\n';
  }
}

inline void write_events_csv(const std::string& path,
                             const EventStream& stream) {
  std::ostringstream buffer;
  write_events_csv(buffer, stream);
  write_text_file(path, buffer.str());
}

/// Reads `component,time` rows (1-based components, optional header). Rows
/// may arrive in any order; each component's times are sorted before the
/// stream is assembled. Without an explicit window the stream spans (0, max
/// time]; pass one when events can sit at or below 0. `dimension` forces the
/// component count when trailing components have no events.
inline EventStream read_events_csv(
    std::istream& in, std::optional<Window> window = std::nullopt,
    std::optional<std::size_t> dimension = std::nullopt) {
  std::vector<std::vector<double>> times;
  if (dimension) times.resize(*dimension);
  std::string line;
  std::size_t line_number = 0;
  bool saw_data = false;
  double max_time = 0.0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() == 1 && fields[0].empty()) continue;
    require(fields.size() == 2, ErrorCode::parse,
            "line " + std::to_string(line_number) +
                ": expected 'component,time'");
    if (!saw_data && !detail::parses_as_double(fields[0]) &&
        !detail::parses_as_double(fields[1])) {
      continue;
    }
    saw_data = true;
    std::size_t component = 0;
    {
      const auto& text = fields[0];
      auto [ptr, ec] =
          std::from_chars(text.data(), text.data() + text.size(), component);
      require(ec == std::errc() && ptr == text.data() + text.size() &&
                  component >= 1,
              ErrorCode::parse,
              "line " + std::to_string(line_number) +
                  ": component must be a positive integer");
    }
    double t = 0.0;
    try {
      t = parse_double(fields[1]);
    } catch (const Error&) {
      fail(ErrorCode::parse, "line " + std::to_string(line_number) +
                                 ": time is not a number");
    }
    require(!dimension || component <= *dimension, ErrorCode::parse,
            "line " + std::to_string(line_number) +
                ": component exceeds the declared dimension");
    if (component > times.size()) times.resize(component);
    times[component - 1].push_back(t);
    max_time = std::max(max_time, t);
  }
  require(!times.empty(), ErrorCode::parse, "no event rows found");
  for (auto& ts : times) std::sort(ts.begin(), ts.end());
  const Window w = window ? *window : Window{0.0, max_time};
  return EventStream(w, std::move(times));
}

inline EventStream read_events_csv(
    const std::string& path, std::optional<Window> window = std::nullopt,
    std::optional<std::size_t> dimension = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::io, "cannot open " + path);
  return read_events_csv(in, window, dimension);
}

inline nlohmann::json excitement_to_json(const ExcitementFunction& f) {
  nlohmann::json entry;
  std::visit(
      [&entry](const auto& family) {
        using T = std::decay_t<decltype(family)>;
        if constexpr (std::is_same_v<T, ExcitementFunction::Zero>) {
          entry["family"] = "zero";
        } else if constexpr (std::is_same_v<T, ExcitementFunction::ExpDecay>) {
          entry["family"] = "exp-decay";
          entry["scale"] = family.scale;
          entry["rate"] = family.rate;
          entry["support"] = family.support;
        } else if constexpr (std::is_same_v<T, ExcitementFunction::PowerLaw>) {
          entry["family"] = "power-law";
          entry["scale"] = family.scale;
          entry["exponent"] = family.exponent;
          entry["support"] = family.support;
        } else if constexpr (std::is_same_v<
                                 T, ExcitementFunction::ConstantOnInterval>) {
          entry["family"] = "constant-on-interval";
          entry["level"] = family.level;
          entry["start"] = family.start;
          entry["end"] = family.end;
        } else if constexpr (std::is_same_v<T,
                                            ExcitementFunction::SineOnInterval>) {
          entry["family"] = "sine-on-interval";
          entry["amplitude"] = family.amplitude;
          entry["omega"] = family.omega;
          entry["end"] = family.end;
        } else {
          static_assert(std::is_same_v<T, ExcitementFunction::Grid>);
          entry["family"] = "grid";
          nlohmann::json points = nlohmann::json::array();
          for (std::size_t m = 0; m < family.values.size(); ++m) {
            points.push_back({family.step * static_cast<double>(m + 1),
                              family.values[m]});
          }
          entry["points"] = std::move(points);
        }
      },
      f.family());
  return entry;
}

inline ExcitementFunction excitement_from_json(const nlohmann::json& entry) {
  const std::string family = entry.at("family").get<std::string>();
  if (family == "zero") {
    return ExcitementFunction::zero();
  }
  if (family == "exp-decay") {
    return ExcitementFunction::exp_decay(entry.at("scale").get<double>(),
                                         entry.at("rate").get<double>(),
                                         entry.at("support").get<double>());
  }
  if (family == "power-law") {
    return ExcitementFunction::power_law(entry.at("scale").get<double>(),
                                         entry.at("exponent").get<double>(),
                                         entry.at("support").get<double>());
  }
  if (family == "constant-on-interval") {
    return ExcitementFunction::constant_on_interval(
        entry.at("level").get<double>(), entry.at("start").get<double>(),
        entry.at("end").get<double>());
  }
  if (family == "sine-on-interval") {
    return ExcitementFunction::sine_on_interval(
        entry.at("amplitude").get<double>(), entry.at("omega").get<double>(),
        entry.at("end").get<double>());
  }
  if (family == "grid") {
    const auto& points = entry.at("points");
    require(points.is_array() && !points.empty(), ErrorCode::parse,
            "grid family needs a non-empty points array");
    std::vector<double> values;
    double step = 0.0;
    for (std::size_t m = 0; m < points.size(); ++m) {
      const auto& point = points[m];
      require(point.is_array() && point.size() == 2, ErrorCode::parse,
              "grid points must be [t, value] pairs");
      const double t = point[0].get<double>();
      if (m == 0) {
        require(t > 0.0, ErrorCode::parse,
                "grid points must start at one positive step");
        step = t;
      }
      const double expected = step * static_cast<double>(m + 1);
      require(std::fabs(t - expected) <= 1e-9 * std::max(1.0, expected),
              ErrorCode::parse, "grid points must be equally spaced from 0");
      values.push_back(point[1].get<double>());
    }
    return ExcitementFunction::grid(step, std::move(values));
  }
  fail(ErrorCode::parse, "unknown excitement family '" + family + "'");
}

inline nlohmann::json spec_to_json(const HawkesSpec& spec) {
  nlohmann::json doc;
  const Eigen::Index d = spec.dimension();
  doc["baseline"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < d; ++i) doc["baseline"].push_back(spec.eta()(i));
  doc["excitement"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      auto entry = excitement_to_json(spec.excitement(i, j));
      entry["row"] = i + 1;
      entry["col"] = j + 1;
      doc["excitement"].push_back(std::move(entry));
    }
  }
  return doc;
}

inline HawkesSpec spec_from_json(const nlohmann::json& doc) try {
  const auto& baseline = doc.at("baseline");
  require(baseline.is_array() && !baseline.empty(), ErrorCode::parse,
          "baseline must be a non-empty array");
  const auto d = static_cast<Eigen::Index>(baseline.size());
  Eigen::VectorXd eta(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    eta(i) = baseline[static_cast<std::size_t>(i)].get<double>();
  }
  std::vector<ExcitementFunction> kernels(
      static_cast<std::size_t>(d * d), ExcitementFunction::zero());
  std::vector<bool> seen(static_cast<std::size_t>(d * d), false);
  if (doc.contains("excitement")) {
    for (const auto& entry : doc.at("excitement")) {
      const auto row = entry.at("row").get<Eigen::Index>();
      const auto col = entry.at("col").get<Eigen::Index>();
      require(row >= 1 && row <= d && col >= 1 && col <= d, ErrorCode::parse,
              "excitement entry row/col out of range");
      const auto idx = static_cast<std::size_t>((row - 1) * d + (col - 1));
      require(!seen[idx], ErrorCode::parse,
              "duplicate excitement entry for row " + std::to_string(row) +
                  ", col " + std::to_string(col));
      seen[idx] = true;
      kernels[idx] = excitement_from_json(entry);
    }
  }
  return HawkesSpec(std::move(eta), std::move(kernels));
} catch (const nlohmann::json::exception& e) {
  fail(ErrorCode::parse, std::string("bad model document: ") + e.what());
}

inline void write_spec_json(const std::string& path, const HawkesSpec& spec) {
  write_text_file(path, spec_to_json(spec).dump(2) + "\n");
}

inline nlohmann::json parse_json_text(std::string_view text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, std::string("invalid JSON: ") + e.what());
  }
}

inline HawkesSpec read_spec_json(const std::string& path) {
  return spec_from_json(parse_json_text(read_text_file(path)));
}

inline nlohmann::json fit_to_json(const HawkesFit& fit) {
  nlohmann::json doc;
  doc["delta"] = fit.delta;
  doc["support"] = fit.support;
  doc["p"] = fit.p;
  doc["n"] = fit.n;
  doc["d"] = fit.d;
  doc["dropped_tail"] = fit.dropped_tail;
  doc["condition"] = fit.condition;
  doc["baseline"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < fit.d; ++i) {
    doc["baseline"].push_back(fit.baseline(i));
  }
  doc["excitement"] = nlohmann::json::array();
  for (const auto& block : fit.excitement) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < fit.d; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index j = 0; j < fit.d; ++j) row.push_back(block(i, j));
      rows.push_back(std::move(row));
    }
    doc["excitement"].push_back(std::move(rows));
  }
  if (fit.has_covariance()) {
    nlohmann::json flat = nlohmann::json::array();
    for (Eigen::Index r = 0; r < fit.covariance.rows(); ++r) {
      for (Eigen::Index c = 0; c < fit.covariance.cols(); ++c) {
        flat.push_back(fit.covariance(r, c));
      }
    }
    doc["covariance"] = std::move(flat);
  }
  return doc;
}

inline HawkesFit fit_from_json(const nlohmann::json& doc) try {
  HawkesFit fit;
  fit.delta = doc.at("delta").get<double>();
  fit.support = doc.at("support").get<double>();
  fit.p = doc.at("p").get<Eigen::Index>();
  fit.n = doc.at("n").get<Eigen::Index>();
  fit.d = doc.at("d").get<Eigen::Index>();
  fit.dropped_tail = doc.at("dropped_tail").get<std::size_t>();
  fit.condition = doc.at("condition").get<double>();
  require(fit.d >= 1 && fit.p >= 1 && fit.delta > 0.0, ErrorCode::parse,
          "fit document has inconsistent dimensions");
  const auto& baseline = doc.at("baseline");
  require(static_cast<Eigen::Index>(baseline.size()) == fit.d,
          ErrorCode::parse, "baseline length does not match d");
  fit.baseline.resize(fit.d);
  for (Eigen::Index i = 0; i < fit.d; ++i) {
    fit.baseline(i) = baseline[static_cast<std::size_t>(i)].get<double>();
  }
  const auto& excitement = doc.at("excitement");
  require(static_cast<Eigen::Index>(excitement.size()) == fit.p,
          ErrorCode::parse, "excitement block count does not match p");
  for (const auto& rows : excitement) {
    require(static_cast<Eigen::Index>(rows.size()) == fit.d, ErrorCode::parse,
            "excitement block row count does not match d");
    Eigen::MatrixXd block(fit.d, fit.d);
    for (Eigen::Index i = 0; i < fit.d; ++i) {
      const auto& row = rows[static_cast<std::size_t>(i)];
      require(static_cast<Eigen::Index>(row.size()) == fit.d, ErrorCode::parse,
              "excitement block column count does not match d");
      for (Eigen::Index j = 0; j < fit.d; ++j) {
        block(i, j) = row[static_cast<std::size_t>(j)].get<double>();
      }
    }
    fit.excitement.push_back(std::move(block));
  }
  if (doc.contains("covariance")) {
    const auto& flat = doc.at("covariance");
    const Eigen::Index side = fit.p * fit.d * fit.d + fit.d;
    require(static_cast<Eigen::Index>(flat.size()) == side * side,
            ErrorCode::parse, "covariance length does not match p*d*d + d");
    fit.covariance.resize(side, side);
    for (Eigen::Index r = 0; r < side; ++r) {
      for (Eigen::Index c = 0; c < side; ++c) {
        fit.covariance(r, c) =
            flat[static_cast<std::size_t>(r * side + c)].get<double>();
      }
    }
  }
  return fit;
} catch (const nlohmann::json::exception& e) {
  fail(ErrorCode::parse, std::string("bad fit document: ") + e.what());
}

inline void write_fit_json(const std::string& path, const HawkesFit& fit) {
  write_text_file(path, fit_to_json(fit).dump(2) + "\n");
}

inline HawkesFit read_fit_json(const std::string& path) {
  return fit_from_json(parse_json_text(read_text_file(path)));
}

/// Plot-ready table of the pointwise excitement estimates, one row per lag
/// and component pair; interval columns stay empty when the fit carries no
/// covariance.
inline void write_estimates_csv(std::ostream& out, const HawkesFit& fit,
                                double level = 0.95) {
  out << "t,i,j,estimate,ci_low,ci_high\n";
  for (Eigen::Index k = 1; k <= fit.p; ++k) {
    for (Eigen::Index i = 1; i <= fit.d; ++i) {
      for (Eigen::Index j = 1; j <= fit.d; ++j) {
        out << format_double(fit.delta * static_cast<double>(k)) << ',' << i
            << ',' << j << ','
            << format_double(
                   fit.excitement[static_cast<std::size_t>(k - 1)](i - 1,
                                                                   j - 1));
        if (fit.has_covariance()) {
          const auto ci =
              confidence_interval(fit, ExcitementEntry{k, i, j}, level);
          out << ',' << format_double(ci.lower) << ','
              << format_double(ci.upper);
        } else {
          out << ",,";
        }
        out << '\n';
      }
    }
  }
}

inline void write_estimates_csv(const std::string& path, const HawkesFit& fit,
                                double level = 0.95) {
  std::ostringstream buffer;
  write_estimates_csv(buffer, fit, level);
  write_text_file(path, buffer.str());
}

inline void write_support_scan_csv(std::ostream& out,
                                   const SupportSelection& selection) {
  out << "p,support,aic,feasible\n";
  for (const auto& point : selection.scan) {
    out << point.p << ',' << format_double(point.support) << ',';
    if (point.feasible) out << format_double(point.aic);
    out << ',' << (point.feasible ? 1 : 0) << '\n';
  }
}

inline nlohmann::json support_selection_to_json(
    const SupportSelection& selection) {
  nlohmann::json doc;
  doc["delta0"] = selection.delta0;
  doc["best_p"] = selection.best_p;
  doc["support"] = selection.support;
  return doc;
}

inline void write_bin_size_scan_csv(std::ostream& out,
                                    const BinSizeSelection& selection) {
  out << "delta,p,component,baseline,ci_low,ci_high,usable\n";
  for (const auto& candidate : selection.scan) {
    const auto d = candidate.baseline.size();
    if (!candidate.usable) {
      out << format_double(candidate.delta) << ",,,,,," << 0 << '\n';
      continue;
    }
    for (Eigen::Index i = 0; i < d; ++i) {
      out << format_double(candidate.delta) << ',' << candidate.p << ','
          << (i + 1) << ',' << format_double(candidate.baseline(i)) << ','
          << format_double(candidate.baseline(i) - candidate.half_width(i))
          << ','
          << format_double(candidate.baseline(i) + candidate.half_width(i))
          << ',' << 1 << '\n';
    }
  }
}

inline nlohmann::json bin_size_selection_to_json(
    const BinSizeSelection& selection) {
  nlohmann::json doc;
  doc["has_recommendation"] = selection.has_recommendation;
  if (selection.has_recommendation) doc["recommended"] = selection.recommended;
  doc["trend"] = selection.trend;
  return doc;
}

inline void write_smoothed_csv(std::ostream& out,
                               const SmoothedExcitement& smoothed,
                               const std::vector<double>& grid) {
  out << "t,i,j,value\n";
  for (double t : grid) {
    for (Eigen::Index i = 0; i < smoothed.dimension(); ++i) {
      for (Eigen::Index j = 0; j < smoothed.dimension(); ++j) {
        out << format_double(t) << ',' << (i + 1) << ',' << (j + 1) << ','
            << format_double(smoothed.value(i, j, t)) << '\n';
      }
    }
  }
}

inline nlohmann::json test_result_to_json(const TestResult& result) {
  return {{"statistic", result.statistic}, {"p_value", result.p_value}};
}

inline nlohmann::json diagnostics_to_json(const DiagnosticsReport& report,
                                          bool include_residuals = false) {
  nlohmann::json doc;
  doc["burn_in_time"] = report.burn_in_time;
  doc["lags"] = report.lags;
  doc["components"] = nlohmann::json::array();
  for (std::size_t i = 0; i < report.components.size(); ++i) {
    const auto& comp = report.components[i];
    nlohmann::json entry;
    entry["component"] = i + 1;
    entry["events_used"] = comp.events_used;
    entry["events_discarded"] = comp.events_discarded;
    entry["residual_count"] = comp.residuals.size();
    double mean = 0.0;
    for (double r : comp.residuals) mean += r;
    entry["mean_residual"] = mean / static_cast<double>(comp.residuals.size());
    entry["ks"] = test_result_to_json(comp.ks);
    entry["serial"] = test_result_to_json(comp.serial);
    if (include_residuals) entry["residuals"] = comp.residuals;
    doc["components"].push_back(std::move(entry));
  }
  return doc;
}

inline void write_qq_csv(std::ostream& out, const DiagnosticsReport& report) {
  out << "component,theoretical,empirical\n";
  for (std::size_t i = 0; i < report.components.size(); ++i) {
    for (const auto& point : report.components[i].qq) {
      out << (i + 1) << ',' << format_double(point.theoretical) << ','
          << format_double(point.empirical) << '\n';
    }
  }
}

/// Run sidecar recording what produced an output directory: resolved
/// configuration, library version, and checksums of every input file.
inline nlohmann::json manifest_json(const std::string& command,
                                    const nlohmann::json& config,
                                    const std::vector<std::string>& inputs) {
  nlohmann::json doc;
  doc["tool"] = "hawkesbin";
#ifdef HAWKESBIN_VERSION
  doc["version"] = HAWKESBIN_VERSION;
#else
  doc["version"] = "unknown";
#endif
  doc["command"] = command;
  doc["config"] = config;
  doc["inputs"] = nlohmann::json::array();
  for (const auto& path : inputs) {
    doc["inputs"].push_back(
        {{"path", path}, {"fnv1a64", fnv1a64_hex(read_text_file(path))}});
  }
  return doc;
}

}  // namespace hawkesbin

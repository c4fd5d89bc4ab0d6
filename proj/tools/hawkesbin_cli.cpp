// Command-line front end for the hawkesbin library: simulation, estimation,
// support and bin-width selection, smoothing, diagnostics, and Monte Carlo
// replication. Every command writes its artifacts plus a manifest.json that
// echoes the resolved configuration and checksums of the inputs.
//
// Exit codes: 0 success, 1 usage error, 2 domain failure (unstable spec,
// singular design, failed selection, too few events), 3 I/O or parse failure.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hawkesbin/cls.hpp"
#include "hawkesbin/diagnostics.hpp"
#include "hawkesbin/errors.hpp"
#include "hawkesbin/events.hpp"
#include "hawkesbin/io.hpp"
#include "hawkesbin/model.hpp"
#include "hawkesbin/replication.hpp"
#include "hawkesbin/rng.hpp"
#include "hawkesbin/selection.hpp"
#include "hawkesbin/simulate.hpp"
#include "hawkesbin/smoothing.hpp"

namespace fs = std::filesystem;
using namespace hawkesbin;

namespace {

void write_json_file(const fs::path& path, const nlohmann::json& doc) {
  write_text_file(path.string(), doc.dump(2) + "\n");
}

fs::path ensure_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  require(!ec, ErrorCode::io, "cannot create output directory " + out);
  return {out};
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const nlohmann::json& config,
                    const std::vector<std::string>& inputs) {
  write_json_file(dir / "manifest.json", manifest_json(command, config, inputs));
}

/// Shared flags for commands that read an event stream from CSV.
struct StreamArgs {
  std::string events_path;
  double t_start = 0.0;
  std::optional<double> t_end;
  std::optional<std::size_t> dimension;
};

void add_stream_options(CLI::App* cmd, StreamArgs& args) {
  cmd->add_option("--events", args.events_path,
                  "Event stream CSV with component,time rows (1-based components)")
      ->required();
  cmd->add_option("--t-start", args.t_start,
                  "Observation window start; events at or before it are dropped");
  cmd->add_option("--t-end", args.t_end,
                  "Observation window end (default: last event time)");
  cmd->add_option("--dimension", args.dimension,
                  "Component count (default: largest component seen)");
}

EventStream load_stream(const StreamArgs& args) {
  auto base = read_events_csv(args.events_path, std::nullopt, args.dimension);
  if (args.t_start == 0.0 && !args.t_end) return base;
  const double end = args.t_end ? *args.t_end : base.window().t_end;
  std::vector<std::vector<double>> times(base.dimension());
  for (std::size_t i = 0; i < base.dimension(); ++i) {
    for (double t : base.component(i)) {
      if (t > args.t_start && t <= end) times[i].push_back(t);
    }
  }
  return EventStream(Window{args.t_start, end}, std::move(times));
}

nlohmann::json stream_config(const StreamArgs& args, const EventStream& stream) {
  nlohmann::json doc;
  doc["events"] = args.events_path;
  doc["t_start"] = stream.window().t_start;
  doc["t_end"] = stream.window().t_end;
  doc["dimension"] = stream.dimension();
  return doc;
}

std::vector<double> smoothing_grid(double support, double step) {
  require(step > 0.0, ErrorCode::invalid_parameter,
          "grid step must be positive");
  std::vector<double> grid;
  const auto steps = static_cast<std::size_t>(support / step + 1e-9);
  grid.reserve(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    grid.push_back(step * static_cast<double>(k));
  }
  return grid;
}

nlohmann::json baseline_summary(const HawkesFit& fit, double level) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 1; i <= fit.d; ++i) {
    nlohmann::json row;
    row["component"] = i;
    row["estimate"] = fit.baseline(i - 1);
    if (fit.has_covariance()) {
      const auto ci = confidence_interval(fit, BaselineEntry{i}, level);
      row["ci_low"] = ci.lower;
      row["ci_high"] = ci.upper;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json branching_summary(const HawkesFit& fit, double level) {
  const auto branching = branching_from_fit(fit, level);
  nlohmann::json doc;
  doc["matrix"] = matrix_to_json(branching.K);
  doc["half_width"] = matrix_to_json(branching.half_width);
  doc["spectral_radius"] = branching.spectral_radius;
  doc["stable"] = stability_check({branching.K, branching.spectral_radius}).stable;
  doc["level"] = level;
  return doc;
}

struct SimulateArgs {
  std::string spec_path;
  double t_end = 0.0;
  std::uint64_t seed = 0;
  double burn_in = -1.0;
  std::string out;
};

int run_simulate(const SimulateArgs& args) {
  const auto spec = read_spec_json(args.spec_path);
  const double burn_in =
      args.burn_in < 0.0 ? 10.0 * spec.max_support() : args.burn_in;
  RngStream root(args.seed);
  const auto stream = simulate_hawkes_burned(spec, args.t_end, root, burn_in);

  const auto dir = ensure_out_dir(args.out);
  nlohmann::json config;
  config["spec"] = args.spec_path;
  config["t_end"] = args.t_end;
  config["seed"] = args.seed;
  config["burn_in"] = burn_in;
  write_manifest(dir, "simulate", config, {args.spec_path});
  write_events_csv((dir / "events.csv").string(), stream);
  write_spec_json((dir / "spec.json").string(), spec);

  std::size_t total = 0;
  for (std::size_t i = 0; i < stream.dimension(); ++i) {
    total += stream.component(i).size();
  }
  std::cout << "simulated " << total << " events ("
            << stream.dimension()
            << (stream.dimension() == 1 ? " component" : " components")
            << ") into " << (dir / "events.csv").string() << '\n';
  return 0;
}

struct FitArgs {
  StreamArgs stream;
  std::optional<double> delta;
  std::optional<double> support;
  double level = 0.95;
  bool no_covariance = false;
  std::string storage = "auto";
  bool emit_smoothed = false;
  std::optional<double> tau;
  std::optional<double> grid_step;
  bool auto_support = false;
  std::optional<double> s_max;
  bool auto_binsize = false;
  std::vector<double> deltas;
  unsigned threads = 0;
  std::string out;
};

int run_fit(const FitArgs& args) {
  const auto stream = load_stream(args.stream);
  const auto dir = ensure_out_dir(args.out);

  nlohmann::json config = stream_config(args.stream, stream);
  config["level"] = args.level;
  config["covariance"] = !args.no_covariance;
  config["storage"] = args.storage;
  if (args.delta) config["delta"] = *args.delta;
  if (args.support) config["support"] = *args.support;
  if (args.auto_support) config["s_max"] = *args.s_max;
  if (args.auto_binsize) config["deltas"] = args.deltas;
  if (args.emit_smoothed) {
    config["tau"] = *args.tau;
    config["grid_step"] = args.grid_step ? *args.grid_step : 0.0;
  }
  write_manifest(dir, "fit", config, {args.stream.events_path});

  nlohmann::json selection_info;
  double delta = 0.0;
  if (args.auto_binsize) {
    auto deltas = args.deltas;
    std::sort(deltas.begin(), deltas.end(), std::greater<>());
    const auto chosen =
        select_bin_size(stream, *args.support, deltas, args.level, args.threads);
    std::ostringstream scan;
    write_bin_size_scan_csv(scan, chosen);
    write_text_file((dir / "binsize_scan.csv").string(), scan.str());
    write_json_file(dir / "binsize_selection.json",
                    bin_size_selection_to_json(chosen));
    require(chosen.has_recommendation, ErrorCode::selection_failed,
            "no stabilization point among the candidate bin widths; scan "
            "written to binsize_scan.csv");
    delta = chosen.recommended;
    selection_info["binsize"] = bin_size_selection_to_json(chosen);
  } else {
    delta = *args.delta;
  }

  double support = 0.0;
  if (args.auto_support) {
    const auto bc = bin_counts(stream, delta);
    auto scan = support_scan(bc, *args.s_max);
    SupportSelection preview;
    preview.scan = scan;
    preview.delta0 = delta;
    std::ostringstream text;
    write_support_scan_csv(text, preview);
    write_text_file((dir / "support_scan.csv").string(), text.str());
    const auto chosen = selection_from_scan(std::move(scan), delta);
    write_json_file(dir / "support_selection.json",
                    support_selection_to_json(chosen));
    support = chosen.support;
    selection_info["support"] = support_selection_to_json(chosen);
  } else {
    support = *args.support;
  }

  EstimatorOptions options;
  options.compute_covariance = !args.no_covariance;
  if (args.storage == "dense") {
    options.storage = EstimatorOptions::Storage::dense;
  } else if (args.storage == "sparse") {
    options.storage = EstimatorOptions::Storage::sparse;
  }
  const auto fit = hawkes_estimator(stream, delta, support, options);

  write_fit_json((dir / "fit.json").string(), fit);
  write_estimates_csv((dir / "estimates.csv").string(), fit, args.level);

  nlohmann::json summary;
  summary["delta"] = fit.delta;
  summary["support"] = fit.support;
  summary["p"] = fit.p;
  summary["d"] = fit.d;
  summary["bins"] = fit.n;
  summary["window"] = {{"t_start", stream.window().t_start},
                       {"t_end", stream.window().t_end}};
  auto counts = nlohmann::json::array();
  for (std::size_t i = 0; i < stream.dimension(); ++i) {
    counts.push_back(stream.component(i).size());
  }
  summary["events"] = counts;
  summary["baseline"] = baseline_summary(fit, args.level);
  summary["branching"] = branching_summary(fit, args.level);
  if (!selection_info.empty()) summary["selection"] = selection_info;
  write_json_file(dir / "summary.json", summary);

  if (args.emit_smoothed) {
    const auto smoothed = box_smooth(fit, *args.tau);
    const double step = args.grid_step ? *args.grid_step : fit.delta;
    std::ostringstream text;
    write_smoothed_csv(text, smoothed, smoothing_grid(smoothed.support(), step));
    write_text_file((dir / "smoothed.csv").string(), text.str());
  }

  std::cout << "fitted d=" << fit.d << " p=" << fit.p << " delta="
            << format_double(fit.delta) << " support="
            << format_double(fit.support) << " into " << dir.string() << '\n';
  return 0;
}

struct SelectSupportArgs {
  StreamArgs stream;
  double delta0 = 0.0;
  double s_max = 0.0;
  std::string out;
};

int run_select_support(const SelectSupportArgs& args) {
  const auto stream = load_stream(args.stream);
  const auto dir = ensure_out_dir(args.out);

  nlohmann::json config = stream_config(args.stream, stream);
  config["delta0"] = args.delta0;
  config["s_max"] = args.s_max;
  write_manifest(dir, "select-support", config, {args.stream.events_path});

  const auto bc = bin_counts(stream, args.delta0);
  auto scan = support_scan(bc, args.s_max);
  SupportSelection preview;
  preview.scan = scan;
  preview.delta0 = args.delta0;
  std::ostringstream text;
  write_support_scan_csv(text, preview);
  write_text_file((dir / "support_scan.csv").string(), text.str());

  const auto chosen = selection_from_scan(std::move(scan), args.delta0);
  write_json_file(dir / "support_selection.json",
                  support_selection_to_json(chosen));
  std::cout << "selected support " << format_double(chosen.support) << " (p="
            << chosen.best_p << ") at delta0 " << format_double(args.delta0)
            << '\n';
  return 0;
}

struct SelectBinSizeArgs {
  StreamArgs stream;
  double support = 0.0;
  std::vector<double> deltas;
  double level = 0.95;
  unsigned threads = 0;
  std::string out;
};

int run_select_binsize(const SelectBinSizeArgs& args) {
  const auto stream = load_stream(args.stream);
  const auto dir = ensure_out_dir(args.out);

  auto deltas = args.deltas;
  std::sort(deltas.begin(), deltas.end(), std::greater<>());

  nlohmann::json config = stream_config(args.stream, stream);
  config["support"] = args.support;
  config["deltas"] = deltas;
  config["level"] = args.level;
  write_manifest(dir, "select-binsize", config, {args.stream.events_path});

  const auto chosen =
      select_bin_size(stream, args.support, deltas, args.level, args.threads);
  std::ostringstream text;
  write_bin_size_scan_csv(text, chosen);
  write_text_file((dir / "binsize_scan.csv").string(), text.str());
  write_json_file(dir / "binsize_selection.json",
                  bin_size_selection_to_json(chosen));
  require(chosen.has_recommendation, ErrorCode::selection_failed,
          "baseline estimates never stabilize across the candidate widths; "
          "scan written to binsize_scan.csv");
  std::cout << "selected bin width " << format_double(chosen.recommended)
            << '\n';
  return 0;
}

struct SmoothArgs {
  std::string fit_path;
  double tau = 0.0;
  std::optional<double> grid_step;
  std::string out;
};

int run_smooth(const SmoothArgs& args) {
  const auto fit = read_fit_json(args.fit_path);
  const auto smoothed = box_smooth(fit, args.tau);
  const double step = args.grid_step ? *args.grid_step : fit.delta;

  const auto dir = ensure_out_dir(args.out);
  nlohmann::json config;
  config["fit"] = args.fit_path;
  config["tau"] = args.tau;
  config["grid_step"] = step;
  write_manifest(dir, "smooth", config, {args.fit_path});

  std::ostringstream text;
  write_smoothed_csv(text, smoothed, smoothing_grid(smoothed.support(), step));
  write_text_file((dir / "smoothed.csv").string(), text.str());
  std::cout << "smoothed excitement written to "
            << (dir / "smoothed.csv").string() << '\n';
  return 0;
}

struct DiagnoseArgs {
  StreamArgs stream;
  std::string fit_path;
  std::string spec_path;
  std::optional<double> tau;
  int lags = 20;
  std::optional<std::size_t> chunk;
  bool include_residuals = false;
  std::string out;
};

int run_diagnose(const DiagnoseArgs& args) {
  const auto stream = load_stream(args.stream);
  const auto dir = ensure_out_dir(args.out);

  nlohmann::json config = stream_config(args.stream, stream);
  if (!args.fit_path.empty()) config["fit"] = args.fit_path;
  if (!args.spec_path.empty()) config["spec"] = args.spec_path;
  if (args.tau) config["tau"] = *args.tau;
  config["lags"] = args.lags;
  if (args.chunk) config["chunk"] = *args.chunk;
  std::vector<std::string> inputs = {args.stream.events_path};
  inputs.push_back(args.fit_path.empty() ? args.spec_path : args.fit_path);
  write_manifest(dir, "diagnose", config, inputs);

  IntensityModel model = [&] {
    if (!args.fit_path.empty()) {
      const auto fit = read_fit_json(args.fit_path);
      if (args.tau) return intensity_model(fit.baseline, box_smooth(fit, *args.tau));
      return intensity_model(fit);
    }
    return intensity_model(read_spec_json(args.spec_path));
  }();

  const auto report = diagnose(stream, model, args.lags);
  auto doc = diagnostics_to_json(report, args.include_residuals);
  if (args.chunk) {
    doc["chunk"] = *args.chunk;
    for (std::size_t i = 0; i < report.components.size(); ++i) {
      auto chunks = nlohmann::json::array();
      for (const auto& piece :
           chunked_ks(report.components[i].residuals, *args.chunk)) {
        chunks.push_back(test_result_to_json(piece));
      }
      doc["components"][i]["chunks"] = std::move(chunks);
    }
  }
  write_json_file(dir / "diagnostics.json", doc);
  std::ostringstream text;
  write_qq_csv(text, report);
  write_text_file((dir / "qq.csv").string(), text.str());

  for (std::size_t i = 0; i < report.components.size(); ++i) {
    const auto& comp = report.components[i];
    std::cout << "component " << (i + 1) << ": ks p="
              << format_double(comp.ks.p_value) << " serial p="
              << format_double(comp.serial.p_value) << " residuals="
              << comp.residuals.size() << '\n';
  }
  return 0;
}

struct ReplicateArgs {
  std::string spec_path;
  double t_end = 0.0;
  double burn_in = -1.0;
  double delta = 0.0;
  double support = 0.0;
  int replications = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> target_texts;
  double level = 0.95;
  unsigned threads = 0;
  std::string out;
};

int run_replicate(const ReplicateArgs& args) {
  const auto spec = read_spec_json(args.spec_path);
  const double burn_in =
      args.burn_in < 0.0 ? 10.0 * spec.max_support() : args.burn_in;
  std::vector<ReplicationTarget> targets;
  targets.reserve(args.target_texts.size());
  for (const auto& text : args.target_texts) {
    targets.push_back(parse_replication_target(text));
  }

  const auto dir = ensure_out_dir(args.out);
  nlohmann::json config;
  config["spec"] = args.spec_path;
  config["t_end"] = args.t_end;
  config["burn_in"] = burn_in;
  config["delta"] = args.delta;
  config["support"] = args.support;
  config["replications"] = args.replications;
  config["seed"] = args.seed;
  config["targets"] = args.target_texts;
  config["level"] = args.level;
  write_manifest(dir, "replicate", config, {args.spec_path});

  const auto result =
      replicate(spec, args.t_end, burn_in, args.delta, args.support, targets,
                args.replications, RandomSource{args.seed}, args.level,
                args.threads);

  std::ostringstream csv;
  csv << "rep,target,estimate,ci_low,ci_high\n";
  for (std::size_t rep = 0; rep < result.per_rep.size(); ++rep) {
    const auto& slot = result.per_rep[rep];
    for (std::size_t t = 0; t < targets.size(); ++t) {
      csv << (rep + 1) << ',' << targets[t].label() << ',';
      if (!slot.empty()) {
        csv << format_double(slot[t].estimate) << ','
            << format_double(slot[t].lower) << ','
            << format_double(slot[t].upper);
      } else {
        csv << ",,";
      }
      csv << '\n';
    }
  }
  write_text_file((dir / "replication.csv").string(), csv.str());

  nlohmann::json doc;
  doc["replications"] = result.replications;
  doc["failures"] = result.failures;
  doc["level"] = args.level;
  doc["delta"] = args.delta;
  doc["support"] = args.support;
  auto rows = nlohmann::json::array();
  for (const auto& summary : result.summaries) {
    nlohmann::json row;
    row["target"] = summary.target.label();
    row["truth"] = summary.truth;
    row["mean_estimate"] = summary.mean_estimate;
    row["empirical_variance"] = summary.empirical_variance;
    row["mean_estimated_variance"] = summary.mean_estimated_variance;
    row["coverage"] = summary.coverage;
    row["covered"] = summary.covered;
    rows.push_back(std::move(row));
  }
  doc["targets"] = rows;
  write_json_file(dir / "replication.json", doc);

  for (const auto& summary : result.summaries) {
    std::cout << summary.target.label() << ": mean="
              << format_double(summary.mean_estimate) << " coverage="
              << format_double(summary.coverage) << '\n';
  }
  if (result.failures > 0) {
    std::cout << result.failures << " of " << result.replications
              << " replications failed to fit\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonparametric Hawkes process estimation from binned event streams"};
  app.set_version_flag("--version", HAWKESBIN_VERSION);
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate_cmd =
      app.add_subcommand("simulate", "Draw one Hawkes sample from a spec JSON");
  simulate_cmd->add_option("--spec", sim.spec_path, "Model spec JSON")->required();
  simulate_cmd->add_option("--T", sim.t_end, "Window length")
      ->required()
      ->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--seed", sim.seed, "Generator seed")->required();
  simulate_cmd->add_option("--burn-in", sim.burn_in,
                           "Warm-up length dropped from the front (default: 10x "
                           "the largest support)");
  simulate_cmd->add_option("--out", sim.out, "Output directory")->required();
  simulate_cmd->callback([&sim] { run_simulate(sim); });

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand(
      "fit", "Estimate excitement and baseline from an event stream");
  add_stream_options(fit_cmd, fit.stream);
  auto* fit_delta = fit_cmd->add_option("--delta", fit.delta, "Bin width")
                        ->check(CLI::PositiveNumber);
  auto* fit_support =
      fit_cmd->add_option("--support", fit.support, "Excitement support")
          ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--level", fit.level, "Confidence level (default 0.95)")
      ->check(CLI::Range(1e-12, 1.0 - 1e-12));
  fit_cmd->add_flag("--no-covariance", fit.no_covariance,
                    "Skip the sandwich covariance");
  fit_cmd->add_option("--storage", fit.storage,
                      "Design matrix storage: auto, dense, or sparse")
      ->check(CLI::IsMember({"auto", "dense", "sparse"}));
  auto* fit_emit = fit_cmd->add_flag("--emit-smoothed", fit.emit_smoothed,
                                     "Also write a box-smoothed curve CSV");
  auto* fit_tau = fit_cmd->add_option("--tau", fit.tau, "Smoothing half-width")
                      ->check(CLI::PositiveNumber);
  fit_emit->needs(fit_tau);
  fit_tau->needs(fit_emit);
  fit_cmd->add_option("--grid-step", fit.grid_step,
                      "Sampling step for the smoothed curve (default: delta)")
      ->check(CLI::PositiveNumber)
      ->needs(fit_emit);
  auto* fit_auto_support = fit_cmd->add_flag(
      "--auto-support", fit.auto_support, "Pick the support by the lag scan");
  auto* fit_smax =
      fit_cmd->add_option("--s-max", fit.s_max, "Largest support to scan")
          ->check(CLI::PositiveNumber);
  fit_auto_support->needs(fit_smax);
  fit_auto_support->excludes(fit_support);
  auto* fit_auto_binsize =
      fit_cmd->add_flag("--auto-binsize", fit.auto_binsize,
                        "Pick the bin width by the stabilization scan");
  auto* fit_deltas = fit_cmd->add_option(
      "--deltas", fit.deltas, "Candidate bin widths for --auto-binsize");
  fit_deltas->delimiter(',');
  fit_auto_binsize->needs(fit_deltas);
  fit_auto_binsize->needs(fit_support);
  fit_auto_binsize->excludes(fit_delta);
  fit_auto_binsize->excludes(fit_auto_support);
  fit_cmd->add_option("--threads", fit.threads,
                      "Worker threads for the bin-width scan (0: automatic)");
  fit_cmd->add_option("--out", fit.out, "Output directory")->required();
  fit_cmd->callback([&fit, fit_delta, fit_support] {
    if (fit_delta->count() == 0 && !fit.auto_binsize) {
      throw CLI::RequiredError("--delta (or --auto-binsize)");
    }
    if (fit_support->count() == 0 && !fit.auto_support) {
      throw CLI::RequiredError("--support (or --auto-support)");
    }
    run_fit(fit);
  });

  SelectSupportArgs sel_support;
  auto* support_cmd = app.add_subcommand(
      "select-support", "Scan lag orders and pick the support by AIC");
  add_stream_options(support_cmd, sel_support.stream);
  support_cmd
      ->add_option("--delta0", sel_support.delta0, "Coarse bin width for the scan")
      ->required()
      ->check(CLI::PositiveNumber);
  support_cmd->add_option("--s-max", sel_support.s_max, "Largest support to scan")
      ->required()
      ->check(CLI::PositiveNumber);
  support_cmd->add_option("--out", sel_support.out, "Output directory")->required();
  support_cmd->callback([&sel_support] { run_select_support(sel_support); });

  SelectBinSizeArgs sel_binsize;
  auto* binsize_cmd = app.add_subcommand(
      "select-binsize", "Scan bin widths and pick one by baseline stabilization");
  add_stream_options(binsize_cmd, sel_binsize.stream);
  binsize_cmd->add_option("--support", sel_binsize.support, "Excitement support")
      ->required()
      ->check(CLI::PositiveNumber);
  binsize_cmd
      ->add_option("--deltas", sel_binsize.deltas,
                   "Candidate bin widths, scanned from largest to smallest")
      ->required()
      ->delimiter(',');
  binsize_cmd
      ->add_option("--level", sel_binsize.level, "Confidence level (default 0.95)")
      ->check(CLI::Range(1e-12, 1.0 - 1e-12));
  binsize_cmd->add_option("--threads", sel_binsize.threads,
                          "Worker threads (0: automatic)");
  binsize_cmd->add_option("--out", sel_binsize.out, "Output directory")->required();
  binsize_cmd->callback([&sel_binsize] { run_select_binsize(sel_binsize); });

  SmoothArgs smooth;
  auto* smooth_cmd = app.add_subcommand(
      "smooth", "Box-smooth a fitted excitement grid onto a regular time grid");
  smooth_cmd->add_option("--fit", smooth.fit_path, "Fit JSON")->required();
  smooth_cmd->add_option("--tau", smooth.tau, "Smoothing half-width")
      ->required()
      ->check(CLI::PositiveNumber);
  smooth_cmd
      ->add_option("--grid-step", smooth.grid_step,
                   "Sampling step (default: the fit's bin width)")
      ->check(CLI::PositiveNumber);
  smooth_cmd->add_option("--out", smooth.out, "Output directory")->required();
  smooth_cmd->callback([&smooth] { run_smooth(smooth); });

  DiagnoseArgs diag;
  auto* diag_cmd = app.add_subcommand(
      "diagnose", "Time-change residual tests against a fitted or known model");
  add_stream_options(diag_cmd, diag.stream);
  auto* diag_fit = diag_cmd->add_option("--fit", diag.fit_path, "Fit JSON");
  auto* diag_spec = diag_cmd->add_option("--spec", diag.spec_path, "Model spec JSON");
  diag_fit->excludes(diag_spec);
  diag_cmd->add_option("--tau", diag.tau,
                       "Box-smooth the fitted excitement before evaluating")
      ->check(CLI::PositiveNumber)
      ->needs(diag_fit);
  diag_cmd->add_option("--lags", diag.lags,
                       "Autocorrelation lags for the serial test (default 20)")
      ->check(CLI::PositiveNumber);
  diag_cmd->add_option("--chunk", diag.chunk,
                       "Also test consecutive residual chunks of this size");
  diag_cmd->add_flag("--include-residuals", diag.include_residuals,
                     "Embed raw residual sequences in the report");
  diag_cmd->add_option("--out", diag.out, "Output directory")->required();
  diag_cmd->callback([&diag, diag_fit, diag_spec] {
    if (diag_fit->count() == 0 && diag_spec->count() == 0) {
      throw CLI::RequiredError("--fit or --spec");
    }
    run_diagnose(diag);
  });

  ReplicateArgs rep;
  auto* rep_cmd = app.add_subcommand(
      "replicate", "Simulate-and-fit Monte Carlo sweep tracking chosen targets");
  rep_cmd->add_option("--spec", rep.spec_path, "Model spec JSON")->required();
  rep_cmd->add_option("--T", rep.t_end, "Window length per replication")
      ->required()
      ->check(CLI::PositiveNumber);
  rep_cmd->add_option("--burn-in", rep.burn_in,
                      "Warm-up length per replication (default: 10x the largest "
                      "support)");
  rep_cmd->add_option("--delta", rep.delta, "Bin width")
      ->required()
      ->check(CLI::PositiveNumber);
  rep_cmd->add_option("--support", rep.support, "Excitement support")
      ->required()
      ->check(CLI::PositiveNumber);
  rep_cmd->add_option("--reps", rep.replications, "Number of replications")
      ->required()
      ->check(CLI::PositiveNumber);
  rep_cmd->add_option("--seed", rep.seed, "Generator seed")->required();
  rep_cmd
      ->add_option("--target", rep.target_texts,
                   "Tracked quantity, 'eta:i' or 'h:k,i,j' (repeatable)")
      ->required()
      ->take_all();
  rep_cmd->add_option("--level", rep.level, "Confidence level (default 0.95)")
      ->check(CLI::Range(1e-12, 1.0 - 1e-12));
  rep_cmd->add_option("--threads", rep.threads, "Worker threads (0: automatic)");
  rep_cmd->add_option("--out", rep.out, "Output directory")->required();
  rep_cmd->callback([&rep] {
    for (const auto& text : rep.target_texts) {
      try {
        parse_replication_target(text);
      } catch (const Error& e) {
        throw CLI::ValidationError("--target", e.what());
      }
    }
    run_replicate(rep);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return (e.code() == ErrorCode::io || e.code() == ErrorCode::parse) ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

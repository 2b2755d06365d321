#include "locfuse/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "locfuse/config.hpp"
#include "locfuse/errors.hpp"
#include "locfuse/measurement.hpp"
#include "locfuse/random.hpp"
#include "locfuse/signal.hpp"

namespace locfuse {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json stats_to_json(const ErrorStats& s) {
  json pct = json::object();
  for (const auto& [q, v] : s.percentiles) pct[fmt::format("p{:g}", q * 100.0)] = v;
  return json{{"count", s.count}, {"median", s.median}, {"mean", s.mean},
              {"rmse", s.rmse},   {"max", s.max},       {"percentiles", pct}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json run_summary(const std::vector<RunResult>& runs) {
  json per_run = json::array();
  for (const RunResult& r : runs) {
    per_run.push_back(json{{"seed", r.seed},
                           {"epochs", r.epochs},
                           {"convergence_epoch", r.convergence_epoch ? json(*r.convergence_epoch) : json(nullptr)},
                           {"measurements_total", r.measurements_total},
                           {"measurements_used", r.measurements_used},
                           {"measurements_gated", r.measurements_gated},
                           {"init_diagnostics", r.init_diagnostics}});
  }
  return per_run;
}

json pooled_json(const std::vector<RunResult>& runs) {
  return json{{"all", report_to_json(pooled_report(runs, NodeClass::all))},
              {"targets", report_to_json(pooled_report(runs, NodeClass::targets))},
              {"anchors", report_to_json(pooled_report(runs, NodeClass::anchors))}};
}

std::string to_csv(const std::vector<RunResult>& runs) {
  std::ostringstream ss;
  write_cdf_csv(ss, runs);
  return ss.str();
}

json measure_bench(const ExperimentConfig& config, const CommandOptions& options) {
  const BeamCodebook codebook = config.signal.codebook();
  const double fov = config.signal.codebook_half_fov_deg * std::numbers::pi / 180.0;
  Rng rng(derive_seed(config.seed, {stream::bench}));
  std::uniform_real_distribution<double> angle(-fov, fov);

  std::vector<double> az_err, el_err;
  std::size_t edge = 0;
  for (std::size_t i = 0; i < options.samples; ++i) {
    const double az = angle(rng), el = angle(rng);
    const auto powers = beam_rsrp(config.signal.array, codebook, az, el, options.bench_snr_db, rng);
    const AngleEstimate est = beam_sweep_aoa(powers, codebook, config.signal.array);
    if (est.az_on_edge || est.el_on_edge) ++edge;
    az_err.push_back(std::abs(wrap_angle(est.azimuth - az)) * 180.0 / std::numbers::pi);
    el_err.push_back(std::abs(est.elevation - el) * 180.0 / std::numbers::pi);
  }
  std::sort(az_err.begin(), az_err.end());
  std::sort(el_err.begin(), el_err.end());

  const OfdmConfig& ofdm = config.signal.ofdm;
  std::uniform_real_distribution<double> range(5.0, 60.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const std::size_t toa_trials = std::min<std::size_t>(options.samples, 200);
  std::vector<double> single_err, two_path_err;
  for (std::size_t i = 0; i < toa_trials; ++i) {
    const double d = range(rng);
    PathList single{{Path{d / kSpeedOfLight}}, true};
    single_err.push_back(std::abs(ofdm_toa(ofdm_cfr(single, ofdm), ofdm) * kSpeedOfLight - d));
    PathList two{{Path{d / kSpeedOfLight}, Path{(d + 3.1) / kSpeedOfLight, std::polar(1.0, phase(rng))}}, true};
    two_path_err.push_back(std::abs(ofdm_toa(ofdm_cfr(two, ofdm), ofdm) * kSpeedOfLight - d));
  }
  std::sort(single_err.begin(), single_err.end());
  std::sort(two_path_err.begin(), two_path_err.end());

  return json{{"samples", options.samples},
              {"snr_db", options.bench_snr_db},
              {"aoa",
               {{"azimuth_p95_deg", percentile_sorted(az_err, 0.95)},
                {"elevation_p95_deg", percentile_sorted(el_err, 0.95)},
                {"azimuth_median_deg", percentile_sorted(az_err, 0.5)},
                {"elevation_median_deg", percentile_sorted(el_err, 0.5)},
                {"edge_fraction", static_cast<double>(edge) / static_cast<double>(options.samples)}}},
              {"toa",
               {{"trials", toa_trials},
                {"single_path_max_err_m", single_err.back()},
                {"two_path_3_1m_max_err_m", two_path_err.back()},
                {"two_path_3_1m_median_err_m", percentile_sorted(two_path_err, 0.5)}}}};
}

const std::vector<std::pair<std::string, std::string>> kCommands = {
    {"simulate", "Monte Carlo runs of one scenario"},
    {"sweep", "P(3D < 1 m) over an anchor/target count grid"},
    {"geometry-compare", "Collinear vs non-collinear anchor layouts"},
    {"measure-bench", "AoA and ToA estimator error statistics"}};

void write_outputs(const fs::path& dir, const std::vector<std::pair<std::string, std::string>>& files) {
  std::vector<fs::path> written;
  try {
    fs::create_directories(dir);
    for (const auto& [name, content] : files) {
      const fs::path p = dir / name;
      std::ofstream out(p, std::ios::binary);
      if (!out) throw StateError("cannot write '" + p.string() + "'");
      written.push_back(p);
      out << content;
      out.close();
      if (!out) throw StateError("cannot write '" + p.string() + "'");
    }
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    throw;
  }
}

void error_line(std::ostream& err, const std::string& kind, const std::string& message) {
  err << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

json report_to_json(const MetricsReport& r) {
  return json{{"horizontal", stats_to_json(r.horizontal)},
              {"vertical", stats_to_json(r.vertical)},
              {"spatial", stats_to_json(r.spatial)},
              {"p_2d_below_1m", r.p_2d_below_1m},
              {"p_vertical_below_0_2m", r.p_vertical_below_0_2m},
              {"p_3d_below_1m", r.p_3d_below_1m}};
}

json make_manifest(const std::string& command, const ExperimentConfig& config, const CommandOptions& options) {
  json opts = json::object();
  if (command == "measure-bench") opts = json{{"samples", options.samples}, {"snr_db", options.bench_snr_db}};
  return json{{"format", kManifestFormat},
              {"command", command},
              {"seed", config.seed},
              {"config", config_to_json(config)},
              {"options", opts}};
}

std::vector<std::pair<std::string, std::string>> execute_command(const std::string& command,
                                                                 const ExperimentConfig& config,
                                                                 const CommandOptions& options) {
  config.validate();
  std::vector<std::pair<std::string, std::string>> files;
  if (command == "simulate") {
    const auto runs = run_monte_carlo(config, RunOptions{true});
    std::ostringstream trace;
    write_trace_csv(trace, runs.front());
    files.emplace_back("trace.csv", trace.str());
    files.emplace_back("cdf.csv", to_csv(runs));
    json summary{{"command", command},
                 {"seed", config.seed},
                 {"runs", runs.size()},
                 {"burn_in_epochs", config.burn_in_epochs()},
                 {"metrics", pooled_json(runs)},
                 {"per_run", run_summary(runs)}};
    files.emplace_back("summary.json", dump(summary));
  } else if (command == "sweep") {
    const auto cells = sweep(config, config.sweep);
    std::ostringstream ss;
    write_sweep_csv(ss, cells);
    files.emplace_back("sweep.csv", ss.str());
  } else if (command == "geometry-compare") {
    const GeometryComparison cmp = compare_geometries(config);
    files.emplace_back("cdf_collinear.csv", to_csv(cmp.collinear_runs));
    files.emplace_back("cdf_noncollinear.csv", to_csv(cmp.noncollinear_runs));
    json summary{{"command", command},
                 {"seed", config.seed},
                 {"runs", cmp.collinear_runs.size()},
                 {"burn_in_epochs", config.burn_in_epochs()},
                 {"collinear", pooled_json(cmp.collinear_runs)},
                 {"noncollinear", pooled_json(cmp.noncollinear_runs)}};
    files.emplace_back("summary.json", dump(summary));
  } else if (command == "measure-bench") {
    if (options.samples == 0) throw DomainError("samples must be positive");
    files.emplace_back("bench.json", dump(measure_bench(config, options)));
  } else {
    throw ParseError("unknown command '" + command + "'");
  }
  files.emplace_back("manifest.json", dump(make_manifest(command, config, options)));
  return files;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint anchor/target localization simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::optional<std::string> mode, measurement_set;
  std::optional<std::size_t> runs;
  std::optional<double> snr_db;
  CommandOptions options;

  std::vector<CLI::App*> experiment_cmds;
  for (const auto& [name, help] : kCommands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config or manifest")->required();
    sub->add_option("--seed", seed);
    sub->add_option("--out-dir", out_dir);
    sub->add_option("--mode", mode)->check(CLI::IsMember({"statistical", "signal"}));
    sub->add_option("--measurement-set", measurement_set)
        ->check(CLI::IsMember({"toa", "tdoa", "aoa", "toa+aoa", "tdoa+aoa"}));
    sub->add_option("--runs", runs);
    sub->add_option("--snr-db", snr_db);
    if (name == "measure-bench") sub->add_option("--samples", options.samples);
    experiment_cmds.push_back(sub);
  }
  double p = 0.95, bound = 0.2;
  CLI::App* calibrate = app.add_subcommand("calibrate", "Noise sigma for a central probability bound");
  calibrate->add_option("--p", p);
  calibrate->add_option("--bound", bound);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    error_line(err, "usage_error", e.what());
    return 2;
  }

  try {
    if (calibrate->parsed()) {
      out << fmt::format("{:.5g}\n", calibrate_sigma(p, bound));
      return 0;
    }
    const CLI::App* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();

    ExperimentConfig config = parse_config(config_path);
    if (command == "measure-bench") {
      std::ifstream in(config_path);
      json doc = json::parse(in, nullptr, false);
      if (doc.is_object() && doc.value("format", "") == kManifestFormat && doc.contains("options")) {
        const json& o = doc["options"];
        if (sub->count("--samples") == 0 && o.contains("samples")) options.samples = o["samples"].get<std::size_t>();
        if (!snr_db && o.contains("snr_db")) options.bench_snr_db = o["snr_db"].get<double>();
      }
      if (snr_db) options.bench_snr_db = *snr_db;
    } else if (snr_db) {
      config.signal.snr_db = *snr_db;
    }
    if (seed) config.seed = *seed;
    if (mode) config.mode = *mode == "signal" ? SynthesisMode::signal : SynthesisMode::statistical;
    if (measurement_set) {
      const json j = *measurement_set;
      json doc = config_to_json(config);
      doc["measurement_set"] = j;
      config = config_from_json(doc);
    }
    if (runs) {
      if (command == "sweep") {
        config.sweep.runs = *runs;
      } else {
        config.monte_carlo_runs = *runs;
      }
    }

    write_outputs(out_dir, execute_command(command, config, options));
    return 0;
  } catch (const Error& e) {
    error_line(err, e.kind(), e.what());
  } catch (const std::exception& e) {
    error_line(err, "internal_error", e.what());
  }
  return 1;
}

}  // namespace locfuse

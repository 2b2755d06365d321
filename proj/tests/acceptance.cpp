// Acceptance run: one PASS/FAIL line per criterion, plus informational lines.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <Eigen/Geometry>
#include <fmt/core.h>
#include <fmt/ranges.h>

#include "locfuse/cli.hpp"
#include "locfuse/config.hpp"
#include "locfuse/errors.hpp"
#include "locfuse/experiment.hpp"
#include "locfuse/fusion.hpp"
#include "locfuse/measurement.hpp"
#include "locfuse/random.hpp"

using namespace locfuse;
namespace fs = std::filesystem;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr std::size_t kSeeds = 20;

int failures = 0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void verdict(int id, bool pass, double runtime, double limit, const std::string& detail) {
  const bool in_time = limit <= 0.0 || runtime <= limit;
  const bool ok = pass && in_time;
  if (!ok) ++failures;
  fmt::print("criterion {:>2}: {} | {} | runtime {:.1f} s{}\n", id, ok ? "PASS" : "FAIL", detail, runtime,
             limit > 0.0 ? fmt::format(" (limit {:.0f} s)", limit) : "");
  std::fflush(stdout);
}

void info(const std::string& text) {
  fmt::print("info: {}\n", text);
  std::fflush(stdout);
}

ExperimentConfig base(std::size_t anchors, std::size_t targets, MeasurementSet set) {
  ExperimentConfig c;
  c.anchors = anchors;
  c.targets = targets;
  c.measurement_set = set;
  c.monte_carlo_runs = kSeeds;
  c.seed = 1000;
  return c;
}

double rmse(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

JointState state_with(const std::vector<Point3>& targets, const std::vector<Point3>& anchors) {
  JointState s(targets.size(), anchors.size());
  for (std::size_t t = 0; t < targets.size(); ++t) s.mean.segment<3>(s.target_offset(t)) = targets[t];
  for (std::size_t a = 0; a < anchors.size(); ++a) s.mean.segment<3>(s.anchor_offset(a)) = anchors[a];
  return s;
}

void criterion_1() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(1, {101}));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const MeasurementKind kinds[] = {MeasurementKind::toa, MeasurementKind::tdoa, MeasurementKind::aoa_az,
                                   MeasurementKind::aoa_el};
  const double h = 1e-6;
  double worst = 0.0;
  int geometries = 0;
  while (geometries < 100) {
    const Point3 t(70 * u(rng), 25 * u(rng), 18 * u(rng));
    const Point3 a(70 * u(rng), 25 * u(rng), 18 * u(rng));
    const Point3 r(70 * u(rng), 25 * u(rng), 18 * u(rng));
    if ((t - a).norm() < 1.0 || (t - r).norm() < 1.0) continue;
    JointState s = state_with({t}, {a, r});
    const Orientation o = Eigen::AngleAxisd(2 * std::numbers::pi * u(rng), Point3::UnitZ()).toRotationMatrix();
    s.set_orientation(0, o);
    const Point3 d = o.transpose() * (t - a);
    if (std::abs(std::atan2(d.y(), d.x())) > 3.0 || std::hypot(d.x(), d.y()) < 0.2 * d.norm()) continue;
    ++geometries;
    for (MeasurementKind k : kinds) {
      const std::size_t ref = k == MeasurementKind::tdoa ? 1 : kNoAnchor;
      const Eigen::RowVectorXd analytic = jacobian(k, s, 0, 0, ref).dense(s.dim());
      Eigen::RowVectorXd numeric = Eigen::RowVectorXd::Zero(s.dim());
      for (Eigen::Index i = 0; i < s.dim(); ++i) {
        JointState plus = s, minus = s;
        plus.mean(i) += h;
        minus.mean(i) -= h;
        numeric(i) = (h_model(k, plus, 0, 0, ref) - h_model(k, minus, 0, 0, ref)) / (2 * h);
      }
      worst = std::max(worst, (analytic - numeric).lpNorm<Eigen::Infinity>() / numeric.lpNorm<Eigen::Infinity>());
    }
  }
  verdict(1, worst < 1e-5, seconds_since(t0), 1.0, fmt::format("max relative error {:.2e} (< 1e-5)", worst));
}

void criterion_2() {
  const auto t0 = Clock::now();
  const NoiseModel noise;
  Rng rng(derive_seed(2, {102}));
  const Point3 target(30, 12, 4), anchor(5, 6, 7);
  const LinkGeometry g = true_geometry(target, anchor);
  std::vector<double> d, a;
  for (int i = 0; i < 100000; ++i) {
    d.push_back(std::abs(synth_statistical(MeasurementKind::toa, target, anchor, noise, rng).value * kSpeedOfLight -
                         g.range));
    const auto kind = i % 2 ? MeasurementKind::aoa_az : MeasurementKind::aoa_el;
    const double truth = i % 2 ? g.azimuth : g.elevation;
    a.push_back(std::abs(wrap_angle(synth_statistical(kind, target, anchor, noise, rng).value - truth)) / kDeg);
  }
  std::sort(d.begin(), d.end());
  std::sort(a.begin(), a.end());
  const double pd = percentile_sorted(d, 0.95), pa = percentile_sorted(a, 0.95);
  verdict(2, pd >= 0.18 && pd <= 0.22 && pa >= 1.8 && pa <= 2.2, seconds_since(t0), 10.0,
          fmt::format("p95 delay {:.4f} m in [0.18, 0.22], p95 angle {:.4f} deg in [1.8, 2.2]", pd, pa));
}

void criterion_3() {
  const auto t0 = Clock::now();
  const Scene scene;
  const std::vector<Point3> anchors = {Point3(5, 5, 3), Point3(60, 4, 8), Point3(35, 22, 5), Point3(10, 20, 7)};
  std::vector<AnchorPrior> priors;
  for (const auto& a : anchors) priors.push_back({a, 2.0});
  const std::vector<Orientation> orient(anchors.size(), Orientation::Identity());
  const Point3 truth(30, 12, 6);
  const JointState exact = state_with({truth}, anchors);
  std::vector<Measurement> toa, aoa;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    Measurement m;
    m.kind = MeasurementKind::toa;
    m.anchor_id = a;
    m.value = h_model(MeasurementKind::toa, exact, 0, a);
    m.variance = 1e-18;
    toa.push_back(m);
  }
  for (std::size_t a = 0; a < 2; ++a) {
    for (MeasurementKind k : {MeasurementKind::aoa_az, MeasurementKind::aoa_el}) {
      Measurement m;
      m.kind = k;
      m.anchor_id = a;
      m.value = h_model(k, exact, 0, a);
      m.variance = 1e-6;
      aoa.push_back(m);
    }
  }
  const double et = (batch_ls_init(toa, 1, priors, orient, scene)[0].position - truth).norm();
  const double ea = (batch_ls_init(aoa, 1, priors, orient, scene)[0].position - truth).norm();
  verdict(3, et < 1e-6 && ea < 1e-6, seconds_since(t0), 1.0,
          fmt::format("ToA error {:.2e} m, AoA error {:.2e} m (< 1e-6)", et, ea));
}

double mean_nees(const std::vector<RunResult>& runs) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : runs) {
    for (std::size_t k = r.burn_in_epochs; k < r.nees.size(); ++k) {
      sum += r.nees[k];
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

void criterion_4() {
  const auto t0 = Clock::now();
  ExperimentConfig c = base(4, 1, MeasurementSet::tdoa_aoa);
  c.monte_carlo_runs = 25;
  const auto runs = run_monte_carlo(c);
  const double runtime = seconds_since(t0);
  const double dim = 9.0 + 3.0 * 4.0;
  const double n = 25.0;
  boost::math::chi_squared chi(n * dim);
  const double lo = boost::math::quantile(chi, 0.025) / n, hi = boost::math::quantile(chi, 0.975) / n;
  const double m = mean_nees(runs);
  verdict(4, m >= lo && m <= hi, runtime, 120.0,
          fmt::format("mean NEES {:.2f} in [{:.2f}, {:.2f}] (dim {:.0f}, 25 runs)", m, lo, hi, dim));
  for (double q : {3.0, 10.0}) {
    ExperimentConfig cq = c;
    cq.process.target_jerk_psd = q;
    info(fmt::format("criterion 4 with target_jerk_psd {:.0f}: mean NEES {:.2f}", q, mean_nees(run_monte_carlo(cq))));
  }
}

void criterion_5() {
  const auto t0 = Clock::now();
  const ExperimentConfig c = base(6, 1, MeasurementSet::toa);
  const GeometryComparison g = compare_geometries(c);
  const double runtime = seconds_since(t0);
  const double col = g.collinear.horizontal.median, non = g.noncollinear.horizontal.median;
  verdict(5, col >= 2.0 * non, runtime, 300.0,
          fmt::format("joint median 2D collinear {:.3f} m / non-collinear {:.3f} m = {:.2f} (>= 2)", col, non,
                      col / non));
  const double tc = pooled_report(g.collinear_runs, NodeClass::targets).horizontal.median;
  const double tn = pooled_report(g.noncollinear_runs, NodeClass::targets).horizontal.median;
  info(fmt::format("criterion 5 targets only: {:.3f} m / {:.3f} m = {:.2f}", tc, tn, tc / tn));
}

void criteria_6_7_10() {
  const auto t0 = Clock::now();
  const auto fused = run_monte_carlo(base(6, 2, MeasurementSet::tdoa_aoa));
  const double fused_time = seconds_since(t0);
  const auto t1 = Clock::now();
  const auto toa = run_monte_carlo(base(6, 2, MeasurementSet::toa));
  const double toa_time = seconds_since(t1);

  const MetricsReport f = pooled_report(fused, NodeClass::all);
  const MetricsReport t = pooled_report(toa, NodeClass::all);
  const bool p6 = f.p_2d_below_1m >= 0.85 && f.p_vertical_below_0_2m >= 0.80 && t.horizontal.median >= 0.3 &&
                  t.horizontal.median <= 0.8;
  verdict(6, p6, fused_time + toa_time, 600.0,
          fmt::format("P(2D<1m) {:.3f} (>= 0.85), P(V<0.2m) {:.3f} (>= 0.80), ToA median 2D {:.3f} m in [0.3, 0.8]",
                      f.p_2d_below_1m, f.p_vertical_below_0_2m, t.horizontal.median));
  const MetricsReport ft = pooled_report(fused, NodeClass::targets);
  const MetricsReport tt = pooled_report(toa, NodeClass::targets);
  info(fmt::format("criterion 6 targets only: P(2D<1m) {:.3f}, P(V<0.2m) {:.3f}, ToA median 2D {:.3f} m",
                   ft.p_2d_below_1m, ft.p_vertical_below_0_2m, tt.horizontal.median));
  const MetricsReport fa = pooled_report(fused, NodeClass::anchors);
  info(fmt::format("criterion 6 anchors only: P(2D<1m) {:.3f}, P(V<0.2m) {:.3f}", fa.p_2d_below_1m,
                   fa.p_vertical_below_0_2m));

  const double ratio = t.vertical.median / f.vertical.median;
  verdict(7, ratio >= 5.0, toa_time + fused_time, 300.0,
          fmt::format("joint median vertical ToA {:.3f} m / TDoA+AoA {:.3f} m = {:.2f} (>= 5)", t.vertical.median,
                      f.vertical.median, ratio));
  info(fmt::format("criterion 7 targets only: {:.3f} m / {:.3f} m = {:.2f}", tt.vertical.median, ft.vertical.median,
                   tt.vertical.median / ft.vertical.median));

  const PooledErrors anchors = pooled_errors(fused, NodeClass::anchors);
  const double r = rmse(anchors.err_3d);
  verdict(10, r < 0.5, fused_time, 600.0, fmt::format("anchor 3D RMSE {:.3f} m (< 0.5, prior sigma 2 m)", r));
  const double floor_axis = 2.0 / std::sqrt(6.0);
  info(fmt::format("common-translation floor with 6 anchors: {:.3f} m per axis, {:.3f} m 3D RMSE", floor_axis,
                   floor_axis * std::sqrt(3.0)));
  for (double sigma : {0.5, 1.0}) {
    ExperimentConfig c = base(6, 2, MeasurementSet::tdoa_aoa);
    c.anchor_prior_sigma = sigma;
    c.monte_carlo_runs = 10;
    const auto runs = run_monte_carlo(c);
    const MetricsReport m = pooled_report(runs, NodeClass::all);
    info(fmt::format("anchor prior sigma {:.1f} m: joint P(2D<1m) {:.3f}, P(V<0.2m) {:.3f}, anchor 3D RMSE {:.3f} m",
                     sigma, m.p_2d_below_1m, m.p_vertical_below_0_2m,
                     rmse(pooled_errors(runs, NodeClass::anchors).err_3d)));
  }
}

void criterion_8() {
  const auto t0 = Clock::now();
  ExperimentConfig c;
  c.seed = 2000;
  const auto cells = sweep(c, c.sweep);
  const double runtime = seconds_since(t0);
  auto at = [&](std::size_t a, std::size_t t) {
    for (const auto& cell : cells) {
      if (cell.anchors == a && cell.targets == t) return cell.p_sub1m_3d;
    }
    return -1.0;
  };
  bool increasing = true, high = true;
  double lowest_high = 1.0;
  std::string row_text;
  for (std::size_t t : c.sweep.targets) {
    increasing = increasing && at(2, t) < at(3, t) && at(3, t) < at(4, t);
    row_text += fmt::format(" T{}:", t);
    for (std::size_t a : c.sweep.anchors) {
      row_text += fmt::format(" {:.2f}", at(a, t));
      if (a >= 4) {
        high = high && at(a, t) >= 0.80;
        lowest_high = std::min(lowest_high, at(a, t));
      }
    }
  }
  verdict(8, increasing && high, runtime, 1800.0,
          fmt::format("strictly increasing 2->3->4: {}, min P(3D<1m) for >= 4 anchors {:.3f} (>= 0.80)",
                      increasing ? "yes" : "no", lowest_high));
  info("sweep P(3D<1m) by target count, anchors " + fmt::format("{}", c.sweep.anchors.front()) + ".." +
       fmt::format("{}", c.sweep.anchors.back()) + ":" + row_text);
}

void criterion_9() {
  const auto t0 = Clock::now();
  ExperimentConfig c;
  c.seed = 3000;
  const auto files = execute_command("measure-bench", c, CommandOptions{});
  const auto bench = nlohmann::json::parse(files.front().second);
  const double az = bench["aoa"]["azimuth_p95_deg"], el = bench["aoa"]["elevation_p95_deg"];
  const double single = bench["toa"]["single_path_max_err_m"], two = bench["toa"]["two_path_3_1m_max_err_m"];
  verdict(9, az <= 2.0 && el <= 2.0 && single <= 0.05 && two <= 0.2, seconds_since(t0), 120.0,
          fmt::format("AoA p95 az {:.3f} / el {:.3f} deg (<= 2), ToA single-path max {:.4f} m (<= 0.05), "
                      "two-path 3.1 m max {:.4f} m (<= 0.2)",
                      az, el, single, two));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"locfuse"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

void criterion_11() {
  const auto t0 = Clock::now();
  const fs::path root = fs::temp_directory_path() / "locfuse_acceptance_replay";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream cfg(root / "cfg.json");
    cfg << R"({"duration_s": 20.0, "burn_in_s": 5.0, "monte_carlo_runs": 2, "seed": 9,
               "sweep": {"anchors": [3, 4], "targets": [1, 2], "runs": 1}})";
  }
  bool ok = true;
  std::string detail;
  for (const std::string cmd : {"simulate", "sweep", "geometry-compare", "measure-bench"}) {
    const fs::path first = root / (cmd + "_a"), replay = root / (cmd + "_b");
    std::vector<std::string> args = {cmd, "--config", (root / "cfg.json").string(), "--out-dir", first.string()};
    if (cmd == "measure-bench") {
      args.push_back("--samples");
      args.push_back("500");
    }
    bool same = cli(args) == 0 &&
                cli({cmd, "--config", (first / "manifest.json").string(), "--out-dir", replay.string()}) == 0;
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(first)) {
      ++files;
      same = same && fs::exists(replay / entry.path().filename()) &&
             slurp(entry.path()) == slurp(replay / entry.path().filename());
    }
    same = same && files > 1;
    ok = ok && same;
    detail += fmt::format("{} {} ({} files); ", cmd, same ? "identical" : "DIFFERENT", files);
  }
  fs::remove_all(root);
  verdict(11, ok, seconds_since(t0), 0.0, detail.substr(0, detail.size() - 2));
}

}  // namespace

int main() {
  fmt::print("acceptance: {} worker threads\n", worker_count());
  const std::vector<std::function<void()>> steps = {criterion_1,     criterion_2, criterion_3, criterion_4,
                                                    criterion_5,     criteria_6_7_10, criterion_8, criterion_9,
                                                    criterion_11};
  for (const auto& step : steps) {
    try {
      step();
    } catch (const std::exception& e) {
      ++failures;
      fmt::print("error: {}\n", e.what());
    }
  }
  fmt::print("acceptance: {} failing criteria\n", failures);
  return failures == 0 ? 0 : 1;
}

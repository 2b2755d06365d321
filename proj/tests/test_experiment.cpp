#include <algorithm>
#include <cstdlib>
#include <sstream>
#include <string>

#include "doctest.h"
#include "locfuse/errors.hpp"
#include "locfuse/experiment.hpp"

using namespace locfuse;

namespace {

ExperimentConfig short_config(double duration = 30.0) {
  ExperimentConfig c;
  c.mobility.duration_s = duration;
  c.burn_in_s = 10.0;
  c.seed = 11;
  return c;
}

bool same_run(const RunResult& a, const RunResult& b) {
  return a.seed == b.seed && a.epochs == b.epochs && a.err_2d == b.err_2d && a.err_vertical == b.err_vertical &&
         a.err_3d == b.err_3d && a.nees == b.nees && a.pdop == b.pdop && a.convergence_epoch == b.convergence_epoch &&
         a.measurements_total == b.measurements_total && a.measurements_used == b.measurements_used &&
         a.measurements_gated == b.measurements_gated && a.true_anchors == b.true_anchors &&
         a.prior_anchors == b.prior_anchors;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("runs are deterministic") {
    const ExperimentConfig c = short_config();
    const RunResult a = run_scenario(c, 5);
    const RunResult b = run_scenario(c, 5);
    CHECK(same_run(a, b));
    const RunResult d = run_scenario(c, 6);
    CHECK(a.err_3d != d.err_3d);
  }

  TEST_CASE("shape and error decomposition") {
    const ExperimentConfig c = short_config();
    const RunResult r = run_scenario(c, 3, RunOptions{true});
    CHECK(r.epochs == c.mobility.epoch_count());
    CHECK(r.burn_in_epochs == 100);
    CHECK(r.nodes.size() == c.targets + c.anchors);
    CHECK(r.nodes[0].is_target);
    CHECK_FALSE(r.nodes.back().is_target);
    REQUIRE(r.err_3d.size() == r.epochs);
    REQUIRE(r.estimates.size() == r.epochs);
    for (std::size_t k = 0; k < r.epochs; ++k) {
      for (std::size_t i = 0; i < r.nodes.size(); ++i) {
        const double lhs = r.err_3d[k][i] * r.err_3d[k][i];
        const double rhs = r.err_2d[k][i] * r.err_2d[k][i] + r.err_vertical[k][i] * r.err_vertical[k][i];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        CHECK(r.cov_trace[k][i] > 0.0);
      }
    }
    CHECK(r.measurements_used + r.measurements_gated <= r.measurements_total);
    CHECK(r.true_anchors.size() == c.anchors);
  }

  TEST_CASE("near-noiseless run stays locked through turns") {
    ExperimentConfig c = short_config();
    c.noise.sigma_delay_m = 1e-6;
    c.noise.sigma_angle_deg = 1e-6;
    c.anchor_prior_sigma = 1e-6;
    const RunResult r = run_scenario(c, 9);
    std::vector<double> errors;
    for (std::size_t k = r.burn_in_epochs; k < r.epochs; ++k) errors.insert(errors.end(), r.err_3d[k].begin(), r.err_3d[k].end());
    std::sort(errors.begin(), errors.end());
    // Turns are velocity steps; the epoch of a turn carries the largest error.
    CHECK(percentile_sorted(errors, 0.5) < 1e-3);
    CHECK(errors.back() < 0.05);
  }

  TEST_CASE("pooled joint is the union of targets and anchors") {
    ExperimentConfig c = short_config();
    c.monte_carlo_runs = 2;
    const auto runs = run_monte_carlo(c);
    const PooledErrors all = pooled_errors(runs, NodeClass::all);
    const PooledErrors t = pooled_errors(runs, NodeClass::targets);
    const PooledErrors a = pooled_errors(runs, NodeClass::anchors);
    CHECK(all.err_3d.size() == t.err_3d.size() + a.err_3d.size());
    const std::size_t per_run = runs[0].epochs - runs[0].burn_in_epochs;
    CHECK(t.err_3d.size() == 2 * per_run * c.targets);
    std::vector<double> joined = t.err_3d;
    joined.insert(joined.end(), a.err_3d.begin(), a.err_3d.end());
    std::vector<double> sorted_all = all.err_3d;
    std::sort(joined.begin(), joined.end());
    std::sort(sorted_all.begin(), sorted_all.end());
    CHECK(joined == sorted_all);
  }

  TEST_CASE("thread count does not change results") {
    ExperimentConfig c = short_config();
    c.monte_carlo_runs = 3;
    setenv("LOCFUSE_THREADS", "1", 1);
    CHECK(worker_count() == 1);
    const auto serial = run_monte_carlo(c);
    setenv("LOCFUSE_THREADS", "3", 1);
    const auto parallel = run_monte_carlo(c);
    unsetenv("LOCFUSE_THREADS");
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) CHECK(same_run(serial[i], parallel[i]));
    const MetricsReport s = pooled_report(serial, NodeClass::all);
    const MetricsReport p = pooled_report(parallel, NodeClass::all);
    CHECK(std::abs(s.p_3d_below_1m - p.p_3d_below_1m) <= 0.02);
  }

  TEST_CASE("gating rejects a small share of measurements") {
    ExperimentConfig c = short_config(60.0);
    c.monte_carlo_runs = 2;
    std::size_t total = 0, gated = 0;
    for (const auto& r : run_monte_carlo(c)) {
      total += r.measurements_total;
      gated += r.measurements_gated;
    }
    const double share = static_cast<double>(gated) / static_cast<double>(total);
    CHECK(share >= 0.002);
    CHECK(share <= 0.03);
  }

  TEST_CASE("sweep covers the grid") {
    ExperimentConfig c = short_config(15.0);
    c.burn_in_s = 5.0;
    const SweepAxes axes{{3, 4}, {1, 2, 3}, 1};
    const auto cells = sweep(c, axes);
    REQUIRE(cells.size() == 6);
    CHECK(cells[0].anchors == 3);
    CHECK(cells[0].targets == 1);
    CHECK(cells[1].targets == 2);
    CHECK(cells[3].anchors == 4);
    for (const auto& cell : cells) {
      CHECK(cell.runs == 1);
      CHECK(cell.p_sub1m_3d >= 0.0);
      CHECK(cell.p_sub1m_3d <= 1.0);
    }
    std::ostringstream out;
    write_sweep_csv(out, cells);
    CHECK(first_line(out.str()) == "anchors,targets,p_sub1m_3d,runs");
  }

  TEST_CASE("geometry comparison shares trajectories") {
    ExperimentConfig c = short_config(15.0);
    c.burn_in_s = 5.0;
    c.anchors = 4;
    c.targets = 1;
    c.measurement_set = MeasurementSet::toa;
    const GeometryComparison g = compare_geometries(c);
    REQUIRE(g.collinear_runs.size() == g.noncollinear_runs.size());
    CHECK(g.collinear_runs[0].seed == g.noncollinear_runs[0].seed);
    CHECK(g.collinear_runs[0].epochs == g.noncollinear_runs[0].epochs);
    CHECK(g.collinear_runs[0].true_anchors != g.noncollinear_runs[0].true_anchors);
  }

  TEST_CASE("output headers") {
    const ExperimentConfig c = short_config(15.0);
    const RunResult r = run_scenario(c, 1, RunOptions{true});
    std::ostringstream trace, cdf;
    write_trace_csv(trace, r);
    write_cdf_csv(cdf, {r});
    CHECK(first_line(trace.str()) == "epoch,node_id,kind,est_x,est_y,est_z,err_m,cov_trace");
    CHECK(first_line(cdf.str()).rfind("threshold,targets_2d", 0) == 0);
    const RunResult untraced = run_scenario(c, 1);
    std::ostringstream none;
    CHECK_THROWS_AS(write_trace_csv(none, untraced), DomainError);
  }

  TEST_CASE("config validation") {
    ExperimentConfig c;
    CHECK_NOTHROW(c.validate());
    ExperimentConfig a = c;
    a.anchors = 1;
    CHECK_THROWS_AS(a.validate(), DomainError);
    ExperimentConfig g = c;
    g.gate_prob = 1.0;
    CHECK_THROWS_AS(g.validate(), DomainError);
    ExperimentConfig b = c;
    b.burn_in_s = 600.0;
    CHECK_THROWS_AS(b.validate(), DomainError);
    ExperimentConfig z = c;
    z.anchor_z_band = {3.0, 30.0};
    CHECK_THROWS_AS(z.validate(), DomainError);
    CHECK(c.filter_model().dt == c.mobility.epoch_dt_s);
  }
}

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "locfuse/fusion.hpp"
#include "locfuse/metrics.hpp"
#include "locfuse/mobility.hpp"
#include "locfuse/scene.hpp"
#include "locfuse/synthesis.hpp"

namespace locfuse {

enum class OrientationPolicy { identity, face_center };

struct SweepAxes {
  std::vector<std::size_t> anchors{2, 3, 4, 5, 6};
  std::vector<std::size_t> targets{1, 2, 3, 4, 6, 8};
  std::size_t runs{20};
  bool operator==(const SweepAxes&) const = default;
};

/// Full declarative description of a run, a Monte Carlo batch or a sweep.
/// `mobility` carries duration_s and epoch_dt_s; the filter step follows
/// epoch_dt_s.
struct ExperimentConfig {
  Scene scene;
  LayoutKind layout{LayoutKind::noncollinear};
  std::size_t anchors{6};
  std::size_t targets{2};
  ZBand anchor_z_band{3.0, 8.0};
  OrientationPolicy orientation{OrientationPolicy::face_center};
  MeasurementSet measurement_set{MeasurementSet::tdoa_aoa};
  SynthesisMode mode{SynthesisMode::statistical};
  NoiseModel noise;
  SignalConfig signal;
  ProcessModel process;
  KinematicPrior kinematics;
  WaypointModelParams mobility;
  double anchor_prior_sigma{2.0};
  double gate_prob{0.99};
  double burn_in_s{10.0};
  std::uint64_t seed{1};
  std::size_t monte_carlo_runs{1};
  SweepAxes sweep;

  void validate() const;
  ProcessModel filter_model() const;
  std::size_t burn_in_epochs() const;
  bool operator==(const ExperimentConfig&) const = default;
};

struct NodeRef {
  bool is_target{true};
  std::size_t id{0};
};

struct RunResult {
  std::uint64_t seed{0};
  std::size_t epochs{0};
  std::size_t burn_in_epochs{0};
  std::vector<NodeRef> nodes;  // targets first, then anchors
  // Indexed [epoch][node].
  std::vector<std::vector<double>> err_2d;
  std::vector<std::vector<double>> err_vertical;
  std::vector<std::vector<double>> err_3d;
  std::vector<std::vector<Point3>> estimates;  // empty unless traced
  std::vector<std::vector<double>> cov_trace;  // empty unless traced
  std::vector<double> nees;
  std::vector<double> pdop;  // mean over targets of true-geometry ToA PDOP
  std::optional<std::size_t> convergence_epoch;
  std::size_t measurements_total{0};
  std::size_t measurements_used{0};
  std::size_t measurements_gated{0};
  std::size_t manoeuvre_updates{0};  // target updates redone with velocity step noise
  std::vector<std::string> init_diagnostics;  // one entry per target that fell back
  std::vector<Point3> true_anchors;
  std::vector<Point3> prior_anchors;
};

struct RunOptions {
  bool keep_trace{false};
};

RunResult run_scenario(const ExperimentConfig& config, std::uint64_t seed, const RunOptions& options = {});

/// Seeds seed, seed+1, ... for `monte_carlo_runs` runs, executed on the
/// worker pool. Results are ordered by run index.
std::vector<RunResult> run_monte_carlo(const ExperimentConfig& config, const RunOptions& options = {});

enum class NodeClass { all, targets, anchors };

/// Post-burn-in errors pooled over runs, epochs and the selected nodes.
MetricsReport pooled_report(const std::vector<RunResult>& runs, NodeClass nodes,
                            const std::vector<double>& thresholds = cdf_grid());

struct PooledErrors {
  std::vector<double> err_2d, err_vertical, err_3d;
};
PooledErrors pooled_errors(const std::vector<RunResult>& runs, NodeClass nodes);

struct SweepCell {
  std::size_t anchors{0};
  std::size_t targets{0};
  double p_sub1m_3d{0.0};
  std::size_t runs{0};
};

/// Random-layout, tdoa+aoa sweep; rows ordered anchors-major.
std::vector<SweepCell> sweep(const ExperimentConfig& base, const SweepAxes& axes);

struct GeometryComparison {
  MetricsReport collinear;
  MetricsReport noncollinear;
  std::vector<RunResult> collinear_runs;
  std::vector<RunResult> noncollinear_runs;
};

GeometryComparison compare_geometries(const ExperimentConfig& config);

/// Worker count from LOCFUSE_THREADS, else hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for i in [0, count) on up to worker_count() threads.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

// Output writers.
void write_trace_csv(std::ostream& out, const RunResult& run);
void write_cdf_csv(std::ostream& out, const std::vector<RunResult>& runs);
void write_sweep_csv(std::ostream& out, const std::vector<SweepCell>& cells);

}  // namespace locfuse

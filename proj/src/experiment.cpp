#include "locfuse/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <random>
#include <thread>

#include <boost/math/distributions/chi_squared.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "locfuse/errors.hpp"
#include "locfuse/random.hpp"

namespace locfuse {

void ExperimentConfig::validate() const {
  scene.validate();
  if (anchors < 2) throw DomainError("anchors must be at least 2");
  if (targets < 1) throw DomainError("targets must be at least 1");
  if (!(anchor_z_band.lo <= anchor_z_band.hi) || anchor_z_band.lo < scene.bounds.min_corner.z() ||
      anchor_z_band.hi > scene.bounds.max_corner.z()) {
    throw DomainError("anchor_z_band must lie inside the scene height");
  }
  mobility.validate();
  noise.validate();
  filter_model().validate();
  signal.array.validate();
  signal.ofdm.validate();
  if (!(signal.codebook_step_deg > 0.0) || !(signal.codebook_half_fov_deg >= 0.0)) {
    throw DomainError("codebook step must be positive and field of view non-negative");
  }
  if (!(anchor_prior_sigma > 0.0)) throw DomainError("anchor_prior_sigma must be positive");
  if (!(gate_prob > 0.0 && gate_prob < 1.0)) throw DomainError("gate_prob must lie in (0, 1)");
  if (!(burn_in_s >= 0.0)) throw DomainError("burn_in_s must be non-negative");
  if (monte_carlo_runs < 1) throw DomainError("monte_carlo_runs must be at least 1");
  if (!(kinematics.velocity_sigma > 0.0) || !(kinematics.acceleration_sigma > 0.0)) {
    throw DomainError("kinematic prior sigmas must be positive");
  }
  if (burn_in_epochs() >= mobility.epoch_count()) throw DomainError("burn-in covers the whole run");
}

ProcessModel ExperimentConfig::filter_model() const {
  ProcessModel m = process;
  m.dt = mobility.epoch_dt_s;
  return m;
}

std::size_t ExperimentConfig::burn_in_epochs() const {
  return static_cast<std::size_t>(std::llround(burn_in_s / mobility.epoch_dt_s));
}

std::size_t worker_count() {
  if (const char* env = std::getenv("LOCFUSE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min(worker_count(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

constexpr int kInitIterations = 10;
constexpr double kMaxAngleSpread = 0.5;
constexpr double kManoeuvreProb = 0.999;

// Targets whose summed normalized innovation squared over the epoch fails a
// chi-square test.
std::vector<std::size_t> manoeuvring_targets(const std::vector<Measurement>& meas, const UpdateReport& report,
                                             std::size_t targets) {
  std::vector<double> nis(targets, 0.0);
  std::vector<std::size_t> count(targets, 0), gated(targets, 0), out;
  for (std::size_t i = 0; i < meas.size(); ++i) {
    const MeasurementReport& e = report.entries[i];
    if (!e.used && !e.gated) continue;
    const std::size_t t = meas[i].target_id;
    nis[t] += e.innovation * e.innovation / e.innovation_variance;
    ++count[t];
    if (e.gated) ++gated[t];
  }
  for (std::size_t t = 0; t < targets; ++t) {
    if (gated[t] == 0) continue;
    const double limit = boost::math::quantile(boost::math::chi_squared(static_cast<double>(count[t])), kManoeuvreProb);
    if (nis[t] > limit) out.push_back(t);
  }
  return out;
}

Eigen::VectorXd truth_vector(const JointState& state, const std::vector<Trajectory>& trajectories,
                             const std::vector<Point3>& anchors, std::size_t epoch) {
  Eigen::VectorXd x(state.dim());
  for (std::size_t t = 0; t < trajectories.size(); ++t) {
    const Kinematics k = trajectories[t].sample(epoch);
    const Eigen::Index o = state.target_offset(t);
    x.segment<3>(o) = k.position;
    x.segment<3>(o + 3) = k.velocity;
    x.segment<3>(o + 6) = k.acceleration;
  }
  for (std::size_t a = 0; a < anchors.size(); ++a) x.segment<3>(state.anchor_offset(a)) = anchors[a];
  return x;
}

double mean_pdop(const std::vector<Point3>& anchors, const std::vector<Point3>& targets) {
  double sum = 0.0;
  for (const Point3& t : targets) {
    try {
      sum += gdop(anchors, t, RangingMode::toa).pdop;
    } catch (const DomainError&) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return sum / static_cast<double>(targets.size());
}

std::optional<std::size_t> convergence_epoch(const std::vector<std::vector<double>>& err_3d) {
  const std::size_t n = err_3d.size();
  if (n == 0) return std::nullopt;
  std::vector<double> mean(n);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (double e : err_3d[k]) s += e;
    mean[k] = s / static_cast<double>(err_3d[k].size());
  }
  std::vector<double> tail(mean.begin() + static_cast<std::ptrdiff_t>(n / 2), mean.end());
  std::sort(tail.begin(), tail.end());
  const double level = 2.0 * percentile_sorted(tail, 0.5) + 1e-9;
  std::size_t k = n;
  while (k > 0 && mean[k - 1] <= level) --k;
  if (k == n) return std::nullopt;
  return k;
}

}  // namespace

RunResult run_scenario(const ExperimentConfig& config, std::uint64_t seed, const RunOptions& options) {
  config.validate();
  const ProcessModel model = config.filter_model();
  const Scene& scene = config.scene;

  const AnchorLayout layout =
      make_anchor_layout(config.layout, config.anchors, scene, config.anchor_z_band, derive_seed(seed, {stream::layout}));
  const std::vector<Point3>& anchors = layout.positions;

  std::vector<Orientation> orientations(config.anchors, Orientation::Identity());
  if (config.orientation == OrientationPolicy::face_center) {
    for (std::size_t a = 0; a < anchors.size(); ++a) orientations[a] = facing(anchors[a], scene.bounds.center());
  }

  std::vector<Trajectory> trajectories;
  for (std::size_t t = 0; t < config.targets; ++t) {
    trajectories.push_back(generate_trajectory(config.mobility, scene, derive_seed(seed, {stream::trajectory, t})));
  }
  const std::size_t epochs = trajectories.front().epochs();

  std::vector<AnchorPrior> priors;
  {
    Rng rng(derive_seed(seed, {stream::anchor_prior}));
    std::normal_distribution<double> unit(0.0, 1.0);
    for (const Point3& a : anchors) {
      const Point3 offset(unit(rng), unit(rng), unit(rng));
      priors.push_back({a + config.anchor_prior_sigma * offset, config.anchor_prior_sigma});
    }
  }

  SynthesisConfig synth{config.measurement_set, config.mode, config.noise, config.signal};
  Rng meas_rng(derive_seed(seed, {stream::measurement}));
  auto truth_targets = [&](std::size_t k) {
    std::vector<Point3> p;
    for (const auto& tr : trajectories) p.push_back(tr.positions()[k]);
    return p;
  };

  RunResult result;
  result.seed = seed;
  result.epochs = epochs;
  result.burn_in_epochs = config.burn_in_epochs();
  result.true_anchors = anchors;
  for (const auto& p : priors) result.prior_anchors.push_back(p.mean);
  for (std::size_t t = 0; t < config.targets; ++t) result.nodes.push_back({true, t});
  for (std::size_t a = 0; a < config.anchors; ++a) result.nodes.push_back({false, a});

  // Epoch 0: batch least squares per target gives the linearization point.
  // The target starts diffuse and the same measurements then enter a regular
  // update, which builds the target/anchor cross-covariance.
  std::vector<Point3> targets_now = truth_targets(0);
  const auto first = epoch_measurements(synth, scene, targets_now, anchors, orientations, 0, meas_rng);
  const Point3 half = 0.5 * scene.bounds.extent();
  const Eigen::Matrix3d diffuse = half.cwiseProduct(half).asDiagonal();
  std::vector<TargetInit> inits;
  for (std::size_t t = 0; t < config.targets; ++t) {
    std::vector<Measurement> own;
    for (Measurement m : first) {
      if (m.target_id != t) continue;
      m.target_id = 0;
      own.push_back(m);
    }
    try {
      inits.push_back({batch_ls_init(own, 1, priors, orientations, scene).front().position, diffuse});
    } catch (const InitializationError& e) {
      result.init_diagnostics.push_back(e.what());
      inits.push_back({scene.bounds.center(), diffuse});
    }
  }

  JointState state = init_joint_state(inits, priors, orientations, config.kinematics);

  auto record = [&](std::size_t k) {
    std::vector<double> e2(result.nodes.size()), ev(result.nodes.size()), e3(result.nodes.size());
    std::vector<Point3> est(result.nodes.size());
    std::vector<double> tr(result.nodes.size());
    for (std::size_t i = 0; i < result.nodes.size(); ++i) {
      const NodeRef& node = result.nodes[i];
      const Point3 estimate = node.is_target ? state.target_position(node.id) : state.anchor_position(node.id);
      const Point3 truth = node.is_target ? trajectories[node.id].positions()[k] : anchors[node.id];
      const Point3 d = estimate - truth;
      e2[i] = std::hypot(d.x(), d.y());
      ev[i] = std::abs(d.z());
      e3[i] = d.norm();
      est[i] = estimate;
      tr[i] = (node.is_target ? state.target_position_cov(node.id) : state.anchor_position_cov(node.id)).trace();
    }
    result.err_2d.push_back(std::move(e2));
    result.err_vertical.push_back(std::move(ev));
    result.err_3d.push_back(std::move(e3));
    if (options.keep_trace) {
      result.estimates.push_back(std::move(est));
      result.cov_trace.push_back(std::move(tr));
    }
    result.nees.push_back(nees(state, truth_vector(state, trajectories, anchors, k)));
    result.pdop.push_back(mean_pdop(anchors, targets_now));
  };

  {
    UpdateReport report;
    state = update(state, first, config.gate_prob, &report, kInitIterations);
    result.measurements_total += first.size();
    result.measurements_used += report.used();
    result.measurements_gated += report.gated();
  }
  record(0);
  for (std::size_t k = 1; k < epochs; ++k) {
    targets_now = truth_targets(k);
    JointState predicted = predict(state, model);
    const auto meas = epoch_measurements(synth, scene, targets_now, anchors, orientations, k, meas_rng);
    UpdateReport report;
    state = update(predicted, meas, config.gate_prob, &report, 1, kMaxAngleSpread);
    // A target whose innovations are too large has turned: allow a velocity
    // step up to a full reversal and redo the update.
    const auto turned = manoeuvring_targets(meas, report, config.targets);
    if (!turned.empty()) {
      for (std::size_t t : turned) add_velocity_step_noise(predicted, t, 2.0 * config.mobility.speed_max, model.dt);
      result.manoeuvre_updates += turned.size();
      state = update(predicted, meas, config.gate_prob, &report, 1, kMaxAngleSpread);
    }
    result.measurements_total += meas.size();
    result.measurements_used += report.used();
    result.measurements_gated += report.gated();
    record(k);
  }
  result.convergence_epoch = convergence_epoch(result.err_3d);
  return result;
}

std::vector<RunResult> run_monte_carlo(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  std::vector<RunResult> runs(config.monte_carlo_runs);
  parallel_for(runs.size(), [&](std::size_t r) { runs[r] = run_scenario(config, config.seed + r, options); });
  return runs;
}

PooledErrors pooled_errors(const std::vector<RunResult>& runs, NodeClass nodes) {
  PooledErrors out;
  for (const RunResult& run : runs) {
    for (std::size_t k = run.burn_in_epochs; k < run.epochs; ++k) {
      for (std::size_t i = 0; i < run.nodes.size(); ++i) {
        if (nodes == NodeClass::targets && !run.nodes[i].is_target) continue;
        if (nodes == NodeClass::anchors && run.nodes[i].is_target) continue;
        out.err_2d.push_back(run.err_2d[k][i]);
        out.err_vertical.push_back(run.err_vertical[k][i]);
        out.err_3d.push_back(run.err_3d[k][i]);
      }
    }
  }
  return out;
}

MetricsReport pooled_report(const std::vector<RunResult>& runs, NodeClass nodes,
                            const std::vector<double>& thresholds) {
  const PooledErrors e = pooled_errors(runs, nodes);
  return make_report(e.err_2d, e.err_vertical, e.err_3d, thresholds);
}

std::vector<SweepCell> sweep(const ExperimentConfig& base, const SweepAxes& axes) {
  if (axes.anchors.empty() || axes.targets.empty() || axes.runs == 0) {
    throw DomainError("sweep axes and run count must be nonempty");
  }
  struct Job {
    std::size_t cell, anchors, targets, run;
  };
  std::vector<SweepCell> cells;
  std::vector<Job> jobs;
  for (std::size_t a : axes.anchors) {
    for (std::size_t t : axes.targets) {
      for (std::size_t r = 0; r < axes.runs; ++r) jobs.push_back({cells.size(), a, t, r});
      cells.push_back({a, t, 0.0, axes.runs});
    }
  }
  std::vector<double> p(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) {
    const Job& job = jobs[j];
    ExperimentConfig cfg = base;
    cfg.layout = LayoutKind::random;
    cfg.anchors = job.anchors;
    cfg.targets = job.targets;
    cfg.measurement_set = MeasurementSet::tdoa_aoa;
    cfg.anchor_z_band = {cfg.scene.bounds.min_corner.z(), cfg.scene.bounds.max_corner.z()};
    const RunResult run = run_scenario(cfg, derive_seed(base.seed, {stream::sweep_cell, job.anchors, job.targets, job.run}));
    p[j] = fraction_below(pooled_errors({run}, NodeClass::all).err_3d, 1.0);
  });
  for (std::size_t j = 0; j < jobs.size(); ++j) cells[jobs[j].cell].p_sub1m_3d += p[j];
  for (auto& c : cells) c.p_sub1m_3d /= static_cast<double>(c.runs);
  return cells;
}

GeometryComparison compare_geometries(const ExperimentConfig& config) {
  GeometryComparison out;
  ExperimentConfig col = config;
  col.layout = LayoutKind::collinear;
  ExperimentConfig non = config;
  non.layout = LayoutKind::noncollinear;
  out.collinear_runs = run_monte_carlo(col);
  out.noncollinear_runs = run_monte_carlo(non);
  out.collinear = pooled_report(out.collinear_runs, NodeClass::all);
  out.noncollinear = pooled_report(out.noncollinear_runs, NodeClass::all);
  return out;
}

void write_trace_csv(std::ostream& out, const RunResult& run) {
  if (run.estimates.size() != run.epochs) throw DomainError("run was not traced");
  out << "epoch,node_id,kind,est_x,est_y,est_z,err_m,cov_trace\n";
  for (std::size_t k = 0; k < run.epochs; ++k) {
    for (std::size_t i = 0; i < run.nodes.size(); ++i) {
      const Point3& p = run.estimates[k][i];
      fmt::print(out, "{},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6e}\n", k, run.nodes[i].id,
                 run.nodes[i].is_target ? "target" : "anchor", p.x(), p.y(), p.z(), run.err_3d[k][i],
                 run.cov_trace[k][i]);
    }
  }
}

void write_cdf_csv(std::ostream& out, const std::vector<RunResult>& runs) {
  const auto grid = cdf_grid();
  const MetricsReport targets = pooled_report(runs, NodeClass::targets, grid);
  const MetricsReport anchors = pooled_report(runs, NodeClass::anchors, grid);
  const MetricsReport all = pooled_report(runs, NodeClass::all, grid);
  out << "threshold,targets_2d,targets_vertical,targets_3d,anchors_2d,anchors_vertical,anchors_3d,all_2d,"
         "all_vertical,all_3d\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    fmt::print(out, "{:.2f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", grid[i],
               targets.horizontal.cdf[i].second, targets.vertical.cdf[i].second, targets.spatial.cdf[i].second,
               anchors.horizontal.cdf[i].second, anchors.vertical.cdf[i].second, anchors.spatial.cdf[i].second,
               all.horizontal.cdf[i].second, all.vertical.cdf[i].second, all.spatial.cdf[i].second);
  }
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepCell>& cells) {
  out << "anchors,targets,p_sub1m_3d,runs\n";
  for (const auto& c : cells) fmt::print(out, "{},{},{:.6f},{}\n", c.anchors, c.targets, c.p_sub1m_3d, c.runs);
}

}  // namespace locfuse

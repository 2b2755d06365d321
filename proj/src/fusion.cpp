#include "locfuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <boost/math/distributions/chi_squared.hpp>

#include "locfuse/errors.hpp"

namespace locfuse {

void ProcessModel::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("process dt must be positive");
  if (!(target_jerk_psd >= 0.0)) throw DomainError("target_jerk_psd must be non-negative");
  if (!(anchor_jitter > 0.0)) throw DomainError("anchor_jitter must be positive");
}

JointState::JointState(std::size_t targets, std::size_t anchors)
    : mean(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(targets) * kTargetBlock +
                                 static_cast<Eigen::Index>(anchors) * kAnchorBlock)),
      covariance(Eigen::MatrixXd::Identity(mean.size(), mean.size())),
      targets_(targets),
      anchors_(anchors),
      orientations_(anchors, Orientation::Identity()) {}

Eigen::Index JointState::target_offset(std::size_t target_id) const {
  if (target_id >= targets_) throw StateError("unknown target id " + std::to_string(target_id));
  return static_cast<Eigen::Index>(target_id) * kTargetBlock;
}

Eigen::Index JointState::anchor_offset(std::size_t anchor_id) const {
  if (anchor_id >= anchors_) throw StateError("unknown anchor id " + std::to_string(anchor_id));
  return static_cast<Eigen::Index>(targets_) * kTargetBlock + static_cast<Eigen::Index>(anchor_id) * kAnchorBlock;
}

Eigen::Matrix3d JointState::target_position_cov(std::size_t target_id) const {
  const Eigen::Index o = target_offset(target_id);
  return covariance.block<3, 3>(o, o);
}

Eigen::Matrix3d JointState::anchor_position_cov(std::size_t anchor_id) const {
  const Eigen::Index o = anchor_offset(anchor_id);
  return covariance.block<3, 3>(o, o);
}

void JointState::check() const {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
    throw StateError("covariance dimension does not match the state");
  }
  if (!mean.allFinite() || !covariance.allFinite()) throw StateError("state is not finite");
  const double asym = (covariance - covariance.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9 * std::max(1.0, covariance.cwiseAbs().maxCoeff())) throw StateError("covariance is not symmetric");
  if (Eigen::LLT<Eigen::MatrixXd>(covariance).info() != Eigen::Success) {
    throw StateError("covariance is not positive definite");
  }
}

void JointState::symmetrize() { covariance = 0.5 * (covariance + covariance.transpose()).eval(); }

namespace {

Eigen::Matrix<double, 9, 9> transition(double dt) {
  Eigen::Matrix3d f;
  f << 1.0, dt, 0.5 * dt * dt, 0.0, 1.0, dt, 0.0, 0.0, 1.0;
  Eigen::Matrix<double, 9, 9> out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.block<3, 3>(3 * r, 3 * c) = f(r, c) * Eigen::Matrix3d::Identity();
  return out;
}

// Discretized white-jerk noise for one axis triple.
Eigen::Matrix<double, 9, 9> jerk_noise(double dt, double psd) {
  const double dt2 = dt * dt, dt3 = dt2 * dt, dt4 = dt3 * dt, dt5 = dt4 * dt;
  Eigen::Matrix3d q;
  q << dt5 / 20.0, dt4 / 8.0, dt3 / 6.0, dt4 / 8.0, dt3 / 3.0, dt2 / 2.0, dt3 / 6.0, dt2 / 2.0, dt;
  q *= psd;
  Eigen::Matrix<double, 9, 9> out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.block<3, 3>(3 * r, 3 * c) = q(r, c) * Eigen::Matrix3d::Identity();
  return out;
}

}  // namespace

JointState predict(const JointState& state, const ProcessModel& model) {
  model.validate();
  state.check();
  JointState next = state;
  const auto f = transition(model.dt);
  const auto q = jerk_noise(model.dt, model.target_jerk_psd);
  Eigen::MatrixXd& p = next.covariance;
  for (std::size_t t = 0; t < state.targets(); ++t) {
    const Eigen::Index o = state.target_offset(t);
    next.mean.segment<9>(o) = f * state.mean.segment<9>(o);
    p.middleRows(o, 9) = (f * p.middleRows(o, 9)).eval();
  }
  for (std::size_t t = 0; t < state.targets(); ++t) {
    const Eigen::Index o = state.target_offset(t);
    p.middleCols(o, 9) = (p.middleCols(o, 9) * f.transpose()).eval();
    p.block<9, 9>(o, o) += q;
  }
  for (std::size_t a = 0; a < state.anchors(); ++a) {
    const Eigen::Index o = state.anchor_offset(a);
    p.block<3, 3>(o, o).diagonal().array() += model.anchor_jitter * model.dt;
  }
  next.symmetrize();
  ++next.epoch;
  return next;
}

void add_velocity_step_noise(JointState& state, std::size_t target_id, double sigma_velocity, double dt) {
  if (!(sigma_velocity >= 0.0) || !(dt > 0.0)) throw DomainError("velocity step noise needs sigma >= 0 and dt > 0");
  Eigen::Matrix<double, 9, 3> g = Eigen::Matrix<double, 9, 3>::Zero();
  g.topRows<3>() = 0.5 * dt * Eigen::Matrix3d::Identity();
  g.middleRows<3>(3) = Eigen::Matrix3d::Identity();
  const Eigen::Index o = state.target_offset(target_id);
  state.covariance.block<9, 9>(o, o) += sigma_velocity * sigma_velocity * g * g.transpose();
}

namespace {

// Measurement function and its partials with respect to the target, anchor
// and reference-anchor positions.
struct LinkModel {
  double value{0.0};
  Eigen::RowVector3d d_target{Eigen::RowVector3d::Zero()};
  Eigen::RowVector3d d_anchor{Eigen::RowVector3d::Zero()};
  Eigen::RowVector3d d_ref{Eigen::RowVector3d::Zero()};
};

constexpr double kMinSeparation = 1e-9;

LinkModel evaluate_link(MeasurementKind kind, const Point3& target, const Point3& anchor, const Point3* ref,
                        const Orientation& orientation, bool with_partials) {
  LinkModel out;
  switch (kind) {
    case MeasurementKind::toa:
    case MeasurementKind::tdoa: {
      const Point3 d = target - anchor;
      const double r = d.norm();
      if (r < kMinSeparation) throw EvaluationError("target and anchor estimates coincide");
      out.value = r / kSpeedOfLight;
      if (with_partials) {
        out.d_target = d.transpose() / (r * kSpeedOfLight);
        out.d_anchor = -out.d_target;
      }
      if (kind == MeasurementKind::tdoa) {
        if (ref == nullptr) throw EvaluationError("tdoa needs a reference anchor");
        const Point3 dr = target - *ref;
        const double rr = dr.norm();
        if (rr < kMinSeparation) throw EvaluationError("target and reference anchor estimates coincide");
        out.value -= rr / kSpeedOfLight;
        if (with_partials) {
          const Eigen::RowVector3d u_ref = dr.transpose() / (rr * kSpeedOfLight);
          out.d_target -= u_ref;
          out.d_ref = u_ref;
        }
      }
      break;
    }
    case MeasurementKind::aoa_az:
    case MeasurementKind::aoa_el: {
      const Point3 d = orientation.transpose() * (target - anchor);
      const double rho2 = d.x() * d.x() + d.y() * d.y();
      const double rho = std::sqrt(rho2);
      const double r2 = rho2 + d.z() * d.z();
      if (rho < kMinSeparation) throw EvaluationError("angle undefined at the array zenith or for coincident nodes");
      Eigen::RowVector3d grad;
      if (kind == MeasurementKind::aoa_az) {
        out.value = std::atan2(d.y(), d.x());
        grad << -d.y() / rho2, d.x() / rho2, 0.0;
      } else {
        out.value = std::atan2(d.z(), rho);
        grad << -d.x() * d.z() / (rho * r2), -d.y() * d.z() / (rho * r2), rho / r2;
      }
      if (with_partials) {
        out.d_target = grad * orientation.transpose();
        out.d_anchor = -out.d_target;
      }
      break;
    }
  }
  return out;
}

LinkModel evaluate_state(MeasurementKind kind, const JointState& state, std::size_t target_id,
                         std::size_t anchor_id, std::size_t ref_anchor_id, bool with_partials) {
  const Point3 target = state.target_position(target_id);
  const Point3 anchor = state.anchor_position(anchor_id);
  Point3 ref;
  const Point3* ref_ptr = nullptr;
  if (kind == MeasurementKind::tdoa) {
    if (ref_anchor_id == kNoAnchor) throw StateError("tdoa needs a reference anchor id");
    if (ref_anchor_id == anchor_id) throw StateError("tdoa reference equals the anchor");
    ref = state.anchor_position(ref_anchor_id);
    ref_ptr = &ref;
  }
  return evaluate_link(kind, target, anchor, ref_ptr, state.orientation(anchor_id), with_partials);
}

}  // namespace

double h_model(MeasurementKind kind, const JointState& state, std::size_t target_id, std::size_t anchor_id,
               std::size_t ref_anchor_id) {
  return evaluate_state(kind, state, target_id, anchor_id, ref_anchor_id, false).value;
}

Eigen::RowVectorXd JacobianRow::dense(Eigen::Index dim) const {
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(dim);
  for (std::size_t i = 0; i < index.size(); ++i) row(index[i]) += value[i];
  return row;
}

JacobianRow jacobian(MeasurementKind kind, const JointState& state, std::size_t target_id, std::size_t anchor_id,
                     std::size_t ref_anchor_id) {
  const LinkModel m = evaluate_state(kind, state, target_id, anchor_id, ref_anchor_id, true);
  JacobianRow row;
  auto put = [&row](Eigen::Index offset, const Eigen::RowVector3d& partial) {
    for (int i = 0; i < 3; ++i) {
      row.index.push_back(offset + i);
      row.value.push_back(partial(i));
    }
  };
  put(state.target_offset(target_id), m.d_target);
  put(state.anchor_offset(anchor_id), m.d_anchor);
  if (kind == MeasurementKind::tdoa) put(state.anchor_offset(ref_anchor_id), m.d_ref);
  return row;
}

std::size_t UpdateReport::used() const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.used; }));
}

std::size_t UpdateReport::gated() const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.gated; }));
}

double gate_threshold(double gate_prob) {
  if (!(gate_prob > 0.0 && gate_prob < 1.0)) throw DomainError("gate_prob must lie in (0, 1)");
  return boost::math::quantile(boost::math::chi_squared(1.0), gate_prob);
}

JointState update(const JointState& state, std::span<const Measurement> measurements, double gate_prob,
                  UpdateReport* report, int iterations, double max_angle_spread) {
  state.check();
  const double threshold = gate_threshold(gate_prob);
  const Eigen::Index n = state.dim();
  const Eigen::MatrixXd& p = state.covariance;

  UpdateReport local;
  local.entries.resize(measurements.size());

  std::vector<std::size_t> accepted;
  std::vector<JacobianRow> rows;
  std::vector<double> innovations;
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    const Measurement& m = measurements[i];
    if (m.epoch != state.epoch) {
      throw StateError("measurement epoch " + std::to_string(m.epoch) + " does not match state epoch " +
                       std::to_string(state.epoch));
    }
    if (m.target_id >= state.targets() || m.anchor_id >= state.anchors() ||
        (m.kind == MeasurementKind::tdoa && m.ref_anchor_id >= state.anchors())) {
      throw StateError("measurement references a node outside the state");
    }
    MeasurementReport& entry = local.entries[i];
    if (!m.los) {
      entry.skipped = "nlos";
      continue;
    }
    JacobianRow row;
    double predicted = 0.0;
    try {
      predicted = h_model(m.kind, state, m.target_id, m.anchor_id, m.ref_anchor_id);
      row = jacobian(m.kind, state, m.target_id, m.anchor_id, m.ref_anchor_id);
    } catch (const EvaluationError& e) {
      entry.skipped = e.what();
      continue;
    }
    double nu = m.value - predicted;
    if (is_angle(m.kind)) nu = wrap_angle(nu);
    double s = m.variance;
    for (std::size_t a = 0; a < row.index.size(); ++a)
      for (std::size_t b = 0; b < row.index.size(); ++b) s += row.value[a] * p(row.index[a], row.index[b]) * row.value[b];
    entry.innovation = nu;
    entry.innovation_variance = s;
    if (!(s > 0.0) || !std::isfinite(s)) {
      entry.skipped = "innovation variance not positive";
      continue;
    }
    if (is_angle(m.kind) && s - m.variance > max_angle_spread * max_angle_spread) {
      entry.skipped = "predicted angle too uncertain";
      continue;
    }
    if (nu * nu / s > threshold) {
      entry.gated = true;
      continue;
    }
    entry.used = true;
    accepted.push_back(i);
    rows.push_back(std::move(row));
    innovations.push_back(nu);
  }

  JointState next = state;
  if (accepted.empty()) {
    local.log_covariance_trace = std::log(next.covariance.trace());
    if (report) *report = std::move(local);
    return next;
  }

  const auto m = static_cast<Eigen::Index>(accepted.size());
  Eigen::VectorXd r(m);
  for (Eigen::Index j = 0; j < m; ++j) r(j) = measurements[accepted[static_cast<std::size_t>(j)]].variance;

  // Nodes that no accepted measurement touches keep their predicted block.
  std::vector<bool> touched(state.targets() + state.anchors(), false);
  for (auto i : accepted) {
    const Measurement& meas = measurements[i];
    touched[meas.target_id] = true;
    touched[state.targets() + meas.anchor_id] = true;
    if (meas.kind == MeasurementKind::tdoa) touched[state.targets() + meas.ref_anchor_id] = true;
  }

  Eigen::VectorXd nu = Eigen::Map<const Eigen::VectorXd>(innovations.data(), m);
  Eigen::MatrixXd gain;
  for (int iteration = 0; iteration < std::max(iterations, 1); ++iteration) {
    if (iteration > 0) {
      // Relinearize at the current posterior mean (iterated EKF).
      JointState at = state;
      at.mean = next.mean;
      std::vector<JacobianRow> relinearized;
      Eigen::VectorXd relinearized_nu(m);
      try {
        for (Eigen::Index j = 0; j < m; ++j) {
          const Measurement& meas = measurements[accepted[static_cast<std::size_t>(j)]];
          JacobianRow row = jacobian(meas.kind, at, meas.target_id, meas.anchor_id, meas.ref_anchor_id);
          double v = meas.value - h_model(meas.kind, at, meas.target_id, meas.anchor_id, meas.ref_anchor_id);
          if (is_angle(meas.kind)) v = wrap_angle(v);
          for (std::size_t a = 0; a < row.index.size(); ++a) {
            v -= row.value[a] * (state.mean(row.index[a]) - at.mean(row.index[a]));
          }
          relinearized_nu(j) = v;
          relinearized.push_back(std::move(row));
        }
      } catch (const EvaluationError&) {
        break;
      }
      rows = std::move(relinearized);
      nu = relinearized_nu;
    }

    Eigen::MatrixXd pht = Eigen::MatrixXd::Zero(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const JacobianRow& row = rows[static_cast<std::size_t>(j)];
      for (std::size_t a = 0; a < row.index.size(); ++a) pht.col(j) += p.col(row.index[a]) * row.value[a];
    }
    Eigen::MatrixXd s(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const JacobianRow& row = rows[static_cast<std::size_t>(j)];
      for (Eigen::Index l = 0; l < m; ++l) {
        double v = 0.0;
        for (std::size_t a = 0; a < row.index.size(); ++a) v += row.value[a] * pht(row.index[a], l);
        s(j, l) = v;
      }
    }
    s.diagonal() += r;
    s = 0.5 * (s + s.transpose()).eval();
    const Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) {
      if (iteration > 0) break;
      for (auto i : accepted) {
        local.entries[i].used = false;
        local.entries[i].skipped = "stacked innovation covariance not positive definite";
      }
      local.log_covariance_trace = std::log(next.covariance.trace());
      if (report) *report = std::move(local);
      return next;
    }
    gain = llt.solve(pht.transpose()).transpose();
    for (std::size_t t = 0; t < state.targets(); ++t)
      if (!touched[t]) gain.middleRows(state.target_offset(t), kTargetBlock).setZero();
    for (std::size_t a = 0; a < state.anchors(); ++a)
      if (!touched[state.targets() + a]) gain.middleRows(state.anchor_offset(a), kAnchorBlock).setZero();
    next.mean = state.mean + gain * nu;
  }

  // Joseph form; valid for the partially zeroed gain as well.
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index j = 0; j < m; ++j) {
    const JacobianRow& row = rows[static_cast<std::size_t>(j)];
    for (std::size_t k = 0; k < row.index.size(); ++k) a.col(row.index[k]) -= gain.col(j) * row.value[k];
  }
  next.covariance = a * p * a.transpose() + gain * r.asDiagonal() * gain.transpose();
  next.symmetrize();
  local.log_covariance_trace = std::log(next.covariance.trace());
  if (report) *report = std::move(local);
  return next;
}

std::vector<TargetInit> batch_ls_init(std::span<const Measurement> measurements, std::size_t targets,
                                      std::span<const AnchorPrior> anchor_priors,
                                      std::span<const Orientation> orientations, const Scene& scene,
                                      const InitOptions& options) {
  if (!orientations.empty() && orientations.size() != anchor_priors.size()) {
    throw DomainError("one orientation per anchor is required");
  }
  auto orientation_of = [&](std::size_t a) -> Orientation {
    return orientations.empty() ? Orientation::Identity() : orientations[a];
  };

  std::vector<TargetInit> out;
  out.reserve(targets);
  for (std::size_t t = 0; t < targets; ++t) {
    std::vector<const Measurement*> rows;
    for (const Measurement& m : measurements) {
      if (m.target_id != t || !m.los) continue;
      if (m.anchor_id >= anchor_priors.size() ||
          (m.kind == MeasurementKind::tdoa && m.ref_anchor_id >= anchor_priors.size())) {
        throw DomainError("measurement references an anchor without a prior");
      }
      rows.push_back(&m);
    }
    if (rows.size() < 3) {
      throw InitializationError("target " + std::to_string(t) + ": " + std::to_string(rows.size()) +
                                " usable measurements, at least 3 required");
    }

    // Normalized residuals and their Jacobian at p. Rows that cannot be
    // evaluated (p on an anchor or its zenith) make the point unusable.
    auto linearize = [&](const Point3& p, Eigen::VectorXd& res, Eigen::MatrixX3d& jac) {
      const auto k = static_cast<Eigen::Index>(rows.size());
      res.resize(k);
      jac.resize(k, 3);
      for (Eigen::Index i = 0; i < k; ++i) {
        const Measurement& m = *rows[static_cast<std::size_t>(i)];
        const Point3* ref = m.kind == MeasurementKind::tdoa ? &anchor_priors[m.ref_anchor_id].mean : nullptr;
        const LinkModel lm = evaluate_link(m.kind, p, anchor_priors[m.anchor_id].mean, ref,
                                           orientation_of(m.anchor_id), true);
        const double sigma = std::sqrt(m.variance);
        double nu = m.value - lm.value;
        if (is_angle(m.kind)) nu = wrap_angle(nu);
        res(i) = nu / sigma;
        jac.row(i) = lm.d_target / sigma;
      }
    };

    const Point3 lo = scene.bounds.min_corner;
    const Point3 ext = scene.bounds.extent();
    double best_cost = std::numeric_limits<double>::infinity();
    Point3 best = Point3::Zero();
    Eigen::MatrixX3d best_jac;
    for (int ix = 0; ix < options.grid_x; ++ix) {
      for (int iy = 0; iy < options.grid_y; ++iy) {
        for (int iz = 0; iz < options.grid_z; ++iz) {
          Point3 p = lo + Point3((ix + 0.5) / options.grid_x * ext.x(), (iy + 0.5) / options.grid_y * ext.y(),
                                 (iz + 0.5) / options.grid_z * ext.z());
          Eigen::VectorXd res;
          Eigen::MatrixX3d jac;
          double cost = 0.0;
          double lambda = 1e-6;
          try {
            linearize(p, res, jac);
            cost = res.squaredNorm();
            for (int it = 0; it < options.max_iterations; ++it) {
              Eigen::Matrix3d normal = jac.transpose() * jac;
              const Eigen::Vector3d grad = jac.transpose() * res;
              bool accepted = false;
              for (int tries = 0; tries < 20 && !accepted; ++tries) {
                Eigen::Matrix3d damped = normal;
                damped.diagonal() += Eigen::Vector3d::Constant(lambda * std::max(normal.trace() / 3.0, 1e-12));
                const Point3 step = damped.ldlt().solve(grad);
                const Point3 trial = p + step;
                Eigen::VectorXd tres;
                Eigen::MatrixX3d tjac;
                try {
                  linearize(trial, tres, tjac);
                } catch (const EvaluationError&) {
                  lambda *= 10.0;
                  continue;
                }
                const double tcost = tres.squaredNorm();
                if (tcost <= cost) {
                  const bool done = step.norm() < 1e-12 * std::max(1.0, p.norm()) || cost - tcost < 1e-15 * cost;
                  p = trial;
                  res = tres;
                  jac = tjac;
                  cost = tcost;
                  lambda = std::max(lambda * 0.1, 1e-12);
                  accepted = true;
                  if (done) it = options.max_iterations;
                } else {
                  lambda *= 10.0;
                }
              }
              if (!accepted) break;
            }
          } catch (const EvaluationError&) {
            continue;
          }
          if (cost < best_cost) {
            best_cost = cost;
            best = p;
            best_jac = jac;
          }
        }
      }
    }
    if (!std::isfinite(best_cost)) {
      throw InitializationError("target " + std::to_string(t) + ": no start point could be evaluated");
    }
    best = best.cwiseMax(scene.bounds.min_corner).cwiseMin(scene.bounds.max_corner);
    const Eigen::Matrix3d normal = best_jac.transpose() * best_jac;
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(normal);
    const double lmax = eig.eigenvalues().maxCoeff();
    if (!(lmax > 0.0) || eig.eigenvalues().minCoeff() < options.rank_tolerance * lmax) {
      throw InitializationError("target " + std::to_string(t) +
                                ": measurement geometry is rank-deficient (position ambiguous)");
    }
    out.push_back({best, normal.inverse()});
  }
  return out;
}

JointState init_joint_state(std::span<const TargetInit> targets, std::span<const AnchorPrior> anchor_priors,
                            std::span<const Orientation> orientations, const KinematicPrior& kinematics) {
  if (anchor_priors.empty()) throw DomainError("at least one anchor prior is required");
  if (!orientations.empty() && orientations.size() != anchor_priors.size()) {
    throw DomainError("one orientation per anchor is required");
  }
  JointState s(targets.size(), anchor_priors.size());
  s.covariance.setZero();
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const Eigen::Index o = s.target_offset(t);
    s.mean.segment<3>(o) = targets[t].position;
    s.covariance.block<3, 3>(o, o) = targets[t].covariance;
    s.covariance.block<3, 3>(o + 3, o + 3).diagonal().setConstant(kinematics.velocity_sigma * kinematics.velocity_sigma);
    s.covariance.block<3, 3>(o + 6, o + 6).diagonal().setConstant(kinematics.acceleration_sigma *
                                                                   kinematics.acceleration_sigma);
  }
  for (std::size_t a = 0; a < anchor_priors.size(); ++a) {
    const Eigen::Index o = s.anchor_offset(a);
    s.mean.segment<3>(o) = anchor_priors[a].mean;
    s.covariance.block<3, 3>(o, o).diagonal().setConstant(anchor_priors[a].sigma * anchor_priors[a].sigma);
    if (!orientations.empty()) s.set_orientation(a, orientations[a]);
  }
  s.symmetrize();
  return s;
}

double nees(const JointState& state, const Eigen::VectorXd& truth) {
  if (truth.size() != state.dim()) throw StateError("truth vector dimension mismatch");
  const Eigen::VectorXd e = state.mean - truth;
  const Eigen::LLT<Eigen::MatrixXd> llt(state.covariance);
  if (llt.info() != Eigen::Success) throw StateError("covariance is not positive definite");
  return e.dot(llt.solve(e));
}

}  // namespace locfuse

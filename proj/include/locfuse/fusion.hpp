#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "locfuse/measurement.hpp"
#include "locfuse/scene.hpp"

namespace locfuse {

/// Per-target block layout: position, velocity, acceleration.
inline constexpr Eigen::Index kTargetBlock = 9;
inline constexpr Eigen::Index kAnchorBlock = 3;

struct ProcessModel {
  double dt{0.1};
  double target_jerk_psd{1.0};  // m^2/s^5
  double anchor_jitter{1e-9};   // m^2/s

  void validate() const;
  bool operator==(const ProcessModel&) const = default;
};

/// Stacked mean and covariance of every target kinematic block followed by
/// every anchor position block. Anchor array orientations are known
/// parameters carried alongside the estimate.
class JointState {
 public:
  JointState() = default;
  JointState(std::size_t targets, std::size_t anchors);

  std::size_t targets() const { return targets_; }
  std::size_t anchors() const { return anchors_; }
  Eigen::Index dim() const { return mean.size(); }

  Eigen::Index target_offset(std::size_t target_id) const;
  Eigen::Index anchor_offset(std::size_t anchor_id) const;

  Point3 target_position(std::size_t target_id) const { return mean.segment<3>(target_offset(target_id)); }
  Point3 anchor_position(std::size_t anchor_id) const { return mean.segment<3>(anchor_offset(anchor_id)); }
  Eigen::Matrix3d target_position_cov(std::size_t target_id) const;
  Eigen::Matrix3d anchor_position_cov(std::size_t anchor_id) const;
  const Orientation& orientation(std::size_t anchor_id) const { return orientations_.at(anchor_id); }
  void set_orientation(std::size_t anchor_id, const Orientation& r) { orientations_.at(anchor_id) = r; }

  /// Symmetry and positive definiteness; throws StateError.
  void check() const;
  void symmetrize();

  std::size_t epoch{0};
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

 private:
  std::size_t targets_{0};
  std::size_t anchors_{0};
  std::vector<Orientation> orientations_;
};

/// Constant-acceleration targets with white-jerk noise, static anchors.
JointState predict(const JointState& state, const ProcessModel& model);

/// Adds the covariance of an unmodelled velocity step (std sigma_velocity per
/// axis) somewhere within the last dt to a target block.
void add_velocity_step_noise(JointState& state, std::size_t target_id, double sigma_velocity, double dt);

/// Predicted measurement. Throws EvaluationError for coincident positions.
double h_model(MeasurementKind kind, const JointState& state, std::size_t target_id, std::size_t anchor_id,
               std::size_t ref_anchor_id = kNoAnchor);

/// Nonzero entries of one Jacobian row over the joint state.
struct JacobianRow {
  std::vector<Eigen::Index> index;
  std::vector<double> value;

  Eigen::RowVectorXd dense(Eigen::Index dim) const;
};

JacobianRow jacobian(MeasurementKind kind, const JointState& state, std::size_t target_id,
                     std::size_t anchor_id, std::size_t ref_anchor_id = kNoAnchor);

struct MeasurementReport {
  double innovation{0.0};
  double innovation_variance{0.0};
  bool gated{false};
  bool used{false};
  std::string skipped;  // reason when neither gated nor used
};

struct UpdateReport {
  std::vector<MeasurementReport> entries;  // aligned with the input list
  double log_covariance_trace{0.0};
  std::size_t used() const;
  std::size_t gated() const;
};

/// Chi-square threshold on a scalar normalized innovation.
double gate_threshold(double gate_prob);

/// Stacked EKF update. NLoS measurements are dropped, the rest are gated
/// individually, and nodes with no accepted measurement keep their prior.
/// iterations > 1 relinearizes at the posterior mean (iterated EKF); gating
/// uses the first linearization. Angles whose predicted standard deviation
/// exceeds max_angle_spread (rad) are skipped.
JointState update(const JointState& state, std::span<const Measurement> measurements, double gate_prob,
                  UpdateReport* report = nullptr, int iterations = 1,
                  double max_angle_spread = std::numeric_limits<double>::infinity());

struct AnchorPrior {
  Point3 mean;
  double sigma{2.0};
};

struct TargetInit {
  Point3 position;
  Eigen::Matrix3d covariance{Eigen::Matrix3d::Identity()};
};

struct InitOptions {
  int grid_x{7};
  int grid_y{3};
  int grid_z{3};
  int max_iterations{50};
  /// Smallest normalized eigenvalue of J^T J accepted as full rank.
  double rank_tolerance{1e-9};
};

/// Gauss-Newton fit of each target position from epoch-0 measurements with
/// anchors fixed at their prior means; the lowest-cost minimum is projected
/// into the scene bounds. Throws InitializationError when a
/// target is under-determined or its geometry is rank-deficient.
std::vector<TargetInit> batch_ls_init(std::span<const Measurement> measurements, std::size_t targets,
                                      std::span<const AnchorPrior> anchor_priors,
                                      std::span<const Orientation> orientations, const Scene& scene,
                                      const InitOptions& options = {});

struct KinematicPrior {
  double velocity_sigma{1.5};
  double acceleration_sigma{1.5};
  bool operator==(const KinematicPrior&) const = default;
};

/// Block-diagonal initial state.
JointState init_joint_state(std::span<const TargetInit> targets, std::span<const AnchorPrior> anchor_priors,
                            std::span<const Orientation> orientations, const KinematicPrior& kinematics = {});

/// Normalized estimation error squared of the full state.
double nees(const JointState& state, const Eigen::VectorXd& truth);

}  // namespace locfuse

#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "locfuse/scene.hpp"

namespace locfuse {

struct WaypointModelParams {
  double speed_min{1.0};   // m/s
  double speed_max{1.2};   // m/s
  double duration_s{500.0};
  double epoch_dt_s{0.1};
  ZBand z_band{0.5, 17.5};
  double pause_s{0.0};

  void validate() const;
  /// floor(duration / dt), robust to representation error in dt.
  std::size_t epoch_count() const;

  bool operator==(const WaypointModelParams&) const = default;
};

struct Kinematics {
  Point3 position;
  Point3 velocity;
  Point3 acceleration;
};

/// Epoch-sampled ground truth of one target. Immutable once built.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(double epoch_dt_s, std::vector<Point3> positions, std::vector<Point3> velocities,
             std::vector<Point3> accelerations, std::vector<bool> leg_interior);

  std::size_t epochs() const { return positions_.size(); }
  double epoch_dt() const { return epoch_dt_s_; }

  /// Throws IndexError for an epoch outside [0, epochs()).
  Kinematics sample(std::size_t epoch) const;

  const std::vector<Point3>& positions() const { return positions_; }
  const std::vector<Point3>& velocities() const { return velocities_; }
  const std::vector<Point3>& accelerations() const { return accelerations_; }
  /// True when epochs k and k+1 lie on the same leg.
  bool leg_interior(std::size_t epoch) const { return leg_interior_.at(epoch); }

 private:
  double epoch_dt_s_{0.1};
  std::vector<Point3> positions_;
  std::vector<Point3> velocities_;
  std::vector<Point3> accelerations_;
  std::vector<bool> leg_interior_;
};

/// Random-waypoint motion: uniform waypoints in the free volume, constant
/// per-leg speed drawn from [speed_min, speed_max].
Trajectory generate_trajectory(const WaypointModelParams& params, const Scene& scene,
                               std::uint64_t seed);

inline Kinematics kinematic_sample(const Trajectory& traj, std::size_t epoch) {
  return traj.sample(epoch);
}

/// CSV columns: epoch,x,y,z,vx,vy,vz
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

}  // namespace locfuse

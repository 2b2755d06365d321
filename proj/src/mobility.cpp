#include "locfuse/mobility.hpp"

#include <cmath>
#include <ostream>
#include <random>
#include <string>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "locfuse/errors.hpp"
#include "locfuse/random.hpp"

namespace locfuse {

void WaypointModelParams::validate() const {
  if (!(speed_min > 0.0) || !(speed_min <= speed_max) || !std::isfinite(speed_max)) {
    throw DomainError("waypoint speeds must satisfy 0 < speed_min <= speed_max");
  }
  if (!(epoch_dt_s > 0.0) || !std::isfinite(epoch_dt_s)) throw DomainError("epoch_dt_s must be positive");
  if (!(duration_s >= epoch_dt_s) || !std::isfinite(duration_s)) {
    throw DomainError("duration_s must be at least epoch_dt_s");
  }
  if (!(z_band.lo <= z_band.hi)) throw DomainError("waypoint z band is empty");
  if (!(pause_s >= 0.0)) throw DomainError("pause_s must be non-negative");
}

std::size_t WaypointModelParams::epoch_count() const {
  return static_cast<std::size_t>(std::floor(duration_s / epoch_dt_s + 1e-9));
}

Trajectory::Trajectory(double epoch_dt_s, std::vector<Point3> positions, std::vector<Point3> velocities,
                       std::vector<Point3> accelerations, std::vector<bool> leg_interior)
    : epoch_dt_s_(epoch_dt_s),
      positions_(std::move(positions)),
      velocities_(std::move(velocities)),
      accelerations_(std::move(accelerations)),
      leg_interior_(std::move(leg_interior)) {
  if (velocities_.size() != positions_.size() || accelerations_.size() != positions_.size() ||
      leg_interior_.size() != positions_.size()) {
    throw DomainError("trajectory arrays must share one length");
  }
}

Kinematics Trajectory::sample(std::size_t epoch) const {
  if (epoch >= positions_.size()) {
    throw IndexError("epoch " + std::to_string(epoch) + " outside trajectory of " +
                     std::to_string(positions_.size()) + " epochs");
  }
  return {positions_[epoch], velocities_[epoch], accelerations_[epoch]};
}

namespace {

constexpr int kMaxWaypointTries = 10000;
constexpr double kMinLegLength = 1.0;

// One leg, or a pause when `speed` is zero.
struct Leg {
  Point3 from;
  Point3 velocity;
  double t_start;
  double t_end;
};

class WaypointSource {
 public:
  WaypointSource(const WaypointModelParams& params, const Scene& scene, std::uint64_t seed)
      : params_(params), scene_(scene), rng_(seed) {
    const double margin = 0.5;
    lo_ = scene.bounds.min_corner + Point3::Constant(margin);
    hi_ = scene.bounds.max_corner - Point3::Constant(margin);
    lo_.z() = std::max(lo_.z(), params.z_band.lo);
    hi_.z() = std::min(hi_.z(), params.z_band.hi);
    if (!(lo_.array() <= hi_.array()).all()) {
      throw DomainError("waypoint z band does not intersect the scene interior");
    }
  }

  Point3 next(const Point3* previous) {
    for (int i = 0; i < kMaxWaypointTries; ++i) {
      const Point3 p(uniform(lo_.x(), hi_.x()), uniform(lo_.y(), hi_.y()), uniform(lo_.z(), hi_.z()));
      if (!scene_.is_free(p)) continue;
      if (previous != nullptr && (p - *previous).norm() < kMinLegLength) continue;
      return p;
    }
    throw PlacementError("could not place a waypoint outside obstacles");
  }

  double speed() { return uniform(params_.speed_min, params_.speed_max); }

 private:
  double uniform(double a, double b) {
    if (a == b) return a;
    return std::uniform_real_distribution<double>(a, b)(rng_);
  }

  const WaypointModelParams& params_;
  const Scene& scene_;
  Rng rng_;
  Point3 lo_;
  Point3 hi_;
};

}  // namespace

Trajectory generate_trajectory(const WaypointModelParams& params, const Scene& scene,
                               std::uint64_t seed) {
  params.validate();
  scene.validate();
  const std::size_t n = params.epoch_count();
  const double dt = params.epoch_dt_s;

  WaypointSource source(params, scene, seed);
  std::vector<Leg> legs;
  Point3 here = source.next(nullptr);
  double t = 0.0;
  const double horizon = static_cast<double>(n) * dt;
  while (t <= horizon) {
    const Point3 there = source.next(&here);
    const Point3 delta = there - here;
    const double speed = source.speed();
    const double leg_time = delta.norm() / speed;
    legs.push_back({here, delta / leg_time, t, t + leg_time});
    t += leg_time;
    if (params.pause_s > 0.0) {
      legs.push_back({there, Point3::Zero(), t, t + params.pause_s});
      t += params.pause_s;
    }
    here = there;
  }

  std::vector<Point3> pos(n);
  std::vector<Point3> vel(n);
  std::vector<std::size_t> leg_of(n);
  std::size_t leg = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double tk = static_cast<double>(k) * dt;
    while (leg + 1 < legs.size() && tk >= legs[leg].t_end) ++leg;
    const Leg& l = legs[leg];
    pos[k] = l.from + l.velocity * (tk - l.t_start);
    vel[k] = l.velocity;
    leg_of[k] = leg;
  }

  // Turns are instantaneous, so the acceleration is a one-epoch impulse.
  std::vector<Point3> acc(n, Point3::Zero());
  std::vector<bool> interior(n, false);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    acc[k] = (vel[k + 1] - vel[k]) / dt;
    interior[k] = leg_of[k] == leg_of[k + 1];
  }
  return Trajectory(dt, std::move(pos), std::move(vel), std::move(acc), std::move(interior));
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "epoch,x,y,z,vx,vy,vz\n";
  for (std::size_t k = 0; k < traj.epochs(); ++k) {
    const Point3& p = traj.positions()[k];
    const Point3& v = traj.velocities()[k];
    fmt::print(out, "{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", k, p.x(), p.y(), p.z(), v.x(), v.y(),
               v.z());
  }
}

}  // namespace locfuse

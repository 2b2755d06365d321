#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "locfuse/random.hpp"
#include "locfuse/scene.hpp"

namespace locfuse {

enum class MeasurementKind { toa, tdoa, aoa_az, aoa_el };

std::string_view to_string(MeasurementKind kind);
inline bool is_angle(MeasurementKind kind) {
  return kind == MeasurementKind::aoa_az || kind == MeasurementKind::aoa_el;
}

inline constexpr std::size_t kNoAnchor = static_cast<std::size_t>(-1);

/// One observation. Delay kinds are in seconds, angle kinds in radians.
struct Measurement {
  MeasurementKind kind{MeasurementKind::toa};
  std::size_t target_id{0};
  std::size_t anchor_id{0};
  std::size_t ref_anchor_id{kNoAnchor};  // tdoa only
  std::size_t epoch{0};
  double value{0.0};
  double variance{1.0};
  bool los{true};

  /// Throws DomainError when an invariant is broken.
  void validate() const;
};

/// Wraps into (-pi, pi].
double wrap_angle(double theta);

struct NoiseModel {
  double sigma_delay_m{0.10204};
  double sigma_angle_deg{1.0204};

  void validate() const;
  double sigma_delay_s() const { return sigma_delay_m / kSpeedOfLight; }
  double sigma_angle_rad() const;
  bool operator==(const NoiseModel&) const = default;
};

/// Sigma of a zero-mean Gaussian whose central `central_prob` mass lies
/// within +/- bound.
double calibrate_sigma(double central_prob, double bound);

/// Array-to-global rotation. Column 0 is boresight.
using Orientation = Eigen::Matrix3d;

/// Rotation whose boresight points horizontally from `from` toward `to`.
Orientation facing(const Point3& from, const Point3& to);

struct LinkGeometry {
  double range{0.0};
  double azimuth{0.0};
  double elevation{0.0};
};

/// Range and direction of `target` seen from `anchor` in the anchor's array
/// frame. Azimuth is 0 at the zenith/nadir.
LinkGeometry true_geometry(const Point3& target, const Point3& anchor,
                           const Orientation& orientation = Orientation::Identity());

/// Statistical-mode draw. `reference` is the reference anchor for tdoa and
/// is ignored otherwise. Ids and epoch are left for the caller to fill.
Measurement synth_statistical(MeasurementKind kind, const Point3& target, const Point3& anchor,
                              const NoiseModel& noise, Rng& rng,
                              const std::optional<Point3>& reference = std::nullopt,
                              const Orientation& orientation = Orientation::Identity());

}  // namespace locfuse

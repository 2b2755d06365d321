#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace locfuse {

/// Global right-handed frame, meters, z up.
using Point3 = Eigen::Vector3d;

inline constexpr double kSpeedOfLight = 299792458.0;

/// Axis-aligned box, used both for the hall volume and for obstacles.
struct Box {
  Point3 min_corner{Point3::Zero()};
  Point3 max_corner{Point3::Zero()};

  Point3 extent() const { return max_corner - min_corner; }
  Point3 center() const { return 0.5 * (min_corner + max_corner); }
  /// Closed containment.
  bool contains(const Point3& p) const;
  /// Open containment (boundary excluded).
  bool contains_strictly(const Point3& p) const;
  bool contains(const Box& other) const;

  bool operator==(const Box& o) const {
    return min_corner == o.min_corner && max_corner == o.max_corner;
  }
};

/// Closed interval of heights.
struct ZBand {
  double lo{0.0};
  double hi{0.0};
  bool operator==(const ZBand&) const = default;
};

struct Scene {
  Box bounds{Point3::Zero(), Point3(70.0, 25.0, 18.0)};
  std::vector<Box> obstacles;
  double carrier_freq_hz{26e9};
  double tx_power_dbm{0.0};
  double rx_sensitivity_dbm{-90.0};
  double rx_array_gain_db{18.06};

  /// Throws DomainError when an invariant is broken.
  void validate() const;
  /// Inside the bounds and outside every obstacle interior.
  bool is_free(const Point3& p) const;

  bool operator==(const Scene&) const = default;
};

/// True iff the open segment (a, b) crosses no obstacle interior. Touching a
/// face or an edge does not block.
bool los_check(const Scene& scene, const Point3& a, const Point3& b);

/// Free-space path loss 20*log10(4*pi*d*f/c).
double path_loss_db(double distance_m, double freq_hz);

/// Received power at `rx` for an isotropic transmitter at `tx`.
double received_power_dbm(const Scene& scene, const Point3& tx, const Point3& rx);

bool link_available(const Scene& scene, const Point3& tx, const Point3& rx);

enum class RangingMode { toa, tdoa };

struct Dop {
  double hdop{0.0};
  double vdop{0.0};
  double pdop{0.0};
};

/// Dilution of precision for delay-based positioning. Components touched by
/// the null space of G^T G are +infinity.
Dop gdop(std::span<const Point3> anchors, const Point3& target, RangingMode mode);

enum class LayoutKind { collinear, noncollinear, random };

struct AnchorLayout {
  LayoutKind kind{LayoutKind::noncollinear};
  std::vector<Point3> positions;
};

/// Largest distance of any point to the total-least-squares line through them.
double line_fit_residual(std::span<const Point3> points);

AnchorLayout make_anchor_layout(LayoutKind kind, std::size_t n, const Scene& scene,
                                ZBand z_band, std::uint64_t seed);

}  // namespace locfuse

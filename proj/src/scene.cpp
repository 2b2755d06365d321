#include "locfuse/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "locfuse/errors.hpp"
#include "locfuse/random.hpp"

namespace locfuse {

bool Box::contains(const Point3& p) const {
  return (p.array() >= min_corner.array()).all() && (p.array() <= max_corner.array()).all();
}

bool Box::contains_strictly(const Point3& p) const {
  return (p.array() > min_corner.array()).all() && (p.array() < max_corner.array()).all();
}

bool Box::contains(const Box& other) const {
  return contains(other.min_corner) && contains(other.max_corner);
}

void Scene::validate() const {
  if (!bounds.min_corner.allFinite() || !bounds.max_corner.allFinite() ||
      !(bounds.min_corner.array() < bounds.max_corner.array()).all()) {
    throw DomainError("scene bounds must be finite with min_corner < max_corner");
  }
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const Box& o = obstacles[i];
    if (!(o.min_corner.array() <= o.max_corner.array()).all()) {
      throw DomainError("obstacle " + std::to_string(i) + ": min_corner must not exceed max_corner");
    }
    if (!bounds.contains(o)) {
      throw DomainError("obstacle " + std::to_string(i) + " is not inside the scene bounds");
    }
  }
  if (!(carrier_freq_hz > 0.0) || !std::isfinite(carrier_freq_hz)) {
    throw DomainError("carrier_freq_hz must be positive");
  }
  if (!std::isfinite(tx_power_dbm) || !std::isfinite(rx_sensitivity_dbm) ||
      !std::isfinite(rx_array_gain_db)) {
    throw DomainError("link budget terms must be finite");
  }
}

bool Scene::is_free(const Point3& p) const {
  if (!bounds.contains(p)) return false;
  return std::none_of(obstacles.begin(), obstacles.end(),
                      [&](const Box& o) { return o.contains_strictly(p); });
}

namespace {

// Slab test against the open box interior. The set of t in (0, 1) for which
// a + t*d lies strictly inside every slab is an open interval; it is blocked
// iff that interval is nonempty.
bool segment_hits_interior(const Box& box, const Point3& a, const Point3& b) {
  const Point3 d = b - a;
  double t_enter = 0.0;
  double t_exit = 1.0;
  for (int axis = 0; axis < 3; ++axis) {
    const double lo = box.min_corner[axis];
    const double hi = box.max_corner[axis];
    if (d[axis] == 0.0) {
      if (!(a[axis] > lo && a[axis] < hi)) return false;
      continue;
    }
    double t0 = (lo - a[axis]) / d[axis];
    double t1 = (hi - a[axis]) / d[axis];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
    if (!(t_enter < t_exit)) return false;
  }
  return t_enter < t_exit;
}

}  // namespace

bool los_check(const Scene& scene, const Point3& a, const Point3& b) {
  if (a == b) return true;
  for (const Box& o : scene.obstacles) {
    // Degenerate (flat) boxes have no interior.
    if (!(o.min_corner.array() < o.max_corner.array()).all()) continue;
    if (segment_hits_interior(o, a, b)) return false;
  }
  return true;
}

double path_loss_db(double distance_m, double freq_hz) {
  if (!(distance_m > 0.0) || !(freq_hz > 0.0)) {
    throw DomainError("path_loss_db requires positive distance and frequency");
  }
  return 20.0 * std::log10(4.0 * std::numbers::pi * distance_m * freq_hz / kSpeedOfLight);
}

double received_power_dbm(const Scene& scene, const Point3& tx, const Point3& rx) {
  return scene.tx_power_dbm - path_loss_db((tx - rx).norm(), scene.carrier_freq_hz) +
         scene.rx_array_gain_db;
}

bool link_available(const Scene& scene, const Point3& tx, const Point3& rx) {
  if (!los_check(scene, tx, rx)) return false;
  return received_power_dbm(scene, tx, rx) >= scene.rx_sensitivity_dbm;
}

Dop gdop(std::span<const Point3> anchors, const Point3& target, RangingMode mode) {
  if (anchors.size() < 2) throw DomainError("gdop needs at least two anchors");

  Eigen::MatrixX3d unit(anchors.size(), 3);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const Point3 d = target - anchors[i];
    const double r = d.norm();
    if (!(r > 0.0)) throw DomainError("gdop: target coincides with anchor " + std::to_string(i));
    unit.row(static_cast<Eigen::Index>(i)) = (d / r).transpose();
  }

  Eigen::MatrixX3d g;
  if (mode == RangingMode::toa) {
    g = unit;
  } else {
    g = unit.bottomRows(unit.rows() - 1).rowwise() - unit.row(0);
  }

  const Eigen::Matrix3d normal = g.transpose() * g;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(normal);
  const Eigen::Vector3d lambda = eig.eigenvalues();
  const Eigen::Matrix3d v = eig.eigenvectors();
  const double tol = 1e-10 * std::max(lambda.cwiseAbs().maxCoeff(), 1e-300);

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  bool axis_unobservable[3] = {false, false, false};
  bool singular = false;
  for (int k = 0; k < 3; ++k) {
    if (lambda[k] > tol) {
      cov += v.col(k) * v.col(k).transpose() / lambda[k];
    } else {
      singular = true;
      for (int axis = 0; axis < 3; ++axis) {
        if (std::abs(v(axis, k)) > 1e-6) axis_unobservable[axis] = true;
      }
    }
  }

  constexpr double inf = std::numeric_limits<double>::infinity();
  Dop out;
  out.hdop = (axis_unobservable[0] || axis_unobservable[1]) ? inf : std::sqrt(cov(0, 0) + cov(1, 1));
  out.vdop = axis_unobservable[2] ? inf : std::sqrt(cov(2, 2));
  out.pdop = singular ? inf : std::sqrt(cov.trace());
  return out;
}

double line_fit_residual(std::span<const Point3> points) {
  if (points.size() <= 2) return 0.0;
  Point3 centroid = Point3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (const auto& p : points) scatter += (p - centroid) * (p - centroid).transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  const Point3 dir = eig.eigenvectors().col(2);

  double worst = 0.0;
  for (const auto& p : points) {
    const Point3 d = p - centroid;
    worst = std::max(worst, (d - d.dot(dir) * dir).norm());
  }
  return worst;
}

namespace {

constexpr double kWallMargin = 0.5;
constexpr int kMaxPlacementTries = 2000;

struct Sampler {
  Rng rng;
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
};

// Usable height interval: the band clipped away from floor and ceiling.
ZBand usable_band(const Scene& scene, ZBand band) {
  const double floor = scene.bounds.min_corner.z();
  const double ceil = scene.bounds.max_corner.z();
  const double margin = std::min(kWallMargin, 0.25 * (ceil - floor));
  return {std::max(band.lo, floor + margin), std::min(band.hi, ceil - margin)};
}

bool all_free(const Scene& scene, const std::vector<Point3>& pts) {
  return std::all_of(pts.begin(), pts.end(), [&](const Point3& p) {
    return scene.is_free(p) && scene.bounds.contains_strictly(p);
  });
}

std::vector<Point3> try_collinear(Sampler& s, std::size_t n, const Scene& scene, ZBand band) {
  const Point3 lo = scene.bounds.min_corner;
  const Point3 hi = scene.bounds.max_corner;
  const double span = (hi.x() - lo.x()) - 2.0 * kWallMargin;
  const double max_spacing = std::min(12.0, span / static_cast<double>(n - 1));
  const double min_spacing = std::min(4.0, max_spacing);
  const double spacing = s.uniform(min_spacing, max_spacing);
  const double length = spacing * static_cast<double>(n - 1);
  const double x0 = s.uniform(lo.x() + kWallMargin, hi.x() - kWallMargin - length);
  const double y = s.uniform(lo.y() + kWallMargin, hi.y() - kWallMargin);
  const double z = s.uniform(band.lo, band.hi);
  std::vector<Point3> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pts.emplace_back(x0 + spacing * static_cast<double>(i), y, z);
  return pts;
}

// Zig-zag along the long axis, alternating between the two long walls.
std::vector<Point3> try_noncollinear(Sampler& s, std::size_t n, const Scene& scene, ZBand band) {
  const Point3 lo = scene.bounds.min_corner + Point3::Constant(kWallMargin);
  const Point3 hi = scene.bounds.max_corner - Point3::Constant(kWallMargin);
  const double cell = (hi.x() - lo.x()) / static_cast<double>(n);
  const double width = hi.y() - lo.y();
  std::vector<Point3> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = lo.x() + cell * (static_cast<double>(i) + s.uniform(0.25, 0.75));
    const double y = (i % 2 == 0) ? s.uniform(lo.y(), lo.y() + 0.35 * width)
                                  : s.uniform(lo.y() + 0.65 * width, hi.y());
    pts.emplace_back(x, y, s.uniform(band.lo, band.hi));
  }
  return pts;
}

std::vector<Point3> try_random(Sampler& s, std::size_t n, const Scene& scene, ZBand band) {
  const Point3 lo = scene.bounds.min_corner + Point3::Constant(kWallMargin);
  const Point3 hi = scene.bounds.max_corner - Point3::Constant(kWallMargin);
  std::vector<Point3> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts.emplace_back(s.uniform(lo.x(), hi.x()), s.uniform(lo.y(), hi.y()), s.uniform(band.lo, band.hi));
  }
  return pts;
}

}  // namespace

AnchorLayout make_anchor_layout(LayoutKind kind, std::size_t n, const Scene& scene, ZBand z_band,
                                std::uint64_t seed) {
  scene.validate();
  if (n < 2) throw DomainError("an anchor layout needs at least two anchors");
  if (!(z_band.lo <= z_band.hi) || z_band.lo < scene.bounds.min_corner.z() ||
      z_band.hi > scene.bounds.max_corner.z()) {
    throw DomainError("anchor z band must lie inside the scene bounds");
  }
  if (kind == LayoutKind::noncollinear && n < 3) {
    throw PlacementError("a non-collinear layout needs at least three anchors");
  }
  const ZBand band = usable_band(scene, z_band);
  if (!(band.lo <= band.hi)) throw PlacementError("anchor z band leaves no usable height");

  Sampler sampler{Rng(seed)};
  for (int attempt = 0; attempt < kMaxPlacementTries; ++attempt) {
    std::vector<Point3> pts;
    switch (kind) {
      case LayoutKind::collinear: pts = try_collinear(sampler, n, scene, band); break;
      case LayoutKind::noncollinear: pts = try_noncollinear(sampler, n, scene, band); break;
      case LayoutKind::random: pts = try_random(sampler, n, scene, band); break;
    }
    if (!all_free(scene, pts)) continue;
    if (kind == LayoutKind::noncollinear && line_fit_residual(pts) < 1.0) continue;
    return AnchorLayout{kind, std::move(pts)};
  }
  throw PlacementError("could not place " + std::to_string(n) + " anchors after " +
                       std::to_string(kMaxPlacementTries) + " attempts");
}

}  // namespace locfuse

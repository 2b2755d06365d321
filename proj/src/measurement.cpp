#include "locfuse/measurement.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "locfuse/errors.hpp"

namespace locfuse {

std::string_view to_string(MeasurementKind kind) {
  switch (kind) {
    case MeasurementKind::toa: return "toa";
    case MeasurementKind::tdoa: return "tdoa";
    case MeasurementKind::aoa_az: return "aoa_az";
    case MeasurementKind::aoa_el: return "aoa_el";
  }
  return "unknown";
}

double wrap_angle(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(theta, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

void Measurement::validate() const {
  if (!(variance > 0.0) || !std::isfinite(variance)) throw DomainError("measurement variance must be positive");
  if (!std::isfinite(value)) throw DomainError("measurement value must be finite");
  if (kind == MeasurementKind::tdoa) {
    if (ref_anchor_id == kNoAnchor) throw DomainError("tdoa measurement needs a reference anchor");
    if (ref_anchor_id == anchor_id) throw DomainError("tdoa reference anchor must differ from the anchor");
  }
  if (is_angle(kind) && !(value > -std::numbers::pi && value <= std::numbers::pi)) {
    throw DomainError("angle measurement must lie in (-pi, pi]");
  }
}

void NoiseModel::validate() const {
  if (!(sigma_delay_m > 0.0) || !(sigma_angle_deg > 0.0)) throw DomainError("noise sigmas must be positive");
}

double NoiseModel::sigma_angle_rad() const { return sigma_angle_deg * std::numbers::pi / 180.0; }

double calibrate_sigma(double central_prob, double bound) {
  if (!(central_prob > 0.0 && central_prob < 1.0)) throw DomainError("central_prob must lie in (0, 1)");
  if (!(bound > 0.0)) throw DomainError("bound must be positive");
  const double z = boost::math::quantile(boost::math::normal(), 0.5 * (1.0 + central_prob));
  return bound / z;
}

Orientation facing(const Point3& from, const Point3& to) {
  const double yaw = std::atan2(to.y() - from.y(), to.x() - from.x());
  Orientation r = Orientation::Identity();
  r(0, 0) = std::cos(yaw);
  r(0, 1) = -std::sin(yaw);
  r(1, 0) = std::sin(yaw);
  r(1, 1) = std::cos(yaw);
  return r;
}

LinkGeometry true_geometry(const Point3& target, const Point3& anchor, const Orientation& orientation) {
  const Point3 d = orientation.transpose() * (target - anchor);
  const double range = d.norm();
  if (!(range > 0.0)) throw DomainError("true_geometry: target and anchor coincide");
  const double horizontal = std::hypot(d.x(), d.y());
  LinkGeometry g;
  g.range = range;
  g.elevation = std::atan2(d.z(), horizontal);
  g.azimuth = horizontal > 0.0 ? std::atan2(d.y(), d.x()) : 0.0;
  return g;
}

Measurement synth_statistical(MeasurementKind kind, const Point3& target, const Point3& anchor,
                              const NoiseModel& noise, Rng& rng, const std::optional<Point3>& reference,
                              const Orientation& orientation) {
  std::normal_distribution<double> unit(0.0, 1.0);
  const LinkGeometry g = true_geometry(target, anchor, orientation);
  Measurement m;
  m.kind = kind;
  switch (kind) {
    case MeasurementKind::toa: {
      const double sigma = noise.sigma_delay_s();
      m.value = g.range / kSpeedOfLight + sigma * unit(rng);
      m.variance = sigma * sigma;
      break;
    }
    case MeasurementKind::tdoa: {
      if (!reference) throw DomainError("tdoa synthesis needs a reference anchor position");
      const double sigma = noise.sigma_delay_s();
      const double ref_range = (target - *reference).norm();
      const double toa = g.range / kSpeedOfLight + sigma * unit(rng);
      const double toa_ref = ref_range / kSpeedOfLight + sigma * unit(rng);
      m.value = toa - toa_ref;
      m.variance = 2.0 * sigma * sigma;
      break;
    }
    case MeasurementKind::aoa_az:
    case MeasurementKind::aoa_el: {
      const double sigma = noise.sigma_angle_rad();
      const double truth = kind == MeasurementKind::aoa_az ? g.azimuth : g.elevation;
      m.value = wrap_angle(truth + sigma * unit(rng));
      m.variance = sigma * sigma;
      break;
    }
  }
  return m;
}

}  // namespace locfuse

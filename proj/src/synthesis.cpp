#include "locfuse/synthesis.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "locfuse/errors.hpp"

namespace locfuse {

std::string_view to_string(MeasurementSet set) {
  switch (set) {
    case MeasurementSet::toa: return "toa";
    case MeasurementSet::tdoa: return "tdoa";
    case MeasurementSet::aoa: return "aoa";
    case MeasurementSet::toa_aoa: return "toa+aoa";
    case MeasurementSet::tdoa_aoa: return "tdoa+aoa";
  }
  return "unknown";
}

std::string_view to_string(SynthesisMode mode) {
  return mode == SynthesisMode::statistical ? "statistical" : "signal";
}

KindSelection kinds_of(MeasurementSet set) {
  switch (set) {
    case MeasurementSet::toa: return {true, false, false};
    case MeasurementSet::tdoa: return {false, true, false};
    case MeasurementSet::aoa: return {false, false, true};
    case MeasurementSet::toa_aoa: return {true, false, true};
    case MeasurementSet::tdoa_aoa: return {false, true, true};
  }
  return {};
}

BeamCodebook SignalConfig::codebook() const {
  constexpr double deg = std::numbers::pi / 180.0;
  return BeamCodebook::grid(codebook_half_fov_deg * deg, codebook_half_fov_deg * deg, codebook_step_deg * deg);
}

double link_snr_db(const Scene& scene, const SignalConfig& signal, const Point3& tx, const Point3& rx) {
  if (signal.snr_db) return *signal.snr_db;
  const double noise_dbm = -174.0 + 10.0 * std::log10(signal.ofdm.bandwidth_hz()) + signal.noise_figure_db;
  return received_power_dbm(scene, tx, rx) - noise_dbm;
}

namespace {

struct SignalEstimate {
  double toa{0.0};
  std::optional<double> azimuth;
  std::optional<double> elevation;
};

// Per-beam power in dB for a sum of plane waves given in the array frame.
std::vector<double> multipath_rsrp(const ArrayConfig& array, const BeamCodebook& codebook,
                                   const std::vector<std::pair<LinkGeometry, std::complex<double>>>& waves,
                                   double snr_db, Rng& rng) {
  const double n = static_cast<double>(array.elements());
  std::vector<Eigen::VectorXcd> truth;
  for (const auto& [g, gain] : waves) truth.push_back(gain * steering_vector(array, g.azimuth, g.elevation));
  const double scale = std::sqrt(std::pow(10.0, snr_db / 10.0));
  std::normal_distribution<double> unit(0.0, std::sqrt(0.5));
  std::vector<double> out(codebook.size());
  for (std::size_t b = 0; b < codebook.size(); ++b) {
    const Eigen::VectorXcd w = steering_vector(array, codebook.azimuth(b), codebook.elevation(b));
    std::complex<double> response(0.0, 0.0);
    for (const auto& a : truth) response += w.dot(a) / n;
    const std::complex<double> noise(unit(rng), unit(rng));
    out[b] = 10.0 * std::log10(std::max(std::norm(scale * response + noise), 1e-30));
  }
  return out;
}

SignalEstimate estimate_link(const SignalConfig& cfg, const BeamCodebook& codebook, const Point3& target,
                             const Point3& anchor, const Orientation& orientation, double snr_db,
                             const PathList* imported, Rng& rng) {
  PathList paths;
  std::vector<std::pair<LinkGeometry, std::complex<double>>> waves;
  if (imported != nullptr) {
    paths = *imported;
    for (const Path& p : paths.paths) {
      const Point3 dir(std::cos(p.elevation) * std::cos(p.azimuth), std::cos(p.elevation) * std::sin(p.azimuth),
                       std::sin(p.elevation));
      waves.emplace_back(true_geometry(anchor + dir, anchor, orientation), p.gain);
    }
  } else {
    const LinkGeometry g = true_geometry(target, anchor, orientation);
    paths.paths.push_back({g.range / kSpeedOfLight, {1.0, 0.0}, g.azimuth, g.elevation});
    waves.emplace_back(g, std::complex<double>(1.0, 0.0));
  }

  SignalEstimate est;
  Eigen::VectorXcd cfr = ofdm_cfr(paths, cfg.ofdm);
  add_awgn(cfr, snr_db, rng);
  est.toa = ofdm_toa(cfr, cfg.ofdm);

  const auto powers = multipath_rsrp(cfg.array, codebook, waves, snr_db + cfg.rsrp_processing_gain_db, rng);
  const AngleEstimate angle = beam_sweep_aoa(powers, codebook, cfg.array);
  // Edge beams mean the source is at or beyond the field of view.
  if (!angle.az_on_edge) est.azimuth = angle.azimuth;
  if (!angle.el_on_edge) est.elevation = angle.elevation;
  return est;
}

}  // namespace

std::vector<Measurement> epoch_measurements(const SynthesisConfig& config, const Scene& scene,
                                            std::span<const Point3> targets, std::span<const Point3> anchors,
                                            std::span<const Orientation> orientations, std::size_t epoch,
                                            Rng& rng, const PathProvider& paths) {
  if (!orientations.empty() && orientations.size() != anchors.size()) {
    throw DomainError("one orientation per anchor is required");
  }
  const KindSelection kinds = kinds_of(config.set);
  const double sigma_delay = config.noise.sigma_delay_s();
  const double sigma_angle = config.noise.sigma_angle_rad();
  const bool signal = config.mode == SynthesisMode::signal;
  const BeamCodebook codebook = signal ? config.signal.codebook() : BeamCodebook({0.0}, {0.0});
  auto orientation_of = [&](std::size_t a) -> Orientation {
    return orientations.empty() ? Orientation::Identity() : orientations[a];
  };

  std::vector<Measurement> out;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    std::vector<std::size_t> linked;
    std::vector<SignalEstimate> estimates;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      const PathList* imported = paths ? paths(t * anchors.size() + a, epoch) : nullptr;
      const bool up = imported != nullptr ? imported->los : link_available(scene, targets[t], anchors[a]);
      if (!up) continue;
      linked.push_back(a);
      if (signal) {
        const double snr = link_snr_db(scene, config.signal, targets[t], anchors[a]);
        estimates.push_back(
            estimate_link(config.signal, codebook, targets[t], anchors[a], orientation_of(a), snr, imported, rng));
      }
    }

    auto stamp = [&](Measurement m, std::size_t anchor) {
      m.target_id = t;
      m.anchor_id = anchor;
      m.epoch = epoch;
      m.los = true;
      return m;
    };

    for (std::size_t i = 0; i < linked.size(); ++i) {
      const std::size_t a = linked[i];
      if (kinds.toa) {
        Measurement m;
        if (signal) {
          m.kind = MeasurementKind::toa;
          m.value = estimates[i].toa;
          m.variance = sigma_delay * sigma_delay;
        } else {
          m = synth_statistical(MeasurementKind::toa, targets[t], anchors[a], config.noise, rng);
        }
        out.push_back(stamp(m, a));
      }
      if (kinds.tdoa && i > 0) {
        const std::size_t ref = linked.front();
        Measurement m;
        if (signal) {
          m.kind = MeasurementKind::tdoa;
          m.value = estimates[i].toa - estimates.front().toa;
          m.variance = 2.0 * sigma_delay * sigma_delay;
        } else {
          m = synth_statistical(MeasurementKind::tdoa, targets[t], anchors[a], config.noise, rng, anchors[ref]);
        }
        m = stamp(m, a);
        m.ref_anchor_id = ref;
        out.push_back(m);
      }
      if (kinds.aoa) {
        for (MeasurementKind kind : {MeasurementKind::aoa_az, MeasurementKind::aoa_el}) {
          Measurement m;
          if (signal) {
            const auto& value = kind == MeasurementKind::aoa_az ? estimates[i].azimuth : estimates[i].elevation;
            if (!value) continue;
            m.kind = kind;
            m.value = wrap_angle(*value);
            m.variance = sigma_angle * sigma_angle;
          } else {
            m = synth_statistical(kind, targets[t], anchors[a], config.noise, rng, std::nullopt, orientation_of(a));
          }
          out.push_back(stamp(m, a));
        }
      }
    }
  }
  return out;
}

}  // namespace locfuse

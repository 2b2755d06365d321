#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "locfuse/measurement.hpp"
#include "locfuse/random.hpp"
#include "locfuse/scene.hpp"
#include "locfuse/signal.hpp"

namespace locfuse {

enum class MeasurementSet { toa, tdoa, aoa, toa_aoa, tdoa_aoa };
enum class SynthesisMode { statistical, signal };

std::string_view to_string(MeasurementSet set);
std::string_view to_string(SynthesisMode mode);

struct KindSelection {
  bool toa{false};
  bool tdoa{false};
  bool aoa{false};
};
KindSelection kinds_of(MeasurementSet set);

struct SignalConfig {
  ArrayConfig array;
  double codebook_half_fov_deg{60.0};
  double codebook_step_deg{10.0};
  OfdmConfig ofdm;
  double noise_figure_db{9.0};
  /// SNR gained by averaging the beam reference signal over its resource elements.
  double rsrp_processing_gain_db{18.0};
  /// Fixed post-combining SNR instead of the link budget.
  std::optional<double> snr_db;

  BeamCodebook codebook() const;
  bool operator==(const SignalConfig&) const = default;
};

struct SynthesisConfig {
  MeasurementSet set{MeasurementSet::tdoa_aoa};
  SynthesisMode mode{SynthesisMode::statistical};
  NoiseModel noise;
  SignalConfig signal;
};

/// Looks up an imported path list for (pair_id, epoch); nullptr when absent.
/// pair_id = target_id * anchor_count + anchor_id.
using PathProvider = std::function<const PathList*(std::size_t pair_id, std::size_t epoch)>;

/// Post-combining SNR of a link from the scene's link budget.
double link_snr_db(const Scene& scene, const SignalConfig& signal, const Point3& tx, const Point3& rx);

/// All measurements of one epoch. Links that are down emit nothing; tdoa
/// uses the lowest-id reachable anchor of each target as reference.
std::vector<Measurement> epoch_measurements(const SynthesisConfig& config, const Scene& scene,
                                            std::span<const Point3> targets, std::span<const Point3> anchors,
                                            std::span<const Orientation> orientations, std::size_t epoch,
                                            Rng& rng, const PathProvider& paths = {});

}  // namespace locfuse

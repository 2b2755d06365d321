#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "locfuse/random.hpp"

namespace locfuse {

/// Planar array lying in the array-frame y-z plane with boresight +x.
struct ArrayConfig {
  int rows{8};
  int cols{8};
  double element_spacing{0.5};  // wavelengths

  void validate() const;
  int elements() const { return rows * cols; }
  bool operator==(const ArrayConfig&) const = default;
};

/// Rectangular (azimuth x elevation) grid of receive beams.
class BeamCodebook {
 public:
  /// Grid centered on boresight covering +/- half_fov with `step` spacing.
  static BeamCodebook grid(double half_fov_az, double half_fov_el, double step);
  BeamCodebook(std::vector<double> azimuths, std::vector<double> elevations);

  std::size_t size() const { return azimuths_.size() * elevations_.size(); }
  std::size_t az_count() const { return azimuths_.size(); }
  std::size_t el_count() const { return elevations_.size(); }
  /// Beams are stored elevation-major: index = i_el * az_count + i_az.
  std::size_t index(std::size_t i_az, std::size_t i_el) const { return i_el * azimuths_.size() + i_az; }
  double azimuth(std::size_t beam) const { return azimuths_[beam % azimuths_.size()]; }
  double elevation(std::size_t beam) const { return elevations_[beam / azimuths_.size()]; }
  const std::vector<double>& azimuths() const { return azimuths_; }
  const std::vector<double>& elevations() const { return elevations_; }

 private:
  std::vector<double> azimuths_;
  std::vector<double> elevations_;
};

/// Default 10 degree grid over +/-60 degrees (169 beams).
BeamCodebook default_codebook();

/// Unit-modulus plane-wave response, element index = row * cols + col.
Eigen::VectorXcd steering_vector(const ArrayConfig& array, double azimuth, double elevation);

/// Per-beam received power in dB (noise power is the 0 dB reference).
/// `snr_db` is the post-combining SNR of a beam matched to the source.
std::vector<double> beam_rsrp(const ArrayConfig& array, const BeamCodebook& codebook, double true_az,
                              double true_el, double snr_db, Rng& rng);

/// Noiseless variant; equivalent to infinite SNR up to a constant offset.
std::vector<double> beam_rsrp_noiseless(const ArrayConfig& array, const BeamCodebook& codebook,
                                        double true_az, double true_el);

struct AngleEstimate {
  double azimuth{0.0};
  double elevation{0.0};
  bool az_on_edge{false};
  bool el_on_edge{false};
};

/// Argmax beam refined by fitting the array beam pattern (scale plus noise
/// floor) to the powers of the argmax beam and its grid neighbors. The fit
/// stays between the neighboring beams; maxima on the outermost beams are
/// flagged since the source may lie beyond the field of view.
AngleEstimate beam_sweep_aoa(const std::vector<double>& powers_db, const BeamCodebook& codebook,
                             const ArrayConfig& array = {});

struct OfdmConfig {
  double subcarrier_spacing_hz{60e3};
  int num_subcarriers{1620};
  double carrier_freq_hz{26e9};

  void validate() const;
  double bandwidth_hz() const { return subcarrier_spacing_hz * num_subcarriers; }
  /// Baseband frequency of subcarrier k, centered on the carrier.
  double subcarrier_freq(int k) const {
    return (static_cast<double>(k) - 0.5 * static_cast<double>(num_subcarriers - 1)) * subcarrier_spacing_hz;
  }
  bool operator==(const OfdmConfig&) const = default;
};

struct Path {
  double delay_s{0.0};
  std::complex<double> gain{1.0, 0.0};
  double azimuth{0.0};
  double elevation{0.0};
};

/// Multipath description of one link, sorted by delay.
struct PathList {
  std::vector<Path> paths;
  bool los{true};

  void validate() const;
};

Eigen::VectorXcd ofdm_cfr(const PathList& paths, const OfdmConfig& cfg);

/// Adds circular complex Gaussian noise so that a unit-gain path has the
/// given per-subcarrier SNR.
void add_awgn(Eigen::VectorXcd& cfr, double snr_db, Rng& rng);

struct ToaOptions {
  int oversampling{16};
  double first_arrival_window_db{6.0};
  int max_paths{4};
  int refinement_sweeps{12};
};

/// First-arrival delay from a channel frequency response.
double ofdm_toa(const Eigen::VectorXcd& cfr, const OfdmConfig& cfg, const ToaOptions& options = {});

/// Imported multipath record keyed by (pair_id, epoch).
struct PathRecord {
  std::size_t pair_id{0};
  std::size_t epoch{0};
  PathList paths;
};

/// Reads `pair_id,epoch,delay_s,gain_re,gain_im,az_rad,el_rad,los_flag`
/// rows, grouping consecutive rows of one (pair_id, epoch) into a PathList.
std::vector<PathRecord> read_path_csv(std::istream& in);

}  // namespace locfuse

#include "locfuse/signal.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Dense>
#include <fftw3.h>

#include "locfuse/errors.hpp"

namespace locfuse {

using cd = std::complex<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

void ArrayConfig::validate() const {
  if (rows < 1 || cols < 1) throw DomainError("array rows and cols must be at least 1");
  if (!(element_spacing > 0.0)) throw DomainError("array element spacing must be positive");
}

BeamCodebook::BeamCodebook(std::vector<double> azimuths, std::vector<double> elevations)
    : azimuths_(std::move(azimuths)), elevations_(std::move(elevations)) {
  if (azimuths_.empty() || elevations_.empty()) throw DomainError("beam codebook must be nonempty");
  if (!std::is_sorted(azimuths_.begin(), azimuths_.end()) ||
      !std::is_sorted(elevations_.begin(), elevations_.end())) {
    throw DomainError("beam codebook grid axes must be sorted");
  }
}

BeamCodebook BeamCodebook::grid(double half_fov_az, double half_fov_el, double step) {
  if (!(step > 0.0) || half_fov_az < 0.0 || half_fov_el < 0.0) throw DomainError("invalid beam grid");
  auto axis = [step](double half) {
    const int n = static_cast<int>(std::floor(half / step + 1e-9));
    std::vector<double> v;
    for (int i = -n; i <= n; ++i) v.push_back(step * i);
    return v;
  };
  return BeamCodebook(axis(half_fov_az), axis(half_fov_el));
}

BeamCodebook default_codebook() {
  constexpr double deg = std::numbers::pi / 180.0;
  return BeamCodebook::grid(60.0 * deg, 60.0 * deg, 10.0 * deg);
}

Eigen::VectorXcd steering_vector(const ArrayConfig& array, double azimuth, double elevation) {
  array.validate();
  const double uy = std::sin(azimuth) * std::cos(elevation);
  const double uz = std::sin(elevation);
  Eigen::VectorXcd a(array.elements());
  for (int r = 0; r < array.rows; ++r) {
    for (int c = 0; c < array.cols; ++c) {
      const double phase = kTwoPi * array.element_spacing * (c * uy + r * uz);
      a(r * array.cols + c) = std::polar(1.0, phase);
    }
  }
  return a;
}

namespace {

// Normalized beam gain |w^H a|^2 / N^2 in [0, 1].
std::vector<double> beam_gains(const ArrayConfig& array, const BeamCodebook& codebook, double az, double el,
                               std::vector<cd>* amplitudes) {
  const Eigen::VectorXcd truth = steering_vector(array, az, el);
  const double n = static_cast<double>(array.elements());
  std::vector<double> gains(codebook.size());
  if (amplitudes) amplitudes->resize(codebook.size());
  for (std::size_t b = 0; b < codebook.size(); ++b) {
    const Eigen::VectorXcd w = steering_vector(array, codebook.azimuth(b), codebook.elevation(b));
    const cd response = w.dot(truth) / n;  // dot() conjugates the left operand
    gains[b] = std::norm(response);
    if (amplitudes) (*amplitudes)[b] = response;
  }
  return gains;
}

}  // namespace

std::vector<double> beam_rsrp_noiseless(const ArrayConfig& array, const BeamCodebook& codebook, double true_az,
                                        double true_el) {
  std::vector<double> out = beam_gains(array, codebook, true_az, true_el, nullptr);
  for (double& g : out) g = 10.0 * std::log10(std::max(g, 1e-30));
  return out;
}

std::vector<double> beam_rsrp(const ArrayConfig& array, const BeamCodebook& codebook, double true_az,
                              double true_el, double snr_db, Rng& rng) {
  std::vector<cd> amp;
  beam_gains(array, codebook, true_az, true_el, &amp);
  const double scale = std::sqrt(std::pow(10.0, snr_db / 10.0));
  std::normal_distribution<double> unit(0.0, std::sqrt(0.5));
  std::vector<double> out(codebook.size());
  for (std::size_t b = 0; b < codebook.size(); ++b) {
    const cd noise(unit(rng), unit(rng));
    out[b] = 10.0 * std::log10(std::max(std::norm(scale * amp[b] + noise), 1e-30));
  }
  return out;
}

namespace {

// Offset in (-0.5, 0.5) grid cells of the vertex of a parabola through three
// equally spaced samples. Zero when the samples are not concave.
double parabolic_offset(double left, double mid, double right) {
  const double denom = left - 2.0 * mid + right;
  if (!(denom < 0.0)) return 0.0;
  return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

// Normalized gain of the beam steered to (baz, bel) for a source at (az, el):
// the URA response separates into two Dirichlet kernels.
double dirichlet_sq(int n, double x) {
  const double den = n * std::sin(std::numbers::pi * x);
  if (std::abs(den) < 1e-12) return 1.0;
  const double r = std::sin(n * std::numbers::pi * x) / den;
  return r * r;
}

double pattern_gain(const ArrayConfig& array, double buy, double buz, double uy, double uz) {
  return dirichlet_sq(array.cols, array.element_spacing * (uy - buy)) *
         dirichlet_sq(array.rows, array.element_spacing * (uz - buz));
}

struct BeamSample {
  double uy, uz;      // beam direction cosines
  double amplitude;   // square root of the linear power
};

// Residual of the best fit amplitude = s * |response| + floor with
// s, floor >= 0. Amplitude noise is roughly level-independent at high SNR.
double fit_cost(const ArrayConfig& array, const std::vector<BeamSample>& beams, double az, double el) {
  const double uy = std::sin(az) * std::cos(el), uz = std::sin(el);
  double sg = 0, sp = 0, sgg = 0, sgp = 0;
  std::vector<double> g(beams.size());
  for (std::size_t i = 0; i < beams.size(); ++i) {
    g[i] = std::sqrt(pattern_gain(array, beams[i].uy, beams[i].uz, uy, uz));
    sg += g[i];
    sp += beams[i].amplitude;
    sgg += g[i] * g[i];
    sgp += g[i] * beams[i].amplitude;
  }
  const double n = static_cast<double>(beams.size());
  const double det = n * sgg - sg * sg;
  double scale = det > 1e-15 ? (n * sgp - sg * sp) / det : 0.0;
  double floor = det > 1e-15 ? (sp - scale * sg) / n : 0.0;
  if (!(floor >= 0.0) || !(scale >= 0.0)) {
    floor = 0.0;
    scale = sgg > 0.0 ? std::max(sgp / sgg, 0.0) : 0.0;
  }
  double cost = 0.0;
  for (std::size_t i = 0; i < beams.size(); ++i) {
    const double r = beams[i].amplitude - scale * g[i] - floor;
    cost += r * r;
  }
  return cost;
}

std::pair<double, double> axis_range(const std::vector<double>& grid, std::size_t i) {
  return {grid[i == 0 ? 0 : i - 1], grid[i + 1 == grid.size() ? i : i + 1]};
}

}  // namespace

AngleEstimate beam_sweep_aoa(const std::vector<double>& powers_db, const BeamCodebook& codebook,
                             const ArrayConfig& array) {
  if (powers_db.size() != codebook.size()) throw DomainError("beam power count does not match codebook size");
  const auto best = static_cast<std::size_t>(
      std::distance(powers_db.begin(), std::max_element(powers_db.begin(), powers_db.end())));
  const std::size_t i_az = best % codebook.az_count();
  const std::size_t i_el = best / codebook.az_count();
  const auto& azs = codebook.azimuths();
  const auto& els = codebook.elevations();

  AngleEstimate est;
  est.azimuth = azs[i_az];
  est.elevation = els[i_el];
  est.az_on_edge = azs.size() > 1 && (i_az == 0 || i_az + 1 == azs.size());
  est.el_on_edge = els.size() > 1 && (i_el == 0 || i_el + 1 == els.size());

  std::vector<BeamSample> beams;
  constexpr std::size_t kReach = 3;
  for (std::size_t e = i_el < kReach ? 0 : i_el - kReach; e <= std::min(i_el + kReach, els.size() - 1); ++e) {
    for (std::size_t a = i_az < kReach ? 0 : i_az - kReach; a <= std::min(i_az + kReach, azs.size() - 1); ++a) {
      beams.push_back({std::sin(azs[a]) * std::cos(els[e]), std::sin(els[e]), std::pow(10.0, powers_db[codebook.index(a, e)] / 20.0)});
    }
  }
  if (beams.size() < 3) return est;

  const auto [az_lo, az_hi] = axis_range(azs, i_az);
  const auto [el_lo, el_hi] = axis_range(els, i_el);
  auto cost = [&](double az, double el) { return fit_cost(array, beams, az, el); };

  // Coarse scan over the neighborhood, then a shrinking compass search.
  constexpr int kScan = 10;
  double best_cost = cost(est.azimuth, est.elevation);
  for (int a = 0; a <= kScan; ++a) {
    for (int e = 0; e <= kScan; ++e) {
      const double az = az_lo + (az_hi - az_lo) * a / kScan;
      const double el = el_lo + (el_hi - el_lo) * e / kScan;
      const double c = cost(az, el);
      if (c < best_cost) {
        best_cost = c;
        est.azimuth = az;
        est.elevation = el;
      }
    }
  }
  double step = std::max(az_hi - az_lo, el_hi - el_lo) / kScan;
  while (step > 1e-9) {
    bool moved = false;
    for (const auto& [da, de] : {std::pair{1, 0}, std::pair{-1, 0}, std::pair{0, 1}, std::pair{0, -1}}) {
      const double az = std::clamp(est.azimuth + da * step, az_lo, az_hi);
      const double el = std::clamp(est.elevation + de * step, el_lo, el_hi);
      const double c = cost(az, el);
      if (c < best_cost) {
        best_cost = c;
        est.azimuth = az;
        est.elevation = el;
        moved = true;
      }
    }
    if (!moved) step *= 0.5;
  }
  return est;
}

void OfdmConfig::validate() const {
  if (!(subcarrier_spacing_hz > 0.0)) throw DomainError("subcarrier spacing must be positive");
  if (num_subcarriers < 2) throw DomainError("at least two subcarriers are required");
  if (!(carrier_freq_hz > 0.0)) throw DomainError("carrier frequency must be positive");
}

void PathList::validate() const {
  if (paths.empty()) throw DomainError("path list is empty");
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (!(paths[i].delay_s >= 0.0)) throw DomainError("path delays must be non-negative");
    if (i > 0 && !(paths[i].delay_s > paths[i - 1].delay_s)) {
      throw DomainError("path delays must be strictly increasing");
    }
  }
}

Eigen::VectorXcd ofdm_cfr(const PathList& paths, const OfdmConfig& cfg) {
  cfg.validate();
  if (paths.paths.empty()) throw DomainError("ofdm_cfr needs at least one path");
  Eigen::VectorXcd h = Eigen::VectorXcd::Zero(cfg.num_subcarriers);
  for (const Path& p : paths.paths) {
    for (int k = 0; k < cfg.num_subcarriers; ++k) {
      h(k) += p.gain * std::polar(1.0, -kTwoPi * cfg.subcarrier_freq(k) * p.delay_s);
    }
  }
  return h;
}

void add_awgn(Eigen::VectorXcd& cfr, double snr_db, Rng& rng) {
  std::normal_distribution<double> unit(0.0, std::sqrt(0.5 * std::pow(10.0, -snr_db / 10.0)));
  for (Eigen::Index k = 0; k < cfr.size(); ++k) cfr(k) += cd(unit(rng), unit(rng));
}

namespace {

// Inverse DFT of a zero-padded spectrum. FFTW's planner is not reentrant, so
// planning is serialized; execution on caller-owned buffers is thread-safe.
class InverseTransform {
 public:
  static std::vector<cd> run(const Eigen::VectorXcd& spectrum, int size) {
    std::vector<cd> in(static_cast<std::size_t>(size), cd(0.0, 0.0));
    std::copy(spectrum.data(), spectrum.data() + spectrum.size(), in.begin());
    std::vector<cd> out(static_cast<std::size_t>(size));
    fftw_execute_dft(plan(size), reinterpret_cast<fftw_complex*>(in.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
    return out;
  }

 private:
  static fftw_plan plan(int size) {
    static std::mutex mutex;
    static std::map<int, fftw_plan> plans;
    std::lock_guard lock(mutex);
    auto it = plans.find(size);
    if (it != plans.end()) return it->second;
    std::vector<cd> a(static_cast<std::size_t>(size)), b(static_cast<std::size_t>(size));
    fftw_plan p = fftw_plan_dft_1d(size, reinterpret_cast<fftw_complex*>(a.data()),
                                   reinterpret_cast<fftw_complex*>(b.data()), FFTW_BACKWARD,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans.emplace(size, p);
    return p;
  }
};

// Delay-domain model: columns e(tau)_k = exp(-j 2 pi f_k tau). Delays are
// handled in units of the resolution cell 1/B to keep the solver scaled.
class DelayModel {
 public:
  DelayModel(const Eigen::VectorXcd& cfr, const OfdmConfig& cfg) : cfr_(cfr), cfg_(cfg) {
    freq_cells_.resize(cfg.num_subcarriers);
    for (int k = 0; k < cfg.num_subcarriers; ++k) freq_cells_(k) = cfg.subcarrier_freq(k) / cfg.bandwidth_hz();
  }

  Eigen::MatrixXcd basis(const std::vector<double>& cells) const {
    Eigen::MatrixXcd e(cfr_.size(), static_cast<Eigen::Index>(cells.size()));
    for (std::size_t p = 0; p < cells.size(); ++p) {
      for (Eigen::Index k = 0; k < cfr_.size(); ++k) {
        e(k, static_cast<Eigen::Index>(p)) = std::polar(1.0, -kTwoPi * freq_cells_(k) * cells[p]);
      }
    }
    return e;
  }

  // Least-squares gains and the residual for fixed delays.
  Eigen::VectorXcd residual(const std::vector<double>& cells, Eigen::VectorXcd* gains = nullptr) const {
    const Eigen::MatrixXcd e = basis(cells);
    const Eigen::VectorXcd g = e.colPivHouseholderQr().solve(cfr_);
    if (gains) *gains = g;
    return cfr_ - e * g;
  }

  double cost(const std::vector<double>& cells) const { return residual(cells).squaredNorm(); }

  // Levenberg-Marquardt over the delays with gains projected out.
  std::vector<double> refine(std::vector<double> cells) const {
    constexpr double h = 1e-6;
    double lambda = 1e-3;
    double current = cost(cells);
    const Eigen::Index k2 = 2 * cfr_.size();
    const auto p = static_cast<Eigen::Index>(cells.size());
    for (int iter = 0; iter < 50; ++iter) {
      const Eigen::VectorXcd r0 = residual(cells);
      Eigen::MatrixXd jac(k2, p);
      for (Eigen::Index j = 0; j < p; ++j) {
        auto plus = cells;
        auto minus = cells;
        plus[j] += h;
        minus[j] -= h;
        const Eigen::VectorXcd d = (residual(plus) - residual(minus)) / (2.0 * h);
        jac.col(j).head(cfr_.size()) = d.real();
        jac.col(j).tail(cfr_.size()) = d.imag();
      }
      Eigen::VectorXd r(k2);
      r.head(cfr_.size()) = r0.real();
      r.tail(cfr_.size()) = r0.imag();
      const Eigen::MatrixXd jtj = jac.transpose() * jac;
      const Eigen::VectorXd jtr = jac.transpose() * r;
      bool improved = false;
      for (int tries = 0; tries < 12 && !improved; ++tries) {
        Eigen::MatrixXd damped = jtj;
        damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
        const Eigen::VectorXd step = -damped.ldlt().solve(jtr);
        auto trial = cells;
        for (Eigen::Index j = 0; j < p; ++j) trial[j] += std::clamp(step(j), -0.5, 0.5);
        const double c = cost(trial);
        if (c < current) {
          const double moved = step.cwiseAbs().maxCoeff();
          cells = std::move(trial);
          current = c;
          lambda = std::max(lambda * 0.3, 1e-9);
          improved = true;
          if (moved < 1e-10) return cells;
        } else {
          lambda *= 10.0;
        }
      }
      if (!improved) break;
    }
    return cells;
  }

 private:
  const Eigen::VectorXcd& cfr_;
  const OfdmConfig& cfg_;
  Eigen::VectorXd freq_cells_;
};

// Strongest peak of the oversampled delay profile, in resolution cells with
// quadratic interpolation. Negative delays wrap from the end of the profile.
double strongest_peak_cells(const Eigen::VectorXcd& spectrum, int oversampling) {
  const int n = static_cast<int>(spectrum.size()) * oversampling;
  const std::vector<cd> profile = InverseTransform::run(spectrum, n);
  std::vector<double> mag(profile.size());
  std::transform(profile.begin(), profile.end(), mag.begin(), [](cd v) { return std::abs(v); });
  const int best = static_cast<int>(std::distance(mag.begin(), std::max_element(mag.begin(), mag.end())));
  const double left = mag[static_cast<std::size_t>((best - 1 + n) % n)];
  const double right = mag[static_cast<std::size_t>((best + 1) % n)];
  double bin = best + parabolic_offset(left, mag[static_cast<std::size_t>(best)], right);
  if (bin > 0.5 * n) bin -= n;
  return bin / oversampling;
}

}  // namespace

double ofdm_toa(const Eigen::VectorXcd& cfr, const OfdmConfig& cfg, const ToaOptions& options) {
  cfg.validate();
  if (cfr.size() != cfg.num_subcarriers) throw DomainError("cfr length does not match num_subcarriers");
  const double energy = cfr.squaredNorm();
  if (!(energy > 0.0) || !std::isfinite(energy)) throw EstimationError("ofdm_toa: channel response is all zero");

  const DelayModel model(cfr, cfg);
  // Greedy extraction on the oversampled profile, each step followed by a
  // joint refit of all delays. Components far below the first-arrival window
  // cannot change the decision and end the search.
  const double stop_ratio = std::pow(10.0, -(options.first_arrival_window_db + 10.0) / 10.0);
  std::vector<double> cells{strongest_peak_cells(cfr, options.oversampling)};
  cells = model.refine(cells);
  Eigen::VectorXcd gains;
  Eigen::VectorXcd resid = model.residual(cells, &gains);
  for (int p = 1; p < options.max_paths; ++p) {
    if (resid.squaredNorm() < 1e-12 * energy) break;
    const double strongest = gains.cwiseAbs2().maxCoeff();
    const double candidate = strongest_peak_cells(resid, options.oversampling);
    const Eigen::VectorXcd e = model.basis({candidate});
    const double power = std::norm(e.col(0).dot(resid) / static_cast<double>(cfr.size()));
    if (power < stop_ratio * strongest) break;
    auto trial = cells;
    trial.push_back(candidate);
    trial = model.refine(trial);
    Eigen::VectorXcd trial_gains;
    const Eigen::VectorXcd trial_resid = model.residual(trial, &trial_gains);
    if (!(trial_resid.squaredNorm() < resid.squaredNorm())) break;
    cells = std::move(trial);
    gains = trial_gains;
    resid = trial_resid;
  }

  const double strongest = gains.cwiseAbs2().maxCoeff();
  const double window = std::pow(10.0, -options.first_arrival_window_db / 10.0);
  double first = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < cells.size(); ++p) {
    if (std::norm(gains(static_cast<Eigen::Index>(p))) >= window * strongest) first = std::min(first, cells[p]);
  }
  return first / cfg.bandwidth_hz();
}

std::vector<PathRecord> read_path_csv(std::istream& in) {
  std::vector<PathRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line_no == 1 && line.rfind("pair_id", 0) == 0) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) {
      throw ParseError("path csv line " + std::to_string(line_no) + ": expected 8 columns, got " +
                       std::to_string(cells.size()));
    }
    PathRecord rec;
    Path path;
    bool los = false;
    try {
      rec.pair_id = std::stoull(cells[0]);
      rec.epoch = std::stoull(cells[1]);
      path.delay_s = std::stod(cells[2]);
      path.gain = cd(std::stod(cells[3]), std::stod(cells[4]));
      path.azimuth = std::stod(cells[5]);
      path.elevation = std::stod(cells[6]);
      los = std::stoi(cells[7]) != 0;
    } catch (const std::exception&) {
      throw ParseError("path csv line " + std::to_string(line_no) + ": malformed number");
    }
    if (out.empty() || out.back().pair_id != rec.pair_id || out.back().epoch != rec.epoch) {
      rec.paths.los = los;
      out.push_back(std::move(rec));
    }
    out.back().paths.paths.push_back(path);
  }
  for (const auto& rec : out) {
    try {
      rec.paths.validate();
    } catch (const DomainError& e) {
      throw ParseError("path csv pair " + std::to_string(rec.pair_id) + " epoch " + std::to_string(rec.epoch) +
                       ": " + e.what());
    }
  }
  return out;
}

}  // namespace locfuse

#pragma once

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "phc/fdtd.hpp"
#include "phc/geometry.hpp"

// Resonant-mode extraction from FDTD output. Frequencies are in c/a.
namespace phc::modal {

struct ResonantMode {
  double frequency = 0.0;  // Re(omega) / 2pi
  double q = 0.0;          // infinity when q_exceeds_measurable
  bool q_exceeds_measurable = false;
  double amplitude = 0.0;  // of the real signal at t = 0
  double phase = 0.0;      // radians
  std::optional<double> v_norm;

  double wavelength_nm(double a_nm) const { return a_nm / frequency; }
};

// One damped-exponential component s(t) = amplitude * exp(-i omega t).
struct Pole {
  std::complex<double> omega;
  std::complex<double> amplitude;
};

struct HarminvOptions {
  double q_cap = 1e9;         // larger Q (or growth) is reported as not measurable
  std::size_t max_samples = 4000;  // after decimation
  double svd_threshold = 1e-10;    // relative singular-value cutoff
};

struct HarminvResult {
  std::vector<ResonantMode> modes;  // inside the band, largest amplitude first
  std::vector<Pole> poles;          // every pole found, including out of band
  std::vector<std::string> notices;
};

// Matrix-pencil pole estimation on the band-limited complex signal. The band
// [f_lo, f_hi] is mixed down to zero frequency and decimated by a cascade of
// Kaiser-windowed FIR stages before the pencil is formed.
HarminvResult harmonic_inversion(const fdtd::TimeSeries& ts, double f_lo, double f_hi,
                                 int max_poles, const HarminvOptions& options = {});

// Matrix pencil on uniformly sampled complex data y_n = sum a_k z_k^n.
// Returns the z_k and a_k; the number of poles is the numerical rank of the
// Hankel matrix, capped at max_poles.
struct PencilResult {
  std::vector<std::complex<double>> z;
  std::vector<std::complex<double>> a;
  std::size_t rank = 0;
};
PencilResult matrix_pencil(const std::vector<std::complex<double>>& y, std::size_t max_poles,
                           double svd_threshold = 1e-10);

// kappa = (hc / lambda) / Q, micro-eV.
double q_to_kappa(double q, double wavelength_nm);
double kappa_to_q(double kappa_ueV, double wavelength_nm);
double q_to_kappa_energy(double q, double energy_ueV);

// |E|^2 at cell centres, Yee components averaged from their four nearest
// samples. Size dims[0]*dims[1]*dims[2], x-fastest.
std::vector<double> cell_intensity(const fdtd::FieldSnapshot& snap);

// Purcell volume sum(eps |E|^2 dV) / max(eps |E|^2) in nm^3 for cell-centred
// intensities. Each mirrored axis doubles the sum. Throws DegenerateError for
// an all-zero field.
double purcell_volume(const std::vector<double>& e_sq, const geometry::PermittivityGrid& eps,
                      const std::array<bool, 3>& mirrored = {false, false, false});

// Purcell volume of the snapshot in units of (lambda / n_ref)^3.
double mode_volume(const fdtd::FieldSnapshot& snap, const geometry::PermittivityGrid& eps,
                   double wavelength_nm, double n_ref = 3.46);

struct SpectralPeak {
  double frequency = 0.0;
  double power = 0.0;
};

struct PowerSpectrum {
  std::vector<double> frequency;
  std::vector<double> power;
  std::vector<SpectralPeak> peaks;  // strongest first
};

// Hann-windowed periodogram with log-parabolic peak refinement. Peaks below
// min_relative_power times the strongest are dropped. Needs >= 64 samples.
PowerSpectrum fft_spectrum(const fdtd::TimeSeries& ts, double min_relative_power = 1e-2);

}  // namespace phc::modal

#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace phc::specfit {

enum class AxisUnit { MicroEV, MilliEV, EV, Nanometer };

std::string to_string(AxisUnit unit);
AxisUnit axis_unit_from_string(const std::string& s);

// Sampled intensity versus energy or wavelength.
struct Spectrum {
  std::vector<double> axis;
  std::vector<double> intensity;
  AxisUnit unit = AxisUnit::MicroEV;

  std::size_t size() const { return axis.size(); }
  // Throws ParameterError on length mismatch or non-monotone axis.
  void validate() const;
};

// Returns the spectrum on an ascending micro-eV axis. Wavelength axes are
// converted with E = hc/lambda; intensities are carried over unchanged.
Spectrum to_micro_ev(const Spectrum& s);

// Area-normalised Voigt line: Lorentzian (lorentz_fwhm) convolved with a
// Gaussian (gauss_fwhm). Widths and center share the axis unit.
struct VoigtPeak {
  double center = 0.0;
  double lorentz_fwhm = 0.0;
  double gauss_fwhm = 0.0;
  double area = 1.0;
};

// Faddeeva function w(z) = exp(-z^2) erfc(-iz) for Im z >= 0.
std::complex<double> faddeeva(std::complex<double> z);

double voigt_eval(double x, const VoigtPeak& peak);

// Olivero-Longbothum estimate of the total Voigt FWHM.
double voigt_fwhm_estimate(double lorentz_fwhm, double gauss_fwhm);

struct FitOptions {
  int n_peaks = 1;
  // Gaussian FWHM held at this value (instrument resolution) when set.
  std::optional<double> fixed_gauss_fwhm;
  // Starting Gaussian width when it is free; defaults to a data estimate.
  std::optional<double> gauss_guess;
  // Optional starting peaks (axis unit of the input spectrum).
  std::vector<VoigtPeak> init;
  bool linear_baseline = false;
  int max_iterations = 500;
  double rel_tolerance = 1e-10;
};

struct FitResult {
  // Peaks sorted by center; centers and widths in micro-eV.
  std::vector<VoigtPeak> peaks;
  double baseline = 0.0;
  double baseline_slope = 0.0;  // per micro-eV, zero unless linear_baseline
  double residual_rms = 0.0;
  // One-sigma parameter uncertainties in fit order
  // [center, lorentz, area, (gauss)] per peak, then baseline terms.
  std::vector<double> std_errors;
  double jtj_condition = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> warnings;
};

FitResult fit_spectrum(const Spectrum& s, const FitOptions& options);

// Evaluates the fitted model at energy x (micro-eV).
double eval_fit(const FitResult& fit, double x);

// Q = E_center / lorentz_fwhm. Returns +infinity (unmeasurable) when the
// Lorentzian part is zero.
double q_from_fit(const FitResult& fit, std::size_t which_peak);

}  // namespace phc::specfit

#pragma once

#include <array>
#include <complex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phc/specfit.hpp"

// Coupled quantum-dot / cavity model. All energies and rates in micro-eV.
namespace phc::cqed {

struct JCParams {
  double g = 0.0;      // coupling constant
  double kappa = 1.0;  // cavity FWHM linewidth
  double gamma = 0.0;  // emitter FWHM linewidth
  double e_cavity = 0.0;
  double detuning = 0.0;  // E_QD - E_cavity

  double e_qd() const { return e_cavity + detuning; }
  void validate() const;
};

// Complex polariton energies: real part is the peak position, -2 * imag
// part the FWHM linewidth.
struct PolaritonPair {
  std::complex<double> upper;
  std::complex<double> lower;

  double gap() const { return upper.real() - lower.real(); }
  double upper_linewidth() const { return -2.0 * upper.imag(); }
  double lower_linewidth() const { return -2.0 * lower.imag(); }
};

PolaritonPair polariton_eigenvalues(const JCParams& p);

// g = sqrt((vrs/2)^2 + (kappa/4)^2), emitter decoherence neglected.
double g_from_vrs(double vrs, double kappa);
// Inverse of g_from_vrs; throws ParameterError when g <= kappa/4.
double vrs_from_g(double g, double kappa);

// Strict g > kappa/4.
bool strong_coupling(double g, double kappa);

struct SpectrumOptions {
  bool include_bare_cavity = true;
  double resolution_fwhm = 21.0;  // Gaussian instrument FWHM
  // Integrated weights of {lower, upper, bare cavity}.
  std::array<double, 3> weights{1.0, 1.0, 1.0};
};

// Voigt components of the emission model (lower, upper[, bare cavity]).
std::vector<specfit::VoigtPeak> emission_components(const JCParams& p, const SpectrumOptions& opt);

specfit::Spectrum emission_spectrum(const JCParams& p, const SpectrumOptions& opt,
                                    std::span<const double> energy_axis);

struct SweepPoint {
  double detuning = 0.0;
  PolaritonPair pair;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  double min_gap = 0.0;
  double min_gap_detuning = 0.0;
  // Optional spectrum map: map[i] is the spectrum at points[i] on energy_axis.
  std::vector<double> energy_axis;
  std::vector<std::vector<double>> map;
};

// Sweeps detuning over [lo, hi] in `steps` uniform points. When
// `map_axis` is non-empty a spectrum is computed at every detuning.
SweepResult detuning_sweep(const JCParams& p, double lo, double hi, int steps,
                           std::span<const double> map_axis = {},
                           const SpectrumOptions& map_options = {});

struct CavityRecord {
  std::string name;
  double v_norm = 1.0;    // mode volume in (lambda/n)^3
  double q_design = 0.0;  // informational
  double field_fraction = 1.0;
};

struct GmaxRow {
  std::string name;
  double v_norm = 0.0;
  double q_design = 0.0;
  double field_fraction = 1.0;
  double g_norm = 0.0;              // field_fraction * sqrt(V_ref / V)
  double g_norm_intensity = 0.0;    // sqrt(field_fraction) * sqrt(V_ref / V)
};

std::vector<GmaxRow> gmax_table(std::span<const CavityRecord> records, std::string_view reference);

double project_g(double g_ref, double v_ref, double field_fraction_ref, double v_target,
                 double field_fraction_target, double polarization_factor);

}  // namespace phc::cqed

#include "phc/cqed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "phc/error.hpp"

namespace phc::cqed {

void JCParams::validate() const {
  if (!(g >= 0.0)) throw ParameterError("g must be >= 0");
  if (!(kappa > 0.0)) throw ParameterError("kappa must be > 0");
  if (!(gamma >= 0.0)) throw ParameterError("gamma must be >= 0");
  if (!std::isfinite(e_cavity) || !std::isfinite(detuning))
    throw ParameterError("energies must be finite");
}

PolaritonPair polariton_eigenvalues(const JCParams& p) {
  p.validate();
  using C = std::complex<double>;
  const double e_qd = p.e_qd();
  const C mean((e_qd + p.e_cavity) / 2.0, -(p.gamma + p.kappa) / 4.0);
  const C half_diff(p.detuning / 2.0, -(p.gamma - p.kappa) / 4.0);
  const C root = std::sqrt(C(p.g * p.g, 0.0) + half_diff * half_diff);
  C a = mean + root;
  C b = mean - root;
  if (a.real() < b.real()) std::swap(a, b);
  return {a, b};
}

double g_from_vrs(double vrs, double kappa) {
  if (!(vrs >= 0.0)) throw ParameterError("VRS must be >= 0");
  if (!(kappa >= 0.0)) throw ParameterError("kappa must be >= 0");
  return std::sqrt(vrs * vrs / 4.0 + kappa * kappa / 16.0);
}

double vrs_from_g(double g, double kappa) {
  if (!(kappa >= 0.0)) throw ParameterError("kappa must be >= 0");
  if (!(g > kappa / 4.0))
    throw ParameterError("no vacuum Rabi splitting: g <= kappa/4 (weak or intermediate coupling)");
  return 2.0 * std::sqrt(g * g - kappa * kappa / 16.0);
}

bool strong_coupling(double g, double kappa) {
  if (!(g >= 0.0) || !(kappa > 0.0)) throw ParameterError("strong_coupling: invalid rates");
  return g > kappa / 4.0;
}

std::vector<specfit::VoigtPeak> emission_components(const JCParams& p,
                                                    const SpectrumOptions& opt) {
  if (!(opt.resolution_fwhm >= 0.0)) throw ParameterError("resolution must be >= 0");
  for (double w : opt.weights)
    if (!(w >= 0.0)) throw ParameterError("peak weights must be >= 0");
  const PolaritonPair pair = polariton_eigenvalues(p);
  std::vector<specfit::VoigtPeak> peaks;
  peaks.push_back({pair.lower.real(), pair.lower_linewidth(), opt.resolution_fwhm, opt.weights[0]});
  peaks.push_back({pair.upper.real(), pair.upper_linewidth(), opt.resolution_fwhm, opt.weights[1]});
  if (opt.include_bare_cavity)
    peaks.push_back({p.e_cavity, p.kappa, opt.resolution_fwhm, opt.weights[2]});
  return peaks;
}

namespace {

void check_axis(std::span<const double> axis) {
  if (axis.size() < 2) throw ParameterError("energy axis needs at least two samples");
  for (std::size_t i = 1; i < axis.size(); ++i)
    if (!(axis[i] > axis[i - 1])) throw ParameterError("energy axis must be strictly increasing");
}

std::vector<double> eval_components(const std::vector<specfit::VoigtPeak>& peaks,
                                    std::span<const double> axis) {
  std::vector<double> out(axis.size(), 0.0);
  for (const auto& pk : peaks) {
    // A lossless, resolution-free line has no finite profile; it carries no
    // weight on a sampled axis.
    if (pk.area == 0.0 || (pk.lorentz_fwhm <= 0.0 && pk.gauss_fwhm <= 0.0)) continue;
    for (std::size_t i = 0; i < axis.size(); ++i) out[i] += specfit::voigt_eval(axis[i], pk);
  }
  return out;
}

}  // namespace

specfit::Spectrum emission_spectrum(const JCParams& p, const SpectrumOptions& opt,
                                    std::span<const double> energy_axis) {
  check_axis(energy_axis);
  specfit::Spectrum s;
  s.unit = specfit::AxisUnit::MicroEV;
  s.axis.assign(energy_axis.begin(), energy_axis.end());
  s.intensity = eval_components(emission_components(p, opt), energy_axis);
  return s;
}

SweepResult detuning_sweep(const JCParams& p, double lo, double hi, int steps,
                           std::span<const double> map_axis, const SpectrumOptions& map_options) {
  if (steps < 2) throw ParameterError("detuning_sweep: steps must be >= 2");
  if (!(hi > lo)) throw ParameterError("detuning_sweep: empty detuning range");
  if (!map_axis.empty()) check_axis(map_axis);
  SweepResult out;
  out.min_gap = std::numeric_limits<double>::infinity();
  out.energy_axis.assign(map_axis.begin(), map_axis.end());
  for (int i = 0; i < steps; ++i) {
    JCParams q = p;
    q.detuning = lo + (hi - lo) * i / (steps - 1);
    const PolaritonPair pair = polariton_eigenvalues(q);
    out.points.push_back({q.detuning, pair});
    if (pair.gap() < out.min_gap) {
      out.min_gap = pair.gap();
      out.min_gap_detuning = q.detuning;
    }
    if (!map_axis.empty())
      out.map.push_back(eval_components(emission_components(q, map_options), map_axis));
  }
  return out;
}

std::vector<GmaxRow> gmax_table(std::span<const CavityRecord> records, std::string_view reference) {
  const CavityRecord* ref = nullptr;
  for (const auto& r : records) {
    if (!(r.v_norm > 0.0)) throw ParameterError("cavity '" + r.name + "': V must be > 0");
    if (!(r.field_fraction > 0.0 && r.field_fraction <= 1.0))
      throw ParameterError("cavity '" + r.name + "': field fraction must be in (0, 1]");
    if (r.name == reference) ref = &r;
  }
  if (!ref) throw ParameterError("unknown reference cavity '" + std::string(reference) + "'");
  std::vector<GmaxRow> rows;
  for (const auto& r : records) {
    const double scale = std::sqrt(ref->v_norm / r.v_norm) / ref->field_fraction;
    rows.push_back({r.name, r.v_norm, r.q_design, r.field_fraction, r.field_fraction * scale,
                    std::sqrt(r.field_fraction) * scale * std::sqrt(ref->field_fraction)});
  }
  return rows;
}

double project_g(double g_ref, double v_ref, double field_fraction_ref, double v_target,
                 double field_fraction_target, double polarization_factor) {
  if (!(g_ref > 0.0 && v_ref > 0.0 && v_target > 0.0 && polarization_factor > 0.0))
    throw ParameterError("project_g: inputs must be positive");
  auto frac_ok = [](double f) { return f > 0.0 && f <= 1.0; };
  if (!frac_ok(field_fraction_ref) || !frac_ok(field_fraction_target))
    throw ParameterError("project_g: field fractions must be in (0, 1]");
  return g_ref * (field_fraction_target / field_fraction_ref) * std::sqrt(v_ref / v_target) *
         polarization_factor;
}

}  // namespace phc::cqed

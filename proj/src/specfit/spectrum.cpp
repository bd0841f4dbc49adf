#include <algorithm>
#include <cmath>
#include <numeric>

#include "phc/error.hpp"
#include "phc/specfit.hpp"
#include "phc/units.hpp"

namespace phc::specfit {

std::string to_string(AxisUnit unit) {
  switch (unit) {
    case AxisUnit::MicroEV: return "ueV";
    case AxisUnit::MilliEV: return "meV";
    case AxisUnit::EV: return "eV";
    case AxisUnit::Nanometer: return "nm";
  }
  return "ueV";
}

AxisUnit axis_unit_from_string(const std::string& s) {
  if (s == "ueV" || s == "µeV" || s == "μeV") return AxisUnit::MicroEV;
  if (s == "meV") return AxisUnit::MilliEV;
  if (s == "eV") return AxisUnit::EV;
  if (s == "nm") return AxisUnit::Nanometer;
  throw ParameterError("unknown axis unit '" + s + "' (expected ueV, meV, eV or nm)");
}

void Spectrum::validate() const {
  if (axis.size() != intensity.size())
    throw ParameterError("spectrum axis and intensity lengths differ");
  if (axis.size() < 2) throw ParameterError("spectrum needs at least two samples");
  const bool up = axis[1] > axis[0];
  for (std::size_t i = 1; i < axis.size(); ++i) {
    if (up ? !(axis[i] > axis[i - 1]) : !(axis[i] < axis[i - 1]))
      throw ParameterError("spectrum axis is not strictly monotone at sample " +
                           std::to_string(i));
  }
  for (double v : intensity)
    if (!std::isfinite(v)) throw ParameterError("spectrum intensity is not finite");
}

Spectrum to_micro_ev(const Spectrum& s) {
  s.validate();
  Spectrum out;
  out.unit = AxisUnit::MicroEV;
  out.axis.resize(s.size());
  out.intensity = s.intensity;
  for (std::size_t i = 0; i < s.size(); ++i) {
    switch (s.unit) {
      case AxisUnit::MicroEV: out.axis[i] = s.axis[i]; break;
      case AxisUnit::MilliEV: out.axis[i] = s.axis[i] * units::kUeVPerMeV; break;
      case AxisUnit::EV: out.axis[i] = s.axis[i] * units::kUeVPerEV; break;
      case AxisUnit::Nanometer:
        if (s.axis[i] <= 0.0) throw ParameterError("wavelength axis must be positive");
        out.axis[i] = units::wavelength_nm_to_ueV(s.axis[i]);
        break;
    }
  }
  if (out.axis.front() > out.axis.back()) {
    std::reverse(out.axis.begin(), out.axis.end());
    std::reverse(out.intensity.begin(), out.intensity.end());
  }
  return out;
}

}  // namespace phc::specfit

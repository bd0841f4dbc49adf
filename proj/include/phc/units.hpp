#pragma once

namespace phc::units {

// h*c in micro-electronvolt nanometres. Fixed so that reported kappa values
// are bit-comparable across implementations.
inline constexpr double kHcUeVNm = 1'239'841'930.0;

inline constexpr double kUeVPerMeV = 1e3;
inline constexpr double kUeVPerEV = 1e6;

inline double wavelength_nm_to_ueV(double lambda_nm) { return kHcUeVNm / lambda_nm; }
inline double ueV_to_wavelength_nm(double energy_ueV) { return kHcUeVNm / energy_ueV; }

}  // namespace phc::units

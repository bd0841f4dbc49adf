#include "phc/specfit.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "phc/error.hpp"

namespace phc::specfit {

namespace {

// Weideman's rational approximation of the Faddeeva function,
// w(z) ~ 2 p(Z) / (L - iz)^2 + 1 / (sqrt(pi) (L - iz)),  Z = (L + iz)/(L - iz).
// With 40 terms the relative error is far below 1e-10 in the upper half plane.
constexpr int kTerms = 40;

struct WeidemanTable {
  double l;
  std::array<double, kTerms> coeff;  // coeff[n] multiplies Z^n

  WeidemanTable() {
    const int m = 2 * kTerms;
    const int m2 = 2 * m;
    l = std::sqrt(kTerms / std::numbers::sqrt2);
    // Samples f(t_k), k = -m+1 .. m-1, preceded by a zero, then fftshifted.
    std::array<double, 4 * kTerms> f{};
    f[0] = 0.0;
    for (int k = -m + 1; k <= m - 1; ++k) {
      const double theta = k * std::numbers::pi / m;
      const double t = l * std::tan(theta / 2.0);
      f[static_cast<std::size_t>(k + m)] = std::exp(-t * t) * (l * l + t * t);
    }
    std::array<double, 4 * kTerms> shifted{};
    for (int n = 0; n < m2; ++n) shifted[n] = f[(n + m2 / 2) % m2];
    for (int j = 1; j <= kTerms; ++j) {
      double re = 0.0;
      for (int n = 0; n < m2; ++n)
        re += shifted[n] * std::cos(2.0 * std::numbers::pi * j * n / m2);
      coeff[j - 1] = re / m2;
    }
  }
};

const WeidemanTable& table() {
  static const WeidemanTable t;
  return t;
}

}  // namespace

std::complex<double> faddeeva(std::complex<double> z) {
  const auto& t = table();
  const std::complex<double> i(0.0, 1.0);
  const std::complex<double> denom = t.l - i * z;
  const std::complex<double> zz = (t.l + i * z) / denom;
  std::complex<double> p = t.coeff[kTerms - 1];
  for (int n = kTerms - 2; n >= 0; --n) p = p * zz + t.coeff[n];
  return 2.0 * p / (denom * denom) + (1.0 / std::sqrt(std::numbers::pi)) / denom;
}

double voigt_eval(double x, const VoigtPeak& peak) {
  const double lw = peak.lorentz_fwhm;
  const double gw = peak.gauss_fwhm;
  if (lw < 0.0 || gw < 0.0) throw ParameterError("voigt_eval: negative width");
  if (lw == 0.0 && gw == 0.0)
    throw DegenerateError("voigt_eval: both Lorentzian and Gaussian widths are zero");
  const double dx = x - peak.center;
  if (gw == 0.0) {
    const double gamma = lw / 2.0;
    return peak.area * gamma / (std::numbers::pi * (dx * dx + gamma * gamma));
  }
  const double sigma = gw / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  if (lw == 0.0) {
    return peak.area * std::exp(-dx * dx / (2.0 * sigma * sigma)) /
           (sigma * std::sqrt(2.0 * std::numbers::pi));
  }
  const double scale = sigma * std::numbers::sqrt2;
  const std::complex<double> z(dx / scale, lw / 2.0 / scale);
  return peak.area * faddeeva(z).real() / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

double voigt_fwhm_estimate(double lorentz_fwhm, double gauss_fwhm) {
  return 0.5346 * lorentz_fwhm +
         std::sqrt(0.2166 * lorentz_fwhm * lorentz_fwhm + gauss_fwhm * gauss_fwhm);
}

}  // namespace phc::specfit

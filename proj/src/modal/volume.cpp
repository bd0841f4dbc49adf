#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "phc/error.hpp"
#include "phc/modal.hpp"
#include "phc/units.hpp"

namespace phc::modal {

double q_to_kappa(double q, double wavelength_nm) {
  if (!(q > 0.0)) throw ParameterError("Q must be > 0");
  if (!(wavelength_nm > 0.0)) throw ParameterError("wavelength must be > 0");
  return units::kHcUeVNm / wavelength_nm / q;
}

double kappa_to_q(double kappa_ueV, double wavelength_nm) {
  if (!(kappa_ueV > 0.0)) throw ParameterError("kappa must be > 0");
  if (!(wavelength_nm > 0.0)) throw ParameterError("wavelength must be > 0");
  return units::kHcUeVNm / wavelength_nm / kappa_ueV;
}

double q_to_kappa_energy(double q, double energy_ueV) {
  if (!(q > 0.0)) throw ParameterError("Q must be > 0");
  if (!(energy_ueV > 0.0)) throw ParameterError("energy must be > 0");
  return energy_ueV / q;
}

std::vector<double> cell_intensity(const fdtd::FieldSnapshot& snap) {
  const std::size_t nx = snap.cells[0], ny = snap.cells[1], nz = snap.cells[2];
  for (const auto& c : snap.e)
    if (c.size() != snap.node_count()) throw ParameterError("snapshot arrays do not match its grid");
  std::vector<double> out(nx * ny * nz);
  const auto& ex = snap.e[0];
  const auto& ey = snap.e[1];
  const auto& ez = snap.e[2];
  for (std::size_t k = 0; k < nz; ++k)
    for (std::size_t j = 0; j < ny; ++j)
      for (std::size_t i = 0; i < nx; ++i) {
        auto n = [&](std::size_t a, std::size_t b, std::size_t c) { return snap.node_index(a, b, c); };
        const std::complex<double> cx =
            0.25 * (ex[n(i, j, k)] + ex[n(i, j + 1, k)] + ex[n(i, j, k + 1)] + ex[n(i, j + 1, k + 1)]);
        const std::complex<double> cy =
            0.25 * (ey[n(i, j, k)] + ey[n(i + 1, j, k)] + ey[n(i, j, k + 1)] + ey[n(i + 1, j, k + 1)]);
        const std::complex<double> cz =
            0.25 * (ez[n(i, j, k)] + ez[n(i + 1, j, k)] + ez[n(i, j + 1, k)] + ez[n(i + 1, j + 1, k)]);
        out[i + nx * (j + ny * k)] = std::norm(cx) + std::norm(cy) + std::norm(cz);
      }
  return out;
}

double purcell_volume(const std::vector<double>& e_sq, const geometry::PermittivityGrid& eps,
                      const std::array<bool, 3>& mirrored) {
  if (e_sq.size() != eps.size()) throw ParameterError("field and permittivity grids differ");
  double sum = 0.0, peak = 0.0;
  for (std::size_t n = 0; n < e_sq.size(); ++n) {
    const double u = eps.eps[n] * e_sq[n];
    sum += u;
    peak = std::max(peak, u);
  }
  if (!(peak > 0.0)) throw DegenerateError("mode volume of an all-zero field");
  double mult = 1.0;
  for (bool m : mirrored) mult *= m ? 2.0 : 1.0;
  const double h = eps.spacing_nm;
  return mult * sum * h * h * h / peak;
}

double mode_volume(const fdtd::FieldSnapshot& snap, const geometry::PermittivityGrid& eps,
                   double wavelength_nm, double n_ref) {
  if (!(wavelength_nm > 0.0) || !(n_ref > 0.0)) throw ParameterError("wavelength and n_ref must be > 0");
  if (snap.cells != eps.dims) throw ParameterError("snapshot and permittivity grids differ");
  const double v = purcell_volume(cell_intensity(snap), eps, snap.mirrored);
  const double unit = wavelength_nm / n_ref;
  return v / (unit * unit * unit);
}

PowerSpectrum fft_spectrum(const fdtd::TimeSeries& ts, double min_relative_power) {
  const std::size_t n = ts.values.size();
  if (n < 64) throw ParameterError("spectrum needs at least 64 samples");
  if (!(ts.dt > 0.0)) throw ParameterError("time series dt must be > 0");

  std::vector<double> in(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    in[i] = ts.values[i] * w;
  }
  const std::size_t nf = n / 2 + 1;
  std::vector<std::complex<double>> out(nf);
  {
    // FFTW planning is not thread-safe.
    static std::mutex plan_mutex;
    fftw_plan plan;
    {
      std::lock_guard<std::mutex> lock(plan_mutex);
      plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                  FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard<std::mutex> lock(plan_mutex);
    fftw_destroy_plan(plan);
  }

  PowerSpectrum s;
  s.frequency.resize(nf);
  s.power.resize(nf);
  const double df = 1.0 / (static_cast<double>(n) * ts.dt);
  for (std::size_t k = 0; k < nf; ++k) {
    s.frequency[k] = static_cast<double>(k) * df;
    s.power[k] = std::norm(out[k]);
  }
  const double pmax = *std::max_element(s.power.begin() + 1, s.power.end());
  if (!(pmax > 0.0)) return s;
  for (std::size_t k = 1; k + 1 < nf; ++k) {
    const double a = s.power[k - 1], b = s.power[k], c = s.power[k + 1];
    if (!(b > a && b >= c) || b < min_relative_power * pmax) continue;
    // Parabola through the log power of the three bins.
    double delta = 0.0, peak = b;
    if (a > 0.0 && c > 0.0) {
      const double la = std::log(a), lb = std::log(b), lc = std::log(c);
      const double den = la - 2.0 * lb + lc;
      if (den < 0.0) {
        delta = 0.5 * (la - lc) / den;
        peak = std::exp(lb - 0.25 * (la - lc) * delta);
      }
    }
    s.peaks.push_back({(static_cast<double>(k) + delta) * df, peak});
  }
  std::stable_sort(s.peaks.begin(), s.peaks.end(),
                   [](const SpectralPeak& x, const SpectralPeak& y) { return x.power > y.power; });
  return s;
}

}  // namespace phc::modal

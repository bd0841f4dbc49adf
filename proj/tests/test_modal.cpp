#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "phc/error.hpp"
#include "phc/modal.hpp"

using namespace phc;
using namespace phc::modal;

namespace {

constexpr double kPi = std::numbers::pi;

struct Line {
  double f, q, amp, phase;
};

fdtd::TimeSeries synth(const std::vector<Line>& lines, double dt, std::size_t n) {
  fdtd::TimeSeries ts;
  ts.name = "synthetic";
  ts.dt = dt;
  ts.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    double v = 0.0;
    for (const auto& l : lines) {
      const double w = 2 * kPi * l.f;
      v += l.amp * std::exp(-w * t / (2 * l.q)) * std::cos(w * t + l.phase);
    }
    ts.values[i] = v;
  }
  return ts;
}

}  // namespace

TEST_SUITE("modal") {

TEST_CASE("single high-Q line is recovered") {
  const auto ts = synth({{0.268, 1e5, 1.0, 0.0}}, 0.0144, 40000);
  const auto r = harmonic_inversion(ts, 0.24, 0.30, 8);
  REQUIRE(r.modes.size() >= 1);
  const auto& m = r.modes.front();
  CHECK(std::abs(m.frequency - 0.268) / 0.268 < 1e-6);
  CHECK(std::abs(m.q - 1e5) / 1e5 < 0.01);
  CHECK(m.amplitude == doctest::Approx(1.0).epsilon(1e-3));
  CHECK_FALSE(m.q_exceeds_measurable);
}

TEST_CASE("undamped line is flagged as not measurable") {
  const auto ts = synth({{0.27, 1e30, 1.0, 0.4}}, 0.0144, 20000);
  const auto r = harmonic_inversion(ts, 0.24, 0.30, 4);
  REQUIRE_FALSE(r.modes.empty());
  CHECK(r.modes.front().q_exceeds_measurable);
  CHECK(std::isinf(r.modes.front().q));
  CHECK(std::abs(r.modes.front().frequency - 0.27) < 1e-8);
}

TEST_CASE("out-of-band lines are excluded from the modes") {
  const auto ts = synth({{0.268, 2e4, 1.0, 0.0}, {0.40, 500, 3.0, 1.0}}, 0.0144, 40000);
  const auto r = harmonic_inversion(ts, 0.24, 0.30, 8);
  REQUIRE(r.modes.size() >= 1);
  for (const auto& m : r.modes) CHECK(m.frequency > 0.24);
  CHECK(std::abs(r.modes.front().frequency - 0.268) / 0.268 < 1e-6);
}

TEST_CASE("matrix pencil on exact exponentials") {
  std::vector<std::complex<double>> y(200);
  const std::complex<double> z1 = std::polar(0.995, 0.3), z2 = std::polar(0.99, -1.1);
  for (std::size_t n = 0; n < y.size(); ++n)
    y[n] = 2.0 * std::pow(z1, static_cast<double>(n)) + std::complex<double>(0, 1) * std::pow(z2, static_cast<double>(n));
  const auto p = matrix_pencil(y, 6);
  CHECK(p.rank == 2);
  REQUIRE(p.z.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    const bool first = std::abs(p.z[k] - z1) < 1e-10;
    const bool second = std::abs(p.z[k] - z2) < 1e-10;
    CHECK((first || second));
    if (first) CHECK(std::abs(p.a[k] - 2.0) < 1e-9);
    if (second) CHECK(std::abs(p.a[k] - std::complex<double>(0, 1)) < 1e-9);
  }
}

TEST_CASE("too few poles requested is reported") {
  const auto ts = synth({{0.25, 3e3, 1.0, 0}, {0.27, 3e3, 1.0, 0}, {0.29, 3e3, 1.0, 0}}, 0.0144, 40000);
  const auto r = harmonic_inversion(ts, 0.24, 0.30, 2);
  CHECK(r.modes.size() <= 2);
  CHECK_FALSE(r.notices.empty());
}

TEST_CASE("empty or short signals are rejected") {
  fdtd::TimeSeries ts;
  ts.dt = 0.01;
  CHECK_THROWS_AS(harmonic_inversion(ts, 0.2, 0.3, 4), ParameterError);
  ts.values.assign(10, 1.0);
  CHECK_THROWS_AS(fft_spectrum(ts), ParameterError);
}

TEST_CASE("periodogram peaks") {
  const auto ts = synth({{0.25, 1e12, 1.0, 0}, {0.31, 1e12, 0.5, 1.0}}, 0.05, 20000);
  const auto s = fft_spectrum(ts);
  REQUIRE(s.peaks.size() >= 2);
  CHECK(s.peaks[0].frequency == doctest::Approx(0.25).epsilon(1e-4));
  CHECK(s.peaks[1].frequency == doctest::Approx(0.31).epsilon(1e-4));
  CHECK(s.peaks[0].power > s.peaks[1].power);
}

TEST_CASE("Q and linewidth conversions") {
  CHECK(q_to_kappa(33000.0, 936.73) == doctest::Approx(40.1086).epsilon(1e-5));
  CHECK(q_to_kappa_energy(80200.0, 1.2832e6) == doctest::Approx(16.0).epsilon(1e-4));
  CHECK(kappa_to_q(q_to_kappa(12345.0, 950.0), 950.0) == doctest::Approx(12345.0).epsilon(1e-12));
}

TEST_CASE("Gaussian field: mode volume matches the closed form") {
  // |E|^2 = exp(-r^2/s^2) integrates to pi^(3/2) s^3.
  const std::size_t n = 40;
  const double h = 0.1;     // a units
  const double a_nm = 100;  // so h = 10 nm
  const double s = 0.6;
  fdtd::FieldSnapshot full;
  full.cells = {n, n, n};
  full.spacing = h;
  full.origin = {-0.5 * n * h, -0.5 * n * h, -0.5 * n * h};
  full.frequency = 0.1;
  for (auto& c : full.e) c.assign(full.node_count(), 0.0);
  for (std::size_t k = 0; k <= n; ++k)
    for (std::size_t j = 0; j <= n; ++j)
      for (std::size_t i = 0; i <= n; ++i) {
        const auto st = fdtd::stagger(fdtd::Component::Ey);
        const double x = full.origin[0] + (i + st[0]) * h, y = full.origin[1] + (j + st[1]) * h,
                     z = full.origin[2] + (k + st[2]) * h;
        full.e[1][full.node_index(i, j, k)] = std::exp(-(x * x + y * y + z * z) / (2 * s * s));
      }
  geometry::PermittivityGrid eps;
  eps.dims = {n, n, n};
  eps.spacing_nm = h * a_nm;
  eps.a_nm = a_nm;
  eps.origin_nm = {full.origin[0] * a_nm, full.origin[1] * a_nm, full.origin[2] * a_nm};
  eps.eps.assign(eps.size(), 1.0);
  const double lambda = 1000.0;
  const double exact = std::pow(kPi, 1.5) * std::pow(s * a_nm, 3) / std::pow(lambda, 3);
  const double v = mode_volume(full, eps, lambda, 1.0);
  CHECK(v == doctest::Approx(exact).epsilon(0.01));

  // Positive octant with three mirror planes gives the same volume.
  fdtd::FieldSnapshot oct;
  const std::size_t m = n / 2;
  oct.cells = {m, m, m};
  oct.spacing = h;
  oct.frequency = 0.1;
  oct.mirrored = {true, true, true};
  for (auto& c : oct.e) c.assign(oct.node_count(), 0.0);
  for (std::size_t k = 0; k <= m; ++k)
    for (std::size_t j = 0; j <= m; ++j)
      for (std::size_t i = 0; i <= m; ++i)
        oct.e[1][oct.node_index(i, j, k)] = full.e[1][full.node_index(i + m, j + m, k + m)];
  geometry::PermittivityGrid eo = eps;
  eo.dims = {m, m, m};
  eo.origin_nm = {0, 0, 0};
  eo.eps.assign(eo.size(), 1.0);
  CHECK(mode_volume(oct, eo, lambda, 1.0) == doctest::Approx(v).epsilon(0.02));

  for (auto& c : full.e) std::fill(c.begin(), c.end(), 0.0);
  CHECK_THROWS_AS(mode_volume(full, eps, lambda, 1.0), DegenerateError);
}

TEST_CASE("mode volume weights the field by the permittivity") {
  // Uniform eps scales numerator and maximum alike.
  const std::size_t n = 6;
  fdtd::FieldSnapshot snap;
  snap.cells = {n, n, n};
  snap.spacing = 0.1;
  snap.frequency = 0.2;
  for (auto& c : snap.e) c.assign(snap.node_count(), 0.0);
  snap.e[0][snap.node_index(3, 3, 3)] = 1.0;
  geometry::PermittivityGrid eps;
  eps.dims = {n, n, n};
  eps.spacing_nm = 10.0;
  eps.a_nm = 100.0;
  eps.eps.assign(eps.size(), 1.0);
  const double v1 = mode_volume(snap, eps, 500.0, 1.0);
  eps.eps.assign(eps.size(), 4.0);
  CHECK(mode_volume(snap, eps, 500.0, 1.0) == doctest::Approx(v1).epsilon(1e-12));
}

}  // TEST_SUITE

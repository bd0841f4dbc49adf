#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "phc/error.hpp"
#include "phc/fdtd.hpp"
#include "phc/modal.hpp"

using namespace phc;
using namespace phc::fdtd;

namespace {

geometry::PermittivityGrid uniform(std::size_t nx, std::size_t ny, std::size_t nz, int res, double eps = 1.0) {
  geometry::PermittivityGrid g;
  g.dims = {nx, ny, nz};
  g.a_nm = 1.0;
  g.spacing_nm = 1.0 / res;
  g.eps.assign(g.size(), eps);
  return g;
}

SimConfig pec_box() {
  SimConfig c;
  for (auto& f : c.faces) f = {Boundary::Pec, Boundary::Pec};
  return c;
}

// Lowest resonance of a PEC unit cube seen by an Ez probe.
double cube_resonance(int res) {
  const auto g = uniform(res, res, res, res);
  auto c = pec_box();
  DipoleSource s;
  s.position = {static_cast<std::size_t>(res / 3), static_cast<std::size_t>(res / 4), static_cast<std::size_t>(res / 5)};
  s.component = Component::Ez;
  s.center_frequency = 0.7;
  s.bandwidth = 0.3;
  c.sources = {s};
  c.probes = {{"p", {static_cast<std::size_t>(res / 2 + 1), static_cast<std::size_t>(res / 3),
                     static_cast<std::size_t>(res / 2)}, Component::Ez}};
  Simulation sim(g, c);
  sim.advance(300L * res);
  const auto h = modal::harmonic_inversion(sim.probes()[0], 0.6, 0.8, 6);
  REQUIRE_FALSE(h.modes.empty());
  double best = 0.0;
  for (const auto& m : h.modes)
    if (best == 0.0 || std::abs(m.frequency - 0.70710678) < std::abs(best - 0.70710678)) best = m.frequency;
  return best;
}

// Quasi-1D line along z: magnetic walls across x, electric walls across y,
// absorbing layers at both z ends.
std::vector<double> line_run(std::size_t nz, std::size_t probe_offset, long steps, int threads = 1) {
  const auto g = uniform(2, 2, nz, 20);
  SimConfig c;
  c.faces[0] = {Boundary::Pmc, Boundary::Pmc};
  c.faces[1] = {Boundary::Pec, Boundary::Pec};
  c.faces[2] = {Boundary::Pml, Boundary::Pml};
  c.threads = threads;
  DipoleSource s;
  s.position = {1, 1, nz / 2};
  s.component = Component::Ey;
  s.center_frequency = 0.268;
  s.bandwidth = 0.05;
  c.sources = {s};
  c.record_from_step = 0;
  c.probes = {{"p", {1, 1, nz / 2 + probe_offset}, Component::Ey}};
  Simulation sim(g, c);
  sim.advance(steps);
  return sim.probes()[0].values;
}

}  // namespace

TEST_SUITE("fdtd") {

TEST_CASE("time step and stability bound") {
  CHECK(stable_dt(0.05, 0.5) == doctest::Approx(0.5 * 0.05 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK_THROWS_AS(stable_dt(0.05, 1.2), StabilityError);
  CHECK_THROWS_AS(stable_dt(0.05, 0.0), StabilityError);
}

TEST_CASE("single-frequency DFT of a sampled sinusoid") {
  const double f = 0.25, dt = 0.01;
  const long n = static_cast<long>(std::lround(8.0 / f / dt));  // eight periods
  DftAccumulator acc(1, f);
  for (long i = 0; i < n; ++i) {
    const double t = i * dt;
    const double v = 0.7 * std::cos(2 * std::numbers::pi * f * t + 0.3);
    acc.add(t, &v);
  }
  const auto a = acc.result()[0];
  CHECK(std::abs(a) == doctest::Approx(0.7).epsilon(1e-10));
  CHECK(std::arg(a) == doctest::Approx(-0.3).epsilon(1e-9));
}

TEST_CASE("source waveform is switched off and integrates to zero charge") {
  DipoleSource s;
  const double dt = stable_dt(0.05, 0.5);
  const long off = s.off_step(dt);
  CHECK(std::abs(s.value(off * dt)) < 1e-7);  // envelope tail at turn-off
  double q = 0.0;
  for (long n = 0; n < off; ++n) q += s.value((n + 0.5) * dt) * dt;
  double peak = 0.0;
  for (long n = 0; n < off; ++n) peak = std::max(peak, std::abs(s.value((n + 0.5) * dt)));
  CHECK(std::abs(q) < 1e-6 * peak);
}

TEST_CASE("PEC cube resonance and second-order convergence") {
  const double exact = 0.5 * std::sqrt(2.0);
  const double e10 = std::abs(cube_resonance(10) - exact);
  const double f20 = cube_resonance(20);
  const double e20 = std::abs(f20 - exact);
  const double e40 = std::abs(cube_resonance(40) - exact);
  CHECK(e20 / exact < 0.01);
  const double p1 = std::log2(e10 / e20), p2 = std::log2(e20 / e40);
  MESSAGE("errors " << e10 << " " << e20 << " " << e40 << " orders " << p1 << " " << p2);
  CHECK(p1 >= 1.8);
  CHECK(p2 >= 1.8);
}

TEST_CASE("lossless energy drift") {
  const int res = 20;
  auto c = pec_box();
  c.track_energy = true;
  DipoleSource s;
  s.position = {6, 5, 4};
  s.component = Component::Ez;
  s.center_frequency = 0.7;
  s.bandwidth = 0.3;
  c.sources = {s};
  auto g = uniform(res, res, res, res);
  for (std::size_t k = 0; k < 10; ++k)
    for (std::size_t j = 0; j < 20; ++j)
      for (std::size_t i = 0; i < 8; ++i) g.eps[g.index(i, j, k)] = 11.9716;
  Simulation sim(g, c);
  sim.advance(s.off_step(sim.dt()) + 10);
  const double e0 = sim.energy();
  sim.advance(10000);
  const double e1 = sim.energy();
  CHECK(e0 > 0.0);
  CHECK(std::abs(e1 - e0) / e0 <= 1e-10);
}

TEST_CASE("PML reflection below 1e-6") {
  const long steps = 8000;
  const std::size_t small = 200, big = 200 + 2 * 2600;
  const auto a = line_run(small, 20, steps);
  const auto b = line_run(big, 20, steps);
  REQUIRE(a.size() == b.size());
  double peak = 0.0, diff = 0.0;
  std::complex<double> fa = 0.0, fb = 0.0;
  const double dt = stable_dt(0.05, 0.5);
  for (std::size_t n = 0; n < a.size(); ++n) {
    peak = std::max(peak, std::abs(b[n]));
    diff = std::max(diff, std::abs(a[n] - b[n]));
    const auto ph = std::polar(1.0, 2 * std::numbers::pi * 0.268 * static_cast<double>(n) * dt);
    fa += (a[n] - b[n]) * ph;
    fb += b[n] * ph;
  }
  MESSAGE("time-domain " << diff / peak << ", spectral " << std::abs(fa) / std::abs(fb));
  CHECK(diff / peak < 1e-6);
  CHECK(std::abs(fa) / std::abs(fb) < 1e-6);
}

TEST_CASE("causality: nothing arrives before one cell per step") {
  const std::size_t d = 40;
  const auto v = line_run(200, d, 400);
  for (std::size_t n = 0; n + 1 < d; ++n) REQUIRE(v[n] == 0.0);
  double later = 0.0;
  for (double x : v) later = std::max(later, std::abs(x));
  CHECK(later > 0.0);
}

TEST_CASE("octant with mirror symmetries equals the full domain") {
  const std::size_t n = 10, res = 10;
  auto full = uniform(2 * n, 2 * n, 2 * n, res);
  auto oct = uniform(n, n, n, res);
  // Symmetric dielectric block around the centre.
  for (std::size_t k = 0; k < 2 * n; ++k)
    for (std::size_t j = 0; j < 2 * n; ++j)
      for (std::size_t i = 0; i < 2 * n; ++i) {
        const bool in = std::abs(static_cast<double>(i) + 0.5 - n) < 4 && std::abs(static_cast<double>(j) + 0.5 - n) < 6 &&
                        std::abs(static_cast<double>(k) + 0.5 - n) < 2;
        if (!in) continue;
        full.eps[full.index(i, j, k)] = 6.0;
        if (i >= n && j >= n && k >= n) oct.eps[oct.index(i - n, j - n, k - n)] = 6.0;
      }
  DipoleSource s;
  s.component = Component::Ey;
  s.center_frequency = 0.8;
  s.bandwidth = 0.3;

  auto cf = pec_box();
  cf.record_from_step = 0;
  for (std::size_t di : {n - 1, n + 1})
    for (std::size_t dj : {n - 1, n}) {
      s.position = {di, dj, n};
      cf.sources.push_back(s);
    }
  cf.probes = {{"p", {n + 2, n + 1, n + 1}, Component::Ey}, {"q", {n + 3, n + 1, n + 2}, Component::Ex}};

  auto co = pec_box();
  co.record_from_step = 0;
  co.symmetries = {Symmetry::EvenMirror, Symmetry::OddMirror, Symmetry::EvenMirror};
  s.position = {1, 0, 0};
  co.sources = {s};
  co.probes = {{"p", {2, 1, 1}, Component::Ey}, {"q", {3, 1, 2}, Component::Ex}};

  Simulation a(full, cf), b(oct, co);
  a.advance(600);
  b.advance(600);
  for (int p = 0; p < 2; ++p) {
    const auto& x = a.probes()[p].values;
    const auto& y = b.probes()[p].values;
    REQUIRE(x.size() == y.size());
    double peak = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      peak = std::max(peak, std::abs(x[i]));
      diff = std::max(diff, std::abs(x[i] - y[i]));
    }
    CHECK(peak > 0.0);
    CHECK(diff <= 1e-12 * peak);
  }
}

TEST_CASE("linearity in the source amplitude and superposition") {
  const auto g = uniform(16, 14, 12, 10, 2.0);
  auto base = pec_box();
  base.record_from_step = 0;
  base.probes = {{"p", {9, 7, 5}, Component::Ez}};
  DipoleSource s1, s2;
  s1.position = {4, 4, 4};
  s1.component = Component::Ez;
  s2.position = {10, 9, 7};
  s2.component = Component::Ex;
  s2.center_frequency = 0.5;
  auto run_with = [&](std::vector<DipoleSource> src) {
    auto c = base;
    c.sources = std::move(src);
    Simulation sim(g, c);
    sim.advance(800);
    return sim.probes()[0].values;
  };
  const auto a = run_with({s1});
  auto s1x2 = s1;
  s1x2.amplitude = 2.0;
  const auto a2 = run_with({s1x2});
  const auto b = run_with({s2});
  const auto ab = run_with({s1, s2});
  double peak = 0.0;
  for (double v : ab) peak = std::max(peak, std::abs(v));
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a2[i] == 2.0 * a[i]);
    REQUIRE(std::abs(ab[i] - (a[i] + b[i])) <= 1e-12 * peak);
  }
}

TEST_CASE("thread count does not change results") {
  const auto one = line_run(300, 30, 1500, 1);
  const auto three = line_run(300, 30, 1500, 3);
  REQUIRE(one.size() == three.size());
  for (std::size_t i = 0; i < one.size(); ++i) REQUIRE(one[i] == three[i]);

  auto g = uniform(20, 18, 30, 10, 1.0);
  for (std::size_t i = 0; i < g.eps.size(); i += 7) g.eps[i] = 9.0;
  SimConfig c;
  c.symmetries = {Symmetry::EvenMirror, Symmetry::OddMirror, Symmetry::None};
  c.pml.cells = 8;
  DipoleSource s;
  s.position = {1, 0, 15};
  c.sources = {s};
  c.record_from_step = 0;
  c.probes = {{"p", {3, 2, 17}, Component::Ey}};
  c.threads = 1;
  Simulation a(g, c);
  c.threads = 4;
  Simulation b(g, c);
  a.advance(700);
  b.advance(700);
  for (std::size_t i = 0; i < a.probes()[0].values.size(); ++i)
    REQUIRE(a.probes()[0].values[i] == b.probes()[0].values[i]);
  CHECK(a.max_abs_e() == b.max_abs_e());
}

TEST_CASE("divergence is detected") {
  const auto g = uniform(8, 8, 8, 10);
  auto c = pec_box();
  Simulation sim(g, c);
  sim.set_field(Component::Ex, 3, 3, 3, std::nan(""));
  CHECK_THROWS_AS(sim.advance(600), DivergenceError);
}

TEST_CASE("configuration errors") {
  const auto g = uniform(30, 30, 30, 10);
  SimConfig c;
  DipoleSource s;
  s.position = {2, 15, 15};  // inside the 12-cell PML
  c.sources = {s};
  CHECK_THROWS_AS(Simulation(g, c), ParameterError);
  c.sources[0].position = {15, 15, 15};
  c.sources[0].component = Component::Hz;
  CHECK_THROWS_AS(Simulation(g, c), ParameterError);
  c.sources.clear();
  c.courant_factor = 0.9;
  CHECK_THROWS_AS(Simulation(g, c), StabilityError);
  auto bad = g;
  bad.eps[5] = 0.5;
  CHECK_THROWS_AS(Simulation(bad, SimConfig{}), ParameterError);
  c = SimConfig{};
  c.max_memory_bytes = 1e3;
  CHECK_THROWS_AS(Simulation(g, c), ParameterError);
}

TEST_CASE("snapshot of a driven cavity is mirror consistent") {
  const auto g = uniform(10, 10, 10, 10);
  auto c = pec_box();
  c.symmetries = {Symmetry::EvenMirror, Symmetry::OddMirror, Symmetry::EvenMirror};
  DipoleSource s;
  s.position = {1, 0, 0};
  s.center_frequency = 0.3;
  s.bandwidth = 0.1;
  c.sources = {s};
  c.total_steps = 3000;
  Simulation sim(g, c);
  CHECK_THROWS_AS(sim.begin_snapshot(0.3, 5), ParameterError);
  sim.advance(2000);
  sim.begin_snapshot(0.3, 1000);
  sim.advance(1000);
  REQUIRE(sim.snapshot_ready());
  const auto snap = sim.snapshot();
  CHECK(snap.mirrored == std::array<bool, 3>{true, true, true});
  CHECK(snap.cells == std::array<std::size_t, 3>{10, 10, 10});
  double ey = 0.0;
  for (const auto& v : snap.e[1]) ey = std::max(ey, std::abs(v));
  CHECK(ey > 0.0);
}

}  // TEST_SUITE

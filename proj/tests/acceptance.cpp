// Acceptance suite: one PASS/FAIL line per criterion, details indented below.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "phc/cqed.hpp"
#include "phc/error.hpp"
#include "phc/fdtd.hpp"
#include "phc/io.hpp"
#include "phc/modal.hpp"
#include "phc/pipeline.hpp"
#include "phc/specfit.hpp"
#include "phc/units.hpp"

using namespace phc;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void info(const std::string& what) { details.push_back("     " + what); }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1
Outcome cqed_arithmetic() {
  Outcome o;
  const double g = cqed::g_from_vrs(78.0, 40.0);
  o.check(std::abs(g - 40.3) <= 0.1, fmt("g_from_vrs(78, 40) = %.4f (40.3 +- 0.1)", g));
  const double vrs = cqed::vrs_from_g(40.26, 40.0);
  o.check(std::abs(vrs - 78.0) <= 0.1, fmt("vrs_from_g(40.26, 40) = %.4f (78.0 +- 0.1)", vrs));
  o.check(cqed::strong_coupling(40.0, 40.0), "strong_coupling(40, 40) = true");
  o.check(std::abs(g / 40.0 - 1.0) <= 0.05, fmt("g/kappa = %.4f (1.0 +- 0.05)", g / 40.0));
  return o;
}

// 2
Outcome anti_crossing() {
  Outcome o;
  cqed::JCParams p;
  p.g = 40.26;
  p.kappa = 40.0;
  p.gamma = 0.0;
  const double lo = -300.0, hi = 300.0;
  const int steps = 601;
  const double step = (hi - lo) / (steps - 1);
  const auto r = cqed::detuning_sweep(p, lo, hi, steps);
  o.check(std::abs(r.min_gap - 78.0) <= 0.5, fmt("minimum gap %.4f ueV (78.0 +- 0.5)", r.min_gap));
  o.check(std::abs(r.min_gap_detuning) <= step,
          fmt("at detuning %.4f ueV (0 +- %.1f)", r.min_gap_detuning, step));
  double worst = 0.0;
  for (const auto& pt : r.points) {
    using C = std::complex<double>;
    Eigen::Matrix2cd h;
    h << C(0.0, -p.kappa / 2), C(p.g, 0.0), C(p.g, 0.0), C(pt.detuning, -p.gamma / 2);
    Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(h, false);
    C a = es.eigenvalues()[0], b = es.eigenvalues()[1];
    if (a.real() > b.real()) std::swap(a, b);
    worst = std::max(worst, std::abs(pt.pair.lower - a) / std::max(1.0, std::abs(a)));
    worst = std::max(worst, std::abs(pt.pair.upper - b) / std::max(1.0, std::abs(b)));
  }
  o.check(worst <= 1e-10, fmt("max relative deviation from 2x2 eigen-solver %.2e (<= 1e-10)", worst));
  return o;
}

// 3
Outcome q_kappa() {
  Outcome o;
  const double k1 = modal::q_to_kappa(33000.0, 936.73);
  o.check(std::abs(k1 - 40.1) <= 0.4, fmt("Q=33000 at 936.73 nm -> kappa %.4f ueV (40.1 +- 0.4)", k1));
  const double k2 = modal::q_to_kappa_energy(80200.0, 1.2832 * units::kUeVPerEV);
  o.check(std::abs(k2 - 16.0) <= 0.2, fmt("Q=80200 at 1.2832 eV -> kappa %.4f ueV (16.0 +- 0.2)", k2));
  return o;
}

// 4
Outcome table1() {
  Outcome o;
  const auto j = io::ordered_json::parse(io::read_text(std::string(PHC_DATA_DIR) + "/table1.json"));
  const auto table = cqed::gmax_table(io::records_from_json(j), "heterostructure");
  const std::map<std::string, double> expected{{"L4/3", 2.2}, {"H0", 2.4}, {"L3", 1.3}, {"heterostructure", 1.0}};
  std::set<std::string> seen;
  for (const auto& row : table) {
    const auto it = expected.find(row.name);
    if (it != expected.end()) {
      seen.insert(row.name);
      o.check(std::abs(row.g_norm - it->second) <= 0.05,
              row.name + fmt(": %.4f (%.1f +- 0.05)", row.g_norm, it->second));
    } else {
      o.info("INFO " + row.name + fmt(": field convention %.4f, intensity convention %.4f (printed 2.1, not asserted)",
                                      row.g_norm, row.g_norm_intensity));
    }
  }
  o.check(seen.size() == expected.size(), "all four asserted cavities present");
  return o;
}

// 5
Outcome projection() {
  Outcome o;
  const double g1 = cqed::project_g(110.0, 0.75, 0.93, 0.32, 1.0, 1.0);
  o.check(std::abs(g1 - 181.0) <= 2.0, fmt("project_g(110, 0.75, 0.93, 0.32, 1, 1) = %.3f ueV (181 +- 2)", g1));
  const double g2 = cqed::project_g(110.0, 0.75, 0.93, 0.32, 1.0, std::sqrt(2.0));
  o.check(std::abs(g2 - 256.0) <= 3.0, fmt("with polarisation factor sqrt2: %.3f ueV (256 +- 3)", g2));
  o.check(g2 / 16.0 > 15.0, fmt("g/kappa at kappa = 16 ueV: %.3f (> 15)", g2 / 16.0));
  return o;
}

// 6
Outcome spectral_fit() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  cqed::JCParams p;
  p.g = 40.26;
  p.kappa = 40.0;
  cqed::SpectrumOptions so;
  so.resolution_fwhm = 21.0;
  const auto truth = cqed::emission_components(p, so);
  std::vector<double> axis;
  for (int i = 0; i <= 1200; ++i) axis.push_back(-300.0 + 0.5 * i);
  const auto s = cqed::emission_spectrum(p, so, axis);
  specfit::FitOptions fo;
  fo.n_peaks = 3;
  fo.fixed_gauss_fwhm = 21.0;
  const auto r = specfit::fit_spectrum(s, fo);
  o.check(r.converged && r.peaks.size() == 3, "three-peak fit converged");
  if (r.peaks.size() == 3) {
    const double sep = r.peaks[2].center - r.peaks[0].center;
    o.check(std::abs(sep - 78.0) <= 1.0, fmt("outer-peak separation %.4f ueV (78 +- 1)", sep));
    auto sorted = truth;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.center < b.center; });
    for (std::size_t k = 0; k < 3; ++k) {
      const double rel = std::abs(r.peaks[k].lorentz_fwhm / sorted[k].lorentz_fwhm - 1.0);
      o.check(rel <= 0.05, fmt("peak %.0f Lorentzian FWHM %.4f vs %.4f ueV (within 5%%)", static_cast<double>(k),
                               r.peaks[k].lorentz_fwhm, sorted[k].lorentz_fwhm));
    }
  }

  const double e0 = 1.2832 * units::kUeVPerEV;
  specfit::Spectrum one;
  for (int i = 0; i <= 800; ++i) {
    const double x = e0 - 200.0 + 0.5 * i;
    one.axis.push_back(x);
    one.intensity.push_back(specfit::voigt_eval(x, {e0, 16.0, 21.0, 1.0}));
  }
  specfit::FitOptions f1;
  f1.fixed_gauss_fwhm = 21.0;
  const auto r1 = specfit::fit_spectrum(one, f1);
  const double q = specfit::q_from_fit(r1, 0);
  const double q_true = e0 / 16.0;
  o.check(r1.converged && std::abs(q / q_true - 1.0) <= 0.01,
          fmt("single peak L=16, G=21: Q = %.1f vs %.1f (within 1%%)", q, q_true));
  const double t = seconds_since(t0);
  o.check(t < 10.0, fmt("runtime %.2f s (< 10 s)", t));
  return o;
}

// 7
Outcome harmonic_inversion() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> uf(0.22, 0.32), ulogq(3.0, 6.0), uamp(0.5, 1.5),
      uph(-std::numbers::pi, std::numbers::pi);
  std::uniform_int_distribution<int> un(1, 4);
  const double dt = fdtd::stable_dt(0.05, 0.5);
  const std::size_t n_samples = 40000;
  double worst_f = 0.0, worst_q = 0.0;
  int failed = 0;
  for (int c = 0; c < 100; ++c) {
    struct Line {
      double f, q, amp, phase;
    };
    std::vector<Line> lines;
    const int n = un(rng);
    while (static_cast<int>(lines.size()) < n) {
      Line l{uf(rng), std::pow(10.0, ulogq(rng)), uamp(rng), uph(rng)};
      bool ok = true;
      for (const auto& m : lines) {
        const double sep = std::abs(l.f - m.f);
        ok = ok && sep >= 3.0 * std::max(l.f / l.q, m.f / m.q);
      }
      if (ok) lines.push_back(l);
    }
    fdtd::TimeSeries ts;
    ts.dt = dt;
    ts.values.assign(n_samples, 0.0);
    for (std::size_t i = 0; i < n_samples; ++i) {
      const double t = static_cast<double>(i) * dt;
      double v = 0.0;
      for (const auto& l : lines) {
        const double w = 2.0 * std::numbers::pi * l.f;
        v += l.amp * std::exp(-w * t / (2.0 * l.q)) * std::cos(w * t + l.phase);
      }
      ts.values[i] = v;
    }
    const auto h = modal::harmonic_inversion(ts, 0.2, 0.34, 10);
    bool case_ok = h.modes.size() == lines.size();
    for (const auto& l : lines) {
      const modal::ResonantMode* best = nullptr;
      for (const auto& m : h.modes)
        if (!best || std::abs(m.frequency - l.f) < std::abs(best->frequency - l.f)) best = &m;
      if (!best) {
        case_ok = false;
        continue;
      }
      const double ef = std::abs(best->frequency / l.f - 1.0);
      const double eq = std::isfinite(best->q) ? std::abs(best->q / l.q - 1.0) : 1.0;
      worst_f = std::max(worst_f, ef);
      worst_q = std::max(worst_q, eq);
      case_ok = case_ok && ef <= 1e-6 && eq <= 0.01;
    }
    if (!case_ok) ++failed;
  }
  const double t = seconds_since(t0);
  o.check(failed == 0, fmt("%.0f of 100 seeded cases recovered every line", 100.0 - failed));
  o.check(worst_f <= 1e-6, fmt("worst relative frequency error %.2e (<= 1e-6)", worst_f));
  o.check(worst_q <= 0.01, fmt("worst relative Q error %.2e (<= 1e-2)", worst_q));
  o.check(t < 30.0, fmt("runtime %.2f s (< 30 s)", t));
  return o;
}

// 8a: lowest TM110 resonance of a PEC unit cube.
double cube_resonance(int res) {
  geometry::PermittivityGrid g;
  g.dims = {static_cast<std::size_t>(res), static_cast<std::size_t>(res), static_cast<std::size_t>(res)};
  g.a_nm = 1.0;
  g.spacing_nm = 1.0 / res;
  g.eps.assign(g.size(), 1.0);
  fdtd::SimConfig c;
  for (auto& f : c.faces) f = {fdtd::Boundary::Pec, fdtd::Boundary::Pec};
  fdtd::DipoleSource s;
  const auto u = [&](int d) { return static_cast<std::size_t>(res / d); };
  s.position = {u(3), u(4), u(5)};
  s.component = fdtd::Component::Ez;
  s.center_frequency = 0.7;
  s.bandwidth = 0.3;
  c.sources = {s};
  c.probes = {{"p", {u(2) + 1, u(3), u(2)}, fdtd::Component::Ez}};
  fdtd::Simulation sim(g, c);
  sim.advance(300L * res);
  const auto h = modal::harmonic_inversion(sim.probes()[0], 0.6, 0.8, 6);
  const double exact = 0.5 * std::sqrt(2.0);
  double best = std::nan("");
  for (const auto& m : h.modes)
    if (std::isnan(best) || std::abs(m.frequency - exact) < std::abs(best - exact)) best = m.frequency;
  return best;
}

// 8c: quasi-1D line closed by absorbers on both ends.
std::vector<double> line_run(std::size_t nz, long steps) {
  geometry::PermittivityGrid g;
  g.dims = {2, 2, nz};
  g.a_nm = 1.0;
  g.spacing_nm = 0.05;
  g.eps.assign(g.size(), 1.0);
  fdtd::SimConfig c;
  c.faces[0] = {fdtd::Boundary::Pmc, fdtd::Boundary::Pmc};
  c.faces[1] = {fdtd::Boundary::Pec, fdtd::Boundary::Pec};
  c.faces[2] = {fdtd::Boundary::Pml, fdtd::Boundary::Pml};
  fdtd::DipoleSource s;
  s.position = {1, 1, nz / 2};
  s.bandwidth = 0.05;
  c.sources = {s};
  c.record_from_step = 0;
  c.probes = {{"p", {1, 1, nz / 2 + 20}, fdtd::Component::Ey}};
  fdtd::Simulation sim(g, c);
  sim.advance(steps);
  return sim.probes()[0].values;
}

pipeline::CavityRunOptions cavity_options(int res, bool snapshot) {
  pipeline::CavityRunOptions opt;
  opt.resolution = res;
  opt.steps_after_source = 20000;
  opt.snapshot_steps = 5000;
  opt.want_snapshot = snapshot;
  return opt;
}

geometry::CavityDesign shipped_design() { return io::read_design(std::string(PHC_DATA_DIR) + "/l4_3_minkov.json"); }

// Shared between 8d and 9.
std::optional<pipeline::CavityRunResult> g_res20;

const pipeline::CavityRunResult& res20_run() {
  if (!g_res20) g_res20 = pipeline::run_cavity(shipped_design(), cavity_options(20, true));
  return *g_res20;
}

Outcome fdtd_validation() {
  Outcome o;
  {
    const double exact = 0.5 * std::sqrt(2.0);
    const double f10 = cube_resonance(10), f20 = cube_resonance(20), f40 = cube_resonance(40);
    const double e10 = std::abs(f10 - exact), e20 = std::abs(f20 - exact), e40 = std::abs(f40 - exact);
    o.check(e20 / exact <= 0.01, fmt("(a) PEC cube at 20 cells: f = %.6f vs %.6f, error %.3f%% (<= 1%%)", f20, exact,
                                     100.0 * e20 / exact));
    const double p1 = std::log2(e10 / e20), p2 = std::log2(e20 / e40);
    o.check(p1 >= 1.8 && p2 >= 1.8, fmt("(a) convergence order %.3f (10->20), %.3f (20->40) (>= 1.8)", p1, p2));
  }
  {
    geometry::PermittivityGrid g;
    g.dims = {20, 20, 20};
    g.a_nm = 1.0;
    g.spacing_nm = 0.05;
    g.eps.assign(g.size(), 1.0);
    for (std::size_t k = 0; k < 10; ++k)
      for (std::size_t j = 0; j < 20; ++j)
        for (std::size_t i = 0; i < 8; ++i) g.eps[g.index(i, j, k)] = 11.9716;
    fdtd::SimConfig c;
    for (auto& f : c.faces) f = {fdtd::Boundary::Pec, fdtd::Boundary::Pec};
    c.track_energy = true;
    fdtd::DipoleSource s;
    s.position = {6, 5, 4};
    s.component = fdtd::Component::Ez;
    s.center_frequency = 0.7;
    s.bandwidth = 0.3;
    c.sources = {s};
    fdtd::Simulation sim(g, c);
    sim.advance(s.off_step(sim.dt()) + 10);
    const double e0 = sim.energy();
    sim.advance(10000);
    const double drift = std::abs(sim.energy() - e0) / e0;
    o.check(drift <= 1e-10, fmt("(b) PEC energy drift over 1e4 steps %.2e (<= 1e-10)", drift));
  }
  {
    const long steps = 8000;
    const auto a = line_run(200, steps);
    const auto b = line_run(200 + 2 * 2600, steps);
    const double dt = fdtd::stable_dt(0.05, 0.5);
    double peak = 0.0, diff = 0.0;
    std::complex<double> fa = 0.0, fb = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) {
      peak = std::max(peak, std::abs(b[n]));
      diff = std::max(diff, std::abs(a[n] - b[n]));
      const auto ph = std::polar(1.0, 2 * std::numbers::pi * 0.268 * static_cast<double>(n) * dt);
      fa += (a[n] - b[n]) * ph;
      fb += b[n] * ph;
    }
    const double rt = diff / peak, rf = std::abs(fa) / std::abs(fb);
    o.check(rt < 1e-6 && rf < 1e-6, fmt("(c) PML reflection %.2e time domain, %.2e at a/lambda = 0.268 (< 1e-6)", rt, rf));
  }
  {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const auto& r = res20_run();
      const double f = r.fundamental ? r.fundamental->frequency : std::nan("");
      o.check(std::abs(f - 0.268) <= 0.03 * 0.268,
              fmt("(d) fundamental a/lambda %.5f (0.268 +- 3%%, deviation %+.2f%%)", f, 100.0 * (f / 0.268 - 1.0)));
      const double v = r.v_norm.value_or(std::nan(""));
      o.check(std::abs(v - 0.32) <= 0.2 * 0.32, fmt("(d) mode volume %.4f (lambda/n)^3 (0.32 +- 20%%)", v));
      o.check(r.ey_peak_at_center && r.ey_peak_in_dielectric,
              fmt("(d) |Ey| maximum at cell (%.0f, %.0f, %.0f) of the octant: centre and dielectric",
                  static_cast<double>(r.ey_peak_cell[0]), static_cast<double>(r.ey_peak_cell[1]),
                  static_cast<double>(r.ey_peak_cell[2])));
      o.info(fmt("(d) grid %.0f x %.0f x %.0f cells, %.0f s", static_cast<double>(r.cells[0]),
                 static_cast<double>(r.cells[1]), static_cast<double>(r.cells[2]), seconds_since(t0)));
    } catch (const Error& e) {
      o.check(false, std::string("(d) cavity run failed: ") + e.what());
    }
  }
  return o;
}

// 9
Outcome q_trend() {
  Outcome o;
  o.info("Q ~ 8e6 (unmodulated) and ~ 6e5 (modulated) need resolutions beyond desk scale; checking the trend");
  try {
    const auto design = shipped_design();
    std::vector<double> qs;
    for (int res : {12, 16, 20}) {
      const double q = res == 20 ? (res20_run().fundamental ? res20_run().fundamental->q : std::nan(""))
                                 : [&] {
                                     const auto r = pipeline::run_cavity(design, cavity_options(res, false));
                                     return r.fundamental ? r.fundamental->q : std::nan("");
                                   }();
      o.check(std::isfinite(q) && q > 0.0, fmt("unmodulated Q at %.0f cells/a = %.1f (positive, finite)", res, q));
      qs.push_back(q);
    }
    o.check(qs[0] <= qs[1] && qs[1] <= qs[2], fmt("Q non-decreasing: %.1f <= %.1f <= %.1f", qs[0], qs[1], qs[2]));
    const auto mod = geometry::apply_modulation(design, {0.01, 5});
    const auto rm = pipeline::run_cavity(mod, cavity_options(12, false));
    const double qm = rm.fundamental ? rm.fundamental->q : std::nan("");
    o.check(std::isfinite(qm) && qm > 0.0 && qm < qs[0],
            fmt("modulated (dr = 1%%) Q at 12 cells/a = %.1f < unmodulated %.1f", qm, qs[0]));
  } catch (const Error& e) {
    o.check(false, std::string("cavity run failed: ") + e.what());
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"CQED arithmetic", cqed_arithmetic},
      {"anti-crossing sweep", anti_crossing},
      {"Q to kappa conversions", q_kappa},
      {"normalised g_max table", table1},
      {"g projection arithmetic", projection},
      {"spectral fitting round trip", spectral_fit},
      {"harmonic inversion", harmonic_inversion},
      {"FDTD solver validation", fdtd_validation},
      {"Q convergence trend", q_trend},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    std::printf("criterion %d %s: %s (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                seconds_since(t0));
    for (const auto& d : o.details) std::printf("    %s\n", d.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <doctest.h>

#include "phc/cqed.hpp"
#include "phc/error.hpp"

using namespace phc;
using namespace phc::cqed;

namespace {

// Eigenvalues of the non-Hermitian 2x2 coupled-oscillator matrix, sorted by
// real part (lower first).
std::pair<std::complex<double>, std::complex<double>> oracle(double g, double kappa, double gamma, double delta) {
  Eigen::Matrix2cd m;
  m << std::complex<double>(0.0, -kappa / 2.0), g, g, std::complex<double>(delta, -gamma / 2.0);
  Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(m);
  auto a = es.eigenvalues()[0], b = es.eigenvalues()[1];
  if (a.real() > b.real()) std::swap(a, b);
  return {a, b};
}

}  // namespace

TEST_SUITE("cqed") {

TEST_CASE("VRS and g conversions") {
  CHECK(g_from_vrs(78.0, 40.0) == doctest::Approx(std::sqrt(39.0 * 39.0 + 100.0)).epsilon(1e-15));
  CHECK(g_from_vrs(78.0, 40.0) == doctest::Approx(40.3).epsilon(0.1 / 40.3));
  CHECK(vrs_from_g(40.26, 40.0) == doctest::Approx(78.0).epsilon(0.1 / 78.0));
  CHECK(vrs_from_g(g_from_vrs(55.0, 30.0), 30.0) == doctest::Approx(55.0).epsilon(1e-14));
  CHECK_THROWS_AS(vrs_from_g(9.0, 40.0), ParameterError);
  CHECK_THROWS_AS(g_from_vrs(-1.0, 40.0), ParameterError);
}

TEST_CASE("strong coupling is strict g > kappa/4") {
  CHECK(strong_coupling(40.0, 40.0));
  CHECK_FALSE(strong_coupling(10.0, 40.0));
  CHECK(strong_coupling(10.0 + 1e-12, 40.0));
  CHECK_THROWS_AS(strong_coupling(1.0, 0.0), ParameterError);
}

TEST_CASE("polariton eigenvalues agree with the matrix oracle") {
  for (double gamma : {0.0, 7.0})
    for (double delta = -300.0; delta <= 300.0; delta += 12.5) {
      JCParams p;
      p.g = 40.26;
      p.kappa = 40.0;
      p.gamma = gamma;
      p.detuning = delta;
      const auto r = polariton_eigenvalues(p);
      const auto [lo, hi] = oracle(p.g, p.kappa, p.gamma, delta);
      CHECK(std::abs(r.lower - lo) <= 1e-10 * std::abs(lo) + 1e-12);
      CHECK(std::abs(r.upper - hi) <= 1e-10 * std::abs(hi) + 1e-12);
    }
}

TEST_CASE("linewidths are shared at resonance and bare far from it") {
  JCParams p;
  p.g = 40.26;
  p.kappa = 40.0;
  const auto r = polariton_eigenvalues(p);
  CHECK(r.lower_linewidth() == doctest::Approx(20.0));
  CHECK(r.upper_linewidth() == doctest::Approx(20.0));
  p.detuning = 1e5;
  const auto far = polariton_eigenvalues(p);
  CHECK(far.lower_linewidth() == doctest::Approx(40.0).epsilon(1e-3));
  CHECK(far.upper_linewidth() == doctest::Approx(0.0).epsilon(1e-3));
}

TEST_CASE("anti-crossing minimum sits at zero detuning") {
  JCParams p;
  p.g = 40.26;
  p.kappa = 40.0;
  const auto s = detuning_sweep(p, -300.0, 300.0, 601);
  CHECK(s.points.size() == 601);
  CHECK(s.min_gap == doctest::Approx(78.0).epsilon(0.5 / 78.0));
  CHECK(std::abs(s.min_gap_detuning) <= 1.0);
  for (const auto& pt : s.points) {
    const auto [lo, hi] = oracle(p.g, p.kappa, 0.0, pt.detuning);
    REQUIRE(std::abs(pt.pair.lower - lo) <= 1e-10 * std::abs(lo) + 1e-12);
    REQUIRE(std::abs(pt.pair.upper - hi) <= 1e-10 * std::abs(hi) + 1e-12);
  }
  CHECK_THROWS_AS(detuning_sweep(p, 1.0, 1.0, 10), ParameterError);
}

TEST_CASE("emission spectrum integrates to the sum of weights") {
  JCParams p;
  p.g = 40.26;
  p.kappa = 40.0;
  SpectrumOptions opt;
  opt.weights = {1.0, 2.0, 0.5};
  std::vector<double> axis;
  for (int i = -400000; i <= 400000; ++i) axis.push_back(i * 0.25);
  const auto s = emission_spectrum(p, opt, axis);
  double sum = 0.0;
  for (double v : s.intensity) sum += v * 0.25;
  CHECK(sum == doctest::Approx(3.5).epsilon(1e-3));
  CHECK(emission_components(p, opt).size() == 3);
  opt.include_bare_cavity = false;
  CHECK(emission_components(p, opt).size() == 2);
}

TEST_CASE("spectrum map has one row per detuning") {
  JCParams p;
  p.g = 40.26;
  p.kappa = 40.0;
  std::vector<double> axis;
  for (int i = 0; i < 50; ++i) axis.push_back(-200.0 + 8.0 * i);
  const auto s = detuning_sweep(p, -100.0, 100.0, 11, axis);
  CHECK(s.map.size() == 11);
  CHECK(s.map.front().size() == 50);
  std::vector<double> bad{0.0, 0.0};
  CHECK_THROWS_AS(detuning_sweep(p, -1.0, 1.0, 3, bad), ParameterError);
}

TEST_CASE("g_max table and projection") {
  std::vector<CavityRecord> recs{{"L4/3", 0.32, 8e6, 1.0},
                                 {"H0", 0.25, 1e6, 1.0},
                                 {"H0 90", 0.25, 1e6, 0.9},
                                 {"L3", 0.95, 4.2e6, 1.0},
                                 {"heterostructure", 1.5, 1.58e9, 1.0}};
  const auto t = gmax_table(recs, "heterostructure");
  CHECK(t[0].g_norm == doctest::Approx(std::sqrt(1.5 / 0.32)));
  CHECK(t[0].g_norm == doctest::Approx(2.2).epsilon(0.05 / 2.2));
  CHECK(t[1].g_norm == doctest::Approx(2.4).epsilon(0.05 / 2.4));
  CHECK(t[2].g_norm == doctest::Approx(0.9 * std::sqrt(1.5 / 0.25)));
  CHECK(t[2].g_norm_intensity == doctest::Approx(std::sqrt(0.9) * std::sqrt(1.5 / 0.25)));
  CHECK(t[3].g_norm == doctest::Approx(1.3).epsilon(0.05 / 1.3));
  CHECK(t[4].g_norm == 1.0);
  CHECK_THROWS_AS(gmax_table(recs, "nope"), ParameterError);

  const double g = project_g(110.0, 0.75, 0.93, 0.32, 1.0, 1.0);
  CHECK(g == doctest::Approx(110.0 / 0.93 * std::sqrt(0.75 / 0.32)).epsilon(1e-14));
  CHECK(g == doctest::Approx(181.0).epsilon(2.0 / 181.0));
  CHECK(project_g(110.0, 0.75, 0.93, 0.32, 1.0, std::sqrt(2.0)) == doctest::Approx(256.0).epsilon(3.0 / 256.0));
  CHECK_THROWS_AS(project_g(110.0, 0.0, 0.93, 0.32, 1.0, 1.0), ParameterError);
}

}  // TEST_SUITE

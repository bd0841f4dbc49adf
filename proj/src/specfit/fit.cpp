#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "phc/error.hpp"
#include "phc/specfit.hpp"

namespace phc::specfit {

namespace {

struct LineShape {
  double value;
  double d_center;
  double d_lorentz;
};

// Unit-area Voigt value and its derivatives with respect to center and
// Lorentzian FWHM, at offset dx = x - center.
LineShape voigt_with_grad(double dx, double lw, double gw) {
  constexpr double pi = std::numbers::pi;
  if (gw <= 0.0) {
    const double g = lw / 2.0;
    const double den = dx * dx + g * g;
    return {g / (pi * den), 2.0 * dx * g / (pi * den * den),
            0.5 * (den - 2.0 * g * g) / (pi * den * den)};
  }
  const double sigma = gw / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  const double s = sigma * std::numbers::sqrt2;
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * pi));
  const std::complex<double> i(0.0, 1.0);
  const std::complex<double> z(dx / s, lw / 2.0 / s);
  const std::complex<double> w = faddeeva(z);
  const std::complex<double> wp = -2.0 * z * w + 2.0 * i / std::sqrt(pi);
  return {norm * w.real(), norm * (wp * (-1.0 / s)).real(), 0.5 * norm * (wp * (i / s)).real()};
}

struct Layout {
  int n_peaks = 1;
  bool free_gauss = false;
  bool linear = false;

  int size() const { return 3 * n_peaks + (free_gauss ? 1 : 0) + 1 + (linear ? 1 : 0); }
  int gauss_index() const { return 3 * n_peaks; }
  int base_index() const { return 3 * n_peaks + (free_gauss ? 1 : 0); }
};

class Problem {
 public:
  Problem(const std::vector<double>& x, const std::vector<double>& y, Layout layout,
          double fixed_gauss, double min_width)
      : x_(x), y_(y), lay_(layout), fixed_gauss_(fixed_gauss), min_width_(min_width) {}

  const Layout& layout() const { return lay_; }

  double gauss(const Eigen::VectorXd& p) const {
    return lay_.free_gauss ? p[lay_.gauss_index()] : fixed_gauss_;
  }

  void clamp(Eigen::VectorXd& p) const {
    const double g = gauss(p);
    for (int k = 0; k < lay_.n_peaks; ++k) {
      // A Lorentzian-only line needs a finite width.
      const double lmin = g > 0.0 ? 0.0 : min_width_;
      p[3 * k + 1] = std::max(p[3 * k + 1], lmin);
      p[3 * k + 2] = std::max(p[3 * k + 2], 0.0);
    }
    if (lay_.free_gauss) p[lay_.gauss_index()] = std::max(p[lay_.gauss_index()], min_width_);
  }

  double model(const Eigen::VectorXd& p, double x) const {
    const double g = gauss(p);
    double m = p[lay_.base_index()];
    if (lay_.linear) m += p[lay_.base_index() + 1] * x;
    for (int k = 0; k < lay_.n_peaks; ++k)
      m += p[3 * k + 2] * voigt_with_grad(x - p[3 * k], p[3 * k + 1], g).value;
    return m;
  }

  void residual(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
    r.resize(static_cast<Eigen::Index>(x_.size()));
    for (std::size_t i = 0; i < x_.size(); ++i) r[i] = model(p, x_[i]) - y_[i];
  }

  void jacobian(const Eigen::VectorXd& p, Eigen::MatrixXd& jac) const {
    const auto n = static_cast<Eigen::Index>(x_.size());
    jac.setZero(n, lay_.size());
    const double g = gauss(p);
    const double dg = std::max(1e-6 * g, 1e-9);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = x_[static_cast<std::size_t>(i)];
      for (int k = 0; k < lay_.n_peaks; ++k) {
        const double area = p[3 * k + 2];
        const LineShape s = voigt_with_grad(x - p[3 * k], p[3 * k + 1], g);
        jac(i, 3 * k) = area * s.d_center;
        jac(i, 3 * k + 1) = area * s.d_lorentz;
        jac(i, 3 * k + 2) = s.value;
        if (lay_.free_gauss) {
          const double up = voigt_with_grad(x - p[3 * k], p[3 * k + 1], g + dg).value;
          const double dn = voigt_with_grad(x - p[3 * k], p[3 * k + 1], std::max(g - dg, 0.0)).value;
          jac(i, lay_.gauss_index()) += area * (up - dn) / (g + dg - std::max(g - dg, 0.0));
        }
      }
      jac(i, lay_.base_index()) = 1.0;
      if (lay_.linear) jac(i, lay_.base_index() + 1) = x;
    }
  }

 private:
  const std::vector<double>& x_;
  const std::vector<double>& y_;
  Layout lay_;
  double fixed_gauss_;
  double min_width_;
};

struct LmOutcome {
  Eigen::VectorXd params;
  double cost = 0.0;
  bool converged = false;
  int iterations = 0;
  Eigen::MatrixXd jtj;
};

// Levenberg-Marquardt with Marquardt diagonal scaling and Nielsen's damping
// update. Cost is half the residual sum of squares.
LmOutcome levenberg_marquardt(const Problem& prob, Eigen::VectorXd p, int max_iter,
                              double rel_tol) {
  prob.clamp(p);
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  prob.residual(p, r);
  double cost = 0.5 * r.squaredNorm();
  prob.jacobian(p, jac);
  Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::VectorXd grad = jac.transpose() * r;
  double mu = 1e-3 * jtj.diagonal().maxCoeff();
  double nu = 2.0;

  LmOutcome out;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    if (cost == 0.0) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd diag = jtj.diagonal().cwiseMax(1e-12 * std::max(jtj.diagonal().maxCoeff(), 1e-300));
    Eigen::MatrixXd a = jtj;
    a.diagonal() += mu * diag;
    const Eigen::VectorXd step = a.ldlt().solve(-grad);
    Eigen::VectorXd trial = p + step;
    prob.clamp(trial);
    const Eigen::VectorXd actual_step = trial - p;
    Eigen::VectorXd r_trial;
    prob.residual(trial, r_trial);
    const double cost_trial = 0.5 * r_trial.squaredNorm();
    const double predicted =
        -(grad.dot(actual_step) + 0.5 * actual_step.dot(jtj * actual_step));
    const double rho = predicted > 0.0 ? (cost - cost_trial) / predicted : -1.0;
    if (cost_trial < cost && rho > 0.0) {
      const double rel_change = (cost - cost_trial) / cost;
      p = trial;
      r = r_trial;
      cost = cost_trial;
      prob.jacobian(p, jac);
      jtj = jac.transpose() * jac;
      grad = jac.transpose() * r;
      mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
      nu = 2.0;
      if (rel_change < rel_tol) {
        out.converged = true;
        ++iter;
        break;
      }
    } else {
      mu *= nu;
      nu *= 2.0;
    }
    if (actual_step.norm() <= 1e-15 * (p.norm() + 1e-15) || mu > 1e30) {
      // No further progress possible at machine precision.
      out.converged = grad.lpNorm<Eigen::Infinity>() <= 1e-8 * (1.0 + cost) || cost < 1e-24;
      ++iter;
      break;
    }
  }
  out.params = p;
  out.cost = cost;
  out.iterations = iter;
  out.jtj = jtj;
  return out;
}

struct Seed {
  double center;
  double width;  // total FWHM estimate
  double height;
};

double half_width_side(const std::vector<double>& x, const std::vector<double>& y,
                       std::size_t m, double level, int dir) {
  std::size_t i = m;
  while (true) {
    if ((dir < 0 && i == 0) || (dir > 0 && i + 1 >= x.size())) return -1.0;
    const std::size_t j = dir < 0 ? i - 1 : i + 1;
    // A valley before the half level: the next line overlaps, so the
    // distance to the valley bounds the half width.
    if (y[j] > y[i]) return std::abs(x[i] - x[m]);
    if (y[j] <= level) {
      const double t = (y[i] - level) / (y[i] - y[j]);
      return std::abs(x[i] + t * (x[j] - x[i]) - x[m]);
    }
    i = j;
  }
}

std::vector<Seed> find_seeds(const std::vector<double>& x, const std::vector<double>& y,
                             double base) {
  std::vector<std::size_t> maxima;
  for (std::size_t i = 1; i + 1 < y.size(); ++i)
    if (y[i] > y[i - 1] && y[i] >= y[i + 1]) maxima.push_back(i);
  // Largest first; equal heights resolve toward lower energy (lower index).
  std::stable_sort(maxima.begin(), maxima.end(),
                   [&](std::size_t a, std::size_t b) { return y[a] > y[b]; });
  std::vector<Seed> seeds;
  for (std::size_t m : maxima) {
    const double level = base + 0.5 * (y[m] - base);
    double left = half_width_side(x, y, m, level, -1);
    double right = half_width_side(x, y, m, level, +1);
    if (left < 0.0 && right < 0.0) left = right = 0.25 * (x.back() - x.front());
    if (left < 0.0) left = right;
    if (right < 0.0) right = left;
    seeds.push_back({x[m], 2.0 * std::min(left, right), y[m] - base});
  }
  return seeds;
}

// Lorentzian FWHM giving total Voigt FWHM `total` for Gaussian FWHM `gw`.
double lorentz_for_total(double total, double gw) {
  if (total <= gw * 1.0001) return 0.1 * total;
  double lo = 0.0, hi = total;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (voigt_fwhm_estimate(mid, gw) < total ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

FitResult fit_spectrum(const Spectrum& input, const FitOptions& options) {
  if (options.n_peaks < 1) throw ParameterError("fit_spectrum: n_peaks must be >= 1");
  const Spectrum s = to_micro_ev(input);
  Layout lay;
  lay.n_peaks = options.n_peaks;
  lay.free_gauss = !options.fixed_gauss_fwhm.has_value();
  lay.linear = options.linear_baseline;
  if (options.fixed_gauss_fwhm && *options.fixed_gauss_fwhm < 0.0)
    throw ParameterError("fit_spectrum: fixed Gaussian FWHM must be >= 0");
  if (s.size() < static_cast<std::size_t>(5 * lay.size()))
    throw ParameterError("fit_spectrum: need at least " + std::to_string(5 * lay.size()) +
                         " samples for " + std::to_string(lay.size()) + " free parameters");

  const double x0 = 0.5 * (s.axis.front() + s.axis.back());
  std::vector<double> x(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) x[i] = s.axis[i] - x0;
  const double span = x.back() - x.front();
  const double step = span / static_cast<double>(s.size() - 1);

  FitResult result;
  const double ymax = *std::max_element(s.intensity.begin(), s.intensity.end());
  const double ymin = *std::min_element(s.intensity.begin(), s.intensity.end());
  const double scale = std::max(std::abs(ymax), std::abs(ymin));
  const double gauss_fixed = options.fixed_gauss_fwhm.value_or(0.0);
  if (scale == 0.0 || ymax == ymin) {
    result.converged = false;
    result.baseline = ymin;
    result.warnings.push_back("flat or zero-intensity spectrum: peaks have zero area");
    for (int k = 0; k < options.n_peaks; ++k)
      result.peaks.push_back({s.axis.front() + span * (k + 1.0) / (options.n_peaks + 1.0),
                              step, gauss_fixed, 0.0});
    return result;
  }
  std::vector<double> y(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) y[i] = s.intensity[i] / scale;

  // Baseline guess: mean of the lowest decile.
  std::vector<double> sorted = y;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t nlow = std::max<std::size_t>(1, sorted.size() / 10);
  const double base0 = std::accumulate(sorted.begin(), sorted.begin() + nlow, 0.0) / nlow;

  std::vector<Seed> seeds = find_seeds(x, y, base0);
  const double median_total = seeds.empty() ? 4.0 * step : seeds[seeds.size() / 2].width;
  double g0 = gauss_fixed;
  if (lay.free_gauss) g0 = options.gauss_guess.value_or(0.5 * median_total);

  auto peak_from_seed = [&](const Seed& sd) {
    const double lw = lorentz_for_total(std::max(sd.width, 2.0 * step), g0);
    const double unit = voigt_with_grad(0.0, std::max(lw, 1e-6 * step), g0).value;
    return VoigtPeak{sd.center, lw, g0, std::max(sd.height, 0.0) / unit};
  };

  std::vector<VoigtPeak> start;
  for (const VoigtPeak& p : options.init) {
    if (static_cast<int>(start.size()) == options.n_peaks) break;
    start.push_back({p.center - x0, p.lorentz_fwhm, g0, p.area / scale});
  }
  if (static_cast<int>(start.size()) < options.n_peaks) {
    const int want = options.n_peaks - static_cast<int>(start.size());
    if (static_cast<int>(seeds.size()) < want)
      result.warnings.push_back("requested " + std::to_string(options.n_peaks) +
                                " peaks but only " +
                                std::to_string(seeds.size() + options.init.size()) +
                                " resolvable maxima; extra peaks seeded from residuals");
    for (int k = 0; k < want && k < static_cast<int>(seeds.size()); ++k)
      start.push_back(peak_from_seed(seeds[static_cast<std::size_t>(k)]));
  }

  const double min_width = 1e-9 * span;
  auto pack = [&](const std::vector<VoigtPeak>& peaks, const Layout& l, double base,
                  double slope, double g) {
    Eigen::VectorXd p(l.size());
    for (int k = 0; k < l.n_peaks; ++k) {
      p[3 * k] = peaks[static_cast<std::size_t>(k)].center;
      p[3 * k + 1] = peaks[static_cast<std::size_t>(k)].lorentz_fwhm;
      p[3 * k + 2] = peaks[static_cast<std::size_t>(k)].area;
    }
    if (l.free_gauss) p[l.gauss_index()] = g;
    p[l.base_index()] = base;
    if (l.linear) p[l.base_index() + 1] = slope;
    return p;
  };

  double base = base0, slope = 0.0, g = g0;
  // Grow the model one residual-seeded peak at a time when the data show
  // fewer maxima than requested.
  while (static_cast<int>(start.size()) < options.n_peaks) {
    if (start.empty()) {
      const auto it = std::max_element(y.begin(), y.end());
      start.push_back(peak_from_seed({x[static_cast<std::size_t>(it - y.begin())],
                                      median_total, *it - base}));
      continue;
    }
    Layout partial = lay;
    partial.n_peaks = static_cast<int>(start.size());
    Problem prob(x, y, partial, gauss_fixed, min_width);
    const LmOutcome o =
        levenberg_marquardt(prob, pack(start, partial, base, slope, g), 200, options.rel_tolerance);
    for (int k = 0; k < partial.n_peaks; ++k)
      start[static_cast<std::size_t>(k)] = {o.params[3 * k], o.params[3 * k + 1], g,
                                            o.params[3 * k + 2]};
    if (partial.free_gauss) g = o.params[partial.gauss_index()];
    base = o.params[partial.base_index()];
    if (partial.linear) slope = o.params[partial.base_index() + 1];
    std::size_t best = 0;
    double best_r = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double res = y[i] - prob.model(o.params, x[i]);
      if (res > best_r) {
        best_r = res;
        best = i;
      }
    }
    start.push_back(peak_from_seed({x[best], median_total, std::max(best_r, 1e-3)}));
  }

  Problem prob(x, y, lay, gauss_fixed, min_width);
  const LmOutcome o = levenberg_marquardt(prob, pack(start, lay, base, slope, g),
                                          options.max_iterations, options.rel_tolerance);
  result.converged = o.converged;
  result.iterations = o.iterations;
  const double gfit = prob.gauss(o.params);
  for (int k = 0; k < lay.n_peaks; ++k) {
    result.peaks.push_back({o.params[3 * k] + x0, o.params[3 * k + 1], gfit,
                            o.params[3 * k + 2] * scale});
    if (o.params[3 * k + 2] == 0.0)
      result.warnings.push_back("peak " + std::to_string(k) + " collapsed to zero area");
  }
  // Return baseline in absolute-axis form: b0 + b1 * (x - x0).
  const double b1 = lay.linear ? o.params[lay.base_index() + 1] : 0.0;
  result.baseline_slope = b1 * scale;
  result.baseline = (o.params[lay.base_index()] - b1 * x0) * scale;
  const auto n = static_cast<double>(x.size());
  result.residual_rms = std::sqrt(2.0 * o.cost / n) * scale;

  const double dof = std::max(1.0, n - lay.size());
  const double s2 = 2.0 * o.cost / dof;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(o.jtj);
  const double emax = es.eigenvalues().maxCoeff();
  const double emin = es.eigenvalues().minCoeff();
  result.jtj_condition = emin > 0.0 ? emax / emin : std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd cov = o.jtj.completeOrthogonalDecomposition().pseudoInverse();
  result.std_errors.resize(static_cast<std::size_t>(lay.size()));
  for (int i = 0; i < lay.size(); ++i) {
    // Areas and baseline are in scaled intensity units inside the solver.
    double sc = 1.0;
    if (i < 3 * lay.n_peaks && i % 3 == 2) sc = scale;
    if (i >= lay.base_index()) sc = scale;
    result.std_errors[static_cast<std::size_t>(i)] = std::sqrt(std::max(cov(i, i), 0.0) * s2) * sc;
  }
  if (!result.converged)
    result.warnings.push_back("did not converge within " + std::to_string(options.max_iterations) +
                              " iterations");

  std::sort(result.peaks.begin(), result.peaks.end(),
            [](const VoigtPeak& a, const VoigtPeak& b) { return a.center < b.center; });
  return result;
}

double eval_fit(const FitResult& fit, double x) {
  double v = fit.baseline + fit.baseline_slope * x;
  for (const VoigtPeak& p : fit.peaks) {
    if (p.area == 0.0) continue;
    v += voigt_eval(x, p);
  }
  return v;
}

double q_from_fit(const FitResult& fit, std::size_t which_peak) {
  if (which_peak >= fit.peaks.size()) throw ParameterError("q_from_fit: no such peak");
  const VoigtPeak& p = fit.peaks[which_peak];
  if (p.lorentz_fwhm <= 0.0) return std::numeric_limits<double>::infinity();
  return p.center / p.lorentz_fwhm;
}

}  // namespace phc::specfit

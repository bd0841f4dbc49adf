#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "phc/error.hpp"
#include "phc/modal.hpp"

namespace phc::modal {

namespace {

using cd = std::complex<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Stopband attenuation of each decimation stage, dB.
constexpr double kAttenuationDb = 150.0;

double kaiser_beta(double atten_db) {
  if (atten_db > 50.0) return 0.1102 * (atten_db - 8.7);
  if (atten_db >= 21.0) return 0.5842 * std::pow(atten_db - 21.0, 0.4) + 0.07886 * (atten_db - 21.0);
  return 0.0;
}

// Windowed-sinc low-pass, cutoff in cycles per sample, unit DC gain.
std::vector<double> kaiser_lowpass(double cutoff, double transition) {
  std::size_t taps = static_cast<std::size_t>(std::ceil((kAttenuationDb - 7.95) / (2.285 * kTwoPi * transition))) + 1;
  if (taps % 2 == 0) ++taps;
  const double beta = kaiser_beta(kAttenuationDb);
  const double mid = 0.5 * static_cast<double>(taps - 1);
  const double i0b = std::cyl_bessel_i(0.0, beta);
  std::vector<double> h(taps);
  double sum = 0.0;
  for (std::size_t m = 0; m < taps; ++m) {
    const double u = static_cast<double>(m) - mid;
    const double sinc = u == 0.0 ? 2.0 * cutoff : std::sin(kTwoPi * cutoff * u) / (std::numbers::pi * u);
    const double r = u / mid;
    const double w = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
    h[m] = sinc * w;
    sum += h[m];
  }
  for (double& v : h) v /= sum;
  return h;
}

struct Stage {
  std::vector<double> h;
  double dt;  // input sample spacing
};

}  // namespace

PencilResult matrix_pencil(const std::vector<cd>& y, std::size_t max_poles, double svd_threshold) {
  const std::size_t n = y.size();
  if (n < 6) throw ParameterError("matrix pencil needs at least 6 samples");
  const std::size_t l = n / 3;
  const std::size_t rows = n - l;
  Eigen::MatrixXcd hankel(rows, l + 1);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c <= l; ++c) hankel(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = y[r + c];
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(hankel, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  PencilResult out;
  if (sv.size() == 0 || !(sv(0) > 0.0)) return out;
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > svd_threshold * sv(0)) ++rank;
  out.rank = rank;
  const std::size_t m = std::min({rank, max_poles, l});
  if (m == 0) return out;

  // The row space of the Hankel matrix is spanned by the conjugated right
  // singular vectors; shifting it by one sample multiplies by the poles.
  const Eigen::MatrixXcd w = svd.matrixV().leftCols(static_cast<Eigen::Index>(m)).conjugate();
  const Eigen::MatrixXcd w1 = w.topRows(static_cast<Eigen::Index>(l));
  const Eigen::MatrixXcd w2 = w.bottomRows(static_cast<Eigen::Index>(l));
  const Eigen::MatrixXcd a = w1.completeOrthogonalDecomposition().solve(w2);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eig(a, false);
  if (eig.info() != Eigen::Success) throw NumericalError("pencil eigenproblem failed");

  Eigen::MatrixXcd vand(n, static_cast<Eigen::Index>(m));
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(m); ++k) {
    cd p{1.0, 0.0};
    const cd z = eig.eigenvalues()(k);
    for (std::size_t s = 0; s < n; ++s) {
      vand(static_cast<Eigen::Index>(s), k) = p;
      p *= z;
    }
  }
  Eigen::VectorXcd rhs(n);
  for (std::size_t s = 0; s < n; ++s) rhs(static_cast<Eigen::Index>(s)) = y[s];
  const Eigen::VectorXcd amp = vand.colPivHouseholderQr().solve(rhs);
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(m); ++k) {
    out.z.push_back(eig.eigenvalues()(k));
    out.a.push_back(amp(k));
  }
  return out;
}

HarminvResult harmonic_inversion(const fdtd::TimeSeries& ts, double f_lo, double f_hi, int max_poles,
                                 const HarminvOptions& options) {
  if (ts.values.size() < 200) throw ParameterError("harmonic inversion needs at least 200 samples");
  if (!(ts.dt > 0.0)) throw ParameterError("time series dt must be > 0");
  if (max_poles < 1) throw ParameterError("max_poles must be >= 1");
  if (!(f_lo >= 0.0 && f_hi > f_lo)) throw ParameterError("band must satisfy 0 <= lo < hi");
  if (f_hi >= 0.5 / ts.dt) throw ParameterError("band exceeds the Nyquist frequency");
  for (double v : ts.values)
    if (!std::isfinite(v)) throw ParameterError("time series contains non-finite values");

  HarminvResult result;
  const double fc = 0.5 * (f_lo + f_hi);
  const double half_band = 0.5 * (f_hi - f_lo);
  const double wc = kTwoPi * fc;

  // Mix the band centre down to zero frequency.
  std::vector<cd> sig(ts.values.size());
  std::vector<double> times(ts.values.size());
  for (std::size_t n = 0; n < sig.size(); ++n) {
    times[n] = ts.time(n);
    sig[n] = ts.values[n] * std::polar(1.0, wc * times[n]);
  }

  // Halve the rate while the output rate stays >= 8 band half-widths.
  double dt = ts.dt;
  std::vector<Stage> stages;
  while (0.5 / dt >= 8.0 * half_band) {
    const double fs = 1.0 / dt, fs_out = 0.5 * fs;
    const double transition = (fs_out - 2.0 * half_band) / fs;
    Stage st{kaiser_lowpass(0.25, transition), dt};
    const std::size_t taps = st.h.size();
    if (sig.size() < taps + 16) break;
    std::vector<cd> out;
    std::vector<double> out_t;
    for (std::size_t n = taps - 1; n < sig.size(); n += 2) {
      cd acc{0.0, 0.0};
      for (std::size_t m = 0; m < taps; ++m) acc += st.h[m] * sig[n - m];
      out.push_back(acc);
      out_t.push_back(times[n]);
    }
    sig = std::move(out);
    times = std::move(out_t);
    dt *= 2.0;
    stages.push_back(std::move(st));
  }
  if (sig.size() > options.max_samples) {
    const std::size_t stride = (sig.size() + options.max_samples - 1) / options.max_samples;
    if (1.0 / (dt * static_cast<double>(stride)) >= 2.5 * half_band) {
      std::vector<cd> s2;
      std::vector<double> t2;
      for (std::size_t n = 0; n < sig.size(); n += stride) {
        s2.push_back(sig[n]);
        t2.push_back(times[n]);
      }
      sig = std::move(s2);
      times = std::move(t2);
      dt *= static_cast<double>(stride);
    } else {
      sig.resize(options.max_samples);
      times.resize(options.max_samples);
      result.notices.push_back("signal truncated to " + std::to_string(options.max_samples) +
                               " decimated samples");
    }
  }
  if (sig.size() < 12) throw ParameterError("signal too short for the requested band after filtering");

  const PencilResult pen = matrix_pencil(sig, static_cast<std::size_t>(max_poles), options.svd_threshold);
  if (pen.rank < static_cast<std::size_t>(max_poles))
    result.notices.push_back("fewer poles than requested: signal rank " + std::to_string(pen.rank) +
                             " < " + std::to_string(max_poles));
  else if (pen.rank > static_cast<std::size_t>(max_poles))
    result.notices.push_back("signal rank " + std::to_string(pen.rank) + " exceeds max_poles " +
                             std::to_string(max_poles) + "; weaker components were dropped");

  const double t0 = times.front();
  for (std::size_t k = 0; k < pen.z.size(); ++k) {
    const cd z = pen.z[k];
    if (std::abs(z) == 0.0) continue;
    const cd w_shift = cd(0.0, 1.0) * std::log(z) / dt;
    cd gain{1.0, 0.0};
    for (const auto& st : stages) {
      cd g{0.0, 0.0};
      for (std::size_t m = 0; m < st.h.size(); ++m)
        g += st.h[m] * std::exp(cd(0.0, 1.0) * w_shift * (static_cast<double>(m) * st.dt));
      gain *= g;
    }
    const cd amp0 = pen.a[k] * std::exp(cd(0.0, 1.0) * w_shift * t0) / gain;
    const cd omega = w_shift + wc;
    result.poles.push_back({omega, amp0});

    const double freq = omega.real() / kTwoPi;
    if (freq < f_lo || freq > f_hi) continue;
    const double decay = -omega.imag();
    ResonantMode mode;
    mode.frequency = freq;
    mode.amplitude = 2.0 * std::abs(amp0);
    mode.phase = std::arg(amp0);
    const double q = decay > 0.0 ? omega.real() / (2.0 * decay) : std::numeric_limits<double>::infinity();
    if (!(q <= options.q_cap)) {
      mode.q = std::numeric_limits<double>::infinity();
      mode.q_exceeds_measurable = true;
    } else if (q < 1.0) {
      result.notices.push_back("discarded pole at f=" + std::to_string(freq) + " with Q<1");
      continue;
    } else {
      mode.q = q;
    }
    result.modes.push_back(mode);
  }
  std::stable_sort(result.modes.begin(), result.modes.end(),
                   [](const ResonantMode& a, const ResonantMode& b) { return a.amplitude > b.amplitude; });
  return result;
}

}  // namespace phc::modal

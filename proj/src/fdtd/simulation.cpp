#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "phc/error.hpp"
#include "phc/fdtd.hpp"

namespace phc::fdtd {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Graded CPML coefficients along one axis, for integer (E-type) and
// half-integer (H-type) positions.
struct AxisPml {
  std::vector<std::size_t> int_pos;   // integer positions inside a PML
  std::vector<double> int_b, int_c;   // per entry of int_pos
  std::vector<std::size_t> half_pos;  // p means position p + 1/2
  std::vector<double> half_b, half_c;
};

AxisPml make_axis_pml(std::size_t n, bool low, bool high, const PmlProfile& prof, double h,
                      double dt) {
  AxisPml ax;
  const double thick = prof.cells;
  const double sigma_max = -(prof.order + 1.0) * std::log(prof.reflection) / (2.0 * thick * h);
  auto depth = [&](double p) {
    double d = 0.0;
    if (low && p < thick) d = std::max(d, (thick - p) / thick);
    if (high && p > static_cast<double>(n) - thick)
      d = std::max(d, (p - (static_cast<double>(n) - thick)) / thick);
    return std::min(d, 1.0);
  };
  auto coeffs = [&](double dep, double& b, double& c) {
    const double sigma = sigma_max * std::pow(dep, prof.order);
    const double alpha = prof.alpha_max * (1.0 - dep);
    b = std::exp(-(sigma + alpha) * dt);
    c = sigma / (sigma + alpha) * (b - 1.0);
  };
  for (std::size_t p = 0; p <= n; ++p) {
    const double dep = depth(static_cast<double>(p));
    if (dep <= 0.0) continue;
    double b, c;
    coeffs(dep, b, c);
    ax.int_pos.push_back(p);
    ax.int_b.push_back(b);
    ax.int_c.push_back(c);
  }
  for (std::size_t p = 0; p < n; ++p) {
    const double dep = depth(static_cast<double>(p) + 0.5);
    if (dep <= 0.0) continue;
    double b, c;
    coeffs(dep, b, c);
    ax.half_pos.push_back(p);
    ax.half_b.push_back(b);
    ax.half_c.push_back(c);
  }
  return ax;
}

struct Range {
  long lo, hi;  // inclusive
};

}  // namespace

std::string to_string(Component c) {
  switch (c) {
    case Component::Ex: return "Ex";
    case Component::Ey: return "Ey";
    case Component::Ez: return "Ez";
    case Component::Hx: return "Hx";
    case Component::Hy: return "Hy";
    case Component::Hz: return "Hz";
  }
  return "Ex";
}

Component component_from_string(const std::string& s) {
  for (Component c : {Component::Ex, Component::Ey, Component::Ez, Component::Hx, Component::Hy,
                      Component::Hz})
    if (to_string(c) == s) return c;
  throw ParameterError("unknown field component '" + s + "'");
}

std::array<double, 3> stagger(Component c) {
  switch (c) {
    case Component::Ex: return {0.5, 0.0, 0.0};
    case Component::Ey: return {0.0, 0.5, 0.0};
    case Component::Ez: return {0.0, 0.0, 0.5};
    case Component::Hx: return {0.0, 0.5, 0.5};
    case Component::Hy: return {0.5, 0.0, 0.5};
    case Component::Hz: return {0.5, 0.5, 0.0};
  }
  return {0, 0, 0};
}

std::string to_string(Symmetry s) {
  switch (s) {
    case Symmetry::None: return "none";
    case Symmetry::EvenMirror: return "even";
    case Symmetry::OddMirror: return "odd";
  }
  return "none";
}

Symmetry symmetry_from_string(const std::string& s) {
  if (s == "none") return Symmetry::None;
  if (s == "even") return Symmetry::EvenMirror;
  if (s == "odd") return Symmetry::OddMirror;
  throw ParameterError("unknown symmetry '" + s + "' (expected none, even or odd)");
}

double DipoleSource::envelope_width() const { return 1.0 / (kTwoPi * bandwidth); }
double DipoleSource::peak_time() const { return 6.0 * envelope_width(); }

double DipoleSource::value(double t) const {
  const double w = envelope_width();
  const double u = (t - peak_time()) / w;
  return amplitude * std::exp(-0.5 * u * u) * std::sin(kTwoPi * center_frequency * (t - peak_time()));
}

long DipoleSource::off_step(double dt) const {
  if (turn_off_step >= 0) return turn_off_step;
  return static_cast<long>(std::ceil(12.0 * envelope_width() / dt));
}

Boundary SimConfig::face(int axis, int side) const {
  if (side == 0) {
    if (symmetries[axis] == Symmetry::EvenMirror) return Boundary::Pmc;
    if (symmetries[axis] == Symmetry::OddMirror) return Boundary::Pec;
  }
  return faces[axis][side];
}

void SimConfig::validate() const {
  if (!(courant_factor > 0.0 && courant_factor <= 1.0 / std::sqrt(3.0) + 1e-15))
    throw StabilityError("courant factor must be in (0, 1/sqrt(3)]");
  bool any_pml = false;
  for (int a = 0; a < 3; ++a)
    for (int s = 0; s < 2; ++s) any_pml |= face(a, s) == Boundary::Pml;
  if (any_pml && pml.cells < 8) throw ParameterError("PML needs at least 8 cells");
  if (total_steps < 0) throw ParameterError("total_steps must be >= 0");
  if (threads < 1) throw ParameterError("threads must be >= 1");
  for (const auto& s : sources) {
    if (!(s.bandwidth > 0.0)) throw ParameterError("source bandwidth must be > 0");
    if (!(s.center_frequency > 0.0)) throw ParameterError("source frequency must be > 0");
  }
  if (snapshot && !(snapshot->frequency > 0.0))
    throw ParameterError("snapshot frequency must be > 0");
}

double stable_dt(double spacing, double courant_factor) {
  if (!(spacing > 0.0)) throw ParameterError("grid spacing must be > 0");
  if (!(courant_factor > 0.0)) throw StabilityError("courant factor must be > 0");
  if (courant_factor > 1.0 / std::sqrt(3.0) + 1e-15)
    throw StabilityError("courant factor exceeds the 3D stability bound 1/sqrt(3)");
  return courant_factor * spacing / std::sqrt(3.0);
}

DftAccumulator::DftAccumulator(std::size_t size, double frequency)
    : frequency_(frequency), sum_(size) {}

void DftAccumulator::add(double t, const double* values) {
  const std::complex<double> ph = std::polar(1.0, kTwoPi * frequency_ * t);
  for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += values[i] * ph;
  ++samples_;
}

std::vector<std::complex<double>> DftAccumulator::result() const {
  std::vector<std::complex<double>> out(sum_.size());
  if (samples_ == 0) return out;
  const double norm = 2.0 / static_cast<double>(samples_);
  for (std::size_t i = 0; i < sum_.size(); ++i) out[i] = sum_[i] * norm;
  return out;
}

struct Simulation::Impl {
  // Ghost-padded dimensions and strides.
  std::size_t gx, gy, gz, sy, sz;
  std::vector<double> ex, ey, ez, hx, hy, hz;
  std::vector<double> cex, cey, cez;  // dt / (eps h) at E locations
  double ch = 0.0;                    // dt / h
  std::vector<double> ex_prev, ey_prev, ez_prev;
  std::array<AxisPml, 3> pml;
  // psi_<field><axis>
  std::vector<double> psi_eyx, psi_ezx, psi_exy, psi_ezy, psi_exz, psi_eyz;
  std::vector<double> psi_hyx, psi_hzx, psi_hxy, psi_hzy, psi_hxz, psi_hyz;
  // Updated index ranges: integer positions for tangential E per axis.
  std::array<Range, 3> e_int;
  std::array<std::size_t, 3> n;

  struct SourceSite {
    DipoleSource src;
    std::size_t idx;
    double scale;  // dt / eps at the site
  };
  std::vector<SourceSite> sources;
  struct ProbeSite {
    Component comp;
    std::size_t idx;
  };
  std::vector<ProbeSite> probes;

  // Snapshot accumulation.
  bool snap_active = false;
  double snap_freq = 0.0;
  long snap_end = 0;
  long snap_stride = 1;
  long snap_samples = 0;
  std::array<std::vector<std::complex<double>>, 3> snap;

  std::size_t idx(long i, long j, long k) const {
    return static_cast<std::size_t>(i + 1) + gx * (static_cast<std::size_t>(j + 1) + gy * static_cast<std::size_t>(k + 1));
  }
  std::vector<double>& array(Component c) {
    switch (c) {
      case Component::Ex: return ex;
      case Component::Ey: return ey;
      case Component::Ez: return ez;
      case Component::Hx: return hx;
      case Component::Hy: return hy;
      case Component::Hz: return hz;
    }
    return ex;
  }
};

double estimate_memory(const geometry::PermittivityGrid& eps, const SimConfig& config) {
  const double nodes = static_cast<double>(eps.dims[0] + 3) * (eps.dims[1] + 3) * (eps.dims[2] + 3);
  double arrays = 9.0;  // six fields, three update coefficients
  if (config.track_energy) arrays += 3.0;
  if (config.snapshot) arrays += 6.0;
  double pml_cells = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int s = 0; s < 2; ++s)
      if (config.face(a, s) == Boundary::Pml)
        pml_cells += nodes * (config.pml.cells + 1.0) / (eps.dims[a] + 3.0);
  return 8.0 * (arrays * nodes + 4.0 * pml_cells) + 8.0 * eps.size();
}

Simulation::Simulation(const geometry::PermittivityGrid& eps, SimConfig config)
    : config_(std::move(config)), impl_(std::make_unique<Impl>()) {
  config_.validate();
  if (eps.size() == 0 || eps.eps.size() != eps.size())
    throw ParameterError("permittivity grid is empty or inconsistent");
  for (double v : eps.eps)
    if (!(v >= 1.0) || !std::isfinite(v)) throw ParameterError("permittivity must be >= 1");
  const double need = estimate_memory(eps, config_);
  if (need > config_.max_memory_bytes)
    throw ParameterError("simulation needs ~" + std::to_string(static_cast<long long>(need / 1e6)) +
                         " MB, above the configured limit");
  nx_ = eps.dims[0];
  ny_ = eps.dims[1];
  nz_ = eps.dims[2];
  for (int a = 0; a < 3; ++a)
    if (eps.dims[a] < 2) throw ParameterError("grid needs at least 2 cells per axis");
  spacing_ = 1.0 / eps.resolution();
  dt_ = stable_dt(spacing_, config_.courant_factor);

  Impl& m = *impl_;
  m.n = {nx_, ny_, nz_};
  m.gx = nx_ + 3;
  m.gy = ny_ + 3;
  m.gz = nz_ + 3;
  m.sy = m.gx;
  m.sz = m.gx * m.gy;
  const std::size_t total = m.gx * m.gy * m.gz;
  for (auto* v : {&m.ex, &m.ey, &m.ez, &m.hx, &m.hy, &m.hz, &m.cex, &m.cey, &m.cez}) v->assign(total, 0.0);
  m.ch = dt_ / spacing_;

  for (int a = 0; a < 3; ++a) {
    m.e_int[a].lo = config_.face(a, 0) == Boundary::Pmc ? 0 : 1;
    m.e_int[a].hi = static_cast<long>(m.n[a]) - (config_.face(a, 1) == Boundary::Pmc ? 0 : 1);
  }

  // Cell index along an axis, mirrored across symmetry faces, clamped elsewhere.
  auto cell = [&](int axis, long c) -> std::size_t {
    const long n = static_cast<long>(m.n[axis]);
    if (c < 0) c = config_.symmetries[axis] != Symmetry::None ? -1 - c : 0;
    if (c >= n) c = n - 1;
    return static_cast<std::size_t>(c);
  };
  auto eps_at = [&](long i, long j, long k) {
    return eps.at(cell(0, i), cell(1, j), cell(2, k));
  };
  for (long k = 0; k <= static_cast<long>(nz_); ++k)
    for (long j = 0; j <= static_cast<long>(ny_); ++j)
      for (long i = 0; i <= static_cast<long>(nx_); ++i) {
        const std::size_t id = m.idx(i, j, k);
        // Each edge averages the four cells that share it.
        const double exs = eps_at(i, j - 1, k - 1) + eps_at(i, j, k - 1) + eps_at(i, j - 1, k) + eps_at(i, j, k);
        const double eys = eps_at(i - 1, j, k - 1) + eps_at(i, j, k - 1) + eps_at(i - 1, j, k) + eps_at(i, j, k);
        const double ezs = eps_at(i - 1, j - 1, k) + eps_at(i, j - 1, k) + eps_at(i - 1, j, k) + eps_at(i, j, k);
        m.cex[id] = dt_ / (0.25 * exs * spacing_);
        m.cey[id] = dt_ / (0.25 * eys * spacing_);
        m.cez[id] = dt_ / (0.25 * ezs * spacing_);
      }

  for (int a = 0; a < 3; ++a)
    m.pml[a] = make_axis_pml(m.n[a], config_.face(a, 0) == Boundary::Pml,
                             config_.face(a, 1) == Boundary::Pml, config_.pml, spacing_, dt_);
  const std::size_t px_i = m.pml[0].int_pos.size(), px_h = m.pml[0].half_pos.size();
  const std::size_t py_i = m.pml[1].int_pos.size(), py_h = m.pml[1].half_pos.size();
  const std::size_t pz_i = m.pml[2].int_pos.size(), pz_h = m.pml[2].half_pos.size();
  m.psi_eyx.assign(px_i * m.gy * m.gz, 0.0);
  m.psi_ezx.assign(px_i * m.gy * m.gz, 0.0);
  m.psi_hyx.assign(px_h * m.gy * m.gz, 0.0);
  m.psi_hzx.assign(px_h * m.gy * m.gz, 0.0);
  m.psi_exy.assign(py_i * m.gx * m.gz, 0.0);
  m.psi_ezy.assign(py_i * m.gx * m.gz, 0.0);
  m.psi_hxy.assign(py_h * m.gx * m.gz, 0.0);
  m.psi_hzy.assign(py_h * m.gx * m.gz, 0.0);
  m.psi_exz.assign(pz_i * m.gx * m.gy, 0.0);
  m.psi_eyz.assign(pz_i * m.gx * m.gy, 0.0);
  m.psi_hxz.assign(pz_h * m.gx * m.gy, 0.0);
  m.psi_hyz.assign(pz_h * m.gx * m.gy, 0.0);

  if (config_.track_energy) {
    m.ex_prev.assign(total, 0.0);
    m.ey_prev.assign(total, 0.0);
    m.ez_prev.assign(total, 0.0);
  }

  auto check_pos = [&](const GridIndex& p, const std::string& what) {
    if (p.i > nx_ || p.j > ny_ || p.k > nz_) throw ParameterError(what + " lies outside the grid");
  };
  long last_off = 0;
  for (const auto& s : config_.sources) {
    check_pos(s.position, "source");
    for (int a = 0; a < 3; ++a) {
      const std::size_t p = a == 0 ? s.position.i : a == 1 ? s.position.j : s.position.k;
      for (int side = 0; side < 2; ++side) {
        if (config_.face(a, side) != Boundary::Pml) continue;
        const bool inside = side == 0 ? p < static_cast<std::size_t>(config_.pml.cells)
                                      : p + static_cast<std::size_t>(config_.pml.cells) > m.n[a];
        if (inside) throw ParameterError("source lies inside the PML");
      }
    }
    if (s.component != Component::Ex && s.component != Component::Ey && s.component != Component::Ez)
      throw ParameterError("dipole sources drive E components only");
    const std::size_t id = m.idx(static_cast<long>(s.position.i), static_cast<long>(s.position.j),
                                 static_cast<long>(s.position.k));
    const double ce = s.component == Component::Ex ? m.cex[id] : s.component == Component::Ey ? m.cey[id] : m.cez[id];
    m.sources.push_back({s, id, ce * spacing_});
    last_off = std::max(last_off, s.off_step(dt_));
  }
  record_from_ = config_.record_from_step >= 0 ? config_.record_from_step : last_off;
  for (const auto& p : config_.probes) {
    check_pos(p.position, "probe '" + p.name + "'");
    m.probes.push_back({p.component, m.idx(static_cast<long>(p.position.i), static_cast<long>(p.position.j),
                                           static_cast<long>(p.position.k))});
    TimeSeries ts;
    ts.name = p.name;
    ts.dt = dt_;
    ts.first_step = record_from_;
    series_.push_back(std::move(ts));
  }
}

Simulation::~Simulation() = default;

void Simulation::parallel_z(void (Simulation::*fn)(std::size_t, std::size_t)) {
  const std::size_t nk = nz_ + 1;
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config_.threads), nk);
  if (workers <= 1) {
    (this->*fn)(0, nk);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w)
    pool.emplace_back([this, fn, w, workers, nk] { (this->*fn)(nk * w / workers, nk * (w + 1) / workers); });
  (this->*fn)(0, nk / workers);
  for (auto& t : pool) t.join();
}

void Simulation::update_h(std::size_t k0, std::size_t k1) {
  Impl& m = *impl_;
  const long nx = static_cast<long>(nx_), ny = static_cast<long>(ny_), nz = static_cast<long>(nz_);
  const long kb = static_cast<long>(k0), ke = static_cast<long>(k1);  // [kb, ke)
  const std::size_t sy = m.sy, sz = m.sz;
  const double ch = m.ch;
  double* __restrict hx = m.hx.data();
  double* __restrict hy = m.hy.data();
  double* __restrict hz = m.hz.data();
  const double* __restrict ex = m.ex.data();
  const double* __restrict ey = m.ey.data();
  const double* __restrict ez = m.ez.data();

  // Hx(i, j+1/2, k+1/2): i in [0,nx], j,k half.
  for (long k = kb; k < std::min(ke, nz); ++k)
    for (long j = 0; j < ny; ++j) {
      const std::size_t base = m.idx(0, j, k);
      for (long i = 0; i <= nx; ++i) {
        const std::size_t id = base + static_cast<std::size_t>(i);
        hx[id] -= ch * ((ez[id + sy] - ez[id]) - (ey[id + sz] - ey[id]));
      }
    }
  // Hy(i+1/2, j, k+1/2)
  for (long k = kb; k < std::min(ke, nz); ++k)
    for (long j = 0; j <= ny; ++j) {
      const std::size_t base = m.idx(0, j, k);
      for (long i = 0; i < nx; ++i) {
        const std::size_t id = base + static_cast<std::size_t>(i);
        hy[id] -= ch * ((ex[id + sz] - ex[id]) - (ez[id + 1] - ez[id]));
      }
    }
  // Hz(i+1/2, j+1/2, k)
  for (long k = kb; k < std::min(ke, nz + 1); ++k)
    for (long j = 0; j < ny; ++j) {
      const std::size_t base = m.idx(0, j, k);
      for (long i = 0; i < nx; ++i) {
        const std::size_t id = base + static_cast<std::size_t>(i);
        hz[id] -= ch * ((ey[id + 1] - ey[id]) - (ex[id + sy] - ex[id]));
      }
    }

  // CPML corrections, x axis (half positions along x).
  {
    const AxisPml& p = m.pml[0];
    const std::size_t np = p.half_pos.size();
    for (std::size_t l = 0; l < np; ++l) {
      const long i = static_cast<long>(p.half_pos[l]);
      const double b = p.half_b[l], c = p.half_c[l];
      for (long k = kb; k < std::min(ke, nz + 1); ++k)
        for (long j = 0; j <= ny; ++j) {
          const std::size_t id = m.idx(i, j, k);
          const std::size_t pi = l + np * (static_cast<std::size_t>(j + 1) + m.gy * static_cast<std::size_t>(k + 1));
          if (k < nz) {  // Hy
            double& s = m.psi_hyx[pi];
            s = b * s + c * (ez[id + 1] - ez[id]);
            hy[id] += ch * s;
          }
          if (j < ny) {  // Hz
            double& s = m.psi_hzx[pi];
            s = b * s + c * (ey[id + 1] - ey[id]);
            hz[id] -= ch * s;
          }
        }
    }
  }
  // y axis
  {
    const AxisPml& p = m.pml[1];
    const std::size_t np = p.half_pos.size();
    for (long k = kb; k < std::min(ke, nz + 1); ++k)
      for (std::size_t l = 0; l < np; ++l) {
        const long j = static_cast<long>(p.half_pos[l]);
        const double b = p.half_b[l], c = p.half_c[l];
        const std::size_t base = m.idx(0, j, k);
        const std::size_t pbase = m.gx * (l + np * static_cast<std::size_t>(k + 1)) + 1;
        for (long i = 0; i <= nx; ++i) {
          const std::size_t id = base + static_cast<std::size_t>(i);
          const std::size_t pi = pbase + static_cast<std::size_t>(i);
          if (k < nz) {  // Hx
            double& s = m.psi_hxy[pi];
            s = b * s + c * (ez[id + sy] - ez[id]);
            hx[id] -= ch * s;
          }
          if (i < nx) {  // Hz
            double& s = m.psi_hzy[pi];
            s = b * s + c * (ex[id + sy] - ex[id]);
            hz[id] += ch * s;
          }
        }
      }
  }
  // z axis
  {
    const AxisPml& p = m.pml[2];
    const std::size_t np = p.half_pos.size();
    for (std::size_t l = 0; l < np; ++l) {
      const long k = static_cast<long>(p.half_pos[l]);
      if (k < kb || k >= ke) continue;
      const double b = p.half_b[l], c = p.half_c[l];
      for (long j = 0; j <= ny; ++j) {
        const std::size_t base = m.idx(0, j, k);
        const std::size_t pbase = 1 + m.gx * (static_cast<std::size_t>(j + 1) + m.gy * l);
        for (long i = 0; i <= nx; ++i) {
          const std::size_t id = base + static_cast<std::size_t>(i);
          const std::size_t pi = pbase + static_cast<std::size_t>(i);
          if (j < ny) {  // Hx
            double& s = m.psi_hxz[pi];
            s = b * s + c * (ey[id + sz] - ey[id]);
            hx[id] += ch * s;
          }
          if (i < nx) {  // Hy
            double& s = m.psi_hyz[pi];
            s = b * s + c * (ex[id + sz] - ex[id]);
            hy[id] -= ch * s;
          }
        }
      }
    }
  }
}

void Simulation::fill_ghosts() {
  Impl& m = *impl_;
  const long n[3] = {static_cast<long>(nx_), static_cast<long>(ny_), static_cast<long>(nz_)};
  // Tangential H just outside a PMC face is the negated image of the first
  // interior value.
  for (int a = 0; a < 3; ++a) {
    for (int side = 0; side < 2; ++side) {
      if (config_.face(a, side) != Boundary::Pmc) continue;
      const long ghost = side == 0 ? -1 : n[a];
      const long src = side == 0 ? 0 : n[a] - 1;
      std::vector<double>* tang[2];
      if (a == 0) { tang[0] = &m.hy; tang[1] = &m.hz; }
      if (a == 1) { tang[0] = &m.hx; tang[1] = &m.hz; }
      if (a == 2) { tang[0] = &m.hx; tang[1] = &m.hy; }
      const int b1 = (a + 1) % 3, b2 = (a + 2) % 3;
      for (long u = -1; u <= n[b2] + 1; ++u)
        for (long v = -1; v <= n[b1] + 1; ++v) {
          long gi[3], si[3];
          gi[a] = ghost; si[a] = src;
          gi[b1] = v; si[b1] = v;
          gi[b2] = u; si[b2] = u;
          const std::size_t g = m.idx(gi[0], gi[1], gi[2]);
          const std::size_t s = m.idx(si[0], si[1], si[2]);
          for (auto* arr : tang) (*arr)[g] = -(*arr)[s];
        }
    }
  }
}

void Simulation::update_e(std::size_t k0, std::size_t k1) {
  Impl& m = *impl_;
  const long nx = static_cast<long>(nx_), ny = static_cast<long>(ny_), nz = static_cast<long>(nz_);
  const long kb = static_cast<long>(k0), ke = static_cast<long>(k1);
  const std::size_t sy = m.sy, sz = m.sz;
  double* __restrict ex = m.ex.data();
  double* __restrict ey = m.ey.data();
  double* __restrict ez = m.ez.data();
  const double* __restrict hx = m.hx.data();
  const double* __restrict hy = m.hy.data();
  const double* __restrict hz = m.hz.data();
  const double* __restrict cex = m.cex.data();
  const double* __restrict cey = m.cey.data();
  const double* __restrict cez = m.cez.data();
  const Range rx = m.e_int[0], ry = m.e_int[1], rz = m.e_int[2];

  if (config_.track_energy) {
    for (long k = kb; k < ke; ++k) {
      const std::size_t a = m.idx(-1, -1, k), b = a + m.gx * m.gy;
      std::copy(m.ex.begin() + static_cast<long>(a), m.ex.begin() + static_cast<long>(b), m.ex_prev.begin() + static_cast<long>(a));
      std::copy(m.ey.begin() + static_cast<long>(a), m.ey.begin() + static_cast<long>(b), m.ey_prev.begin() + static_cast<long>(a));
      std::copy(m.ez.begin() + static_cast<long>(a), m.ez.begin() + static_cast<long>(b), m.ez_prev.begin() + static_cast<long>(a));
    }
  }

  // Ex(i+1/2, j, k)
  for (long k = std::max(kb, rz.lo); k < std::min(ke, rz.hi + 1); ++k)
    for (long j = ry.lo; j <= ry.hi; ++j) {
      const std::size_t base = m.idx(0, j, k);
      for (long i = 0; i < nx; ++i) {
        const std::size_t id = base + static_cast<std::size_t>(i);
        ex[id] += cex[id] * ((hz[id] - hz[id - sy]) - (hy[id] - hy[id - sz]));
      }
    }
  // Ey(i, j+1/2, k)
  for (long k = std::max(kb, rz.lo); k < std::min(ke, rz.hi + 1); ++k)
    for (long j = 0; j < ny; ++j) {
      const std::size_t base = m.idx(0, j, k);
      for (long i = rx.lo; i <= rx.hi; ++i) {
        const std::size_t id = base + static_cast<std::size_t>(i);
        ey[id] += cey[id] * ((hx[id] - hx[id - sz]) - (hz[id] - hz[id - 1]));
      }
    }
  // Ez(i, j, k+1/2)
  for (long k = kb; k < std::min(ke, nz); ++k)
    for (long j = ry.lo; j <= ry.hi; ++j) {
      const std::size_t base = m.idx(0, j, k);
      for (long i = rx.lo; i <= rx.hi; ++i) {
        const std::size_t id = base + static_cast<std::size_t>(i);
        ez[id] += cez[id] * ((hy[id] - hy[id - 1]) - (hx[id] - hx[id - sy]));
      }
    }

  // CPML, x axis (integer positions): Ey, Ez.
  {
    const AxisPml& p = m.pml[0];
    const std::size_t np = p.int_pos.size();
    for (std::size_t l = 0; l < np; ++l) {
      const long i = static_cast<long>(p.int_pos[l]);
      if (i < rx.lo || i > rx.hi) continue;
      const double b = p.int_b[l], c = p.int_c[l];
      for (long k = kb; k < std::min(ke, nz + 1); ++k)
        for (long j = 0; j <= ny; ++j) {
          const std::size_t id = m.idx(i, j, k);
          const std::size_t pi = l + np * (static_cast<std::size_t>(j + 1) + m.gy * static_cast<std::size_t>(k + 1));
          if (j < ny && k >= rz.lo && k <= rz.hi) {
            double& s = m.psi_eyx[pi];
            s = b * s + c * (hz[id] - hz[id - 1]);
            ey[id] -= cey[id] * s;
          }
          if (k < nz && j >= ry.lo && j <= ry.hi) {
            double& s = m.psi_ezx[pi];
            s = b * s + c * (hy[id] - hy[id - 1]);
            ez[id] += cez[id] * s;
          }
        }
    }
  }
  // y axis: Ex, Ez.
  {
    const AxisPml& p = m.pml[1];
    const std::size_t np = p.int_pos.size();
    for (long k = kb; k < std::min(ke, nz + 1); ++k)
      for (std::size_t l = 0; l < np; ++l) {
        const long j = static_cast<long>(p.int_pos[l]);
        if (j < ry.lo || j > ry.hi) continue;
        const double b = p.int_b[l], c = p.int_c[l];
        const std::size_t base = m.idx(0, j, k);
        const std::size_t pbase = m.gx * (l + np * static_cast<std::size_t>(k + 1)) + 1;
        if (k >= rz.lo && k <= rz.hi)
          for (long i = 0; i < nx; ++i) {
            const std::size_t id = base + static_cast<std::size_t>(i);
            double& s = m.psi_exy[pbase + static_cast<std::size_t>(i)];
            s = b * s + c * (hz[id] - hz[id - sy]);
            ex[id] += cex[id] * s;
          }
        if (k < nz)
          for (long i = rx.lo; i <= rx.hi; ++i) {
            const std::size_t id = base + static_cast<std::size_t>(i);
            double& s = m.psi_ezy[pbase + static_cast<std::size_t>(i)];
            s = b * s + c * (hx[id] - hx[id - sy]);
            ez[id] -= cez[id] * s;
          }
      }
  }
  // z axis: Ex, Ey.
  {
    const AxisPml& p = m.pml[2];
    const std::size_t np = p.int_pos.size();
    for (std::size_t l = 0; l < np; ++l) {
      const long k = static_cast<long>(p.int_pos[l]);
      if (k < kb || k >= ke || k < rz.lo || k > rz.hi) continue;
      const double b = p.int_b[l], c = p.int_c[l];
      for (long j = 0; j <= ny; ++j) {
        const std::size_t base = m.idx(0, j, k);
        const std::size_t pbase = 1 + m.gx * (static_cast<std::size_t>(j + 1) + m.gy * l);
        if (j >= ry.lo && j <= ry.hi)
          for (long i = 0; i < nx; ++i) {
            const std::size_t id = base + static_cast<std::size_t>(i);
            double& s = m.psi_exz[pbase + static_cast<std::size_t>(i)];
            s = b * s + c * (hy[id] - hy[id - sz]);
            ex[id] -= cex[id] * s;
          }
        if (j < ny)
          for (long i = rx.lo; i <= rx.hi; ++i) {
            const std::size_t id = base + static_cast<std::size_t>(i);
            double& s = m.psi_eyz[pbase + static_cast<std::size_t>(i)];
            s = b * s + c * (hx[id] - hx[id - sz]);
            ey[id] += cey[id] * s;
          }
      }
    }
  }
}

void Simulation::step() {
  Impl& m = *impl_;
  parallel_z(&Simulation::update_h);
  fill_ghosts();
  parallel_z(&Simulation::update_e);
  const double t_src = (static_cast<double>(step_) + 0.5) * dt_;
  for (const auto& s : m.sources) {
    if (step_ >= s.src.off_step(dt_)) continue;
    m.array(s.src.component)[s.idx] -= s.scale * s.src.value(t_src);
  }
  ++step_;

  if (step_ >= record_from_) {
    for (std::size_t p = 0; p < m.probes.size(); ++p) {
      const double v = m.array(m.probes[p].comp)[m.probes[p].idx];
      if (!std::isfinite(v))
        throw DivergenceError(step_, "field diverged (non-finite probe) at step " + std::to_string(step_));
      series_[p].values.push_back(v);
    }
  }
  if ((step_ & 255) == 0) {
    const double e = max_abs_e();
    if (!std::isfinite(e))
      throw DivergenceError(step_, "field diverged at step " + std::to_string(step_));
  }

  if (m.snap_active && step_ <= m.snap_end && (m.snap_end - step_) % m.snap_stride == 0) {
    const double t = static_cast<double>(step_) * dt_;
    const std::complex<double> ph = std::polar(1.0, kTwoPi * m.snap_freq * t);
    const std::array<const std::vector<double>*, 3> src{&m.ex, &m.ey, &m.ez};
    for (int c = 0; c < 3; ++c) {
      auto& acc = m.snap[c];
      const auto& f = *src[c];
      std::size_t n = 0;
      for (std::size_t k = 0; k <= nz_; ++k)
        for (std::size_t j = 0; j <= ny_; ++j) {
          const std::size_t base = m.idx(0, static_cast<long>(j), static_cast<long>(k));
          for (std::size_t i = 0; i <= nx_; ++i, ++n) acc[n] += f[base + i] * ph;
        }
    }
    ++m.snap_samples;
    if (step_ == m.snap_end) m.snap_active = false;
  }
}

void Simulation::advance(long steps) {
  for (long s = 0; s < steps; ++s) step();
}

double Simulation::field(Component c, std::size_t i, std::size_t j, std::size_t k) const {
  if (i > nx_ || j > ny_ || k > nz_) throw ParameterError("field index out of range");
  return impl_->array(c)[impl_->idx(static_cast<long>(i), static_cast<long>(j), static_cast<long>(k))];
}

void Simulation::set_field(Component c, std::size_t i, std::size_t j, std::size_t k, double v) {
  if (i > nx_ || j > ny_ || k > nz_) throw ParameterError("field index out of range");
  impl_->array(c)[impl_->idx(static_cast<long>(i), static_cast<long>(j), static_cast<long>(k))] = v;
}

double Simulation::energy() const {
  if (!config_.track_energy) throw ParameterError("energy() requires track_energy");
  const Impl& m = *impl_;
  double we = 0.0, wh = 0.0;
  const double h = spacing_;
  for (long k = 0; k <= static_cast<long>(nz_); ++k)
    for (long j = 0; j <= static_cast<long>(ny_); ++j)
      for (long i = 0; i <= static_cast<long>(nx_); ++i) {
        const std::size_t id = m.idx(i, j, k);
        // eps = dt / (ce h)
        we += dt_ / (m.cex[id] * h) * m.ex_prev[id] * m.ex[id];
        we += dt_ / (m.cey[id] * h) * m.ey_prev[id] * m.ey[id];
        we += dt_ / (m.cez[id] * h) * m.ez_prev[id] * m.ez[id];
        wh += m.hx[id] * m.hx[id] + m.hy[id] * m.hy[id] + m.hz[id] * m.hz[id];
      }
  return (we + wh) * h * h * h;
}

double Simulation::max_abs_e() const {
  double mx = 0.0;
  for (const auto* v : {&impl_->ex, &impl_->ey, &impl_->ez})
    for (double x : *v) {
      if (!std::isfinite(x)) return x;
      mx = std::max(mx, std::abs(x));
    }
  return mx;
}

void Simulation::begin_snapshot(double frequency, long window_steps) {
  if (!(frequency > 0.0)) throw ParameterError("snapshot frequency must be > 0");
  const double period_steps = 1.0 / (frequency * dt_);
  if (static_cast<double>(window_steps) < period_steps)
    throw ParameterError("snapshot window shorter than one period");
  Impl& m = *impl_;
  m.snap_active = true;
  m.snap_freq = frequency;
  m.snap_end = step_ + window_steps;
  m.snap_stride = std::max<long>(1, static_cast<long>(period_steps / 16.0));
  m.snap_samples = 0;
  const std::size_t nodes = (nx_ + 1) * (ny_ + 1) * (nz_ + 1);
  for (auto& v : m.snap) v.assign(nodes, {0.0, 0.0});
}

bool Simulation::snapshot_ready() const { return !impl_->snap_active && impl_->snap_samples > 0; }

FieldSnapshot Simulation::snapshot() const {
  const Impl& m = *impl_;
  if (m.snap_samples == 0) throw ParameterError("no snapshot has been accumulated");
  FieldSnapshot s;
  s.cells = {nx_, ny_, nz_};
  s.spacing = spacing_;
  s.frequency = m.snap_freq;
  for (int a = 0; a < 3; ++a) s.mirrored[a] = config_.symmetries[a] != Symmetry::None;
  const double norm = 2.0 / static_cast<double>(m.snap_samples);
  for (int c = 0; c < 3; ++c) {
    s.e[c] = m.snap[c];
    for (auto& v : s.e[c]) v *= norm;
  }
  return s;
}

RunResult run(const geometry::PermittivityGrid& eps, const SimConfig& config) {
  Simulation sim(eps, config);
  if (config.snapshot) {
    const auto& req = *config.snapshot;
    if (req.start_step < 0 || req.start_step + req.window_steps > config.total_steps)
      throw ParameterError("snapshot window must lie within total_steps");
    sim.advance(req.start_step);
    sim.begin_snapshot(req.frequency, req.window_steps);
  }
  sim.advance(config.total_steps - sim.step_index());
  RunResult out;
  out.probes = sim.probes();
  if (config.snapshot) {
    FieldSnapshot snap = sim.snapshot();
    snap.origin = {eps.origin_nm[0] / eps.a_nm, eps.origin_nm[1] / eps.a_nm, eps.origin_nm[2] / eps.a_nm};
    out.snapshot = std::move(snap);
  }
  out.steps = sim.step_index();
  return out;
}

}  // namespace phc::fdtd

#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "phc/geometry.hpp"

// 3D Yee-grid FDTD in normalised units: c = 1, lattice constant a = 1,
// frequencies in c/a, times in a/c.
namespace phc::fdtd {

enum class Component { Ex, Ey, Ez, Hx, Hy, Hz };

std::string to_string(Component c);
Component component_from_string(const std::string& s);

// Yee offsets of a component in units of the cell size.
std::array<double, 3> stagger(Component c);

// Wall types for a grid face.
//  Pml: absorbing layer, terminated by a conductor at the grid edge.
//  Pec: tangential E = 0 on the face.
//  Pmc: tangential H = 0 just outside the face (image condition).
enum class Boundary { Pml, Pec, Pmc };

// Mirror symmetry about the low face of an axis. EvenMirror keeps the
// tangential E field even (magnetic wall); OddMirror makes it odd
// (electric wall). For the Ey-dominant fundamental cavity mode the defaults
// are {EvenMirror, OddMirror, EvenMirror} for {x, y, z}.
enum class Symmetry { None, EvenMirror, OddMirror };

std::string to_string(Symmetry s);
Symmetry symmetry_from_string(const std::string& s);

struct PmlProfile {
  int cells = 12;
  double order = 4.0;       // polynomial grading
  double reflection = 1e-8;  // target normal-incidence reflection; sets sigma_max
  double alpha_max = 0.0;    // complex-frequency-shift term
};

struct GridIndex {
  std::size_t i = 0, j = 0, k = 0;
};

struct DipoleSource {
  GridIndex position;
  Component component = Component::Ey;
  double center_frequency = 0.268;
  double bandwidth = 0.0268;  // Gaussian spectral standard deviation, c/a
  double amplitude = 1.0;
  long turn_off_step = -1;    // < 0: 12 envelope widths after start

  double envelope_width() const;  // temporal sigma, a/c
  double peak_time() const;       // envelope centre, a/c
  double value(double t) const;   // current at time t; injection stops at off_step
  long off_step(double dt) const;
};

struct ProbePoint {
  std::string name;
  GridIndex position;
  Component component = Component::Ey;
};

struct SnapshotRequest {
  double frequency = 0.0;  // c/a
  long start_step = 0;
  long window_steps = 0;
};

struct SimConfig {
  double courant_factor = 0.5;
  PmlProfile pml;
  std::array<Symmetry, 3> symmetries{Symmetry::None, Symmetry::None, Symmetry::None};
  // faces[axis][0] = low face, faces[axis][1] = high face. A symmetry other
  // than None overrides the low face.
  std::array<std::array<Boundary, 2>, 3> faces{{{Boundary::Pml, Boundary::Pml},
                                                {Boundary::Pml, Boundary::Pml},
                                                {Boundary::Pml, Boundary::Pml}}};
  long total_steps = 0;
  std::vector<DipoleSource> sources;
  std::vector<ProbePoint> probes;
  std::optional<SnapshotRequest> snapshot;
  long record_from_step = -1;  // < 0: record after the last source turns off
  int threads = 1;
  bool track_energy = false;
  double max_memory_bytes = 4e9;

  Boundary face(int axis, int side) const;
  void validate() const;
};

// Uniformly sampled probe signal.
struct TimeSeries {
  std::string name;
  double dt = 0.0;
  long first_step = 0;
  std::vector<double> values;

  double time(std::size_t n) const { return (first_step + static_cast<long>(n)) * dt; }
};

// Complex E-field amplitude at one frequency on the Yee lattice. Component c
// sample (i,j,k) sits at ((i,j,k) + stagger(c)) * spacing + origin; arrays
// have (nx+1)(ny+1)(nz+1) entries indexed x-fastest.
struct FieldSnapshot {
  std::array<std::size_t, 3> cells{0, 0, 0};
  double spacing = 0.0;                // a units
  std::array<double, 3> origin{0, 0, 0};  // a units
  double frequency = 0.0;
  std::array<bool, 3> mirrored{false, false, false};
  std::array<std::vector<std::complex<double>>, 3> e;

  std::size_t node_index(std::size_t i, std::size_t j, std::size_t k) const {
    return i + (cells[0] + 1) * (j + (cells[1] + 1) * k);
  }
  std::size_t node_count() const { return (cells[0] + 1) * (cells[1] + 1) * (cells[2] + 1); }
};

// dt = courant_factor * spacing / sqrt(3). Throws StabilityError when the
// factor is not in (0, 1/sqrt(3)] (normalised to the 3D CFL bound of 1).
double stable_dt(double spacing, double courant_factor);

// Running single-frequency DFT of a set of real samples:
// A = (2/N) * sum_n x_n exp(i 2 pi f t_n). For a sinusoid sampled over an
// integer number of periods, |A| is its amplitude.
class DftAccumulator {
 public:
  DftAccumulator(std::size_t size, double frequency);
  void add(double t, const double* values);
  std::vector<std::complex<double>> result() const;
  long samples() const { return samples_; }

 private:
  double frequency_;
  std::vector<std::complex<double>> sum_;
  long samples_ = 0;
};

class Simulation {
 public:
  Simulation(const geometry::PermittivityGrid& eps, SimConfig config);
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  // One leapfrog update: H from curl E, then E from curl H, then sources.
  void step();
  void advance(long steps);

  long step_index() const { return step_; }
  double dt() const { return dt_; }
  double spacing() const { return spacing_; }
  const SimConfig& config() const { return config_; }
  std::array<std::size_t, 3> cells() const { return {nx_, ny_, nz_}; }

  double field(Component c, std::size_t i, std::size_t j, std::size_t k) const;
  void set_field(Component c, std::size_t i, std::size_t j, std::size_t k, double v);

  // Discrete energy conserved by the lossless leapfrog scheme,
  // H^{n+1/2}.H^{n+1/2} + E^n.eps.E^{n+1}, times the cell volume.
  // Requires track_energy.
  double energy() const;
  double max_abs_e() const;

  const std::vector<TimeSeries>& probes() const { return series_; }

  // Starts DFT accumulation of Ex, Ey, Ez at `frequency` for the next
  // `window_steps` steps. Window must cover at least one period.
  void begin_snapshot(double frequency, long window_steps);
  bool snapshot_ready() const;
  FieldSnapshot snapshot() const;

 private:
  struct Impl;
  void update_h(std::size_t k0, std::size_t k1);
  void update_e(std::size_t k0, std::size_t k1);
  void fill_ghosts();
  void parallel_z(void (Simulation::*fn)(std::size_t, std::size_t));

  SimConfig config_;
  std::size_t nx_, ny_, nz_;
  double spacing_, dt_;
  long step_ = 0;
  long record_from_ = 0;
  std::unique_ptr<Impl> impl_;
  std::vector<TimeSeries> series_;
};

struct RunResult {
  std::vector<TimeSeries> probes;
  std::optional<FieldSnapshot> snapshot;
  long steps = 0;
};

// Bytes needed by a Simulation of this grid and config.
double estimate_memory(const geometry::PermittivityGrid& eps, const SimConfig& config);

RunResult run(const geometry::PermittivityGrid& eps, const SimConfig& config);

}  // namespace phc::fdtd

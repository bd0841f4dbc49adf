#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "phc/cqed.hpp"
#include "phc/fdtd.hpp"
#include "phc/geometry.hpp"
#include "phc/modal.hpp"

namespace phc::pipeline {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "0.1.0";

// Octant FDTD run of a slab cavity: mirror planes through the cavity centre,
// PML on the outer faces.
struct CavityRunOptions {
  int resolution = 20;          // cells per a
  double half_x = 6.5;          // octant extent in a, PML included
  double half_y = 5.5;
  double air_above = 1.0;       // air between slab surface and PML, in a
  int pml_cells = 12;
  double courant_factor = 0.5;
  double center_frequency = 0.268;
  double fractional_bandwidth = 0.10;
  double band_lo = 0.24;        // harmonic-inversion band, c/a
  double band_hi = 0.30;
  long steps_after_source = 60000;
  long snapshot_steps = 12000;  // final window used for the mode profile
  int max_poles = 8;
  int threads = 1;
  bool want_snapshot = true;
  std::function<void(long step, long total)> progress;
};

struct CavityRunResult {
  std::array<std::size_t, 3> cells{0, 0, 0};
  double dt = 0.0;
  long steps = 0;
  double wall_seconds = 0.0;
  modal::HarminvResult harminv;
  std::optional<modal::ResonantMode> fundamental;  // strongest in-band mode
  std::optional<double> v_norm;
  // Cell holding the |Ey| maximum, octant indices, and whether it is the
  // centre cell and dielectric.
  std::array<std::size_t, 3> ey_peak_cell{0, 0, 0};
  bool ey_peak_at_center = false;
  bool ey_peak_in_dielectric = false;
  fdtd::TimeSeries probe;
  std::optional<fdtd::FieldSnapshot> snapshot;
  geometry::PermittivityGrid eps;
};

// Symmetric-octant rasterisation used by run_cavity.
geometry::PermittivityGrid cavity_grid(const geometry::CavityDesign& design, const CavityRunOptions& opt);

CavityRunResult run_cavity(const geometry::CavityDesign& design, const CavityRunOptions& opt);

// One row of a reproduce report.
struct ReportRow {
  std::string name;
  double computed = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;  // absolute
  bool pass = false;
  bool asserted = true;    // false: reported only
  std::string note;
};

ReportRow make_row(std::string name, double computed, double expected, double tolerance, std::string note = {});
std::string format_report(const std::vector<ReportRow>& rows);

std::vector<ReportRow> reproduce_cqed();
std::vector<ReportRow> reproduce_table1(const std::vector<cqed::CavityRecord>& records);
std::vector<ReportRow> reproduce_fdtd(const geometry::CavityDesign& design, CavityRunOptions opt);

// Default cavity records for the g_max comparison table.
std::vector<cqed::CavityRecord> default_table1();

// Records file inputs, per-stage wall time and outputs; written once, atomically.
class RunManifest {
 public:
  explicit RunManifest(std::uint64_t seed) : seed_(seed) {}
  void add_input(const fs::path& path);
  void add_stage(const std::string& name, double wall_seconds);
  void add_output(const fs::path& path);
  nlohmann::ordered_json to_json() const;
  void write(const fs::path& path) const;

 private:
  std::uint64_t seed_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::pair<std::string, double>> stages_;
  std::vector<std::string> outputs_;
};

// Inputs of an existing manifest whose current hash differs from the
// recorded one (missing files included).
std::vector<std::string> stale_inputs(const fs::path& manifest);

// Ordered list of stages, each {"stage": name, ...args}, run in a workspace.
struct PipelineConfig {
  fs::path workspace = ".";
  std::uint64_t seed = 0;
  std::vector<nlohmann::ordered_json> stages;

  static PipelineConfig from_json(const nlohmann::ordered_json& j);
};

}  // namespace phc::pipeline

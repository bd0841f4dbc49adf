#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "phc/cqed.hpp"
#include "phc/fdtd.hpp"
#include "phc/geometry.hpp"
#include "phc/modal.hpp"
#include "phc/specfit.hpp"

// File formats: JSON for structured data, CSV for columns, raw little-endian
// float64 plus a JSON sidecar for grids.
namespace phc::io {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

std::string read_text(const fs::path& path);
// Writes through a temporary file and renames it into place.
void write_text_atomic(const fs::path& path, const std::string& text);

// Design file: lattice, kind, shifts, modulation, meta. Holes are rebuilt
// from these on load and the symmetry checks rerun.
ordered_json design_to_json(const geometry::CavityDesign& d);
geometry::CavityDesign design_from_json(const ordered_json& j);
std::string dump_design(const geometry::CavityDesign& d);
geometry::CavityDesign read_design(const fs::path& path);

// <stem>.bin and <stem>.json next to each other; `path` is the sidecar.
void write_grid(const fs::path& sidecar, const geometry::PermittivityGrid& g);
geometry::PermittivityGrid read_grid(const fs::path& sidecar);

// One interleaved (re, im) float64 file per E component plus a sidecar.
void write_snapshot(const fs::path& sidecar, const fdtd::FieldSnapshot& s);
fdtd::FieldSnapshot read_snapshot(const fs::path& sidecar);

// Columns step,t,value with "# probe=" and "# dt=" header lines.
std::string timeseries_to_csv(const fdtd::TimeSeries& ts);
fdtd::TimeSeries timeseries_from_csv(const std::string& text);

// "# unit=<unit>" line, then columns axis,intensity.
std::string spectrum_to_csv(const specfit::Spectrum& s);
specfit::Spectrum spectrum_from_csv(const std::string& text);

ordered_json fit_to_json(const specfit::FitResult& fit);
ordered_json modes_to_json(const std::vector<modal::ResonantMode>& modes, double a_nm);

// Columns delta,E_lower,E_upper,linewidth_lower,linewidth_upper.
std::string sweep_to_csv(const cqed::SweepResult& r);
// Spectrum map: one row per detuning, first column the detuning, header row
// holds the energy axis.
std::string sweep_map_to_csv(const cqed::SweepResult& r);

std::vector<cqed::CavityRecord> records_from_json(const ordered_json& j);

// Parsed CSV: header names plus numeric rows; comment lines ('#') are kept
// separately.
struct Csv {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
Csv parse_csv(const std::string& text);

std::string sha256_file(const fs::path& path);
std::string sha256_text(const std::string& text);

}  // namespace phc::io

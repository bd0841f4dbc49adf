#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

// Photonic-crystal slab cavity designs and their rasterisation to a
// permittivity grid. Lengths are in nanometres.
namespace phc::geometry {

struct LatticeSpec {
  double a = 260.0;   // lattice constant
  double r = 61.0;    // nominal hole radius
  double d = 130.0;   // slab thickness
  double n_slab = 3.46;
  double n_bg = 1.0;
  int nx_periods = 10;  // holes kept for |x| <= nx_periods * a
  int ny_periods = 8;   // rows kept for |row| <= ny_periods

  void validate() const;
};

// Hole shifts in units of a. Positive values move a hole away from the
// cavity centre along the shift axis; mirror images move symmetrically.
struct ShiftSet {
  std::array<double, 7> sx{};
  std::array<double, 4> sy{};

  void validate() const;
  bool is_zero() const;
};

struct ModulationSpec {
  double delta_r_frac = 0.01;
  int region_rings = 5;

  void validate() const;
};

struct Hole {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.0;
  int row = 0;       // lattice row index (y = row * a * sqrt(3)/2 before shifts)
  int half_col = 0;  // nominal x = half_col * a / 2; signed ordinal for inserted holes
  int mod_sign = 0;  // +1 / -1 inside the modulation region, 0 outside
  bool inserted = false;
};

enum class CavityKind { Bulk, L3, L4_3 };

std::string to_string(CavityKind kind);
CavityKind cavity_kind_from_string(const std::string& s);

struct CavityDesign {
  LatticeSpec lattice;
  std::vector<Hole> holes;
  CavityKind kind = CavityKind::Bulk;
  ShiftSet shifts;
  std::optional<ModulationSpec> modulation;
  std::string source;  // provenance tag of the shift values
  std::string note;    // free-text remark carried in the design file

  // Throws GeometryError on broken mirror symmetry or overlapping holes.
  void validate() const;
};

std::vector<Hole> build_bulk_lattice(const LatticeSpec& spec);

// Closed-form hole count of build_bulk_lattice.
std::size_t bulk_hole_count(const LatticeSpec& spec);

CavityDesign make_bulk(const LatticeSpec& spec);
CavityDesign make_l3(const LatticeSpec& spec);
CavityDesign make_l4_3(const LatticeSpec& spec, const ShiftSet& shifts);

// Radii become r * (1 + s * delta) with s = +-1 for holes in the region.
// Applying +delta and then -delta restores the original radii exactly.
CavityDesign apply_modulation(const CavityDesign& design, const ModulationSpec& mod);

// Smallest dielectric width along y = 0 between the two holes closest to the
// centre on either side (L3 / L4/3 defect row).
double min_center_gap(const CavityDesign& design);

// Scalar permittivity sampled on cells of a regular grid; values are the
// cell-averaged permittivity. Stored x-fastest.
struct PermittivityGrid {
  std::array<std::size_t, 3> dims{0, 0, 0};
  double spacing_nm = 0.0;
  std::array<double, 3> origin_nm{0.0, 0.0, 0.0};  // lower corner of cell (0,0,0)
  double a_nm = 1.0;
  std::vector<double> eps;

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return i + dims[0] * (j + dims[1] * k);
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const { return eps[index(i, j, k)]; }
  std::size_t size() const { return dims[0] * dims[1] * dims[2]; }
  double resolution() const { return a_nm / spacing_nm; }  // cells per a
};

// Axis-aligned box in nm.
struct Domain {
  std::array<double, 3> lo{0.0, 0.0, 0.0};
  std::array<double, 3> hi{0.0, 0.0, 0.0};
};

// Whole-structure box: holes plus `pad_xy_nm` in-plane and `pad_z_nm` air
// above and below the slab.
Domain full_domain(const CavityDesign& design, double pad_xy_nm, double pad_z_nm);

// Box for the positive octant [0, hx] x [0, hy] x [0, hz] in nm.
Domain octant_domain(double hx_nm, double hy_nm, double hz_nm);

struct RasterOptions {
  int resolution = 20;   // cells per lattice constant
  int subsamples = 8;    // per axis, for cells on material boundaries
};

PermittivityGrid rasterize(const CavityDesign& design, const Domain& domain,
                           const RasterOptions& options = {});

}  // namespace phc::geometry

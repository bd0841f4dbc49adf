#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "phc/error.hpp"
#include "phc/geometry.hpp"

namespace phc::geometry {

namespace {

constexpr double kSymTol = 1e-9;  // nm
const double kRowPitch = std::numbers::sqrt3 / 2.0;

std::string hole_str(std::size_t idx, const Hole& h) {
  std::ostringstream os;
  os << "#" << idx << " (" << h.x << ", " << h.y << ", r=" << h.radius << ")";
  return os.str();
}

int sgn(double v) { return (v > 0.0) - (v < 0.0); }

// Symmetry-distinct shift sites, first-quadrant reference holes.
// Each entry: row, half_col (or inserted ordinal), inserted flag.
struct Site {
  int row;
  int half_col;
  bool inserted;
};

// sx1..sx7
constexpr std::array<Site, 7> kSxSites{{
    {0, 1, true},    // inner inserted hole, x = 3a/8
    {0, 2, true},    // outer inserted hole, x = 9a/8
    {0, 4, false},   // x = 2a
    {0, 6, false},   // x = 3a
    {1, 1, false},   // x = a/2, first row
    {1, 3, false},   // x = 3a/2
    {1, 5, false},   // x = 5a/2
}};

// sy1..sy4
constexpr std::array<Site, 4> kSySites{{
    {1, 1, false},
    {1, 3, false},
    {1, 5, false},
    {2, 0, false},  // x = 0, second row
}};

bool matches(const Hole& h, const Site& s) {
  return std::abs(h.row) == s.row && std::abs(h.half_col) == s.half_col && h.inserted == s.inserted;
}

}  // namespace

void LatticeSpec::validate() const {
  if (!(a > 0.0)) throw ParameterError("lattice constant a must be > 0");
  if (!(r > 0.0 && r < a / 2.0)) throw ParameterError("hole radius must satisfy 0 < r < a/2");
  if (!(d > 0.0)) throw ParameterError("slab thickness d must be > 0");
  if (!(n_bg >= 1.0)) throw ParameterError("background index must be >= 1");
  if (!(n_slab > n_bg)) throw ParameterError("slab index must exceed background index");
  if (nx_periods < 1 || ny_periods < 1) throw ParameterError("lattice extent must be >= 1 period");
}

void ShiftSet::validate() const {
  for (std::size_t i = 0; i < sx.size(); ++i)
    if (!(std::abs(sx[i]) < 0.5))
      throw ParameterError("shift sx" + std::to_string(i + 1) + " = " + std::to_string(sx[i]) +
                           " exceeds half a period");
  for (std::size_t i = 0; i < sy.size(); ++i)
    if (!(std::abs(sy[i]) < 0.5))
      throw ParameterError("shift sy" + std::to_string(i + 1) + " = " + std::to_string(sy[i]) +
                           " exceeds half a period");
}

bool ShiftSet::is_zero() const {
  return std::all_of(sx.begin(), sx.end(), [](double v) { return v == 0.0; }) &&
         std::all_of(sy.begin(), sy.end(), [](double v) { return v == 0.0; });
}

void ModulationSpec::validate() const {
  if (!(delta_r_frac >= 0.0 && delta_r_frac < 0.5))
    throw ParameterError("delta_r_frac must be in [0, 0.5)");
  if (region_rings < 0) throw ParameterError("region_rings must be >= 0");
}

std::string to_string(CavityKind kind) {
  switch (kind) {
    case CavityKind::Bulk: return "bulk";
    case CavityKind::L3: return "L3";
    case CavityKind::L4_3: return "L4_3";
  }
  return "bulk";
}

CavityKind cavity_kind_from_string(const std::string& s) {
  if (s == "bulk" || s == "Bulk") return CavityKind::Bulk;
  if (s == "L3" || s == "l3") return CavityKind::L3;
  if (s == "L4_3" || s == "l4-3" || s == "L4/3" || s == "l4_3") return CavityKind::L4_3;
  throw ParameterError("unknown cavity kind '" + s + "'");
}

std::vector<Hole> build_bulk_lattice(const LatticeSpec& spec) {
  spec.validate();
  std::vector<Hole> holes;
  for (int row = -spec.ny_periods; row <= spec.ny_periods; ++row) {
    const bool odd = (std::abs(row) % 2) == 1;
    // half_col has the parity of the row: odd rows sit at half-integer x.
    for (int hc = -2 * spec.nx_periods; hc <= 2 * spec.nx_periods; ++hc) {
      if ((std::abs(hc) % 2 == 1) != odd) continue;
      Hole h;
      h.x = hc * spec.a / 2.0;
      h.y = row * spec.a * kRowPitch;
      h.radius = spec.r;
      h.row = row;
      h.half_col = hc;
      holes.push_back(h);
    }
  }
  return holes;
}

std::size_t bulk_hole_count(const LatticeSpec& spec) {
  const std::size_t m = static_cast<std::size_t>(spec.ny_periods);
  const std::size_t n = static_cast<std::size_t>(spec.nx_periods);
  const std::size_t even_rows = 2 * (m / 2) + 1;
  const std::size_t odd_rows = 2 * m + 1 - even_rows;
  return even_rows * (2 * n + 1) + odd_rows * (2 * n);
}

CavityDesign make_bulk(const LatticeSpec& spec) {
  CavityDesign d;
  d.lattice = spec;
  d.kind = CavityKind::Bulk;
  d.holes = build_bulk_lattice(spec);
  return d;
}

CavityDesign make_l3(const LatticeSpec& spec) {
  CavityDesign d = make_bulk(spec);
  d.kind = CavityKind::L3;
  std::erase_if(d.holes, [](const Hole& h) { return h.row == 0 && std::abs(h.half_col) <= 2; });
  return d;
}

CavityDesign make_l4_3(const LatticeSpec& spec, const ShiftSet& shifts) {
  shifts.validate();
  CavityDesign d = make_l3(spec);
  d.kind = CavityKind::L4_3;
  d.shifts = shifts;
  // Four holes at equal spacing 3a/4 spanning the removed sites.
  for (int ord : {-2, -1, 1, 2}) {
    Hole h;
    const double mag = (ord == 1 || ord == -1) ? 3.0 / 8.0 : 9.0 / 8.0;
    h.x = sgn(ord) * mag * spec.a;
    h.y = 0.0;
    h.radius = spec.r;
    h.row = 0;
    h.half_col = ord;
    h.inserted = true;
    d.holes.push_back(h);
  }
  std::sort(d.holes.begin(), d.holes.end(), [](const Hole& p, const Hole& q) {
    return p.row != q.row ? p.row < q.row : p.x < q.x;
  });
  for (Hole& h : d.holes) {
    for (std::size_t i = 0; i < kSxSites.size(); ++i)
      if (matches(h, kSxSites[i])) h.x += sgn(h.x) * shifts.sx[i] * spec.a;
    for (std::size_t i = 0; i < kSySites.size(); ++i)
      if (matches(h, kSySites[i])) h.y += sgn(h.y) * shifts.sy[i] * spec.a;
  }
  d.validate();
  return d;
}

void CavityDesign::validate() const {
  lattice.validate();
  shifts.validate();
  if (modulation && !(std::abs(modulation->delta_r_frac) < 0.5))
    throw GeometryError("modulation depth must be below 50%");
  // Mirror symmetry about x = 0 and y = 0.
  std::multimap<long long, std::size_t> by_x;
  for (std::size_t i = 0; i < holes.size(); ++i) {
    if (!(holes[i].radius > 0.0)) throw GeometryError("hole " + hole_str(i, holes[i]) + " has radius <= 0");
    by_x.emplace(std::llround(holes[i].x * 1e3), i);
  }
  auto has = [&](double x, double y, double r) {
    const long long key = std::llround(x * 1e3);
    for (long long k = key - 1; k <= key + 1; ++k) {
      auto [b, e] = by_x.equal_range(k);
      for (auto it = b; it != e; ++it) {
        const Hole& q = holes[it->second];
        if (std::abs(q.x - x) <= kSymTol && std::abs(q.y - y) <= kSymTol &&
            std::abs(q.radius - r) <= kSymTol)
          return true;
      }
    }
    return false;
  };
  for (std::size_t i = 0; i < holes.size(); ++i) {
    const Hole& h = holes[i];
    if (!has(-h.x, h.y, h.radius) || !has(h.x, -h.y, h.radius) || !has(-h.x, -h.y, h.radius))
      throw GeometryError("mirror symmetry broken at hole " + hole_str(i, h));
  }
  // Overlap check with a bucket grid of pitch a.
  const double pitch = lattice.a;
  std::unordered_map<long long, std::vector<std::size_t>> buckets;
  auto key = [](long long bx, long long by) { return (bx << 32) ^ (by & 0xffffffffLL); };
  for (std::size_t i = 0; i < holes.size(); ++i)
    buckets[key(static_cast<long long>(std::floor(holes[i].x / pitch)),
                static_cast<long long>(std::floor(holes[i].y / pitch)))]
        .push_back(i);
  for (std::size_t i = 0; i < holes.size(); ++i) {
    const Hole& h = holes[i];
    const long long bx = static_cast<long long>(std::floor(h.x / pitch));
    const long long by = static_cast<long long>(std::floor(h.y / pitch));
    for (long long dx = -1; dx <= 1; ++dx)
      for (long long dy = -1; dy <= 1; ++dy) {
        auto it = buckets.find(key(bx + dx, by + dy));
        if (it == buckets.end()) continue;
        for (std::size_t j : it->second) {
          if (j <= i) continue;
          const Hole& q = holes[j];
          if (std::hypot(h.x - q.x, h.y - q.y) <= h.radius + q.radius)
            throw GeometryError("holes overlap: " + hole_str(i, h) + " and " + hole_str(j, q));
        }
      }
  }
}

CavityDesign apply_modulation(const CavityDesign& design, const ModulationSpec& mod) {
  if (!(std::abs(mod.delta_r_frac) < 0.5)) throw ParameterError("|delta_r_frac| must be < 0.5");
  if (mod.region_rings < 0) throw ParameterError("region_rings must be >= 0");
  if (mod.delta_r_frac == 0.0) return design;
  double total = mod.delta_r_frac;
  if (design.modulation) {
    if (design.modulation->region_rings != mod.region_rings)
      throw ParameterError("modulation region differs from the one already applied");
    total += design.modulation->delta_r_frac;
  }
  CavityDesign out = design;
  // Per row and side, rank lattice holes outward from the mirror axis.
  // The hole on the axis (if any) has no partner in its row and stays fixed.
  const int rings = mod.region_rings;
  const int per_side = 2 * ((rings + 1) / 2);
  std::map<int, std::vector<int>> cols;  // row -> sorted positive half_cols
  for (const Hole& h : out.holes)
    if (!h.inserted && h.half_col > 0) cols[std::abs(h.row)].push_back(h.half_col);
  for (auto& [row, v] : cols) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  for (Hole& h : out.holes) {
    h.mod_sign = 0;
    if (h.inserted || h.half_col == 0 || std::abs(h.row) > rings) continue;
    const auto& v = cols[std::abs(h.row)];
    const auto rank = static_cast<int>(std::lower_bound(v.begin(), v.end(), std::abs(h.half_col)) - v.begin());
    if (rank >= per_side) continue;
    h.mod_sign = (rank % 2 == 0) ? 1 : -1;
  }
  for (Hole& h : out.holes)
    h.radius = h.mod_sign == 0 ? h.radius : out.lattice.r * (1.0 + h.mod_sign * total);
  if (total == 0.0) {
    out.modulation.reset();
  } else {
    out.modulation = ModulationSpec{total, rings};
  }
  try {
    out.validate();
  } catch (const GeometryError& e) {
    throw GeometryError(std::string("modulation broke a design invariant: ") + e.what());
  }
  return out;
}

double min_center_gap(const CavityDesign& design) {
  const Hole* inner = nullptr;
  for (const Hole& h : design.holes) {
    if (h.row != 0 || h.x <= 0.0) continue;
    if (!inner || h.x < inner->x) inner = &h;
  }
  if (!inner) throw GeometryError("no hole on the defect row");
  return 2.0 * (inner->x - inner->radius);
}

}  // namespace phc::geometry

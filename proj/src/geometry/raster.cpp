#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "phc/error.hpp"
#include "phc/geometry.hpp"

namespace phc::geometry {

namespace {

// Hole lookup by square buckets of side `pitch`.
class HoleIndex {
 public:
  HoleIndex(const std::vector<Hole>& holes, double pitch) : holes_(holes), pitch_(pitch) {
    for (std::size_t i = 0; i < holes.size(); ++i) {
      const double r = holes[i].radius;
      const long long x0 = cell(holes[i].x - r), x1 = cell(holes[i].x + r);
      const long long y0 = cell(holes[i].y - r), y1 = cell(holes[i].y + r);
      for (long long bx = x0; bx <= x1; ++bx)
        for (long long by = y0; by <= y1; ++by) map_[key(bx, by)].push_back(i);
    }
  }

  // Holes whose disc may intersect the square [x0,x1] x [y0,y1].
  void query(double x0, double x1, double y0, double y1, std::vector<std::size_t>& out) const {
    out.clear();
    for (long long bx = cell(x0); bx <= cell(x1); ++bx)
      for (long long by = cell(y0); by <= cell(y1); ++by) {
        auto it = map_.find(key(bx, by));
        if (it == map_.end()) continue;
        out.insert(out.end(), it->second.begin(), it->second.end());
      }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }

  const Hole& operator[](std::size_t i) const { return holes_[i]; }

 private:
  long long cell(double v) const { return static_cast<long long>(std::floor(v / pitch_)); }
  static long long key(long long bx, long long by) { return (bx << 32) ^ (by & 0xffffffffLL); }

  const std::vector<Hole>& holes_;
  double pitch_;
  std::unordered_map<long long, std::vector<std::size_t>> map_;
};

}  // namespace

Domain full_domain(const CavityDesign& design, double pad_xy_nm, double pad_z_nm) {
  double hx = 0.0, hy = 0.0;
  for (const Hole& h : design.holes) {
    hx = std::max(hx, std::abs(h.x) + h.radius);
    hy = std::max(hy, std::abs(h.y) + h.radius);
  }
  hx += pad_xy_nm;
  hy += pad_xy_nm;
  const double hz = design.lattice.d / 2.0 + pad_z_nm;
  return Domain{{-hx, -hy, -hz}, {hx, hy, hz}};
}

Domain octant_domain(double hx_nm, double hy_nm, double hz_nm) {
  return Domain{{0.0, 0.0, 0.0}, {hx_nm, hy_nm, hz_nm}};
}

PermittivityGrid rasterize(const CavityDesign& design, const Domain& domain,
                           const RasterOptions& options) {
  design.lattice.validate();
  if (options.resolution < 8) throw ParameterError("resolution must be >= 8 cells per a");
  if (options.subsamples < 1) throw ParameterError("subsamples must be >= 1");
  const auto& lat = design.lattice;
  const double h = lat.a / options.resolution;

  PermittivityGrid grid;
  grid.spacing_nm = h;
  grid.a_nm = lat.a;
  std::array<long long, 3> first{};
  for (int ax = 0; ax < 3; ++ax) {
    if (!(domain.hi[ax] > domain.lo[ax])) throw ParameterError("domain has zero extent");
    // Snap to whole cells so that mirrored domains give mirrored grids.
    first[ax] = static_cast<long long>(std::floor(domain.lo[ax] / h + 1e-9));
    const long long last = static_cast<long long>(std::ceil(domain.hi[ax] / h - 1e-9));
    grid.dims[ax] = static_cast<std::size_t>(last - first[ax]);
    grid.origin_nm[ax] = static_cast<double>(first[ax]) * h;
  }
  for (int ax = 0; ax < 3; ++ax)
    if (domain.lo[ax] > 0.0 || domain.hi[ax] < 0.0)
      throw ParameterError("domain must contain the cavity centre");
  const double half_d = lat.d / 2.0;
  const double zlo = grid.origin_nm[2];
  const double zhi = zlo + grid.dims[2] * h;
  if (zhi < half_d || (zlo < 0.0 && zlo > -half_d))
    throw ParameterError("domain smaller than structure: slab does not fit in z");

  const double eps_slab = lat.n_slab * lat.n_slab;
  const double eps_bg = lat.n_bg * lat.n_bg;
  const int ns = options.subsamples;
  const std::size_t nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];

  // Position of sub-sample s of cell i along an axis; written so that
  // mirrored cells land on exactly negated coordinates.
  auto sub = [&](int ax, std::size_t i, int s) {
    return (static_cast<double>(static_cast<long long>(i) + first[ax]) + (s + 0.5) / ns) * h;
  };

  // Dielectric fraction along z for each layer.
  std::vector<double> fz(nz);
  for (std::size_t k = 0; k < nz; ++k) {
    const double z0 = sub(2, k, 0) - 0.5 * h / ns, z1 = z0 + h;
    if (z1 <= half_d && z0 >= -half_d) {
      fz[k] = 1.0;
    } else if (z0 >= half_d || z1 <= -half_d) {
      fz[k] = 0.0;
    } else {
      int in = 0;
      for (int s = 0; s < ns; ++s) in += std::abs(sub(2, k, s)) < half_d ? 1 : 0;
      fz[k] = static_cast<double>(in) / ns;
    }
  }

  // Hole (air) fraction per column.
  std::vector<double> fh(nx * ny, 0.0);
  HoleIndex index(design.holes, lat.a);
  std::vector<std::size_t> cand;
  const double half_diag = h * std::sqrt(0.5);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const double x0 = (static_cast<double>(static_cast<long long>(i) + first[0])) * h;
      const double y0 = (static_cast<double>(static_cast<long long>(j) + first[1])) * h;
      const double xc = x0 + 0.5 * h, yc = y0 + 0.5 * h;
      index.query(x0, x0 + h, y0, y0 + h, cand);
      double frac = 0.0;
      bool boundary = false;
      for (std::size_t c : cand) {
        const Hole& hl = index[c];
        const double dist = std::hypot(xc - hl.x, yc - hl.y);
        if (dist + half_diag <= hl.radius) {
          frac = 1.0;
          boundary = false;
          break;
        }
        if (dist - half_diag < hl.radius) boundary = true;
      }
      if (boundary) {
        int in = 0;
        for (int sy = 0; sy < ns; ++sy) {
          const double y = sub(1, j, sy);
          for (int sx = 0; sx < ns; ++sx) {
            const double x = sub(0, i, sx);
            for (std::size_t c : cand) {
              const Hole& hl = index[c];
              const double dx = x - hl.x, dy = y - hl.y;
              if (dx * dx + dy * dy < hl.radius * hl.radius) {
                ++in;
                break;
              }
            }
          }
        }
        frac = static_cast<double>(in) / (ns * ns);
      }
      fh[i + nx * j] = frac;
    }
  }

  grid.eps.resize(grid.size());
  for (std::size_t k = 0; k < nz; ++k)
    for (std::size_t j = 0; j < ny; ++j)
      for (std::size_t i = 0; i < nx; ++i)
        grid.eps[grid.index(i, j, k)] = eps_bg + (eps_slab - eps_bg) * fz[k] * (1.0 - fh[i + nx * j]);
  return grid;
}

}  // namespace phc::geometry

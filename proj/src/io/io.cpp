#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <openssl/evp.h>

#include "phc/error.hpp"
#include "phc/io.hpp"

namespace phc::io {

static_assert(std::endian::native == std::endian::little, "raw grid files assume a little-endian host");

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParameterError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParameterError("cannot write " + tmp.string());
    out << text;
    if (!out) throw ParameterError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

void write_binary(const fs::path& path, const void* data, std::size_t bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParameterError("cannot write " + tmp.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!out) throw ParameterError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void read_binary(const fs::path& path, void* data, std::size_t bytes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParameterError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  if (static_cast<std::size_t>(in.tellg()) != bytes)
    throw ParameterError(path.string() + " has the wrong size for its sidecar");
  in.seekg(0);
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
}

ordered_json parse_json(const fs::path& path) {
  try {
    return ordered_json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

template <class T>
T get_field(const ordered_json& j, const char* key) {
  if (!j.contains(key)) throw ParameterError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParameterError(std::string("field '") + key + "' has the wrong type");
  }
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    if (t == "inf") return std::numeric_limits<double>::infinity();
    if (t == "-inf") return -std::numeric_limits<double>::infinity();
    throw ParameterError("not a number: '" + t + "'");
  }
  return v;
}

// Value of "key=value" inside a comment line, empty when absent.
std::string comment_value(const std::vector<std::string>& comments, const std::string& key) {
  for (const auto& c : comments) {
    const std::string body = trim(c.substr(1));
    if (body.rfind(key + "=", 0) == 0) return trim(body.substr(key.size() + 1));
  }
  return {};
}

}  // namespace

ordered_json design_to_json(const geometry::CavityDesign& d) {
  ordered_json j;
  const auto& l = d.lattice;
  j["lattice"] = {{"a_nm", l.a}, {"r_nm", l.r}, {"d_nm", l.d}, {"n_slab", l.n_slab},
                  {"n_bg", l.n_bg}, {"nx", l.nx_periods}, {"ny", l.ny_periods}};
  j["kind"] = geometry::to_string(d.kind);
  j["shifts"] = {{"sx", d.shifts.sx}, {"sy", d.shifts.sy}};
  if (d.modulation)
    j["modulation"] = {{"delta_r_frac", d.modulation->delta_r_frac}, {"region_rings", d.modulation->region_rings}};
  else
    j["modulation"] = nullptr;
  j["meta"] = {{"source", d.source}};
  if (!d.note.empty()) j["meta"]["note"] = d.note;
  return j;
}

geometry::CavityDesign design_from_json(const ordered_json& j) {
  if (!j.is_object()) throw ParameterError("design file must hold a JSON object");
  const auto& lj = j.contains("lattice") ? j.at("lattice") : throw ParameterError("missing field 'lattice'");
  geometry::LatticeSpec l;
  l.a = get_field<double>(lj, "a_nm");
  l.r = get_field<double>(lj, "r_nm");
  l.d = get_field<double>(lj, "d_nm");
  l.n_slab = get_field<double>(lj, "n_slab");
  l.n_bg = get_field<double>(lj, "n_bg");
  l.nx_periods = get_field<int>(lj, "nx");
  l.ny_periods = get_field<int>(lj, "ny");
  const auto kind = geometry::cavity_kind_from_string(get_field<std::string>(j, "kind"));
  geometry::ShiftSet shifts;
  if (j.contains("shifts")) {
    const auto sx = get_field<std::vector<double>>(j.at("shifts"), "sx");
    const auto sy = get_field<std::vector<double>>(j.at("shifts"), "sy");
    if (sx.size() != shifts.sx.size() || sy.size() != shifts.sy.size())
      throw ParameterError("shifts need 7 sx and 4 sy values");
    std::copy(sx.begin(), sx.end(), shifts.sx.begin());
    std::copy(sy.begin(), sy.end(), shifts.sy.begin());
  }
  geometry::CavityDesign d;
  switch (kind) {
    case geometry::CavityKind::Bulk: d = geometry::make_bulk(l); break;
    case geometry::CavityKind::L3: d = geometry::make_l3(l); break;
    case geometry::CavityKind::L4_3: d = geometry::make_l4_3(l, shifts); break;
  }
  if (kind != geometry::CavityKind::L4_3 && !shifts.is_zero())
    throw ParameterError("shifts are only defined for the L4/3 design");
  if (j.contains("modulation") && !j.at("modulation").is_null()) {
    geometry::ModulationSpec m;
    m.delta_r_frac = get_field<double>(j.at("modulation"), "delta_r_frac");
    m.region_rings = get_field<int>(j.at("modulation"), "region_rings");
    d = geometry::apply_modulation(d, m);
  }
  if (j.contains("meta")) {
    const auto& meta = j.at("meta");
    if (meta.contains("source")) d.source = get_field<std::string>(meta, "source");
    if (meta.contains("note")) d.note = get_field<std::string>(meta, "note");
  }
  d.validate();
  return d;
}

std::string dump_design(const geometry::CavityDesign& d) { return design_to_json(d).dump(2) + "\n"; }

geometry::CavityDesign read_design(const fs::path& path) { return design_from_json(parse_json(path)); }

void write_grid(const fs::path& sidecar, const geometry::PermittivityGrid& g) {
  fs::path bin = sidecar;
  bin.replace_extension(".bin");
  ordered_json j;
  j["dims"] = g.dims;
  j["spacing_nm"] = g.spacing_nm;
  j["origin_nm"] = g.origin_nm;
  j["a_nm"] = g.a_nm;
  j["dtype"] = "float64-le";
  j["order"] = "x-fastest";
  j["data"] = bin.filename().string();
  write_binary(bin, g.eps.data(), g.eps.size() * sizeof(double));
  write_text_atomic(sidecar, j.dump(2) + "\n");
}

geometry::PermittivityGrid read_grid(const fs::path& sidecar) {
  const ordered_json j = parse_json(sidecar);
  geometry::PermittivityGrid g;
  g.dims = get_field<std::array<std::size_t, 3>>(j, "dims");
  g.spacing_nm = get_field<double>(j, "spacing_nm");
  g.origin_nm = get_field<std::array<double, 3>>(j, "origin_nm");
  g.a_nm = get_field<double>(j, "a_nm");
  if (get_field<std::string>(j, "dtype") != "float64-le") throw ParameterError("unsupported grid dtype");
  g.eps.resize(g.size());
  read_binary(sidecar.parent_path() / get_field<std::string>(j, "data"), g.eps.data(), g.eps.size() * sizeof(double));
  return g;
}

void write_snapshot(const fs::path& sidecar, const fdtd::FieldSnapshot& s) {
  ordered_json j;
  j["cells"] = s.cells;
  j["spacing"] = s.spacing;
  j["origin"] = s.origin;
  j["frequency"] = s.frequency;
  j["mirrored"] = s.mirrored;
  j["dtype"] = "complex128-le-interleaved";
  ordered_json files;
  const char* names[3] = {"Ex", "Ey", "Ez"};
  for (int c = 0; c < 3; ++c) {
    const fs::path bin = sidecar.parent_path() / (sidecar.stem().string() + "_" + names[c] + ".bin");
    write_binary(bin, s.e[c].data(), s.e[c].size() * sizeof(std::complex<double>));
    files[names[c]] = bin.filename().string();
  }
  j["components"] = files;
  write_text_atomic(sidecar, j.dump(2) + "\n");
}

fdtd::FieldSnapshot read_snapshot(const fs::path& sidecar) {
  const ordered_json j = parse_json(sidecar);
  fdtd::FieldSnapshot s;
  s.cells = get_field<std::array<std::size_t, 3>>(j, "cells");
  s.spacing = get_field<double>(j, "spacing");
  s.origin = get_field<std::array<double, 3>>(j, "origin");
  s.frequency = get_field<double>(j, "frequency");
  s.mirrored = get_field<std::array<bool, 3>>(j, "mirrored");
  const char* names[3] = {"Ex", "Ey", "Ez"};
  for (int c = 0; c < 3; ++c) {
    s.e[c].resize(s.node_count());
    const auto file = get_field<std::string>(j.at("components"), names[c]);
    read_binary(sidecar.parent_path() / file, s.e[c].data(), s.e[c].size() * sizeof(std::complex<double>));
  }
  return s;
}

Csv parse_csv(const std::string& text) {
  Csv csv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      csv.comments.push_back(line);
      continue;
    }
    const auto cells = split(line, ',');
    if (csv.header.empty()) {
      for (const auto& c : cells) csv.header.push_back(trim(c));
      continue;
    }
    if (cells.size() != csv.header.size())
      throw ParameterError("CSV row has " + std::to_string(cells.size()) + " columns, header has " +
                           std::to_string(csv.header.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c));
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

std::string timeseries_to_csv(const fdtd::TimeSeries& ts) {
  std::string out = "# probe=" + ts.name + "\n# dt=" + format_number(ts.dt) + "\nstep,t,value\n";
  for (std::size_t n = 0; n < ts.values.size(); ++n) {
    out += std::to_string(ts.first_step + static_cast<long>(n));
    out += ',';
    out += format_number(ts.time(n));
    out += ',';
    out += format_number(ts.values[n]);
    out += '\n';
  }
  return out;
}

fdtd::TimeSeries timeseries_from_csv(const std::string& text) {
  const Csv csv = parse_csv(text);
  if (csv.header != std::vector<std::string>{"step", "t", "value"})
    throw ParameterError("time series CSV needs columns step,t,value");
  if (csv.rows.size() < 2) throw ParameterError("time series CSV has fewer than 2 samples");
  fdtd::TimeSeries ts;
  ts.name = comment_value(csv.comments, "probe");
  const std::string dt = comment_value(csv.comments, "dt");
  const auto& r = csv.rows;
  ts.dt = dt.empty() ? (r[1][1] - r[0][1]) / (r[1][0] - r[0][0]) : parse_double(dt);
  ts.first_step = static_cast<long>(std::llround(r[0][0]));
  for (std::size_t n = 0; n < r.size(); ++n) {
    if (std::llround(r[n][0]) != ts.first_step + static_cast<long>(n))
      throw ParameterError("time series steps are not consecutive");
    ts.values.push_back(r[n][2]);
  }
  return ts;
}

std::string spectrum_to_csv(const specfit::Spectrum& s) {
  std::string out = "# unit=" + specfit::to_string(s.unit) + "\naxis,intensity\n";
  for (std::size_t n = 0; n < s.size(); ++n) out += format_number(s.axis[n]) + "," + format_number(s.intensity[n]) + "\n";
  return out;
}

specfit::Spectrum spectrum_from_csv(const std::string& text) {
  const Csv csv = parse_csv(text);
  if (csv.header.size() != 2 || csv.header[0] != "axis" || csv.header[1] != "intensity")
    throw ParameterError("spectrum CSV needs columns axis,intensity");
  if (csv.rows.empty()) throw ParameterError("spectrum CSV is empty");
  specfit::Spectrum s;
  const std::string unit = comment_value(csv.comments, "unit");
  s.unit = unit.empty() ? specfit::AxisUnit::MicroEV : specfit::axis_unit_from_string(unit);
  for (const auto& r : csv.rows) {
    s.axis.push_back(r[0]);
    s.intensity.push_back(r[1]);
  }
  s.validate();
  return s;
}

ordered_json fit_to_json(const specfit::FitResult& fit) {
  ordered_json j;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["axis_unit"] = "ueV";
  ordered_json peaks = ordered_json::array();
  for (std::size_t i = 0; i < fit.peaks.size(); ++i) {
    const auto& p = fit.peaks[i];
    ordered_json pj = {{"center", p.center},
                       {"lorentz_fwhm", p.lorentz_fwhm},
                       {"gauss_fwhm", p.gauss_fwhm},
                       {"area", p.area}};
    const double q = specfit::q_from_fit(fit, i);
    pj["q"] = std::isfinite(q) && p.center > 0.0 ? ordered_json(q) : ordered_json(nullptr);
    peaks.push_back(pj);
  }
  j["peaks"] = peaks;
  j["baseline"] = fit.baseline;
  j["baseline_slope"] = fit.baseline_slope;
  j["residual_rms"] = fit.residual_rms;
  j["std_errors_fit_order"] = fit.std_errors;
  j["jtj_condition"] = std::isfinite(fit.jtj_condition) ? ordered_json(fit.jtj_condition) : ordered_json(nullptr);
  j["warnings"] = fit.warnings;
  return j;
}

ordered_json modes_to_json(const std::vector<modal::ResonantMode>& modes, double a_nm) {
  ordered_json arr = ordered_json::array();
  for (const auto& m : modes) {
    ordered_json j;
    j["freq_c_over_a"] = m.frequency;
    j["wavelength_nm"] = m.wavelength_nm(a_nm);
    if (m.q_exceeds_measurable) {
      j["Q"] = nullptr;
      j["q_exceeds_measurable"] = true;
      j["kappa_ueV"] = nullptr;
    } else {
      j["Q"] = m.q;
      j["q_exceeds_measurable"] = false;
      j["kappa_ueV"] = modal::q_to_kappa(m.q, m.wavelength_nm(a_nm));
    }
    j["amplitude"] = m.amplitude;
    j["phase"] = m.phase;
    if (m.v_norm) j["V_norm"] = *m.v_norm;
    arr.push_back(j);
  }
  return arr;
}

std::string sweep_to_csv(const cqed::SweepResult& r) {
  std::string out = "delta,E_lower,E_upper,linewidth_lower,linewidth_upper\n";
  for (const auto& p : r.points)
    out += format_number(p.detuning) + "," + format_number(p.pair.lower.real()) + "," +
           format_number(p.pair.upper.real()) + "," + format_number(p.pair.lower_linewidth()) + "," +
           format_number(p.pair.upper_linewidth()) + "\n";
  return out;
}

std::string sweep_map_to_csv(const cqed::SweepResult& r) {
  if (r.map.empty()) throw ParameterError("sweep has no spectrum map");
  std::string out = "delta";
  for (double e : r.energy_axis) out += "," + format_number(e);
  out += "\n";
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    out += format_number(r.points[i].detuning);
    for (double v : r.map[i]) out += "," + format_number(v);
    out += "\n";
  }
  return out;
}

std::vector<cqed::CavityRecord> records_from_json(const ordered_json& j) {
  const ordered_json& arr = j.is_object() && j.contains("cavities") ? j.at("cavities") : j;
  if (!arr.is_array()) throw ParameterError("cavity table must be an array or {cavities: [...]}");
  std::vector<cqed::CavityRecord> out;
  for (const auto& e : arr) {
    cqed::CavityRecord r;
    r.name = get_field<std::string>(e, "name");
    r.v_norm = get_field<double>(e, "V_norm");
    r.q_design = e.contains("Q_design") ? get_field<double>(e, "Q_design") : 0.0;
    r.field_fraction = e.contains("field_fraction") ? get_field<double>(e, "field_fraction") : 1.0;
    out.push_back(r);
  }
  return out;
}

std::string sha256_text(const std::string& text) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw NumericalError("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string sha256_file(const fs::path& path) { return sha256_text(read_text(path)); }

}  // namespace phc::io

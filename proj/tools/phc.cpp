#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "phc/cqed.hpp"
#include "phc/error.hpp"
#include "phc/fdtd.hpp"
#include "phc/geometry.hpp"
#include "phc/io.hpp"
#include "phc/modal.hpp"
#include "phc/pipeline.hpp"
#include "phc/plot.hpp"
#include "phc/specfit.hpp"
#include "phc/units.hpp"

#ifndef PHC_DATA_DIR
#define PHC_DATA_DIR "designs"
#endif

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace phc;

namespace {

fs::path data_dir() {
  if (const char* env = std::getenv("PHC_DATA_DIR"); env && *env) return env;
  return PHC_DATA_DIR;
}

// Shared by every command of one invocation (or of one pipeline).
struct Context {
  fs::path workspace = ".";
  std::uint64_t seed = 0;
  int threads = 1;
  pipeline::RunManifest manifest{0};
  bool in_pipeline = false;
  bool wrote = false;

  fs::path out(const fs::path& p) const {
    const fs::path full = p.is_absolute() ? p : workspace / p;
    if (full.has_parent_path()) fs::create_directories(full.parent_path());
    return full;
  }
  // Relative inputs resolve against the workspace first, then the cwd.
  fs::path in(const fs::path& p) {
    fs::path full = p;
    if (!p.is_absolute() && fs::exists(workspace / p)) full = workspace / p;
    if (!fs::exists(full)) throw ParameterError("input file not found: " + p.string());
    manifest.add_input(full);
    return full;
  }
  void write(const fs::path& p, const std::string& text) {
    const fs::path full = out(p);
    io::write_text_atomic(full, text);
    manifest.add_output(full);
    wrote = true;
  }
  void write_csv(const fs::path& p, const std::string& csv) { write(p, "# seed=" + std::to_string(seed) + "\n" + csv); }
  void write_json(const fs::path& p, ordered_json j) {
    j["meta"] = {{"tool_version", pipeline::kToolVersion}, {"seed", seed}};
    write(p, j.dump(2) + "\n");
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ordered_json pair_json(const cqed::PolaritonPair& p) {
  return {{"E_lower", p.lower.real()},
          {"E_upper", p.upper.real()},
          {"linewidth_lower", p.lower_linewidth()},
          {"linewidth_upper", p.upper_linewidth()},
          {"gap", p.gap()}};
}

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 2) throw ParameterError("need at least 2 points");
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return v;
}

double parse_number(const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ParameterError("not a number: '" + s + "'");
  return v;
}

// "sx3=0.01" style overrides.
void apply_shift(geometry::ShiftSet& s, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq < 3) throw ParameterError("shift must look like sx3=0.01, got '" + spec + "'");
  const std::string name = spec.substr(0, eq);
  const double value = parse_number(spec.substr(eq + 1));
  const bool is_x = name.rfind("sx", 0) == 0, is_y = name.rfind("sy", 0) == 0;
  int idx = 0;
  const auto r = std::from_chars(name.data() + 2, name.data() + name.size(), idx);
  if ((!is_x && !is_y) || r.ec != std::errc() || r.ptr != name.data() + name.size())
    throw ParameterError("unknown shift '" + name + "'");
  if (is_x && idx >= 1 && idx <= 7) s.sx[static_cast<std::size_t>(idx - 1)] = value;
  else if (is_y && idx >= 1 && idx <= 4) s.sy[static_cast<std::size_t>(idx - 1)] = value;
  else throw ParameterError("shift index out of range in '" + name + "'");
}

cqed::JCParams jc_params(double g, double kappa, double gamma, double detuning) {
  cqed::JCParams p;
  p.g = g;
  p.kappa = kappa;
  p.gamma = gamma;
  p.detuning = detuning;
  p.validate();
  return p;
}

// Table printed by `cqed table`.
std::string gmax_text(const std::vector<cqed::GmaxRow>& rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s %8s %12s %8s %10s %12s\n", "cavity", "V", "Q", "ff", "g/g_ref", "g/g_ref(I)");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-24s %8.3g %12.4g %8.3g %10.4f %12.4f\n", r.name.c_str(), r.v_norm, r.q_design,
                  r.field_fraction, r.g_norm, r.g_norm_intensity);
    out += buf;
  }
  return out;
}

int report_exit(const std::vector<pipeline::ReportRow>& rows) {
  std::cout << pipeline::format_report(rows);
  for (const auto& r : rows)
    if (r.asserted && !r.pass) return 1;
  return 0;
}

std::string plot_file(const io::Csv& csv, std::string kind, const std::string& title) {
  if (csv.header.empty() || csv.rows.empty()) throw ParameterError("no data rows to plot");
  const auto& h = csv.header;
  auto col = [&](std::size_t c) {
    std::vector<double> v;
    for (const auto& r : csv.rows) v.push_back(r.at(c));
    return v;
  };
  if (kind == "auto") {
    if (h.size() == 5 && h[1] == "E_lower") kind = "sweep";
    else if (h.size() == 2 && h[0] == "axis") kind = "spectrum";
    else if (h.size() == 3 && h[0] == "step") kind = "timeseries";
    else if (h.size() > 2 && h[0] == "delta") kind = "map";
    else throw ParameterError("unrecognised CSV schema (header starts with '" + h[0] + "')");
  }
  if (kind == "sweep") {
    if (h.size() < 3 || h[1] != "E_lower") throw ParameterError("not a sweep CSV");
    const auto d = col(0);
    return plot::line_plot({{"lower polariton", d, col(1)}, {"upper polariton", d, col(2)}},
                           {title.empty() ? "Anti-crossing" : title, "QD-cavity detuning (ueV)", "Energy (ueV)"});
  }
  if (kind == "spectrum") {
    if (h.size() != 2) throw ParameterError("not a spectrum CSV");
    std::string unit = "ueV";
    for (const auto& c : csv.comments)
      if (c.rfind("# unit=", 0) == 0) unit = c.substr(7);
    return plot::line_plot({{"intensity", col(0), col(1)}},
                           {title.empty() ? "Spectrum" : title, "Energy (" + unit + ")", "Intensity (arb.)"});
  }
  if (kind == "timeseries") {
    if (h.size() != 3) throw ParameterError("not a time-series CSV");
    return plot::line_plot({{"probe", col(1), col(2)}}, {title.empty() ? "Probe" : title, "t (a/c)", "field"});
  }
  if (kind == "map") {
    if (h.size() < 3 || h[0] != "delta") throw ParameterError("not a spectrum-map CSV");
    std::vector<double> energy;
    for (std::size_t c = 1; c < h.size(); ++c) energy.push_back(parse_number(h[c]));
    std::vector<std::vector<double>> values;
    for (const auto& r : csv.rows) values.emplace_back(r.begin() + 1, r.end());
    return plot::heatmap(energy, col(0), values,
                         {title.empty() ? "Emission map" : title, "Energy (ueV)", "QD-cavity detuning (ueV)"});
  }
  throw ParameterError("unknown plot kind '" + kind + "'");
}

int run_cli(std::vector<std::string> args, Context& ctx);

int run_pipeline(const fs::path& config_path, Context& ctx, bool workspace_given) {
  const auto cfg = pipeline::PipelineConfig::from_json(ordered_json::parse(io::read_text(config_path)));
  if (!workspace_given) ctx.workspace = cfg.workspace;
  ctx.seed = cfg.seed;
  ctx.manifest = pipeline::RunManifest(ctx.seed);
  ctx.manifest.add_input(config_path);
  ctx.in_pipeline = true;
  fs::create_directories(ctx.workspace);
  for (const auto& stage : cfg.stages) {
    const std::string name = stage.at("stage").get<std::string>();
    std::vector<std::string> args{name};
    if (name == "fdtd") args.push_back("run");
    if (name == "modes" || name == "cqed") {
      if (!stage.contains("command")) throw ParameterError("stage '" + name + "' needs a 'command'");
      args.push_back(stage.at("command").get<std::string>());
    }
    for (const auto& [key, value] : stage.items()) {
      if (key == "stage" || key == "command") continue;
      if (value.is_boolean()) {
        if (value.get<bool>()) args.push_back("--" + key);
      } else if (value.is_array()) {
        for (const auto& v : value) {
          args.push_back("--" + key);
          args.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        }
      } else {
        args.push_back("--" + key);
        args.push_back(value.is_string() ? value.get<std::string>() : value.dump());
      }
    }
    const auto t0 = std::chrono::steady_clock::now();
    std::cerr << "stage " << name << "\n";
    const int rc = run_cli(args, ctx);
    ctx.manifest.add_stage(name, seconds_since(t0));
    if (rc != 0) return rc;
  }
  ctx.manifest.write(ctx.out("manifest.json"));
  return 0;
}

int run_cli(std::vector<std::string> args, Context& ctx) {
  CLI::App app{"Photonic-crystal cavity QED toolkit", "phc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pipeline::kToolVersion);

  std::string workspace;
  std::uint64_t seed = ctx.seed;
  int threads = 0;
  if (!ctx.in_pipeline) {
    app.add_option("--workspace", workspace, "Directory for outputs and relative inputs");
    app.add_option("--seed", seed, "Seed recorded in output metadata");
    app.add_option("--threads", threads, "Worker threads (PHC_THREADS when unset)")->check(CLI::PositiveNumber);
  }
  int rc = 0;
  std::vector<std::pair<CLI::App*, std::function<void()>>> actions;
  auto on = [&](CLI::App* sub, std::function<void()> fn) { actions.emplace_back(sub, std::move(fn)); };

  // generate
  auto* gen = app.add_subcommand("generate", "Write a cavity design file and optionally its permittivity grid");
  std::string g_design = "l4-3", g_from, g_out = "design.json", g_grid;
  std::vector<std::string> g_shifts;
  std::optional<double> g_delta;
  int g_rings = 5, g_res = 20;
  bool g_octant = false;
  gen->add_option("--design", g_design, "l4-3 (shipped file), l3 or bulk")->check(CLI::IsMember({"l4-3", "l3", "bulk"}));
  gen->add_option("--from", g_from, "Start from this design file");
  gen->add_option("--shift", g_shifts, "Override one shift, e.g. sx1=0.01 (units of a)");
  gen->add_option("--delta-r", g_delta, "Double-periodic radius modulation, fraction of r");
  gen->add_option("--rings", g_rings, "Rows around the centre that are modulated");
  gen->add_option("--out", g_out, "Design file to write");
  gen->add_option("--grid", g_grid, "Also write the permittivity grid to this sidecar path");
  gen->add_option("--resolution", g_res, "Grid cells per a")->check(CLI::Range(8, 200));
  gen->add_flag("--octant", g_octant, "Rasterise the positive octant only");
  on(gen, [&] {
    geometry::CavityDesign d;
    if (!g_from.empty()) d = io::read_design(ctx.in(g_from));
    else if (g_design == "l4-3") d = io::read_design(ctx.in(data_dir() / "l4_3_minkov.json"));
    else if (g_design == "l3") d = geometry::make_l3({});
    else d = geometry::make_bulk({});
    if (!g_shifts.empty()) {
      if (d.kind != geometry::CavityKind::L4_3) throw ParameterError("--shift applies to L4/3 designs only");
      geometry::ShiftSet s = d.shifts;
      for (const auto& spec : g_shifts) apply_shift(s, spec);
      s.validate();
      auto rebuilt = geometry::make_l4_3(d.lattice, s);
      rebuilt.source = d.source;
      rebuilt.note = d.note;
      if (d.modulation) rebuilt = geometry::apply_modulation(rebuilt, *d.modulation);
      d = std::move(rebuilt);
    }
    if (g_delta) {
      geometry::ModulationSpec m{*g_delta, g_rings};
      m.validate();
      d = geometry::apply_modulation(d, m);
    }
    d.validate();
    ctx.write(g_out, io::dump_design(d));
    std::cout << "wrote " << (ctx.workspace / g_out).string() << " (" << d.holes.size() << " holes";
    if (d.kind != geometry::CavityKind::Bulk) std::cout << ", centre gap " << geometry::min_center_gap(d) << " nm";
    std::cout << ")\n";
    if (!g_grid.empty()) {
      const double a = d.lattice.a;
      const auto dom = g_octant ? geometry::octant_domain(6.5 * a, 5.5 * a, d.lattice.d / 2 + 1.5 * a)
                                : geometry::full_domain(d, a, a);
      const auto grid = geometry::rasterize(d, dom, {g_res, 8});
      io::write_grid(ctx.out(g_grid), grid);
      fs::path bin = ctx.out(g_grid);
      ctx.manifest.add_output(ctx.out(g_grid));
      ctx.manifest.add_output(bin.replace_extension(".bin"));
      std::cout << "grid " << grid.dims[0] << " x " << grid.dims[1] << " x " << grid.dims[2] << "\n";
    }
  });

  // fdtd run
  auto* fdtd_cmd = app.add_subcommand("fdtd", "FDTD simulation");
  fdtd_cmd->require_subcommand(1);
  auto* frun = fdtd_cmd->add_subcommand("run", "Octant run of a slab cavity: probe, modes, mode profile");
  std::string f_design, f_prefix = "fdtd";
  pipeline::CavityRunOptions fopt;
  fopt.steps_after_source = 20000;
  fopt.snapshot_steps = 5000;
  bool f_no_snap = false;
  frun->add_option("--design", f_design, "Design file (default: shipped L4/3)");
  frun->add_option("--resolution", fopt.resolution, "Cells per a")->check(CLI::Range(8, 200));
  frun->add_option("--steps-after", fopt.steps_after_source, "Steps after the source turns off");
  frun->add_option("--snapshot-steps", fopt.snapshot_steps, "Length of the final mode-profile window");
  frun->add_option("--half-x", fopt.half_x, "Octant extent along x in a, PML included");
  frun->add_option("--half-y", fopt.half_y, "Octant extent along y in a, PML included");
  frun->add_option("--air", fopt.air_above, "Air above the slab in a");
  frun->add_option("--fmin", fopt.band_lo, "Analysis band lower edge, c/a");
  frun->add_option("--fmax", fopt.band_hi, "Analysis band upper edge, c/a");
  frun->add_flag("--no-snapshot", f_no_snap, "Skip the mode profile");
  frun->add_option("--prefix", f_prefix, "Output file prefix");
  on(frun, [&] {
    const auto d = io::read_design(ctx.in(f_design.empty() ? data_dir() / "l4_3_minkov.json" : fs::path(f_design)));
    fopt.threads = ctx.threads;
    fopt.want_snapshot = !f_no_snap;
    long last = -1;
    fopt.progress = [&](long step, long total) {
      const long pct = 100 * step / std::max(1L, total);
      if (pct / 10 != last / 10) std::cerr << "  step " << step << " / " << total << "\n";
      last = pct;
    };
    const auto r = pipeline::run_cavity(d, fopt);
    ctx.write_csv(f_prefix + "_probe.csv", io::timeseries_to_csv(r.probe));
    io::write_grid(ctx.out(f_prefix + "_eps.json"), r.eps);
    ctx.manifest.add_output(ctx.out(f_prefix + "_eps.json"));
    ctx.manifest.add_output(ctx.out(f_prefix + "_eps.bin"));
    std::vector<modal::ResonantMode> modes = r.harminv.modes;
    if (r.fundamental && !modes.empty()) modes.front() = *r.fundamental;
    ordered_json j;
    j["design"] = f_design.empty() ? "l4_3_minkov.json" : f_design;
    j["resolution"] = fopt.resolution;
    j["cells"] = r.cells;
    j["dt"] = r.dt;
    j["steps"] = r.steps;
    j["wall_seconds"] = r.wall_seconds;
    j["modes"] = io::modes_to_json(modes, d.lattice.a);
    j["notices"] = r.harminv.notices;
    if (r.v_norm) {
      j["V_norm"] = *r.v_norm;
      j["ey_peak_cell"] = r.ey_peak_cell;
      j["ey_peak_at_center"] = r.ey_peak_at_center;
      j["ey_peak_in_dielectric"] = r.ey_peak_in_dielectric;
    }
    ctx.write_json(f_prefix + "_modes.json", j);
    if (r.snapshot) {
      io::write_snapshot(ctx.out(f_prefix + "_snapshot.json"), *r.snapshot);
      ctx.manifest.add_output(ctx.out(f_prefix + "_snapshot.json"));
    }
    std::printf("cells %zu x %zu x %zu, %ld steps, %.1f s\n", r.cells[0], r.cells[1], r.cells[2], r.steps, r.wall_seconds);
    for (const auto& m : modes)
      std::printf("  f = %.6f c/a (%.2f nm)  Q = %.5g\n", m.frequency, m.wavelength_nm(d.lattice.a), m.q);
    if (r.v_norm) std::printf("  V = %.4f (lambda/n)^3\n", *r.v_norm);
  });

  // modes
  auto* modes_cmd = app.add_subcommand("modes", "Resonance extraction and mode volume");
  modes_cmd->require_subcommand(1);
  auto* analyze = modes_cmd->add_subcommand("analyze", "Harmonic inversion of a probe time series");
  std::string m_input, m_out;
  double m_flo = 0.24, m_fhi = 0.30, m_a = 260.0;
  int m_poles = 8;
  analyze->add_option("--input", m_input, "Probe CSV (step,t,value)")->required();
  analyze->add_option("--fmin", m_flo, "Band lower edge, c/a");
  analyze->add_option("--fmax", m_fhi, "Band upper edge, c/a");
  analyze->add_option("--max-poles", m_poles, "Largest number of poles")->check(CLI::Range(1, 200));
  analyze->add_option("--a-nm", m_a, "Lattice constant for wavelengths");
  analyze->add_option("--out", m_out, "JSON output (stdout when omitted)");
  on(analyze, [&] {
    const auto ts = io::timeseries_from_csv(io::read_text(ctx.in(m_input)));
    const auto h = modal::harmonic_inversion(ts, m_flo, m_fhi, m_poles);
    ordered_json j;
    j["modes"] = io::modes_to_json(h.modes, m_a);
    j["notices"] = h.notices;
    if (ts.values.size() >= 64) {
      const auto spec = modal::fft_spectrum(ts);
      j["fft_peaks"] = ordered_json::array();
      for (const auto& p : spec.peaks) j["fft_peaks"].push_back({{"freq_c_over_a", p.frequency}, {"power", p.power}});
    }
    if (m_out.empty()) std::cout << j.dump(2) << "\n";
    else ctx.write_json(m_out, j);
    for (const auto& n : h.notices) std::cerr << "note: " << n << "\n";
  });
  auto* volume = modes_cmd->add_subcommand("volume", "Mode volume of a field snapshot");
  std::string v_snap, v_eps;
  double v_n = 3.46, v_a = 260.0;
  volume->add_option("--snapshot", v_snap, "Snapshot sidecar JSON")->required();
  volume->add_option("--eps", v_eps, "Permittivity grid sidecar JSON")->required();
  volume->add_option("--n", v_n, "Reference index for (lambda/n)^3");
  volume->add_option("--a-nm", v_a, "Lattice constant in nm");
  on(volume, [&] {
    const auto snap = io::read_snapshot(ctx.in(v_snap));
    const auto eps = io::read_grid(ctx.in(v_eps));
    if (!(snap.frequency > 0)) throw ParameterError("snapshot carries no frequency");
    const double v = modal::mode_volume(snap, eps, v_a / snap.frequency, v_n);
    std::printf("f = %.6f c/a  V = %.5f (lambda/n)^3\n", snap.frequency, v);
  });

  // cqed
  auto* cq = app.add_subcommand("cqed", "Coupled quantum-dot / cavity model (energies in ueV)");
  cq->require_subcommand(1);
  double c_g = 40.26, c_kappa = 40.0, c_gamma = 0.0, c_det = 0.0;
  std::optional<double> c_vrs;
  auto jc_opts = [&](CLI::App* s) {
    s->add_option("--g", c_g, "Coupling constant");
    s->add_option("--kappa", c_kappa, "Cavity linewidth (FWHM)");
    s->add_option("--gamma", c_gamma, "Emitter linewidth (FWHM)");
  };
  auto* eig = cq->add_subcommand("eig", "Polariton energies and linewidths");
  jc_opts(eig);
  eig->add_option("--detuning", c_det, "E_QD - E_cavity");
  eig->add_option("--vrs", c_vrs, "Take g from this vacuum Rabi splitting");
  on(eig, [&] {
    if (c_vrs) c_g = cqed::g_from_vrs(*c_vrs, c_kappa);
    const auto p = jc_params(c_g, c_kappa, c_gamma, c_det);
    ordered_json j = pair_json(cqed::polariton_eigenvalues(p));
    j["g"] = c_g;
    j["g_over_kappa"] = c_g / c_kappa;
    j["strong_coupling"] = cqed::strong_coupling(c_g, c_kappa);
    std::cout << j.dump(2) << "\n";
  });
  auto* sweep = cq->add_subcommand("sweep", "Detuning sweep of the polariton branches");
  jc_opts(sweep);
  double s_lo = -300, s_hi = 300, e_lo = -300, e_hi = 300, s_res = 21.0;
  int s_steps = 601, e_points = 301;
  std::string s_out = "sweep.csv", s_map, s_svg, s_map_svg;
  sweep->add_option("--from", s_lo, "First detuning");
  sweep->add_option("--to", s_hi, "Last detuning");
  sweep->add_option("--steps", s_steps, "Number of detunings")->check(CLI::Range(2, 100000));
  sweep->add_option("--out", s_out, "Branch CSV");
  sweep->add_option("--map", s_map, "Also write the emission map CSV");
  sweep->add_option("--emin", e_lo, "Map energy axis start (relative to the cavity)");
  sweep->add_option("--emax", e_hi, "Map energy axis end");
  sweep->add_option("--epoints", e_points, "Map energy samples")->check(CLI::Range(2, 100000));
  sweep->add_option("--resolution", s_res, "Gaussian instrument FWHM for the map");
  sweep->add_option("--svg", s_svg, "Anti-crossing plot");
  sweep->add_option("--map-svg", s_map_svg, "Emission map heatmap");
  on(sweep, [&] {
    const auto p = jc_params(c_g, c_kappa, c_gamma, 0.0);
    const bool want_map = !s_map.empty() || !s_map_svg.empty();
    const auto axis = want_map ? linspace(e_lo, e_hi, e_points) : std::vector<double>{};
    cqed::SpectrumOptions so;
    so.resolution_fwhm = s_res;
    const auto r = cqed::detuning_sweep(p, s_lo, s_hi, s_steps, axis, so);
    ctx.write_csv(s_out, io::sweep_to_csv(r));
    if (!s_map.empty()) ctx.write_csv(s_map, io::sweep_map_to_csv(r));
    if (!s_svg.empty()) ctx.write(s_svg, plot_file(io::parse_csv(io::sweep_to_csv(r)), "sweep", ""));
    if (!s_map_svg.empty()) ctx.write(s_map_svg, plot_file(io::parse_csv(io::sweep_map_to_csv(r)), "map", ""));
    std::printf("minimum gap %.4f ueV at detuning %.4f ueV\n", r.min_gap, r.min_gap_detuning);
  });
  auto* spec = cq->add_subcommand("spectrum", "Emission spectrum at one detuning");
  jc_opts(spec);
  std::string sp_out = "spectrum.csv", sp_svg;
  bool sp_no_bare = false;
  double sp_ecav = 0.0;
  spec->add_option("--detuning", c_det, "E_QD - E_cavity");
  spec->add_option("--e-cavity", sp_ecav, "Absolute cavity energy; the axis is shifted with it");
  spec->add_option("--emin", e_lo, "Energy axis start (relative to the cavity)");
  spec->add_option("--emax", e_hi, "Energy axis end");
  spec->add_option("--points", e_points, "Energy samples")->check(CLI::Range(2, 1000000));
  spec->add_option("--resolution", s_res, "Gaussian instrument FWHM");
  spec->add_flag("--no-bare", sp_no_bare, "Leave out the uncoupled cavity line");
  spec->add_option("--out", sp_out, "Spectrum CSV");
  spec->add_option("--svg", sp_svg, "Spectrum plot");
  on(spec, [&] {
    auto p = jc_params(c_g, c_kappa, c_gamma, c_det);
    p.e_cavity = sp_ecav;
    cqed::SpectrumOptions so;
    so.resolution_fwhm = s_res;
    so.include_bare_cavity = !sp_no_bare;
    const auto axis = linspace(sp_ecav + e_lo, sp_ecav + e_hi, e_points);
    const auto s = cqed::emission_spectrum(p, so, axis);
    const std::string csv = io::spectrum_to_csv(s);
    ctx.write_csv(sp_out, csv);
    if (!sp_svg.empty()) ctx.write(sp_svg, plot_file(io::parse_csv(csv), "spectrum", ""));
    std::cout << "wrote " << (ctx.workspace / sp_out).string() << "\n";
  });
  auto* table = cq->add_subcommand("table", "Normalised g_max of cavity designs");
  std::string t_records, t_ref, t_out;
  table->add_option("--records", t_records, "Cavity records JSON (default: shipped table)");
  table->add_option("--reference", t_ref, "Reference cavity name");
  table->add_option("--out", t_out, "JSON output");
  on(table, [&] {
    const auto j = ordered_json::parse(io::read_text(ctx.in(t_records.empty() ? data_dir() / "table1.json" : fs::path(t_records))));
    std::string ref = t_ref;
    if (ref.empty()) ref = j.is_object() && j.contains("reference") ? j.at("reference").get<std::string>() : "heterostructure";
    const auto recs = io::records_from_json(j);
    const auto rows = cqed::gmax_table(recs, ref);
    std::cout << gmax_text(rows);
    if (!t_out.empty()) {
      ordered_json o;
      o["reference"] = ref;
      o["rows"] = ordered_json::array();
      for (const auto& r : rows)
        o["rows"].push_back({{"name", r.name}, {"V_norm", r.v_norm}, {"Q_design", r.q_design},
                             {"field_fraction", r.field_fraction}, {"g_norm", r.g_norm},
                             {"g_norm_intensity", r.g_norm_intensity}});
      ctx.write_json(t_out, o);
    }
  });
  auto* proj = cq->add_subcommand("project", "Scale a measured g to another cavity");
  double p_g = 110, p_vref = 0.75, p_ffref = 0.93, p_vt = 0.32, p_fft = 1.0, p_pol = 1.0;
  std::optional<double> p_kappa;
  proj->add_option("--g-ref", p_g, "Measured coupling constant");
  proj->add_option("--v-ref", p_vref, "Mode volume of the measured cavity, (lambda/n)^3");
  proj->add_option("--ff-ref", p_ffref, "Field fraction at the measured dot");
  proj->add_option("--v-target", p_vt, "Mode volume of the target cavity");
  proj->add_option("--ff-target", p_fft, "Field fraction at the target dot");
  proj->add_option("--polarization", p_pol, "Dipole-orientation factor, e.g. 1.41421356");
  proj->add_option("--kappa", p_kappa, "Report g/kappa for this linewidth");
  on(proj, [&] {
    const double g = cqed::project_g(p_g, p_vref, p_ffref, p_vt, p_fft, p_pol);
    std::printf("g = %.4f ueV\n", g);
    if (p_kappa) std::printf("g/kappa = %.4f\n", g / *p_kappa);
  });
  auto* conv = cq->add_subcommand("kappa", "Convert between Q and cavity linewidth");
  std::optional<double> k_q, k_kappa, k_lambda, k_energy;
  conv->add_option("--q", k_q, "Quality factor");
  conv->add_option("--linewidth", k_kappa, "Linewidth in ueV (converted to Q)");
  conv->add_option("--lambda-nm", k_lambda, "Resonance wavelength");
  conv->add_option("--energy-ev", k_energy, "Resonance energy");
  on(conv, [&] {
    if (!k_lambda == !k_energy) throw ParameterError("give exactly one of --lambda-nm and --energy-ev");
    if (!k_q == !k_kappa) throw ParameterError("give exactly one of --q and --linewidth");
    const double lambda = k_lambda ? *k_lambda : units::ueV_to_wavelength_nm(*k_energy * units::kUeVPerEV);
    if (k_q) std::printf("kappa = %.4f ueV\n", modal::q_to_kappa(*k_q, lambda));
    else std::printf("Q = %.6g\n", modal::kappa_to_q(*k_kappa, lambda));
  });

  // fit
  auto* fit = app.add_subcommand("fit", "Voigt multi-peak fit of a spectrum CSV");
  std::string fi_in, fi_out;
  int fi_peaks = 1;
  std::optional<double> fi_gauss;
  bool fi_linear = false;
  fit->add_option("--input", fi_in, "Spectrum CSV (axis,intensity)")->required();
  fit->add_option("--peaks", fi_peaks, "Number of peaks")->check(CLI::Range(1, 20));
  fit->add_option("--gauss-fwhm", fi_gauss, "Fix the Gaussian width (instrument resolution)");
  fit->add_flag("--linear-baseline", fi_linear, "Fit a sloped baseline");
  fit->add_option("--out", fi_out, "JSON output");
  on(fit, [&] {
    const auto s = io::spectrum_from_csv(io::read_text(ctx.in(fi_in)));
    specfit::FitOptions fo;
    fo.n_peaks = fi_peaks;
    fo.fixed_gauss_fwhm = fi_gauss;
    fo.linear_baseline = fi_linear;
    const auto r = specfit::fit_spectrum(s, fo);
    for (std::size_t k = 0; k < r.peaks.size(); ++k)
    {
      std::printf("peak %zu: centre %.4f ueV, Lorentz FWHM %.4f, Gauss FWHM %.4f", k, r.peaks[k].center,
                  r.peaks[k].lorentz_fwhm, r.peaks[k].gauss_fwhm);
      // Q needs an absolute energy axis.
      if (r.peaks[k].center > 0.0) std::printf(", Q = %.6g", specfit::q_from_fit(r, k));
      std::printf("\n");
    }
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    if (!fi_out.empty()) ctx.write_json(fi_out, io::fit_to_json(r));
    if (!r.converged) throw NumericalError("fit did not converge");
  });

  // plot
  auto* plt = app.add_subcommand("plot", "Render a CSV output as SVG");
  std::string pl_in, pl_out, pl_kind = "auto", pl_title;
  plt->add_option("--input", pl_in, "CSV written by another command")->required();
  plt->add_option("--out", pl_out, "SVG file")->required();
  plt->add_option("--kind", pl_kind, "auto, sweep, map, spectrum or timeseries")
      ->check(CLI::IsMember({"auto", "sweep", "map", "spectrum", "timeseries"}));
  plt->add_option("--title", pl_title, "Plot title");
  on(plt, [&] { ctx.write(pl_out, plot_file(io::parse_csv(io::read_text(ctx.in(pl_in))), pl_kind, pl_title)); });

  // reproduce
  auto* rep = app.add_subcommand("reproduce", "Compare computed values with the published targets");
  std::string r_target, r_design, r_records;
  pipeline::CavityRunOptions ropt;
  ropt.steps_after_source = 20000;
  ropt.snapshot_steps = 5000;
  rep->add_option("target", r_target, "cqed, table1 or fdtd")->required()->check(CLI::IsMember({"cqed", "table1", "fdtd"}));
  rep->add_option("--resolution", ropt.resolution, "FDTD cells per a")->check(CLI::Range(8, 200));
  rep->add_option("--steps-after", ropt.steps_after_source, "FDTD steps after the source turns off");
  rep->add_option("--design", r_design, "Design file for fdtd (default: shipped L4/3)");
  rep->add_option("--records", r_records, "Cavity records for table1 (default: shipped table)");
  on(rep, [&] {
    const fs::path m = ctx.workspace / "manifest.json";
    if (fs::exists(m)) {
      const auto stale = pipeline::stale_inputs(m);
      if (!stale.empty()) throw ParameterError("workspace outputs are stale (input changed: " + stale.front() + ")");
    }
    if (r_target == "cqed") rc = report_exit(pipeline::reproduce_cqed());
    else if (r_target == "table1") {
      const auto j = ordered_json::parse(io::read_text(ctx.in(r_records.empty() ? data_dir() / "table1.json" : fs::path(r_records))));
      rc = report_exit(pipeline::reproduce_table1(io::records_from_json(j)));
    } else {
      ropt.threads = ctx.threads;
      const auto d = io::read_design(ctx.in(r_design.empty() ? data_dir() / "l4_3_minkov.json" : fs::path(r_design)));
      rc = report_exit(pipeline::reproduce_fdtd(d, ropt));
    }
  });

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Run the stages of a JSON config in order");
  std::string pi_config;
  pipe->add_option("config", pi_config, "Pipeline config JSON")->required();
  on(pipe, [&] {
    if (ctx.in_pipeline) throw ParameterError("pipelines do not nest");
    rc = run_pipeline(pi_config, ctx, !workspace.empty());
  });

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    throw ParameterError(e.what());
  }
  if (!ctx.in_pipeline) {
    if (!workspace.empty()) ctx.workspace = workspace;
    ctx.seed = seed;
    ctx.manifest = pipeline::RunManifest(seed);
    if (threads > 0) ctx.threads = threads;
    else if (const char* env = std::getenv("PHC_THREADS"); env && *env) {
      int t = 0;
      const auto r = std::from_chars(env, env + std::strlen(env), t);
      if (r.ec != std::errc() || t < 1) throw ParameterError("PHC_THREADS must be a positive integer");
      ctx.threads = t;
    }
  }
  for (auto& [sub, fn] : actions)
    if (sub->parsed()) fn();
  if (!ctx.in_pipeline && ctx.wrote && !pipe->parsed()) ctx.manifest.write(ctx.out("manifest.json"));
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run_cli(args, ctx);
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const GeometryError& e) {
    std::cerr << "geometry error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

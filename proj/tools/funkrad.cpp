// funkrad: command-line front end for the spherical-mean transform library.
//
// Every run echoes its fully resolved configuration as the first stdout line
// (`config: {...}`); report files repeat it as a `# config: {...}` header.
// Identical configuration and seed produce byte-identical artifacts.
//
// Exit codes: 0 success, 2 validation failure (bad arguments, malformed
// files), 3 numerical failure (e.g. CG no-convergence when configured fatal).

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <funkrad/errors.hpp>
#include <funkrad/fields.hpp>
#include <funkrad/geometry.hpp>
#include <funkrad/kaczmarz.hpp>
#include <funkrad/parallel.hpp>
#include <funkrad/range.hpp>
#include <funkrad/rng.hpp>
#include <funkrad/transform.hpp>

using nlohmann::json;
using namespace funkrad;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Geometry mini-language:  full:R=1.5,nd=180,nr=160[,rmin=..,rmax=..]
//                          partial:delta=0.3[,R=..,nd=..,nr=..,rmin=..,rmax=..]
// or inline JSON (leading '{'), the same schema ScanGeometry serializes to.
// ---------------------------------------------------------------------------
ScanGeometry parse_geometry(const std::string& text) {
  if (!text.empty() && text.front() == '{') return ScanGeometry::from_json(text);
  std::string head = text, rest;
  if (auto colon = text.find(':'); colon != std::string::npos) {
    head = text.substr(0, colon);
    rest = text.substr(colon + 1);
  }
  if (head != "full" && head != "partial")
    throw ValidationError("geometry: expected 'full:...' or 'partial:...', got '" +
                          text + "'");
  double R = 1.5, delta = 0.3, rmin = -1.0, rmax = -1.0;
  int nd = 180, nr = 160;
  bool saw_delta = false;
  std::stringstream ss(rest);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw ValidationError("geometry: expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    try {
      if (key == "R") R = std::stod(val);
      else if (key == "delta") { delta = std::stod(val); saw_delta = true; }
      else if (key == "nd") nd = std::stoi(val);
      else if (key == "nr") nr = std::stoi(val);
      else if (key == "rmin") rmin = std::stod(val);
      else if (key == "rmax") rmax = std::stod(val);
      else throw ValidationError("geometry: unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw ValidationError("geometry: bad value for '" + key + "': " + val);
    } catch (const std::out_of_range&) {
      throw ValidationError("geometry: value out of range for '" + key + "'");
    }
  }
  if (head == "full") {
    if (saw_delta)
      throw ValidationError("geometry: 'delta' only applies to partial scans");
    return ScanGeometry::full_scan(R, nd, nr, rmin, rmax);
  }
  return ScanGeometry::partial_scan(R, delta, nd, nr, rmin, rmax);
}

Vec2 parse_vec2(const std::string& text, const char* what) {
  double a = 0.0, b = 0.0;
  char extra = 0;
  if (std::sscanf(text.c_str(), "%lf,%lf%c", &a, &b, &extra) != 2)
    throw ValidationError(std::string(what) + ": expected 'x,y', got '" + text +
                          "'");
  return {a, b};
}

std::vector<double> parse_doubles(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (...) {
      throw ValidationError(std::string(what) + ": bad number '" + item + "'");
    }
  }
  if (out.empty())
    throw ValidationError(std::string(what) + ": empty list");
  return out;
}

// disk:cx,cy,radius,amp | gauss:cx,cy,width,amp
PhantomPrimitive parse_primitive(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw ValidationError("phantom spec: expected 'disk:...' or 'gauss:...', got '" +
                          text + "'");
  const std::string head = text.substr(0, colon);
  const auto nums = parse_doubles(text.substr(colon + 1), "phantom spec");
  if (nums.size() != 4)
    throw ValidationError("phantom spec: expected cx,cy,size,amp in '" + text +
                          "'");
  PhantomPrimitive p;
  if (head == "disk") p.kind = PhantomPrimitive::Kind::kDisk;
  else if (head == "gauss") p.kind = PhantomPrimitive::Kind::kGaussian;
  else throw ValidationError("phantom spec: unknown primitive '" + head + "'");
  p.center = {nums[0], nums[1]};
  p.size = nums[2];
  p.amplitude = nums[3];
  return p;
}

// ---------------------------------------------------------------------------
// Config plumbing: each subcommand declares bindings name -> variable.  A
// `--config file.json` (scanned before CLI11 runs) fills the variables first,
// so command-line flags override file values.  The same table produces the
// resolved-config echo.
// ---------------------------------------------------------------------------
using BoundValue =
    std::variant<int*, double*, bool*, std::string*, std::uint64_t*>;

struct Binding {
  std::string name;
  BoundValue ptr;
};

class ConfigTable {
 public:
  void bind(const std::string& name, BoundValue ptr) {
    bindings_.push_back({name, ptr});
  }

  void load(const json& j) {
    for (auto& b : bindings_) {
      if (!j.contains(b.name)) continue;
      const json& v = j.at(b.name);
      try {
        std::visit(
            [&](auto* p) {
              using T = std::remove_pointer_t<decltype(p)>;
              *p = v.get<T>();
            },
            b.ptr);
      } catch (const json::exception& e) {
        throw ValidationError("config: bad value for '" + b.name +
                              "': " + e.what());
      }
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool known = false;
      for (const auto& b : bindings_)
        if (b.name == it.key()) known = true;
      if (!known)
        throw ValidationError("config: unknown key '" + it.key() + "'");
    }
  }

  json echo() const {
    json j;
    for (const auto& b : bindings_)
      std::visit([&](auto* p) { j[b.name] = *p; }, b.ptr);
    return j;
  }

 private:
  std::vector<Binding> bindings_;
};

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    json j = json::parse(ss.str());
    if (!j.is_object())
      throw ValidationError("config: '" + path + "' is not a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw ValidationError("config: cannot parse '" + path + "': " + e.what());
  }
}

// Pre-scan for `--config PATH` / `--config=PATH` so file values are applied
// before CLI11 parses the remaining flags.
std::optional<std::string> scan_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config") {
      if (i + 1 >= argc)
        throw ValidationError("config: --config needs a file path");
      return std::string(argv[i + 1]);
    }
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return std::nullopt;
}

void echo_config(const std::string& command, const json& extra) {
  json j = extra;
  j["command"] = command;
  std::cout << "config: " << j.dump() << "\n";
}

class Report {
 public:
  explicit Report(const std::string& command, const json& config)
      : header_("# config: ") {
    json j = config;
    j["command"] = command;
    header_ += j.dump();
    header_ += "\n";
  }

  Report& operator<<(const std::string& s) {
    body_ += s;
    return *this;
  }

  void finish(const std::string& out_path, const json& summary) {
    body_ += "summary: " + summary.dump() + "\n";
    if (out_path.empty()) {
      std::cout << body_;
    } else {
      std::ofstream out(out_path, std::ios::binary);
      if (!out)
        throw ValidationError("cannot open output file '" + out_path + "'");
      out << header_ << body_;
    }
  }

 private:
  std::string header_;
  std::string body_;
};

// ---------------------------------------------------------------------------
// Subcommand options
// ---------------------------------------------------------------------------

struct CommonOut {
  std::string out;
};

int cmd_phantom(const std::vector<std::string>& specs, int nx, int ny,
                int random_n, std::uint64_t seed, const std::string& mask,
                const std::string& out, const json& echo) {
  PhantomSpec ps;
  for (const auto& s : specs) ps.primitives.push_back(parse_primitive(s));
  ps.random_gaussians = random_n;
  ps.seed = seed;
  if (mask == "half-ball") ps.mask = SupportMaskKind::kHalfBall;
  else if (mask != "none")
    throw ValidationError("phantom: mask must be 'none' or 'half-ball'");
  if (ps.primitives.empty() && random_n == 0)
    throw ValidationError(
        "degenerate-input: phantom needs at least one primitive or --random");
  GridDensity f = make_phantom(ps, nx, ny);
  echo_config("phantom", echo);
  write_grid(f, out);
  std::cout << "wrote " << out << " (" << nx << "x" << ny << ")\n";
  return 0;
}

int cmd_forward(const std::string& in, const std::string& geom_text,
                const std::string& out, const json& echo) {
  GridDensity f = read_grid(in);
  ScanGeometry geom = parse_geometry(geom_text);
  Sinogram s = forward(f, geom);
  echo_config("forward", echo);
  write_sinogram(s, out);
  std::cout << "wrote " << out << " (" << geom.n_detectors << "x"
            << geom.n_radii << ")\n";
  return 0;
}

int cmd_backproject(const std::string& in, int nx, int ny, bool use_dual,
                    const std::string& out, const json& echo) {
  Sinogram s = read_sinogram(in);
  Sinogram data = s;
  data.kind = SinogramKind::kDensity;
  GridDensity f = use_dual ? dual(data, s.geom, nx, ny)
                           : backproject(s, s.geom, nx, ny);
  echo_config("backproject", echo);
  write_grid(f, out);
  std::cout << "wrote " << out << " (" << nx << "x" << ny << ")\n";
  return 0;
}

int cmd_adjoint_check(const std::string& geom_text, int nx, int levels,
                      std::uint64_t seed, double edge_amp,
                      const std::string& out, const json& echo) {
  if (levels < 1 || levels > 6)
    throw ValidationError("adjoint-check: levels must be in [1, 6]");
  ScanGeometry base = parse_geometry(geom_text);
  echo_config("adjoint-check", echo);
  Report rep("adjoint-check", echo);
  rep << "level    nx    nd    nr   residual           factor\n";
  std::vector<double> residuals;
  json jres = json::array(), jfac = json::array();
  for (int l = 0; l < levels; ++l) {
    const int scale = 1 << l;
    ScanGeometry g = base;
    g.n_detectors = base.n_detectors * scale;
    g.n_radii = (base.n_radii - 1) * scale + 1;
    PhantomSpec ps;
    ps.random_gaussians = 3;
    ps.seed = seed;
    GridDensity f = make_phantom(ps, nx * scale, nx * scale);
    Sinogram u = random_smooth_weight(g, seed + 1, edge_amp);
    const double r = adjoint_residual(f, u, g);
    residuals.push_back(r);
    jres.push_back(r);
    char line[128];
    if (l == 0) {
      std::snprintf(line, sizeof line, "%5d %5d %5d %5d   %-17.10e  -\n", l,
                    nx * scale, g.n_detectors, g.n_radii, r);
    } else {
      const double factor = residuals[l - 1] / r;
      jfac.push_back(factor);
      std::snprintf(line, sizeof line, "%5d %5d %5d %5d   %-17.10e  %.3f\n", l,
                    nx * scale, g.n_detectors, g.n_radii, r, factor);
    }
    rep << line;
  }
  json summary;
  summary["residuals"] = jres;
  summary["factors"] = jfac;
  rep.finish(out, summary);
  return 0;
}

int cmd_reconstruct(const std::string& in, int nx, int ny, KaczmarzConfig cfg,
                    const std::string& truth_path, const std::string& mask,
                    const std::string& out, const std::string& report_path,
                    const json& echo) {
  Sinogram data = read_sinogram(in);
  std::optional<GridDensity> truth;
  if (!truth_path.empty()) truth = read_grid(truth_path);
  std::optional<std::vector<std::uint8_t>> support;
  if (mask == "half-ball") support = half_ball_mask(nx, ny);
  else if (mask != "none")
    throw ValidationError("reconstruct: mask must be 'none' or 'half-ball'");
  echo_config("reconstruct", echo);
  auto [rec, conv] = reconstruct(data, cfg, nx, ny,
                                 truth ? &*truth : nullptr,
                                 support ? &*support : nullptr);
  if (!out.empty()) {
    write_grid(rec, out);
    std::cout << "wrote " << out << " (" << nx << "x" << ny << ")\n";
  }
  Report rep("reconstruct", echo);
  rep << conv.to_table();
  json summary;
  summary["iterations"] = conv.iterations;
  summary["lambda_max"] = conv.lambda_max;
  summary["theta"] = conv.theta;
  summary["final_residual"] = conv.residual_norms.back();
  if (!conv.error_norms.empty())
    summary["final_error"] = conv.error_norms.back();
  summary["stopped_early"] = conv.stopped_early;
  summary["cg_failures"] = conv.any_cg_failure;
  rep.finish(report_path, summary);
  return 0;
}

int cmd_range_build(int deg, int freq, const std::string& amps_text, bool sine,
                    double R, const std::string& out, const json& echo) {
  std::vector<double> amps;
  if (amps_text.empty()) {
    amps.assign(static_cast<std::size_t>(deg) + 1, 0.0);
    amps.back() = 1.0;
  } else {
    amps = parse_doubles(amps_text, "range-build amps");
  }
  Annihilator a = build_annihilator(deg, freq, amps, R, sine);
  const MomentResidualReport mr = moment_residuals(a);
  echo_config("range-build", echo);
  const std::string text = a.to_json() + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw ValidationError("cannot open output file '" + out + "'");
    f << text;
    std::cout << "wrote " << out << "\n";
  }
  std::cout << "certified: max moment residual " << fmt17(mr.max_abs) << "\n";
  return 0;
}

int cmd_range_check(const std::string& in,
                    const std::vector<std::string>& annihilator_paths, int deg,
                    int freq, const std::string& amps_text, bool sine,
                    const std::string& out, const json& echo) {
  Sinogram g = read_sinogram(in);
  struct Entry {
    std::string source;
    Annihilator a;
  };
  std::vector<Entry> entries;
  for (const auto& p : annihilator_paths) {
    std::ifstream f(p);
    if (!f) throw ValidationError("range-check: cannot open '" + p + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    entries.push_back({p, Annihilator::from_json(ss.str())});
  }
  if (freq > 0) {
    std::vector<double> amps;
    if (amps_text.empty()) {
      amps.assign(static_cast<std::size_t>(deg) + 1, 0.0);
      amps.back() = 1.0;
    } else {
      amps = parse_doubles(amps_text, "range-check amps");
    }
    entries.push_back({"inline", build_annihilator(deg, freq, amps,
                                                   g.geom.detector_radius,
                                                   sine)});
  }
  if (entries.empty())
    throw ValidationError(
        "range-check: provide --annihilator files and/or --deg/--freq");
  echo_config("range-check", echo);
  Report rep("range-check", echo);
  rep << "source                degree  residual\n";
  json jres = json::array();
  for (const auto& e : entries) {
    const double r = range_residual(g, e.a);
    jres.push_back(r);
    char line[160];
    std::snprintf(line, sizeof line, "%-20s  %6d  %.10e\n", e.source.c_str(),
                  e.a.degree, r);
    rep << line;
  }
  json summary;
  summary["residuals"] = jres;
  rep.finish(out, summary);
  return 0;
}

int cmd_kernel_probe(const std::string& geom_text, const std::string& base_text,
                     const std::string& dir_text, double dmin, double dmax,
                     int n, const std::string& out, const json& echo) {
  ScanGeometry geom = parse_geometry(geom_text);
  const Vec2 base = parse_vec2(base_text, "kernel-probe base");
  const Vec2 dir = parse_vec2(dir_text, "kernel-probe dir");
  NormalProbeReport pr = kernel_probe(base, dir, geom, dmin, dmax, n);
  echo_config("kernel-probe", echo);
  Report rep("kernel-probe", echo);
  rep << "distance             kernel\n";
  for (std::size_t i = 0; i < pr.distances.size(); ++i) {
    char line[96];
    std::snprintf(line, sizeof line, "%-19.12e  %.12e\n", pr.distances[i],
                  pr.values[i]);
    rep << line;
  }
  json summary;
  summary["slope"] = pr.slope;
  summary["amplitude"] = pr.amplitude;
  summary["max_log_residual"] = pr.max_log_residual;
  rep.finish(out, summary);
  return 0;
}

int cmd_spectrum(const std::string& geom_text, int nx, int ny, int klo,
                 int khi, const std::string& mask, const std::string& out,
                 const json& echo) {
  ScanGeometry geom = parse_geometry(geom_text);
  std::vector<std::uint8_t> m;
  if (mask == "half-ball") m = half_ball_mask(nx, ny);
  else if (mask == "disk") m = disk_mask(nx, ny);
  else if (mask != "")
    throw ValidationError("spectrum: mask must be 'disk' or 'half-ball'");
  SpectrumReport sr = spectrum_probe(geom, nx, ny, m, klo, khi);
  echo_config("spectrum", echo);
  Report rep("spectrum", echo);
  rep << "    k  eigenvalue\n";
  for (std::size_t k = 0; k < sr.eigenvalues.size(); ++k) {
    char line[64];
    std::snprintf(line, sizeof line, "%5zu  %.12e\n", k + 1,
                  sr.eigenvalues[k]);
    rep << line;
  }
  json summary;
  summary["slope"] = sr.slope;
  summary["k_lo"] = sr.k_lo;
  summary["k_hi"] = sr.k_hi;
  summary["n_masked"] = sr.n_masked;
  summary["lambda_min"] = sr.lambda_min;
  rep.finish(out, summary);
  return 0;
}

int cmd_geom_check(const std::string& geom_text, int samples,
                   std::uint64_t seed, const std::string& out,
                   const json& echo) {
  if (samples < 1)
    throw ValidationError("geom-check: samples must be >= 1");
  ScanGeometry geom = parse_geometry(geom_text);
  SphericalIncidence inc(geom.detector_radius);
  Rng rng(seed);
  const double tmax = geom.arc_half_angle();

  auto draw_ball = [&] {
    while (true) {
      Vec2 x{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
      if (x.norm2() < 1.0) return x;
    }
  };
  auto draw_t = [&] {
    return geom.is_full() ? rng.uniform(0.0, 2.0 * M_PI)
                          : rng.uniform(-tmax, tmax);
  };

  // (a) well-posedness determinant over admissible (x, t, r)
  double min_det = kInfinity;
  for (int k = 0; k < samples; ++k) {
    const Vec2 x = draw_ball();
    const double t = draw_t();
    const double r = rng.uniform(geom.r_min, geom.r_max);
    min_det = std::min(min_det, std::fabs(phi_determinant(inc, x, t, r)));
  }
  // (b) conjugate gap over random distinct interior pairs
  double min_gap = kInfinity;
  int empty_sets = 0;
  for (int k = 0; k < samples; ++k) {
    Vec2 x = draw_ball(), y = draw_ball();
    while ((x - y).norm2() < 1e-12) y = draw_ball();
    const double gap = conjugate_gap(inc, x, y, geom);
    if (gap == kInfinity) ++empty_sets;
    else min_gap = std::min(min_gap, gap);
  }
  // (c) incidence-hyperplane identity
  double max_hyper = 0.0;
  for (int k = 0; k < samples; ++k)
    max_hyper = std::max(max_hyper, hyperplane_check(draw_ball(), draw_t(), geom));
  // (d) the sphere-pair transversality condition |y + z| > 2: detector pairs
  // satisfying it must keep a positive conjugate gap between the two sphere
  // families; sampled here through interior points seen by both detectors.
  int pair_samples = 0;
  double min_pair_det = kInfinity;
  while (pair_samples < samples) {
    const double t1 = draw_t(), t2 = draw_t();
    const Vec2 y1 = inc.detector(t1), y2 = inc.detector(t2);
    if ((y1 + y2).norm() <= 2.0) continue;
    ++pair_samples;
    const Vec2 x = draw_ball();
    min_pair_det = std::min(
        min_pair_det, std::fabs(phi_determinant(inc, x, t1, (x - y1).norm())));
  }

  echo_config("geom-check", echo);
  Report rep("geom-check", echo);
  char line[160];
  std::snprintf(line, sizeof line, "min |det Phi|          %.12e\n", min_det);
  rep << line;
  std::snprintf(line, sizeof line, "min conjugate gap      %.12e  (empty sets: %d)\n",
                min_gap, empty_sets);
  rep << line;
  std::snprintf(line, sizeof line, "max hyperplane defect  %.12e\n", max_hyper);
  rep << line;
  std::snprintf(line, sizeof line, "min |det Phi| on |y+z|>2 pairs  %.12e\n",
                min_pair_det);
  rep << line;
  json summary;
  summary["min_det"] = min_det;
  summary["min_conjugate_gap"] = min_gap;
  summary["empty_hit_sets"] = empty_sets;
  summary["max_hyperplane_defect"] = max_hyper;
  summary["min_pair_det"] = min_pair_det;
  summary["samples"] = samples;
  rep.finish(out, summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spherical-mean transform toolkit: phantoms, forward/dual "
               "transforms, Kaczmarz reconstruction, range conditions, and "
               "geometry diagnostics"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "Max worker threads (0 = FUNKRAD_THREADS or hardware)");

  // Shared option storage. Each subcommand registers only what it uses.
  std::string in, out, report_path, geom_text = "full:R=1.5,nd=180,nr=160";
  std::string truth_path, mask = "none", amps_text, base_text = "0,0";
  std::string dir_text = "1,0", config_path;
  std::vector<std::string> specs, annihilator_paths;
  int nx = 64, ny = 64, random_n = 0, levels = 3, deg = 1, freq = 2;
  int klo = 10, khi = 100, n_probe = 9, samples = 1000;
  std::uint64_t seed = 1;
  double edge_amp = 0.4, dmin = 1e-3, dmax = 1e-2, R = 1.5;
  bool sine = false, use_dual = false;
  KaczmarzConfig kcfg;

  // One table per subcommand (for the resolved-config echo) plus a union
  // table that applies/validates --config files before CLI11 parses.
  std::map<const CLI::App*, ConfigTable> tables;
  ConfigTable union_table;
  auto opt = [&](CLI::App* cmd, const std::string& name, auto& var,
                 const std::string& help) {
    tables[cmd].bind(name, &var);
    union_table.bind(name, &var);
    return cmd->add_option("--" + name, var, help);
  };

  auto add_config_opt = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "JSON file with option defaults (flags override)");
  };

  // phantom
  auto* c_phantom = app.add_subcommand("phantom", "Rasterize a phantom grid");
  c_phantom->add_option("--spec", specs,
                        "Primitive: disk:cx,cy,r,amp or gauss:cx,cy,w,amp");
  opt(c_phantom, "nx", nx, "Grid cells in x");
  opt(c_phantom, "ny", ny, "Grid cells in y");
  opt(c_phantom, "random", random_n, "Extra random gaussians");
  opt(c_phantom, "seed", seed, "RNG seed");
  opt(c_phantom, "mask", mask, "Support mask: none | half-ball");
  opt(c_phantom, "out", out, "Output grid file")->required();
  add_config_opt(c_phantom);

  // forward
  auto* c_forward = app.add_subcommand("forward", "Apply the forward transform");
  opt(c_forward, "in", in, "Input grid file")->required();
  opt(c_forward, "geom", geom_text, "Scan geometry");
  opt(c_forward, "out", out, "Output sinogram file")->required();
  add_config_opt(c_forward);

  // backproject
  auto* c_back = app.add_subcommand(
      "backproject", "Apply the backprojection (or plain dual) operator");
  opt(c_back, "in", in, "Input sinogram file")->required();
  opt(c_back, "nx", nx, "Grid cells in x");
  opt(c_back, "ny", ny, "Grid cells in y");
  c_back->add_flag("--dual", use_dual,
                   "Apply the dual transform without the aperture cutoff");
  opt(c_back, "out", out, "Output grid file")->required();
  add_config_opt(c_back);

  // adjoint-check
  auto* c_adj = app.add_subcommand(
      "adjoint-check", "Duality defect table over simultaneous refinements");
  opt(c_adj, "geom", geom_text, "Base scan geometry");
  opt(c_adj, "nx", nx, "Base grid cells per axis");
  opt(c_adj, "levels", levels, "Refinement levels (each doubles sampling)");
  opt(c_adj, "seed", seed, "RNG seed for the phantom/weight pair");
  opt(c_adj, "edge-amp", edge_amp, "Radius-window edge bump amplitude");
  opt(c_adj, "out", out, "Report file (default stdout)");
  add_config_opt(c_adj);

  // reconstruct
  auto* c_rec = app.add_subcommand(
      "reconstruct", "Preconditioned Kaczmarz iteration from a sinogram");
  opt(c_rec, "in", in, "Input sinogram file")->required();
  opt(c_rec, "nx", nx, "Grid cells in x");
  opt(c_rec, "ny", ny, "Grid cells in y");
  opt(c_rec, "omega", kcfg.omega, "Relaxation parameter in (0, 2)");
  opt(c_rec, "theta-rel", kcfg.theta_rel,
      "Regularization as a fraction of lambda_max");
  opt(c_rec, "iters", kcfg.max_iters, "Max outer sweeps");
  opt(c_rec, "stop-tol", kcfg.stop_tol,
      "Stop when residual <= stop-tol * initial residual");
  opt(c_rec, "cg-tol", kcfg.cg_tol, "Inner CG relative tolerance");
  opt(c_rec, "cg-iters", kcfg.cg_max_iters, "Inner CG max iterations");
  opt(c_rec, "power-iters", kcfg.power_iters,
      "Power iterations for lambda_max");
  opt(c_rec, "seed", kcfg.seed, "Seed for the power-iteration start");
  c_rec->add_flag("--cg-fatal", kcfg.cg_failure_fatal,
                  "Treat CG non-convergence as a numerical failure (exit 3)");
  opt(c_rec, "truth", truth_path, "Reference grid for the error column");
  opt(c_rec, "mask", mask, "Support projection: none | half-ball");
  opt(c_rec, "out", out, "Output grid file");
  opt(c_rec, "report", report_path, "Convergence report file (default stdout)");
  add_config_opt(c_rec);

  // range-build
  auto* c_rb = app.add_subcommand(
      "range-build", "Construct and certify a harmonic annihilator");
  opt(c_rb, "deg", deg, "Polynomial degree k in (s - R^2)");
  opt(c_rb, "freq", freq, "Harmonic frequency q (must exceed deg)");
  opt(c_rb, "amps", amps_text, "k+1 amplitudes (default 0,..,0,1)");
  c_rb->add_flag("--sine", sine, "Use sin(q t) instead of cos(q t)");
  opt(c_rb, "R", R, "Detector radius");
  opt(c_rb, "out", out, "Output annihilator JSON (default stdout)");
  add_config_opt(c_rb);

  // range-check
  auto* c_rc = app.add_subcommand(
      "range-check", "Data-consistency residuals against annihilators");
  opt(c_rc, "in", in, "Input sinogram file")->required();
  c_rc->add_option("--annihilator", annihilator_paths,
                   "Annihilator JSON file (repeatable)");
  opt(c_rc, "deg", deg, "Inline annihilator degree");
  opt(c_rc, "freq", freq, "Inline annihilator frequency (0 disables)");
  opt(c_rc, "amps", amps_text, "Inline amplitudes (default 0,..,0,1)");
  c_rc->add_flag("--sine", sine, "Inline: sine instead of cosine");
  opt(c_rc, "out", out, "Report file (default stdout)");
  add_config_opt(c_rc);

  // kernel-probe
  auto* c_kp = app.add_subcommand(
      "kernel-probe", "Log-log fit of the normal-operator kernel singularity");
  opt(c_kp, "geom", geom_text, "Scan geometry");
  opt(c_kp, "base", base_text, "Base point x,y");
  opt(c_kp, "dir", dir_text, "Probe direction x,y");
  opt(c_kp, "dmin", dmin, "Smallest probe distance");
  opt(c_kp, "dmax", dmax, "Largest probe distance");
  opt(c_kp, "n", n_probe, "Number of log-spaced probes");
  opt(c_kp, "out", out, "Report file (default stdout)");
  add_config_opt(c_kp);

  // spectrum
  auto* c_sp = app.add_subcommand(
      "spectrum", "Eigenvalues of the discrete normal operator");
  opt(c_sp, "geom", geom_text, "Scan geometry");
  opt(c_sp, "nx", nx, "Grid cells in x");
  opt(c_sp, "ny", ny, "Grid cells in y");
  opt(c_sp, "klo", klo, "Decay-fit window start (1-based)");
  opt(c_sp, "khi", khi, "Decay-fit window end");
  opt(c_sp, "mask", mask, "Cell mask: disk | half-ball");
  opt(c_sp, "out", out, "Report file (default stdout)");
  add_config_opt(c_sp);

  // geom-check
  auto* c_gc = app.add_subcommand(
      "geom-check", "Sample well-posedness determinant, conjugate gaps, and "
                    "the hyperplane identity");
  opt(c_gc, "geom", geom_text, "Scan geometry");
  opt(c_gc, "samples", samples, "Samples per check");
  opt(c_gc, "seed", seed, "RNG seed");
  opt(c_gc, "out", out, "Report file (default stdout)");
  add_config_opt(c_gc);

  try {
    if (auto cfg_path = scan_config_path(argc, argv)) {
      // Apply file values before CLI11 so explicit flags win.
      union_table.load(load_config_file(*cfg_path));
    }
    app.parse(argc, argv);
    if (threads > 0) set_max_threads(threads);

    // `mask` default depends on the subcommand.
    if (c_sp->parsed() && mask == "none") mask = "disk";

    const CLI::App* active = nullptr;
    for (const auto* cmd : app.get_subcommands())
      if (cmd->parsed()) active = cmd;
    json echo = active ? tables[active].echo() : json::object();
    echo["threads"] = max_threads();

    if (c_phantom->parsed()) {
      json spec_arr = json::array();
      for (const auto& s : specs) spec_arr.push_back(s);
      echo["spec"] = spec_arr;
      return cmd_phantom(specs, nx, ny, random_n, seed, mask, out, echo);
    }
    if (c_forward->parsed()) return cmd_forward(in, geom_text, out, echo);
    if (c_back->parsed()) {
      echo["dual"] = use_dual;
      return cmd_backproject(in, nx, ny, use_dual, out, echo);
    }
    if (c_adj->parsed())
      return cmd_adjoint_check(geom_text, nx, levels, seed, edge_amp, out,
                               echo);
    if (c_rec->parsed()) {
      echo["cg-fatal"] = kcfg.cg_failure_fatal;
      return cmd_reconstruct(in, nx, ny, kcfg, truth_path, mask, out,
                             report_path, echo);
    }
    if (c_rb->parsed()) {
      echo["sine"] = sine;
      return cmd_range_build(deg, freq, amps_text, sine, R, out, echo);
    }
    if (c_rc->parsed()) {
      echo["sine"] = sine;
      json ann = json::array();
      for (const auto& p : annihilator_paths) ann.push_back(p);
      echo["annihilator"] = ann;
      return cmd_range_check(in, annihilator_paths, deg, freq, amps_text, sine,
                             out, echo);
    }
    if (c_kp->parsed())
      return cmd_kernel_probe(geom_text, base_text, dir_text, dmin, dmax,
                              n_probe, out, echo);
    if (c_sp->parsed())
      return cmd_spectrum(geom_text, nx, ny, klo, khi, mask, out, echo);
    if (c_gc->parsed())
      return cmd_geom_check(geom_text, samples, seed, out, echo);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

#include "funkrad/fields.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "funkrad/errors.hpp"
#include "funkrad/rng.hpp"
#include "grid_detail.hpp"

namespace funkrad {

namespace {

constexpr std::size_t kMaxCells = std::size_t{1} << 26;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void fail_open(const std::string& path, const char* mode) {
  throw ValidationError(std::string("io: cannot ") + mode + " '" + path + "'");
}

}  // namespace

GridDensity::GridDensity(int nx_, int ny_) : nx(nx_), ny(ny_) {
  validate();
  values.assign(static_cast<std::size_t>(nx) * ny, 0.0);
}

void GridDensity::validate() const {
  if (nx < 2 || ny < 2)
    throw ValidationError("grid: need nx, ny >= 2, got " + std::to_string(nx) +
                          "x" + std::to_string(ny));
  if (static_cast<std::size_t>(nx) * ny > kMaxCells)
    throw ValidationError("too-large: grid " + std::to_string(nx) + "x" +
                          std::to_string(ny) + " exceeds the cell limit");
  if (!values.empty() && values.size() != static_cast<std::size_t>(nx) * ny)
    throw ValidationError("shape-mismatch: grid holds " +
                          std::to_string(values.size()) + " values, expected " +
                          std::to_string(static_cast<std::size_t>(nx) * ny));
  if (!mask.empty() && mask.size() != static_cast<std::size_t>(nx) * ny)
    throw ValidationError("shape-mismatch: mask size " +
                          std::to_string(mask.size()) + " does not match grid");
}

Sinogram::Sinogram(const ScanGeometry& g, SinogramKind k) : geom(g), kind(k) {
  geom.validate();
  values.assign(static_cast<std::size_t>(geom.n_detectors) * geom.n_radii, 0.0);
}

void Sinogram::validate() const {
  geom.validate();
  const auto want =
      static_cast<std::size_t>(geom.n_detectors) * geom.n_radii;
  if (want > kMaxCells)
    throw ValidationError("too-large: sinogram exceeds the sample limit");
  if (values.size() != want)
    throw ValidationError("shape-mismatch: sinogram holds " +
                          std::to_string(values.size()) +
                          " values, expected " + std::to_string(want));
}

double sample(const GridDensity& f, Vec2 p) {
  detail::Stencil st;
  if (!detail::make_stencil(f.nx, f.ny, p.x, p.y, st)) return 0.0;
  double acc = 0.0;
  for (int k = 0; k < st.count; ++k) acc += st.w[k] * f.values[st.idx[k]];
  return acc;
}

double inner_product_X(const GridDensity& a, const GridDensity& b) {
  if (a.nx != b.nx || a.ny != b.ny)
    throw ValidationError("shape-mismatch: X inner product needs equal grids (" +
                          std::to_string(a.nx) + "x" + std::to_string(a.ny) +
                          " vs " + std::to_string(b.nx) + "x" +
                          std::to_string(b.ny) + ")");
  long double acc = 0.0L;
  const std::size_t n = a.values.size();
  for (std::size_t k = 0; k < n; ++k)
    acc += static_cast<long double>(a.values[k]) * b.values[k];
  return static_cast<double>(acc * a.hx() * a.hy());
}

double norm_X(const GridDensity& a) { return std::sqrt(inner_product_X(a, a)); }

double inner_product_Sigma(const Sinogram& a, const Sinogram& b) {
  if (!(a.geom == b.geom))
    throw ValidationError("geometry-mismatch: Sigma inner product needs "
                          "identical scan geometries");
  const int nd = a.geom.n_detectors;
  const int nr = a.geom.n_radii;
  const double base = a.geom.detector_radius * a.geom.delta_t() * a.geom.delta_r();
  long double acc = 0.0L;
  for (int i = 0; i < nd; ++i) {
    const double wi = a.geom.detector_weight(i);
    long double row = 0.0L;
    const std::size_t off = static_cast<std::size_t>(i) * nr;
    for (int j = 0; j < nr; ++j) {
      const double wj = a.geom.radius_weight(j);
      row += static_cast<long double>(wj) * a.values[off + j] * b.values[off + j];
    }
    acc += row * wi;
  }
  return static_cast<double>(acc * base);
}

double norm_Sigma(const Sinogram& a) {
  return std::sqrt(inner_product_Sigma(a, a));
}

GridDensity make_phantom(const PhantomSpec& spec, int nx, int ny) {
  if (spec.random_gaussians < 0)
    throw ValidationError("phantom: random_gaussians must be >= 0");
  std::vector<PhantomPrimitive> prims = spec.primitives;
  for (const auto& p : prims) {
    if (!(p.size > 0.0))
      throw ValidationError("degenerate-input: phantom primitive size must be "
                            "positive, got " + std::to_string(p.size));
    if (!std::isfinite(p.amplitude) || !std::isfinite(p.center.x) ||
        !std::isfinite(p.center.y))
      throw ValidationError("non-finite-value: phantom primitive parameters");
  }
  Rng rng(spec.seed);
  for (int g = 0; g < spec.random_gaussians; ++g) {
    const double ang = rng.uniform(0.0, 6.28318530717958647692);
    const double rad = rng.uniform(0.0, 0.5);
    PhantomPrimitive p;
    p.kind = PhantomPrimitive::Kind::kGaussian;
    p.center = {rad * std::cos(ang), rad * std::sin(ang)};
    p.size = rng.uniform(0.05, 0.15);
    p.amplitude = rng.uniform(0.5, 1.5);
    prims.push_back(p);
  }
  GridDensity f(nx, ny);
  const bool half = spec.mask == SupportMaskKind::kHalfBall;
  if (half) f.mask = half_ball_mask(nx, ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Vec2 c = f.cell_center(i, j);
      if (c.norm2() >= 1.0) continue;
      if (half && c.x < 0.0) continue;
      double v = 0.0;
      for (const auto& p : prims) {
        const double d2 = (c - p.center).norm2();
        if (p.kind == PhantomPrimitive::Kind::kDisk) {
          // Area-coverage rasterization: cells cut by the disk boundary get
          // the covered fraction, not a hard threshold. Keeps line integrals
          // of the rasterized disk second-order accurate.
          const double dist = std::sqrt(d2);
          const double half_diag = 0.5 * std::hypot(f.hx(), f.hy());
          if (dist <= p.size - half_diag) {
            v += p.amplitude;
          } else if (dist < p.size + half_diag) {
            constexpr int kSub = 8;
            int hits = 0;
            for (int sj = 0; sj < kSub; ++sj)
              for (int si = 0; si < kSub; ++si) {
                const Vec2 q{c.x + ((si + 0.5) / kSub - 0.5) * f.hx(),
                             c.y + ((sj + 0.5) / kSub - 0.5) * f.hy()};
                if ((q - p.center).norm2() < p.size * p.size) ++hits;
              }
            v += p.amplitude * hits / (kSub * kSub);
          }
        } else {
          v += p.amplitude * std::exp(-d2 / (2.0 * p.size * p.size));
        }
      }
      f.at(i, j) = v;
    }
  }
  return f;
}

std::vector<std::uint8_t> disk_mask(int nx, int ny) {
  GridDensity probe(nx, ny);
  std::vector<std::uint8_t> m(static_cast<std::size_t>(nx) * ny, 0);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      if (probe.cell_center(i, j).norm2() < 1.0)
        m[static_cast<std::size_t>(j) * nx + i] = 1;
  return m;
}

std::vector<std::uint8_t> half_ball_mask(int nx, int ny) {
  GridDensity probe(nx, ny);
  std::vector<std::uint8_t> m(static_cast<std::size_t>(nx) * ny, 0);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Vec2 c = probe.cell_center(i, j);
      if (c.norm2() < 1.0 && c.x >= 0.0)
        m[static_cast<std::size_t>(j) * nx + i] = 1;
    }
  return m;
}

Sinogram random_smooth_weight(const ScanGeometry& geom, std::uint64_t seed,
                              double edge_amplitude) {
  geom.validate();
  Sinogram u(geom, SinogramKind::kDensity);
  Rng rng(seed);
  const double span = geom.r_max - geom.r_min;
  struct Mode {
    double m, phase, amp, center, width;
  };
  Mode modes[3];
  for (auto& md : modes) {
    md.m = rng.uniform_int(7);
    md.phase = rng.uniform(0.0, 6.28318530717958647692);
    md.amp = rng.uniform(0.5, 1.5);
    md.center = rng.uniform(geom.r_min, geom.r_max);
    md.width = span * rng.uniform(0.25, 0.5);
  }
  double edge_amp = 0.0, edge_phase = 0.0, edge_width = 0.0;
  if (edge_amplitude > 0.0) {
    edge_amp = edge_amplitude * rng.uniform(0.5, 1.5);
    edge_phase = rng.uniform(0.0, 6.28318530717958647692);
    edge_width = 0.12 * span;
  }
  for (int i = 0; i < geom.n_detectors; ++i) {
    const double t = geom.detector_angle(i);
    for (int j = 0; j < geom.n_radii; ++j) {
      const double r = geom.radius(j);
      double v = 0.0;
      for (const auto& md : modes) {
        const double dr = r - md.center;
        v += md.amp * std::cos(md.m * t + md.phase) *
             std::exp(-dr * dr / (2.0 * md.width * md.width));
      }
      if (edge_amp > 0.0) {
        const double dlo = r - geom.r_min;
        const double dhi = r - geom.r_max;
        const double prof =
            std::exp(-dlo * dlo / (2.0 * edge_width * edge_width)) +
            std::exp(-dhi * dhi / (2.0 * edge_width * edge_width));
        v += edge_amp * (1.0 + 0.3 * std::cos(t + edge_phase)) * prof;
      }
      u.at(i, j) = v;
    }
  }
  return u;
}

namespace {

void check_writable_values(const std::vector<double>& vals, const char* what) {
  for (double v : vals)
    if (!std::isfinite(v))
      throw NumericalError(std::string("non-finite-value: refusing to write ") +
                           what + " containing NaN/Inf");
}

// Splits text into whitespace-separated tokens starting at pos.
std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& tok, const std::string& context) {
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0')
    throw ValidationError("malformed-header: bad number '" + tok + "' in " +
                          context);
  return v;
}

long parse_long(const std::string& tok, const std::string& context) {
  char* end = nullptr;
  long v = std::strtol(tok.c_str(), &end, 10);
  if (end == tok.c_str() || *end != '\0')
    throw ValidationError("malformed-header: bad integer '" + tok + "' in " +
                          context);
  return v;
}

// Reads all remaining whitespace-separated doubles from the stream.
std::vector<double> read_body(std::istream& is, std::size_t expected,
                              const std::string& path) {
  std::vector<double> vals;
  vals.reserve(expected);
  std::string tok;
  while (is >> tok) {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') {
      // Permit textual nan/inf spellings to reach the finite check below.
      if (tok == "nan" || tok == "-nan" || tok == "inf" || tok == "-inf")
        v = std::strtod(tok.c_str(), nullptr);
      else
        throw ValidationError("malformed-header: bad value '" + tok + "' in '" +
                              path + "'");
    }
    vals.push_back(v);
  }
  if (vals.size() != expected)
    throw ValidationError("shape-mismatch: '" + path + "' holds " +
                          std::to_string(vals.size()) + " values, expected " +
                          std::to_string(expected));
  for (double v : vals)
    if (!std::isfinite(v))
      throw ValidationError("non-finite-value: '" + path +
                            "' contains NaN/Inf samples");
  return vals;
}

}  // namespace

void write_grid(const GridDensity& f, const std::string& path) {
  f.validate();
  if (f.values.empty())
    throw ValidationError("shape-mismatch: grid has no values");
  check_writable_values(f.values, "grid");
  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i)
      if (f.at(i, j) != 0.0 && f.cell_center(i, j).norm2() >= 1.0)
        throw ValidationError(
            "support-violation: grid value nonzero outside the unit ball at "
            "cell (" + std::to_string(i) + ", " + std::to_string(j) + ")");
  std::ofstream os(path);
  if (!os) fail_open(path, "write");
  os << "funkgrid 2 " << f.nx << ' ' << f.ny << " -1 1 -1 1\n";
  for (int j = 0; j < f.ny; ++j) {
    for (int i = 0; i < f.nx; ++i) {
      if (i) os << ' ';
      os << fmt17(f.at(i, j));
    }
    os << '\n';
  }
  if (!os) fail_open(path, "write");
}

GridDensity read_grid(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail_open(path, "read");
  std::string header;
  if (!std::getline(is, header))
    throw ValidationError("malformed-header: '" + path + "' is empty");
  auto tok = tokenize(header);
  if (tok.size() != 8 || tok[0] != "funkgrid")
    throw ValidationError("malformed-header: '" + path +
                          "' is not a funkgrid file");
  long dim = parse_long(tok[1], path);
  if (dim != 2)
    throw ValidationError("dimension-mismatch: '" + path + "' has dimension " +
                          std::to_string(dim) + ", this build supports 2");
  long nx = parse_long(tok[2], path);
  long ny = parse_long(tok[3], path);
  if (nx < 2 || ny < 2 || nx > (1 << 15) || ny > (1 << 15))
    throw ValidationError(nx > (1 << 15) || ny > (1 << 15)
                              ? "too-large: grid dimensions in '" + path + "'"
                              : "malformed-header: bad grid dimensions in '" +
                                    path + "'");
  for (int b = 0; b < 4; ++b) {
    double v = parse_double(tok[4 + b], path);
    double want = (b % 2 == 0) ? -1.0 : 1.0;
    if (v != want)
      throw ValidationError("malformed-header: '" + path +
                            "' bounds must be -1 1 -1 1");
  }
  GridDensity f(static_cast<int>(nx), static_cast<int>(ny));
  f.values = read_body(is, static_cast<std::size_t>(nx) * ny, path);
  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i)
      if (f.at(i, j) != 0.0 && f.cell_center(i, j).norm2() >= 1.0)
        throw ValidationError(
            "support-violation: '" + path +
            "' has a nonzero value outside the unit ball at cell (" +
            std::to_string(i) + ", " + std::to_string(j) + ")");
  return f;
}

void write_sinogram(const Sinogram& u, const std::string& path) {
  u.validate();
  check_writable_values(u.values, "sinogram");
  std::ofstream os(path);
  if (!os) fail_open(path, "write");
  os << "funksino " << u.geom.n_detectors << ' ' << u.geom.n_radii << ' '
     << fmt17(u.geom.detector_radius) << ' ' << fmt17(u.geom.r_min) << ' '
     << fmt17(u.geom.r_max) << ' ';
  if (u.geom.is_full())
    os << "full";
  else
    os << fmt17(*u.geom.delta);
  os << '\n';
  const int nr = u.geom.n_radii;
  for (int i = 0; i < u.geom.n_detectors; ++i) {
    for (int j = 0; j < nr; ++j) {
      if (j) os << ' ';
      os << fmt17(u.at(i, j));
    }
    os << '\n';
  }
  if (!os) fail_open(path, "write");
}

Sinogram read_sinogram(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail_open(path, "read");
  std::string header;
  if (!std::getline(is, header))
    throw ValidationError("malformed-header: '" + path + "' is empty");
  auto tok = tokenize(header);
  if (tok.size() != 7 || tok[0] != "funksino")
    throw ValidationError("malformed-header: '" + path +
                          "' is not a funksino file");
  long nd = parse_long(tok[1], path);
  long nr = parse_long(tok[2], path);
  if (nd < 2 || nr < 2 || nd > (1 << 20) || nr > (1 << 20))
    throw ValidationError(nd > (1 << 20) || nr > (1 << 20)
                              ? "too-large: sinogram dimensions in '" + path + "'"
                              : "malformed-header: bad sinogram dimensions in '" +
                                    path + "'");
  double R = parse_double(tok[3], path);
  double r_min = parse_double(tok[4], path);
  double r_max = parse_double(tok[5], path);
  ScanGeometry g;
  if (tok[6] == "full") {
    g.delta.reset();
    g.cutoff_kind = CutoffKind::kConstantOne;
  } else {
    g.delta = parse_double(tok[6], path);
    g.cutoff_kind = CutoffKind::kSmoothPartial;
  }
  g.detector_radius = R;
  g.n_detectors = static_cast<int>(nd);
  g.n_radii = static_cast<int>(nr);
  g.r_min = r_min;
  g.r_max = r_max;
  g.validate();
  Sinogram u(g, SinogramKind::kFunction);
  u.values = read_body(is, static_cast<std::size_t>(nd) * nr, path);
  return u;
}

}  // namespace funkrad

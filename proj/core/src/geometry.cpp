#include "funkrad/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "funkrad/errors.hpp"

namespace funkrad {

namespace {

constexpr double kPi = 3.14159265358979323846;

double smoothstep5(double v) {
  // Quintic smoothstep: s(0) = s'(0) = s''(0) = 0, s(1) = 1, s'(1) = s''(1) = 0.
  return v * v * v * (10.0 + v * (-15.0 + 6.0 * v));
}

}  // namespace

double CutoffProfile::operator()(double u) const {
  if (kind == CutoffKind::kConstantOne) return 1.0;
  if (u >= 0.0) return 1.0;
  if (u <= -delta || delta <= 0.0) return 0.0;
  return smoothstep5(1.0 + u / delta);
}

ScanGeometry ScanGeometry::full_scan(double detector_radius, int n_detectors,
                                     int n_radii, double r_min, double r_max) {
  ScanGeometry g;
  g.detector_radius = detector_radius;
  g.delta.reset();
  g.n_detectors = n_detectors;
  g.n_radii = n_radii;
  g.r_min = r_min > 0.0 ? r_min : std::max(1e-6, detector_radius - 1.0);
  g.r_max = r_max > 0.0 ? r_max : detector_radius + 1.0;
  g.cutoff_kind = CutoffKind::kConstantOne;
  g.validate();
  return g;
}

ScanGeometry ScanGeometry::partial_scan(double detector_radius, double delta,
                                        int n_detectors, int n_radii,
                                        double r_min, double r_max) {
  ScanGeometry g;
  g.detector_radius = detector_radius;
  g.delta = delta;
  g.n_detectors = n_detectors;
  g.n_radii = n_radii;
  g.r_min = r_min > 0.0 ? r_min : std::max(1e-6, detector_radius - 1.0);
  g.r_max = r_max > 0.0 ? r_max : detector_radius + 1.0;
  g.cutoff_kind = CutoffKind::kSmoothPartial;
  g.validate();
  return g;
}

double ScanGeometry::arc_half_angle() const {
  if (is_full()) return kPi;
  double d = *delta;
  if (d >= detector_radius) return kPi;
  return std::acos(-d / detector_radius);
}

double ScanGeometry::delta_t() const {
  if (is_full()) return 2.0 * kPi / n_detectors;
  return 2.0 * arc_half_angle() / (n_detectors - 1);
}

double ScanGeometry::detector_angle(int i) const {
  if (is_full()) return delta_t() * i;
  return -arc_half_angle() + delta_t() * i;
}

double ScanGeometry::detector_weight(int i) const {
  if (is_full()) return 1.0;
  return (i == 0 || i == n_detectors - 1) ? 0.5 : 1.0;
}

Vec2 ScanGeometry::detector_position(int i) const {
  double t = detector_angle(i);
  return {detector_radius * std::cos(t), detector_radius * std::sin(t)};
}

double ScanGeometry::delta_r() const { return (r_max - r_min) / (n_radii - 1); }

double ScanGeometry::radius(int j) const { return r_min + delta_r() * j; }

double ScanGeometry::radius_weight(int j) const {
  return (j == 0 || j == n_radii - 1) ? 0.5 : 1.0;
}

double ScanGeometry::sigma_weight(int i, int j) const {
  return detector_radius * delta_t() * detector_weight(i) * delta_r() *
         radius_weight(j);
}

CutoffProfile ScanGeometry::cutoff() const {
  CutoffProfile p;
  p.kind = cutoff_kind;
  p.delta = delta.value_or(0.0);
  return p;
}

double ScanGeometry::cutoff_at(int i) const {
  return cutoff()(detector_radius * std::cos(detector_angle(i)));
}

void ScanGeometry::validate() const {
  if (!(detector_radius > 1.0))
    throw ValidationError("geometry: detector_radius must exceed 1, got " +
                          std::to_string(detector_radius));
  if (n_detectors < 2)
    throw ValidationError("geometry: n_detectors must be >= 2, got " +
                          std::to_string(n_detectors));
  if (n_radii < 2)
    throw ValidationError("geometry: n_radii must be >= 2, got " +
                          std::to_string(n_radii));
  if (!(r_min > 0.0))
    throw ValidationError("geometry: r_min must be positive, got " +
                          std::to_string(r_min));
  if (!(r_min < r_max))
    throw ValidationError("geometry: need r_min < r_max, got [" +
                          std::to_string(r_min) + ", " + std::to_string(r_max) +
                          "]");
  if (delta && !(*delta >= 0.0))
    throw ValidationError("geometry: delta must be >= 0, got " +
                          std::to_string(*delta));
}

std::string ScanGeometry::to_json() const {
  nlohmann::json j;
  j["scan"] = is_full() ? "full" : "partial";
  if (is_full())
    j["delta"] = nullptr;
  else
    j["delta"] = *delta;
  j["detector_radius"] = detector_radius;
  j["n_detectors"] = n_detectors;
  j["n_radii"] = n_radii;
  j["r_min"] = r_min;
  j["r_max"] = r_max;
  j["cutoff"] = cutoff_kind == CutoffKind::kConstantOne ? "constant-one"
                                                        : "smooth-partial";
  return j.dump();
}

ScanGeometry ScanGeometry::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("geometry: bad JSON: ") + e.what());
  }
  ScanGeometry g;
  try {
    std::string scan = j.at("scan").get<std::string>();
    if (scan == "full")
      g.delta.reset();
    else if (scan == "partial")
      g.delta = j.at("delta").get<double>();
    else
      throw ValidationError("geometry: scan must be \"full\" or \"partial\"");
    g.detector_radius = j.at("detector_radius").get<double>();
    g.n_detectors = j.at("n_detectors").get<int>();
    g.n_radii = j.at("n_radii").get<int>();
    g.r_min = j.at("r_min").get<double>();
    g.r_max = j.at("r_max").get<double>();
    std::string cut = j.value("cutoff", g.delta ? "smooth-partial" : "constant-one");
    if (cut == "constant-one")
      g.cutoff_kind = CutoffKind::kConstantOne;
    else if (cut == "smooth-partial")
      g.cutoff_kind = CutoffKind::kSmoothPartial;
    else
      throw ValidationError("geometry: unknown cutoff \"" + cut + "\"");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("geometry: missing/invalid field: ") +
                          e.what());
  }
  g.validate();
  return g;
}

SphericalIncidence::SphericalIncidence(double detector_radius)
    : radius_(detector_radius) {
  if (!(radius_ > 0.0))
    throw ValidationError("incidence: detector_radius must be positive, got " +
                          std::to_string(detector_radius));
}

Vec2 SphericalIncidence::detector(double t) const {
  return {radius_ * std::cos(t), radius_ * std::sin(t)};
}

Vec2 SphericalIncidence::detector_velocity(double t) const {
  return {-radius_ * std::sin(t), radius_ * std::cos(t)};
}

double SphericalIncidence::value(Vec2 x, double t, double r) const {
  return (x - detector(t)).norm() - r;
}

Vec2 SphericalIncidence::grad_x(Vec2 x, double t, double r) const {
  (void)r;
  Vec2 u = x - detector(t);
  double d = u.norm();
  if (d == 0.0)
    throw ValidationError("degenerate-input: x coincides with detector y(t)");
  return u / d;
}

Vec2 SphericalIncidence::grad_sigma(Vec2 x, double t, double r) const {
  (void)r;
  Vec2 u = x - detector(t);
  double d = u.norm();
  if (d == 0.0)
    throw ValidationError("degenerate-input: x coincides with detector y(t)");
  // d/dt |x - y(t)| = -(u . y'(t)) / d; d/dr (|x - y(t)| - r) = -1.
  return {-u.dot(detector_velocity(t)) / d, -1.0};
}

Mat2 SphericalIncidence::mixed_hessian(Vec2 x, double t, double r) const {
  (void)r;
  Vec2 u = x - detector(t);
  double d = u.norm();
  if (d == 0.0)
    throw ValidationError("degenerate-input: x coincides with detector y(t)");
  Vec2 yp = detector_velocity(t);
  double ut = u.dot(yp) / d;  // = -dI/dt
  Mat2 m;
  m.a00 = (-yp.x + u.x / d * ut) / d;
  m.a10 = (-yp.y + u.y / d * ut) / d;
  m.a01 = 0.0;  // d2I/dx dr
  m.a11 = 0.0;
  return m;
}

double phi_determinant(const IncidenceModel& model, Vec2 x, double t, double r) {
  Mat2 h = model.mixed_hessian(x, t, r);
  Vec2 gx = model.grad_x(x, t, r);
  Vec2 gs = model.grad_sigma(x, t, r);
  double iv = model.value(x, t, r);
  // | h00 h01 gx.x |
  // | h10 h11 gx.y |
  // | gs.x gs.y iv |
  return h.a00 * (h.a11 * iv - gx.y * gs.y) -
         h.a01 * (h.a10 * iv - gx.y * gs.x) +
         gx.x * (h.a10 * gs.y - h.a11 * gs.x);
}

std::vector<DetectorHit> equidistant_detectors(Vec2 x, Vec2 y,
                                               const ScanGeometry& geom) {
  if (x == y)
    throw ValidationError("degenerate-input: equidistant detector set needs x != y");
  const double R = geom.detector_radius;
  Vec2 v = y - x;
  double len = v.norm();
  Vec2 n = v / len;
  // Perpendicular bisector: { p : p . n = c }.
  double c = (y.norm2() - x.norm2()) / (2.0 * len);
  double disc = R * R - c * c;
  std::vector<DetectorHit> hits;
  if (disc < 0.0) return hits;
  double s = std::sqrt(std::max(0.0, disc));
  Vec2 base = c * n;
  Vec2 offs = s * n.perp();
  const double t_max = geom.arc_half_angle();
  auto add = [&](Vec2 p) {
    double t = std::atan2(p.y, p.x);
    if (!geom.is_full() && std::abs(t) > t_max + 1e-12) return;
    double r = (p - x).norm();
    if (r < geom.r_min - 1e-12 || r > geom.r_max + 1e-12) return;
    if (geom.is_full() && t < 0.0) t += 2.0 * kPi;
    hits.push_back({t, r});
  };
  add(base + offs);
  if (s > 0.0) add(base - offs);
  std::sort(hits.begin(), hits.end(),
            [](const DetectorHit& a, const DetectorHit& b) { return a.t < b.t; });
  return hits;
}

double conjugate_gap(const IncidenceModel& model, Vec2 x, Vec2 y,
                     const ScanGeometry& geom) {
  auto hits = equidistant_detectors(x, y, geom);
  double gap = kInfinity;
  for (const auto& h : hits) {
    Vec2 a = model.grad_sigma(x, h.t, h.r);
    Vec2 b = model.grad_sigma(y, h.t, h.r);
    double w = b.cross(a) / geom.detector_radius;
    gap = std::min(gap, std::abs(w));
  }
  return gap;
}

double cutoff_eval(const CutoffProfile& profile, double t,
                   const ScanGeometry& geom) {
  return profile(geom.detector_radius * std::cos(t));
}

}  // namespace funkrad

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace funkrad {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  bool operator==(const Vec2&) const = default;

  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm2() const { return x * x + y * y; }
  double norm() const { return std::sqrt(norm2()); }
  Vec2 perp() const { return {-y, x}; }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

/// Row-major 2x2 matrix; rows index x-components, columns index (t, r).
struct Mat2 {
  double a00 = 0.0, a01 = 0.0;
  double a10 = 0.0, a11 = 0.0;
};

enum class CutoffKind { kConstantOne, kSmoothPartial };

/// Detector aperture weight applied to the first detector coordinate y1.
/// kSmoothPartial is the C^2 profile: 1 on [0, inf), a quintic smoothstep on
/// (-delta, 0), 0 on (-inf, -delta].
struct CutoffProfile {
  CutoffKind kind = CutoffKind::kConstantOne;
  double delta = 0.0;

  double operator()(double u) const;
};

/// Acquisition layout: detectors on the circle |y| = detector_radius and a
/// radius window [r_min, r_max], with trapezoid end weights on every
/// endpoint-inclusive axis. A full scan samples t uniformly on the periodic
/// circle; a partial scan samples the closed arc |t| <= arc_half_angle()
/// determined by the visibility margin delta.
struct ScanGeometry {
  double detector_radius = 1.5;
  std::optional<double> delta;  ///< nullopt = full scan
  int n_detectors = 180;
  int n_radii = 160;
  double r_min = 0.5;
  double r_max = 2.5;
  CutoffKind cutoff_kind = CutoffKind::kConstantOne;

  /// r_min/r_max <= 0 select the defaults max(1e-6, R-1) and R+1.
  static ScanGeometry full_scan(double detector_radius, int n_detectors,
                                int n_radii, double r_min = -1.0,
                                double r_max = -1.0);
  static ScanGeometry partial_scan(double detector_radius, double delta,
                                   int n_detectors, int n_radii,
                                   double r_min = -1.0, double r_max = -1.0);

  bool is_full() const { return !delta.has_value(); }

  /// pi for a full scan (or delta >= R), else arccos(-delta / R).
  double arc_half_angle() const;

  double delta_t() const;
  double detector_angle(int i) const;
  /// Trapezoid end factor in t: 1/2 at partial-scan arc ends, else 1.
  double detector_weight(int i) const;
  Vec2 detector_position(int i) const;

  double delta_r() const;
  double radius(int j) const;
  /// Trapezoid end factor in r: 1/2 at j = 0 and j = n_radii - 1.
  double radius_weight(int j) const;

  /// Quadrature weight for the surface measure R dt dr (cutoff not included).
  double sigma_weight(int i, int j) const;

  CutoffProfile cutoff() const;
  /// Cutoff evaluated at detector i.
  double cutoff_at(int i) const;

  /// Throws ValidationError on out-of-contract parameters.
  void validate() const;

  bool operator==(const ScanGeometry&) const = default;

  std::string to_json() const;
  static ScanGeometry from_json(const std::string& text);
};

/// Incidence function I(x; sigma) whose zero set {I = 0} is the observation
/// sphere through x at surface point sigma = (t, r).
class IncidenceModel {
 public:
  virtual ~IncidenceModel() = default;

  virtual double value(Vec2 x, double t, double r) const = 0;
  virtual Vec2 grad_x(Vec2 x, double t, double r) const = 0;
  /// (dI/dt, dI/dr).
  virtual Vec2 grad_sigma(Vec2 x, double t, double r) const = 0;
  /// d2I / dx_i dsigma_j with rows i in {x1, x2}, columns j in {t, r}.
  virtual Mat2 mixed_hessian(Vec2 x, double t, double r) const = 0;
};

/// I(x; t, r) = |x - y(t)| - r with y(t) = R (cos t, sin t); all derivatives
/// in closed form.
class SphericalIncidence final : public IncidenceModel {
 public:
  explicit SphericalIncidence(double detector_radius);

  double value(Vec2 x, double t, double r) const override;
  Vec2 grad_x(Vec2 x, double t, double r) const override;
  Vec2 grad_sigma(Vec2 x, double t, double r) const override;
  Mat2 mixed_hessian(Vec2 x, double t, double r) const override;

  Vec2 detector(double t) const;
  Vec2 detector_velocity(double t) const;
  double detector_radius() const { return radius_; }

 private:
  double radius_;
};

/// Determinant of the 3x3 well-posedness matrix
///   [ d2I/dx_i dt   d2I/dx_i dr   dI/dx_i ]   (rows i = 1, 2)
///   [ dI/dt         dI/dr         I       ].
/// Nonzero iff the family of spheres separates points infinitesimally at
/// (x, sigma). Throws ValidationError (degenerate-input) when x = y(t).
double phi_determinant(const IncidenceModel& model, Vec2 x, double t, double r);

/// A surface point equidistant from two interior points, with said distance.
struct DetectorHit {
  double t = 0.0;
  double r = 0.0;
};

/// Detector positions equidistant from x and y whose common distance lies in
/// the scan's radius window (and, for partial scans, whose angle lies on the
/// scan arc). At most two hits; ordered by increasing t in [0, 2 pi) for full
/// scans and increasing t in [-pi, pi] for partial scans.
std::vector<DetectorHit> equidistant_detectors(Vec2 x, Vec2 y,
                                               const ScanGeometry& geom);

/// Minimum |w| over the equidistant detector set, where
/// w = wedge(d_sigma I(y), d_sigma I(x)) / detector_radius measures the
/// transversality of the two sphere families at a common tangency candidate.
/// Returns +infinity when the set is empty; 0 signals a conjugate pair.
/// Throws ValidationError (degenerate-input) when x = y.
double conjugate_gap(const IncidenceModel& model, Vec2 x, Vec2 y,
                     const ScanGeometry& geom);

/// Cutoff profile evaluated at the detector first coordinate
/// y1 = detector_radius cos t.
double cutoff_eval(const CutoffProfile& profile, double t,
                   const ScanGeometry& geom);

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

}  // namespace funkrad

#pragma once

#include <cmath>
#include <vector>

namespace funkrad::detail {

/// Uniform quadrature nodes for one observation circle radius. The node count
/// scales with the circle length over the grid spacing (at least 64), so the
/// arc rule resolves every grid cell it crosses.
struct ArcTable {
  double r = 0.0;
  int n_q = 0;
  double weight = 0.0;  ///< arc weight 2 pi r / n_q
  std::vector<double> cos_phi, sin_phi;
  bool active = false;  ///< circle meets the unit ball
};

inline ArcTable make_arc_table(double detector_radius, double r, double h) {
  ArcTable t;
  t.r = r;
  if (std::abs(detector_radius - r) >= 1.0) return t;
  const double two_pi = 6.28318530717958647692;
  t.n_q = std::max(64, static_cast<int>(std::ceil(4.0 * two_pi * r / h)));
  t.weight = two_pi * r / t.n_q;
  t.cos_phi.resize(t.n_q);
  t.sin_phi.resize(t.n_q);
  for (int q = 0; q < t.n_q; ++q) {
    const double phi = two_pi * q / t.n_q;
    t.cos_phi[q] = std::cos(phi);
    t.sin_phi[q] = std::sin(phi);
  }
  t.active = true;
  return t;
}

/// Node range [q0, q0 + count) (indices mod n_q) covering the part of the
/// circle around detector angle ti that can intersect the unit ball, padded
/// by two nodes on each side; the per-node ball test stays authoritative.
inline void arc_range(const ArcTable& t, double detector_radius, double ti,
                      int& q0, int& count) {
  const double two_pi = 6.28318530717958647692;
  const double R = detector_radius;
  // |y(ti) + r w(phi)|^2 < 1  <=>  cos(phi - ti) < c_star.
  const double c_star = (1.0 - R * R - t.r * t.r) / (2.0 * t.r * R);
  if (c_star <= -1.0) {
    q0 = 0;
    count = 0;
    return;
  }
  if (c_star >= 1.0) {
    q0 = 0;
    count = t.n_q;
    return;
  }
  const double alpha = std::acos(c_star);
  const double dphi = two_pi / t.n_q;
  int lo = static_cast<int>(std::ceil((ti + alpha) / dphi)) - 2;
  int hi = static_cast<int>(std::floor((ti + two_pi - alpha) / dphi)) + 2;
  count = hi - lo + 1;
  if (count >= t.n_q) {
    q0 = 0;
    count = t.n_q;
    return;
  }
  q0 = lo % t.n_q;
  if (q0 < 0) q0 += t.n_q;
}

}  // namespace funkrad::detail

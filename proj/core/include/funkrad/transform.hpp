#pragma once

#include <cstdint>
#include <vector>

#include "funkrad/fields.hpp"
#include "funkrad/geometry.hpp"

namespace funkrad {

/// Spherical-mean transform: Mf(t_i, r_j) = integral of the bilinear
/// interpolant of f over the circle |x - y(t_i)| = r_j, by a uniform arc rule
/// with max(64, ceil(8 pi r / h)) nodes. Radii whose circles miss the unit
/// ball give exact zeros. Result kind is kFunction.
Sinogram forward(const GridDensity& f, const ScanGeometry& geom);

/// Dual transform at cell centers:
/// (M°u)(x) = -sum_i R dt wt_i u(t_i, |x - y(t_i)|), with u linearly
/// interpolated in r (ramped to zero one cell beyond the radius window) and
/// hard zero outside the open unit ball. Requires kind = kDensity.
GridDensity dual(const Sinogram& u, const ScanGeometry& geom, int nx, int ny);

/// Backprojection M* u = M°(u eps): the dual applied to the cutoff-weighted
/// data. Requires kind = kFunction.
GridDensity backproject(const Sinogram& u, const ScanGeometry& geom, int nx,
                        int ny);

/// |<Mf, u>_Sigma + <f, M°u>_X| / (|f|_X |u|_Sigma + tiny).
double adjoint_residual(const GridDensity& f, const Sinogram& u,
                        const ScanGeometry& geom);

/// Normal-operator kernel A(x, y) = sum over detectors equidistant from x and
/// y of eps(t) / |w|, where w is the conjugate-gap wedge at that detector.
/// Empty equidistant set gives 0. Throws degenerate-input when x = y and
/// conjugate-failure when some |w| < 1e-12.
double normal_kernel(Vec2 x, Vec2 y, const ScanGeometry& geom);

/// Log-log fit of d -> A(base + d dir, base) over a log-spaced distance grid.
struct NormalProbeReport {
  Vec2 base;
  Vec2 direction;  ///< normalized
  std::vector<double> distances;
  std::vector<double> values;
  double slope = 0.0;      ///< expected near -1 (kernel ~ a(y)/|x-y|)
  double amplitude = 0.0;  ///< exp of the fitted intercept
  double max_log_residual = 0.0;
};

NormalProbeReport kernel_probe(Vec2 base, Vec2 direction,
                               const ScanGeometry& geom, double d_min,
                               double d_max, int n_samples);

/// Spectrum of the discrete normal operator B A restricted to masked cells.
struct SpectrumReport {
  std::vector<double> eigenvalues;  ///< descending
  int k_lo = 0;
  int k_hi = 0;
  double slope = 0.0;  ///< log-log decay rate over [k_lo, k_hi]
  int n_masked = 0;
  double lambda_min = 0.0;
};

/// mask may be empty (unit-disk default) or one flag per cell. The operator
/// is assembled densely, so the masked cell count is capped at 4096.
SpectrumReport spectrum_probe(const ScanGeometry& geom, int nx, int ny,
                              const std::vector<std::uint8_t>& mask, int k_lo,
                              int k_hi);

}  // namespace funkrad

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "funkrad/geometry.hpp"

namespace funkrad {

/// Cell-centered samples of a density on [-1,1]^2 with y-major storage:
/// values[j * nx + i] sits at (-1 + (i + 1/2) hx, -1 + (j + 1/2) hy).
/// Densities produced by the builders vanish outside the open unit ball; the
/// optional mask marks a compact support set K inside the ball.
struct GridDensity {
  int nx = 0;
  int ny = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;  ///< empty = no mask

  GridDensity() = default;
  GridDensity(int nx_, int ny_);

  double hx() const { return 2.0 / nx; }
  double hy() const { return 2.0 / ny; }
  double cell_x(int i) const { return -1.0 + (i + 0.5) * hx(); }
  double cell_y(int j) const { return -1.0 + (j + 0.5) * hy(); }
  Vec2 cell_center(int i, int j) const { return {cell_x(i), cell_y(j)}; }

  double& at(int i, int j) { return values[static_cast<std::size_t>(j) * nx + i]; }
  double at(int i, int j) const { return values[static_cast<std::size_t>(j) * nx + i]; }

  bool has_mask() const { return !mask.empty(); }

  /// Throws ValidationError when sizes are inconsistent or absurd.
  void validate() const;
};

enum class SinogramKind { kFunction, kDensity };

/// Samples over the observation surface Sigma, detector-major:
/// values[i * n_radii + j] at (t_i, r_j). kFunction marks plain data Mf;
/// kDensity marks weights paired with the surface measure.
struct Sinogram {
  ScanGeometry geom;
  SinogramKind kind = SinogramKind::kFunction;
  std::vector<double> values;

  Sinogram() = default;
  Sinogram(const ScanGeometry& g, SinogramKind k);

  double& at(int i, int j) {
    return values[static_cast<std::size_t>(i) * geom.n_radii + j];
  }
  double at(int i, int j) const {
    return values[static_cast<std::size_t>(i) * geom.n_radii + j];
  }

  void validate() const;
};

/// Bilinear interpolation of f at p; zero outside the grid and outside the
/// open unit ball.
double sample(const GridDensity& f, Vec2 p);

/// Midpoint-rule X inner product: hx hy sum f g. Throws shape-mismatch.
double inner_product_X(const GridDensity& a, const GridDensity& b);
double norm_X(const GridDensity& a);

/// Quadrature Sigma inner product with the surface weight R dt dr and
/// trapezoid end factors (no cutoff). Throws geometry-mismatch.
double inner_product_Sigma(const Sinogram& a, const Sinogram& b);
double norm_Sigma(const Sinogram& a);

struct PhantomPrimitive {
  enum class Kind { kDisk, kGaussian };
  Kind kind = Kind::kDisk;
  Vec2 center;
  double size = 0.25;      ///< disk radius / gaussian width
  double amplitude = 1.0;
};

enum class SupportMaskKind { kNone, kHalfBall };

struct PhantomSpec {
  std::vector<PhantomPrimitive> primitives;
  int random_gaussians = 0;
  std::uint64_t seed = 0;
  SupportMaskKind mask = SupportMaskKind::kNone;
};

/// Rasterizes the spec at cell centers. Values are clipped to zero outside
/// the open unit ball (and off the half-ball when that mask is selected), so
/// the result always satisfies the support invariant.
GridDensity make_phantom(const PhantomSpec& spec, int nx, int ny);

/// Cell-center masks for the unit disk and the half-ball K = {|x|<1, x1>=0}.
std::vector<std::uint8_t> disk_mask(int nx, int ny);
std::vector<std::uint8_t> half_ball_mask(int nx, int ny);

/// Random test weight on Sigma: a few smooth separable (t, r) modes, plus
/// optional smooth bumps hugging the radius-window edges (edge_amplitude
/// scales them; 0 disables). Returned with kind = kDensity.
Sinogram random_smooth_weight(const ScanGeometry& geom, std::uint64_t seed,
                              double edge_amplitude = 0.0);

/// Text format "funkgrid 2 <nx> <ny> -1 1 -1 1" + ny rows of nx values,
/// 17 significant digits (round-trip exact).
void write_grid(const GridDensity& f, const std::string& path);
GridDensity read_grid(const std::string& path);

/// Text format "funksino <nd> <nr> <R> <r_min> <r_max> <delta|full>" + nd rows
/// of nr values. Reading infers the cutoff (full -> constant-one, partial ->
/// smooth-partial) and tags the data kFunction.
void write_sinogram(const Sinogram& u, const std::string& path);
Sinogram read_sinogram(const std::string& path);

}  // namespace funkrad

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "funkrad/fields.hpp"
#include "funkrad/geometry.hpp"

namespace funkrad {

struct KaczmarzConfig {
  double omega = 1.0;        ///< relaxation, admissible range (0, 2)
  double theta_rel = 1e-3;   ///< theta = theta_rel * lambda_max(A B)
  int max_iters = 50;
  double stop_tol = 1e-6;    ///< stop when residual <= stop_tol * initial; 0 = never
  double cg_tol = 1e-8;
  int cg_max_iters = 200;
  int power_iters = 30;
  std::uint64_t seed = 1;    ///< power-iteration start vector
  bool cg_failure_fatal = false;

  void validate() const;
};

/// Per-sweep history; index 0 is the zero iterate, index k the state after k
/// sweeps. cg_iterations[k] / cg_converged[k] describe the solve inside sweep
/// k (entry 0 is a placeholder).
struct ConvergenceReport {
  std::vector<double> residual_norms;
  std::vector<double> error_norms;  ///< empty when no reference was given
  std::vector<int> cg_iterations;
  std::vector<std::uint8_t> cg_converged;
  double lambda_max = 0.0;
  double theta = 0.0;
  int iterations = 0;
  bool stopped_early = false;
  bool any_cg_failure = false;

  std::string to_table() const;
};

/// Exact discrete adjoint B of forward() with respect to the X inner product
/// and the cutoff-weighted Sigma product:
///   <forward(f), u eps>_Sigma = <f, B u>_X
/// holds to roundoff for every f, u, independent of the thread count.
GridDensity discrete_adjoint_apply(const Sinogram& u, const ScanGeometry& geom,
                                   int nx, int ny);

/// R u = forward(B u) + theta u. Self-adjoint and positive definite in the
/// cutoff-weighted Sigma product for theta > 0.
Sinogram apply_R(const Sinogram& u, double theta, const ScanGeometry& geom,
                 int nx, int ny);

struct RSolveResult {
  Sinogram solution;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Conjugate gradients on R z = rhs in the cutoff-weighted Sigma product,
/// zero start.
RSolveResult solve_R(const Sinogram& rhs, double theta,
                     const KaczmarzConfig& cfg, const ScanGeometry& geom,
                     int nx, int ny);

/// Power iteration for the top eigenvalue of A B in the cutoff-weighted
/// Sigma product (deterministic start from the seed).
double estimate_lambda_max(const ScanGeometry& geom, int nx, int ny,
                           std::uint64_t seed, int iterations);

/// One-sweep error propagator Q = I - omega B R^-1 A applied to g.
/// Returns (|Qg|_X, |g|_X); |Qg| <= |g| for omega in (0, 2).
/// theta < 0 recomputes theta from cfg via estimate_lambda_max.
std::pair<double, double> q_contraction_check(const GridDensity& g,
                                              const KaczmarzConfig& cfg,
                                              const ScanGeometry& geom,
                                              double theta = -1.0);

/// Preconditioned Kaczmarz iteration
///   f_{k+1} = f_k + omega B R^-1 (data - forward f_k),
/// support-projected onto the unit ball (and onto support_mask when given)
/// after every sweep. reference, when given, fills the relative-error column.
/// CG non-convergence is recorded as a warning unless cfg.cg_failure_fatal.
std::pair<GridDensity, ConvergenceReport> reconstruct(
    const Sinogram& data, const KaczmarzConfig& cfg, int nx, int ny,
    const GridDensity* reference = nullptr,
    const std::vector<std::uint8_t>* support_mask = nullptr);

}  // namespace funkrad

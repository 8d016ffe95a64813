#pragma once

// Constructive range conditions for the spherical-mean transform: moment
// system, annihilator construction, and data-consistency residuals.
//
// An annihilator is a function on data space of the form
//
//   phi(y(t), s) = sum_j phi_j(t) * (s - R^2)^j,    s = r^2,
//
// where each coefficient phi_j is a finite real Fourier series on the
// detector circle of radius R.  Such a phi annihilates the range of the
// forward transform exactly when its moment system vanishes; harmonics of
// frequency q > degree do so identically, which gives an explicit
// constructive family.

#include <cstdint>
#include <string>
#include <vector>

#include "funkrad/fields.hpp"
#include "funkrad/geometry.hpp"

namespace funkrad {

/// One harmonic of a coefficient function: ca*cos(q t) + sa*sin(q t).
struct FourierTerm {
  int frequency = 0;
  double cos_amp = 0.0;
  double sin_amp = 0.0;
};

struct Annihilator {
  /// Polynomial degree k in (s - R^2).
  int degree = 0;
  /// Detector-circle radius R entering the shift s - R^2.
  double detector_radius = 1.5;
  /// terms[j] holds the Fourier series of phi_j, j = 0..degree.
  std::vector<std::vector<FourierTerm>> terms;
  /// True once moment_residuals has verified all residuals <= 1e-10.
  bool certified = false;

  /// Evaluates the coefficient function phi_j at detector angle t.
  double coefficient(int j, double t) const;

  /// Evaluates phi(y(t), s) = sum_j phi_j(t) (s - R^2)^j.
  double evaluate(double t, double s) const;

  /// Largest harmonic frequency appearing in any coefficient.
  int max_frequency() const;

  /// Structural checks: degree >= 0, terms.size() == degree + 1,
  /// detector_radius > 0, finite amplitudes, frequencies >= 0.
  void validate() const;

  std::string to_json() const;
  static Annihilator from_json(const std::string& text);
};

struct MomentResidualReport {
  struct Row {
    int m = 0;                      ///< moment order
    std::vector<double> z_angles;   ///< 2m+1 equispaced probe angles
    std::vector<double> values;     ///< E_m at each probe angle
    double max_abs = 0.0;
  };
  std::vector<Row> rows;  ///< one row per order m = 0..2k
  double max_abs = 0.0;   ///< largest |E_m(z)| over the whole report

  std::string to_table() const;
};

/// Defect of the incidence-hyperplane identity 2<x,y(t)> + s = |x|^2 + R^2
/// with s = |x - y(t)|^2.  An algebraic identity: the result is roundoff.
double hyperplane_check(const Vec2& x, double t, const ScanGeometry& geom);

/// Evaluates the full moment system E_m(z), m = 0..2k, each on 2m+1
/// equispaced unit directions z (enough to pin down the degree-m
/// trigonometric polynomial E_m exactly).  The circle integrals are done
/// analytically via Fourier orthogonality, not by quadrature.
MomentResidualReport moment_residuals(const Annihilator& a);

/// Builds phi_j(t) = amplitudes[j] * cos(q t) (sine instead when use_sine),
/// j = 0..k.  Requires q > k so every moment integral vanishes identically;
/// the result is certified by running moment_residuals.
/// Throws ValidationError("frequency-too-low") when q <= k.
Annihilator build_annihilator(int k, int q, const std::vector<double>& amplitudes,
                              double detector_radius = 1.5,
                              bool use_sine = false);

/// Quadrature of phi(y(t), |x - y(t)|^2) over the full detector circle
/// (weight R dt, periodic trapezoid); returns the absolute value.  For a
/// certified annihilator this is spectrally small at every x in the ball.
/// Full scan only.
double annihilation_check(const Annihilator& a, const Vec2& x,
                          const ScanGeometry& geom);

/// Normalized data-consistency residual |<g, phi>_Sigma| over
/// (|g| * |phi| + tiny), where phi is sampled on the sinogram lattice as
/// phi(y(t_i), r_j^2).  Range data gives a small residual; data outside the
/// range does not.  Full scan only.
double range_residual(const Sinogram& g, const Annihilator& a);

/// The sampled annihilator phi(y(t_i), r_j^2) as a sinogram on geom
/// (useful for perturbation experiments and the residual's normalization).
Sinogram sample_annihilator(const Annihilator& a, const ScanGeometry& geom);

}  // namespace funkrad

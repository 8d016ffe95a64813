#include "funkrad/transform.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>

#include <Eigen/Dense>

#include "arc_detail.hpp"
#include "funkrad/errors.hpp"
#include "funkrad/parallel.hpp"
#include "grid_detail.hpp"

namespace funkrad {

namespace {

void ensure_finite(const std::vector<double>& vals, const char* what) {
  for (double v : vals)
    if (!std::isfinite(v))
      throw ValidationError(std::string("non-finite-value: ") + what +
                            " contains NaN/Inf");
}

void require_full_grid(const GridDensity& f, const char* what) {
  f.validate();
  if (f.values.size() != static_cast<std::size_t>(f.nx) * f.ny)
    throw ValidationError(std::string("shape-mismatch: ") + what +
                          " grid has no value block");
  ensure_finite(f.values, what);
}

void require_geom(const Sinogram& u, const ScanGeometry& geom,
                  const char* what) {
  u.validate();
  if (!(u.geom == geom))
    throw ValidationError(std::string("geometry-mismatch: ") + what +
                          " sinogram does not match the requested geometry");
  ensure_finite(u.values, what);
}

std::vector<detail::ArcTable> build_tables(const ScanGeometry& geom, double h) {
  std::vector<detail::ArcTable> tabs;
  tabs.reserve(geom.n_radii);
  for (int j = 0; j < geom.n_radii; ++j)
    tabs.push_back(detail::make_arc_table(geom.detector_radius, geom.radius(j), h));
  return tabs;
}

/// Shared dual/backprojection core; with_cutoff weights detector i by eps_i.
GridDensity dual_impl(const Sinogram& u, int nx, int ny, bool with_cutoff) {
  const ScanGeometry& geom = u.geom;
  GridDensity out(nx, ny);
  const int nd = geom.n_detectors;
  const int nr = geom.n_radii;
  const double dt = geom.delta_t();
  const double dr = geom.delta_r();
  const double r_min = geom.r_min;
  std::vector<double> yx(nd), yy(nd), wdet(nd);
  for (int i = 0; i < nd; ++i) {
    Vec2 y = geom.detector_position(i);
    yx[i] = y.x;
    yy[i] = y.y;
    wdet[i] = geom.detector_weight(i) * (with_cutoff ? geom.cutoff_at(i) : 1.0);
  }
  const double scale = -geom.detector_radius * dt;
  detail::parallel_for(0, ny, [&](int j_lo, int j_hi) {
    for (int j = j_lo; j < j_hi; ++j) {
      for (int i = 0; i < nx; ++i) {
        const Vec2 c = out.cell_center(i, j);
        if (c.norm2() >= 1.0) continue;
        long double acc = 0.0L;
        for (int d = 0; d < nd; ++d) {
          if (wdet[d] == 0.0) continue;
          const double dx = c.x - yx[d];
          const double dy = c.y - yy[d];
          const double rho = std::sqrt(dx * dx + dy * dy);
          const double gj = (rho - r_min) / dr;
          const double fl = std::floor(gj);
          const int j0 = static_cast<int>(fl);
          const double fr = gj - fl;
          double v = 0.0;
          if (j0 >= 0 && j0 <= nr - 1) v += (1.0 - fr) * u.at(d, j0);
          if (j0 + 1 >= 0 && j0 + 1 <= nr - 1) v += fr * u.at(d, j0 + 1);
          acc += static_cast<long double>(wdet[d]) * v;
        }
        out.at(i, j) = static_cast<double>(acc * scale);
      }
    }
  });
  return out;
}

struct LogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double max_residual = 0.0;
};

LogFit fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  long double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const long double lx = std::log(xs[k]);
    const long double ly = std::log(ys[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const long double denom = n * sxx - sx * sx;
  LogFit fit;
  fit.slope = static_cast<double>((n * sxy - sx * sy) / denom);
  fit.intercept = static_cast<double>((sy - fit.slope * sx) / n);
  for (std::size_t k = 0; k < n; ++k) {
    const double pred = fit.slope * std::log(xs[k]) + fit.intercept;
    fit.max_residual =
        std::max(fit.max_residual, std::abs(std::log(ys[k]) - pred));
  }
  return fit;
}

}  // namespace

Sinogram forward(const GridDensity& f, const ScanGeometry& geom) {
  require_full_grid(f, "forward input");
  geom.validate();
  Sinogram g(geom, SinogramKind::kFunction);
  const int nd = geom.n_detectors;
  const int nr = geom.n_radii;
  const double h = std::min(f.hx(), f.hy());
  const auto tabs = build_tables(geom, h);
  std::vector<double> yx(nd), yy(nd), tang(nd);
  for (int i = 0; i < nd; ++i) {
    Vec2 y = geom.detector_position(i);
    yx[i] = y.x;
    yy[i] = y.y;
    tang[i] = geom.detector_angle(i);
  }
  const double* fv = f.values.data();
  detail::parallel_for(0, nd, [&](int i_lo, int i_hi) {
    for (int i = i_lo; i < i_hi; ++i) {
      for (int j = 0; j < nr; ++j) {
        const auto& tab = tabs[j];
        if (!tab.active) continue;
        int q0 = 0, count = 0;
        detail::arc_range(tab, geom.detector_radius, tang[i], q0, count);
        if (count == 0) continue;
        long double acc = 0.0L;
        detail::Stencil st;
        for (int k = 0; k < count; ++k) {
          int q = q0 + k;
          if (q >= tab.n_q) q -= tab.n_q;
          const double px = yx[i] + tab.r * tab.cos_phi[q];
          const double py = yy[i] + tab.r * tab.sin_phi[q];
          if (!detail::make_stencil(f.nx, f.ny, px, py, st)) continue;
          double s = 0.0;
          for (int m = 0; m < st.count; ++m) s += st.w[m] * fv[st.idx[m]];
          acc += s;
        }
        g.at(i, j) = static_cast<double>(acc * tab.weight);
      }
    }
  });
  return g;
}

GridDensity dual(const Sinogram& u, const ScanGeometry& geom, int nx, int ny) {
  require_geom(u, geom, "dual");
  if (u.kind != SinogramKind::kDensity)
    throw ValidationError("kind-mismatch: dual expects a density-kind sinogram");
  return dual_impl(u, nx, ny, /*with_cutoff=*/false);
}

GridDensity backproject(const Sinogram& u, const ScanGeometry& geom, int nx,
                        int ny) {
  require_geom(u, geom, "backproject");
  if (u.kind != SinogramKind::kFunction)
    throw ValidationError(
        "kind-mismatch: backproject expects a function-kind sinogram");
  return dual_impl(u, nx, ny, /*with_cutoff=*/true);
}

double adjoint_residual(const GridDensity& f, const Sinogram& u,
                        const ScanGeometry& geom) {
  require_full_grid(f, "adjoint-residual");
  require_geom(u, geom, "adjoint-residual");
  if (u.kind != SinogramKind::kDensity)
    throw ValidationError(
        "kind-mismatch: adjoint residual pairs M with a density-kind weight");
  Sinogram mf = forward(f, geom);
  GridDensity mu = dual_impl(u, f.nx, f.ny, /*with_cutoff=*/false);
  const double num =
      std::abs(inner_product_Sigma(mf, u) + inner_product_X(f, mu));
  const double den = norm_X(f) * norm_Sigma(u) + DBL_MIN;
  return num / den;
}

double normal_kernel(Vec2 x, Vec2 y, const ScanGeometry& geom) {
  geom.validate();
  SphericalIncidence inc(geom.detector_radius);
  const auto hits = equidistant_detectors(x, y, geom);
  const CutoffProfile profile = geom.cutoff();
  double acc = 0.0;
  for (const auto& hgt : hits) {
    const Vec2 a = inc.grad_sigma(x, hgt.t, hgt.r);
    const Vec2 b = inc.grad_sigma(y, hgt.t, hgt.r);
    const double w = b.cross(a) / geom.detector_radius;
    if (std::abs(w) < 1e-12)
      throw NumericalError(
          "conjugate-failure: vanishing wedge in the normal kernel at t = " +
          std::to_string(hgt.t));
    acc += cutoff_eval(profile, hgt.t, geom) / std::abs(w);
  }
  return acc;
}

NormalProbeReport kernel_probe(Vec2 base, Vec2 direction,
                               const ScanGeometry& geom, double d_min,
                               double d_max, int n_samples) {
  geom.validate();
  if (n_samples < 2)
    throw ValidationError("kernel-probe: need at least 2 samples");
  if (!(d_min > 0.0) || !(d_min < d_max))
    throw ValidationError("kernel-probe: need 0 < d_min < d_max");
  const double dn = direction.norm();
  if (dn == 0.0)
    throw ValidationError("degenerate-input: probe direction is zero");
  NormalProbeReport rep;
  rep.base = base;
  rep.direction = direction / dn;
  if (base.norm() >= 1.0)
    throw ValidationError("support-violation: probe base outside the unit ball");
  for (int k = 0; k < n_samples; ++k) {
    const double frac = static_cast<double>(k) / (n_samples - 1);
    const double d = d_min * std::pow(d_max / d_min, frac);
    const Vec2 x = base + d * rep.direction;
    if (x.norm() >= 1.0)
      throw ValidationError(
          "support-violation: probe point leaves the unit ball");
    const double a = normal_kernel(x, base, geom);
    if (!(a > 0.0))
      throw NumericalError(
          "conjugate-failure: nonpositive kernel value along the probe");
    rep.distances.push_back(d);
    rep.values.push_back(a);
  }
  const LogFit fit = fit_loglog(rep.distances, rep.values);
  rep.slope = fit.slope;
  rep.amplitude = std::exp(fit.intercept);
  rep.max_log_residual = fit.max_residual;
  return rep;
}

SpectrumReport spectrum_probe(const ScanGeometry& geom, int nx, int ny,
                              const std::vector<std::uint8_t>& mask, int k_lo,
                              int k_hi) {
  geom.validate();
  GridDensity shape(nx, ny);
  std::vector<std::uint8_t> m = mask.empty() ? disk_mask(nx, ny) : mask;
  if (m.size() != static_cast<std::size_t>(nx) * ny)
    throw ValidationError("shape-mismatch: spectrum mask does not match grid");
  std::vector<int> cell_to_col(m.size(), -1);
  int cols = 0;
  for (std::size_t c = 0; c < m.size(); ++c)
    if (m[c]) cell_to_col[c] = cols++;
  if (cols == 0)
    throw ValidationError("degenerate-input: spectrum mask is empty");
  if (cols > 4096)
    throw ValidationError("too-large: spectrum probe supports at most 4096 "
                          "masked cells, got " + std::to_string(cols));
  if (k_lo < 1 || k_hi <= k_lo || k_hi > cols)
    throw ValidationError("spectrum: need 1 <= k_lo < k_hi <= " +
                          std::to_string(cols));
  const int nd = geom.n_detectors;
  const int nr = geom.n_radii;
  const std::size_t ns = static_cast<std::size_t>(nd) * nr;
  const double h = std::min(shape.hx(), shape.hy());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(ns, cols);
  Eigen::VectorXd W(ns);
  const auto tabs = build_tables(geom, h);
  detail::Stencil st;
  for (int j = 0; j < nr; ++j) {
    const auto& tab = tabs[j];
    for (int i = 0; i < nd; ++i) {
      const std::size_t row = static_cast<std::size_t>(i) * nr + j;
      W(row) = geom.sigma_weight(i, j) * geom.cutoff_at(i);
      if (!tab.active) continue;
      int q0 = 0, count = 0;
      detail::arc_range(tab, geom.detector_radius, geom.detector_angle(i), q0,
                        count);
      const Vec2 y = geom.detector_position(i);
      for (int k = 0; k < count; ++k) {
        int q = q0 + k;
        if (q >= tab.n_q) q -= tab.n_q;
        const double px = y.x + tab.r * tab.cos_phi[q];
        const double py = y.y + tab.r * tab.sin_phi[q];
        if (!detail::make_stencil(nx, ny, px, py, st)) continue;
        for (int s = 0; s < st.count; ++s) {
          const int col = cell_to_col[st.idx[s]];
          if (col >= 0) A(row, col) += tab.weight * st.w[s];
        }
      }
    }
  }
  Eigen::MatrixXd N =
      (A.transpose() * W.asDiagonal() * A) / (shape.hx() * shape.hy());
  N = ((N + N.transpose()) * 0.5).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(N);
  if (es.info() != Eigen::Success)
    throw NumericalError("spectrum: eigensolver failed to converge");
  SpectrumReport rep;
  rep.n_masked = cols;
  rep.k_lo = k_lo;
  rep.k_hi = k_hi;
  rep.eigenvalues.assign(cols, 0.0);
  for (int k = 0; k < cols; ++k)
    rep.eigenvalues[k] = es.eigenvalues()(cols - 1 - k);
  rep.lambda_min = rep.eigenvalues.back();
  std::vector<double> ks, ls;
  for (int k = k_lo; k <= k_hi; ++k) {
    const double lam = rep.eigenvalues[k - 1];
    if (lam > 0.0) {
      ks.push_back(k);
      ls.push_back(lam);
    }
  }
  if (ks.size() < 2)
    throw NumericalError("spectrum: too few positive eigenvalues in the fit "
                         "window");
  rep.slope = fit_loglog(ks, ls).slope;
  return rep;
}

}  // namespace funkrad

#include "funkrad/kaczmarz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "arc_detail.hpp"
#include "funkrad/errors.hpp"
#include "funkrad/parallel.hpp"
#include "funkrad/rng.hpp"
#include "funkrad/transform.hpp"
#include "grid_detail.hpp"

namespace funkrad {

namespace {

// Cutoff-weighted Sigma samples: W_ij = sigma_weight(i, j) * eps_i.
std::vector<double> weighted_samples(const ScanGeometry& geom) {
  const int nd = geom.n_detectors;
  const int nr = geom.n_radii;
  std::vector<double> w(static_cast<std::size_t>(nd) * nr);
  for (int i = 0; i < nd; ++i) {
    const double eps = geom.cutoff_at(i);
    for (int j = 0; j < nr; ++j)
      w[static_cast<std::size_t>(i) * nr + j] = geom.sigma_weight(i, j) * eps;
  }
  return w;
}

double weighted_ip(const std::vector<double>& w, const std::vector<double>& a,
                   const std::vector<double>& b) {
  long double acc = 0.0L;
  const std::size_t n = w.size();
  for (std::size_t k = 0; k < n; ++k)
    acc += static_cast<long double>(w[k]) * a[k] * b[k];
  return static_cast<double>(acc);
}

double weighted_norm(const std::vector<double>& w,
                     const std::vector<double>& a) {
  return std::sqrt(std::max(0.0, weighted_ip(w, a, a)));
}

void require_same_geom(const Sinogram& u, const ScanGeometry& geom,
                       const char* what) {
  u.validate();
  if (!(u.geom == geom))
    throw ValidationError(std::string("geometry-mismatch: ") + what +
                          " sinogram does not match the requested geometry");
}

// Scatters the contribution of detectors [i_lo, i_hi) into acc.
void scatter_chunk(const Sinogram& u, const ScanGeometry& geom, int nx, int ny,
                   const std::vector<detail::ArcTable>& tabs,
                   const std::vector<double>& wsamp, int i_lo, int i_hi,
                   std::vector<long double>& acc) {
  const int nr = geom.n_radii;
  detail::Stencil st;
  for (int i = i_lo; i < i_hi; ++i) {
    const Vec2 y = geom.detector_position(i);
    const double ti = geom.detector_angle(i);
    for (int j = 0; j < nr; ++j) {
      const auto& tab = tabs[j];
      if (!tab.active) continue;
      const double wv = wsamp[static_cast<std::size_t>(i) * nr + j] * u.at(i, j);
      if (wv == 0.0) continue;
      int q0 = 0, count = 0;
      detail::arc_range(tab, geom.detector_radius, ti, q0, count);
      const long double factor = static_cast<long double>(wv) * tab.weight;
      for (int k = 0; k < count; ++k) {
        int q = q0 + k;
        if (q >= tab.n_q) q -= tab.n_q;
        const double px = y.x + tab.r * tab.cos_phi[q];
        const double py = y.y + tab.r * tab.sin_phi[q];
        if (!detail::make_stencil(nx, ny, px, py, st)) continue;
        for (int m = 0; m < st.count; ++m)
          acc[st.idx[m]] += factor * st.w[m];
      }
    }
  }
}

Sinogram axpy(const Sinogram& x, double a, const Sinogram& y) {
  Sinogram out = x;
  for (std::size_t k = 0; k < out.values.size(); ++k)
    out.values[k] += a * y.values[k];
  return out;
}

}  // namespace

void KaczmarzConfig::validate() const {
  if (!(omega > 0.0 && omega < 2.0))
    throw ValidationError("kaczmarz: omega must lie in (0, 2), got " +
                          std::to_string(omega));
  if (!(theta_rel > 0.0))
    throw ValidationError("kaczmarz: theta_rel must be positive");
  if (max_iters < 1)
    throw ValidationError("kaczmarz: max_iters must be >= 1");
  if (stop_tol < 0.0)
    throw ValidationError("kaczmarz: stop_tol must be >= 0");
  if (!(cg_tol > 0.0))
    throw ValidationError("kaczmarz: cg_tol must be positive");
  if (cg_max_iters < 1)
    throw ValidationError("kaczmarz: cg_max_iters must be >= 1");
  if (power_iters < 1)
    throw ValidationError("kaczmarz: power_iters must be >= 1");
}

GridDensity discrete_adjoint_apply(const Sinogram& u, const ScanGeometry& geom,
                                   int nx, int ny) {
  require_same_geom(u, geom, "adjoint");
  GridDensity out(nx, ny);
  const std::size_t n_cells = out.values.size();
  const int nd = geom.n_detectors;
  const double h = std::min(out.hx(), out.hy());
  const auto tabs = [&] {
    std::vector<detail::ArcTable> t;
    t.reserve(geom.n_radii);
    for (int j = 0; j < geom.n_radii; ++j)
      t.push_back(detail::make_arc_table(geom.detector_radius, geom.radius(j), h));
    return t;
  }();
  const auto wsamp = weighted_samples(geom);

  // Fixed detector chunking; chunk results are reduced in ascending order, so
  // the output bytes do not depend on the thread count.
  const int n_chunks = std::min(32, nd);
  const int chunk = (nd + n_chunks - 1) / n_chunks;
  std::vector<long double> total(n_cells, 0.0L);
  if (max_threads() <= 1 || n_cells > (std::size_t{1} << 22)) {
    std::vector<long double> buf(n_cells);
    for (int c = 0; c < n_chunks; ++c) {
      std::fill(buf.begin(), buf.end(), 0.0L);
      scatter_chunk(u, geom, nx, ny, tabs, wsamp, c * chunk,
                    std::min(nd, (c + 1) * chunk), buf);
      for (std::size_t k = 0; k < n_cells; ++k) total[k] += buf[k];
    }
  } else {
    std::vector<std::vector<long double>> bufs(n_chunks);
    detail::parallel_for(0, n_chunks, [&](int c_lo, int c_hi) {
      for (int c = c_lo; c < c_hi; ++c) {
        bufs[c].assign(n_cells, 0.0L);
        scatter_chunk(u, geom, nx, ny, tabs, wsamp, c * chunk,
                      std::min(nd, (c + 1) * chunk), bufs[c]);
      }
    });
    for (int c = 0; c < n_chunks; ++c)
      for (std::size_t k = 0; k < n_cells; ++k) total[k] += bufs[c][k];
  }
  const double inv_cell = 1.0 / (out.hx() * out.hy());
  for (std::size_t k = 0; k < n_cells; ++k)
    out.values[k] = static_cast<double>(total[k]) * inv_cell;
  return out;
}

Sinogram apply_R(const Sinogram& u, double theta, const ScanGeometry& geom,
                 int nx, int ny) {
  require_same_geom(u, geom, "apply_R");
  if (theta < 0.0)
    throw ValidationError("kaczmarz: theta must be >= 0, got " +
                          std::to_string(theta));
  GridDensity bu = discrete_adjoint_apply(u, geom, nx, ny);
  Sinogram abu = forward(bu, geom);
  abu.kind = u.kind;
  return axpy(abu, theta, u);
}

RSolveResult solve_R(const Sinogram& rhs, double theta,
                     const KaczmarzConfig& cfg, const ScanGeometry& geom,
                     int nx, int ny) {
  require_same_geom(rhs, geom, "solve_R");
  cfg.validate();
  if (!(theta > 0.0))
    throw ValidationError("kaczmarz: solve_R needs theta > 0");
  const auto w = weighted_samples(geom);
  RSolveResult res;
  res.solution = Sinogram(geom, rhs.kind);
  const double b_norm = weighted_norm(w, rhs.values);
  if (b_norm == 0.0) {
    res.converged = true;
    return res;
  }
  Sinogram r = rhs;
  Sinogram p = r;
  double rr = weighted_ip(w, r.values, r.values);
  for (int it = 1; it <= cfg.cg_max_iters; ++it) {
    GridDensity bp = discrete_adjoint_apply(p, geom, nx, ny);
    Sinogram rp = forward(bp, geom);
    for (std::size_t k = 0; k < rp.values.size(); ++k)
      rp.values[k] += theta * p.values[k];
    const double p_rp = weighted_ip(w, p.values, rp.values);
    if (!(p_rp > 0.0)) {
      // Only reachable through a zero search direction in the weighted
      // seminorm; everything left is invisible to B, so we are done.
      res.converged = true;
      res.iterations = it - 1;
      res.relative_residual = std::sqrt(std::max(0.0, rr)) / b_norm;
      return res;
    }
    const double alpha = rr / p_rp;
    for (std::size_t k = 0; k < r.values.size(); ++k) {
      res.solution.values[k] += alpha * p.values[k];
      r.values[k] -= alpha * rp.values[k];
    }
    const double rr_next = weighted_ip(w, r.values, r.values);
    res.iterations = it;
    if (std::sqrt(std::max(0.0, rr_next)) <= cfg.cg_tol * b_norm) {
      res.converged = true;
      res.relative_residual = std::sqrt(std::max(0.0, rr_next)) / b_norm;
      return res;
    }
    const double beta = rr_next / rr;
    rr = rr_next;
    for (std::size_t k = 0; k < p.values.size(); ++k)
      p.values[k] = r.values[k] + beta * p.values[k];
  }
  res.relative_residual = std::sqrt(std::max(0.0, rr)) / b_norm;
  res.converged = false;
  if (cfg.cg_failure_fatal)
    throw NumericalError("kaczmarz: inner CG failed to reach tolerance " +
                         std::to_string(cfg.cg_tol) + " (residual " +
                         std::to_string(res.relative_residual) + ")");
  return res;
}

double estimate_lambda_max(const ScanGeometry& geom, int nx, int ny,
                           std::uint64_t seed, int iterations) {
  geom.validate();
  if (iterations < 1)
    throw ValidationError("kaczmarz: power iterations must be >= 1");
  const auto w = weighted_samples(geom);
  Sinogram v(geom, SinogramKind::kFunction);
  Rng rng(seed);
  for (auto& x : v.values) x = rng.normal();
  double nv = weighted_norm(w, v.values);
  if (nv == 0.0) throw NumericalError("kaczmarz: degenerate power start");
  for (auto& x : v.values) x /= nv;
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    GridDensity bv = discrete_adjoint_apply(v, geom, nx, ny);
    Sinogram av = forward(bv, geom);
    lambda = weighted_norm(w, av.values);
    if (lambda == 0.0)
      throw NumericalError("kaczmarz: power iteration collapsed to zero");
    for (std::size_t k = 0; k < v.values.size(); ++k)
      v.values[k] = av.values[k] / lambda;
  }
  return lambda;
}

std::pair<double, double> q_contraction_check(const GridDensity& g,
                                              const KaczmarzConfig& cfg,
                                              const ScanGeometry& geom,
                                              double theta) {
  cfg.validate();
  g.validate();
  if (theta < 0.0)
    theta = cfg.theta_rel *
            estimate_lambda_max(geom, g.nx, g.ny, cfg.seed, cfg.power_iters);
  Sinogram ag = forward(g, geom);
  RSolveResult z = solve_R(ag, theta, cfg, geom, g.nx, g.ny);
  GridDensity bz = discrete_adjoint_apply(z.solution, geom, g.nx, g.ny);
  GridDensity qg = g;
  for (std::size_t k = 0; k < qg.values.size(); ++k)
    qg.values[k] -= cfg.omega * bz.values[k];
  return {norm_X(qg), norm_X(g)};
}

std::pair<GridDensity, ConvergenceReport> reconstruct(
    const Sinogram& data, const KaczmarzConfig& cfg, int nx, int ny,
    const GridDensity* reference,
    const std::vector<std::uint8_t>* support_mask) {
  data.validate();
  cfg.validate();
  if (data.kind != SinogramKind::kFunction)
    throw ValidationError(
        "kind-mismatch: reconstruct expects function-kind data");
  const ScanGeometry& geom = data.geom;
  GridDensity f(nx, ny);
  if (reference && (reference->nx != nx || reference->ny != ny))
    throw ValidationError("shape-mismatch: reference grid is " +
                          std::to_string(reference->nx) + "x" +
                          std::to_string(reference->ny) + ", expected " +
                          std::to_string(nx) + "x" + std::to_string(ny));
  if (support_mask && support_mask->size() != f.values.size())
    throw ValidationError("shape-mismatch: support mask does not match grid");

  const auto ball = disk_mask(nx, ny);
  const auto w = weighted_samples(geom);
  ConvergenceReport rep;
  rep.lambda_max =
      estimate_lambda_max(geom, nx, ny, cfg.seed, cfg.power_iters);
  rep.theta = cfg.theta_rel * rep.lambda_max;
  const double ref_norm = reference ? norm_X(*reference) : 0.0;

  double initial_residual = -1.0;
  for (int sweep = 0;; ++sweep) {
    Sinogram fwd = forward(f, geom);
    Sinogram res = axpy(data, -1.0, fwd);
    const double rn = weighted_norm(w, res.values);
    if (sweep == 0) initial_residual = rn;
    rep.residual_norms.push_back(rn);
    if (reference)
      rep.error_norms.push_back(
          ref_norm > 0.0
              ? std::sqrt(std::max(
                    0.0, inner_product_X(f, f) - 2.0 * inner_product_X(f, *reference) +
                             ref_norm * ref_norm)) / ref_norm
              : norm_X(f));
    if (sweep == 0) {
      rep.cg_iterations.push_back(0);
      rep.cg_converged.push_back(1);
    }
    rep.iterations = sweep;
    if (sweep >= cfg.max_iters) break;
    if (cfg.stop_tol > 0.0 && rn <= cfg.stop_tol * initial_residual) {
      rep.stopped_early = true;
      break;
    }
    RSolveResult z = solve_R(res, rep.theta, cfg, geom, nx, ny);
    rep.cg_iterations.push_back(z.iterations);
    rep.cg_converged.push_back(z.converged ? 1 : 0);
    if (!z.converged) rep.any_cg_failure = true;
    GridDensity upd = discrete_adjoint_apply(z.solution, geom, nx, ny);
    for (std::size_t k = 0; k < f.values.size(); ++k) {
      f.values[k] += cfg.omega * upd.values[k];
      if (!ball[k] || (support_mask && !(*support_mask)[k])) f.values[k] = 0.0;
    }
  }
  if (support_mask) f.mask = *support_mask;
  return {std::move(f), std::move(rep)};
}

std::string ConvergenceReport::to_table() const {
  std::string out;
  char line[160];
  const bool with_error = !error_norms.empty();
  std::snprintf(line, sizeof line, "%5s  %-17s  %-17s  %8s  %5s\n", "iter",
                "residual", with_error ? "rel_error" : "-", "cg_iters",
                "cg_ok");
  out += line;
  for (std::size_t k = 0; k < residual_norms.size(); ++k) {
    char errbuf[32];
    if (with_error)
      std::snprintf(errbuf, sizeof errbuf, "%.9e", error_norms[k]);
    else
      std::snprintf(errbuf, sizeof errbuf, "-");
    const int cg = k < cg_iterations.size() ? cg_iterations[k] : 0;
    const bool ok = k < cg_converged.size() ? cg_converged[k] != 0 : true;
    std::snprintf(line, sizeof line, "%5zu  %.11e  %-17s  %8d  %5s\n", k,
                  residual_norms[k], errbuf, cg, ok ? "yes" : "NO");
    out += line;
  }
  std::snprintf(line, sizeof line,
                "lambda_max %.9e  theta %.9e  sweeps %d%s%s\n", lambda_max,
                theta, iterations, stopped_early ? "  (stopped early)" : "",
                any_cg_failure ? "  (cg warnings)" : "");
  out += line;
  return out;
}

}  // namespace funkrad

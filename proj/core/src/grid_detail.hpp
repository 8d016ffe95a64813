#pragma once

#include <cmath>

namespace funkrad::detail {

/// Bilinear stencil of a physical point on the cell-centered grid over
/// [-1,1]^2. Entries whose neighbor falls off the grid are dropped (weight
/// kept, index -1), which truncates the interpolant at the grid edge.
struct Stencil {
  int idx[4];
  double w[4];
  int count = 0;
};

/// Builds the stencil for p = (px, py). Returns false (empty stencil) outside
/// the open unit ball; interpolation is hard-zero there. Both the forward
/// gather and the adjoint scatter go through this one routine, so the discrete
/// transpose pairing is exact by construction.
inline bool make_stencil(int nx, int ny, double px, double py, Stencil& st) {
  if (px * px + py * py >= 1.0) return false;
  const double gx = (px + 1.0) * (0.5 * nx) - 0.5;
  const double gy = (py + 1.0) * (0.5 * ny) - 0.5;
  const double fgx = std::floor(gx);
  const double fgy = std::floor(gy);
  const int i0 = static_cast<int>(fgx);
  const int j0 = static_cast<int>(fgy);
  const double fx = gx - fgx;
  const double fy = gy - fgy;
  const double wx[2] = {1.0 - fx, fx};
  const double wy[2] = {1.0 - fy, fy};
  int n = 0;
  for (int dj = 0; dj < 2; ++dj) {
    const int j = j0 + dj;
    if (j < 0 || j >= ny) continue;
    for (int di = 0; di < 2; ++di) {
      const int i = i0 + di;
      if (i < 0 || i >= nx) continue;
      st.idx[n] = j * nx + i;
      st.w[n] = wx[di] * wy[dj];
      ++n;
    }
  }
  st.count = n;
  return true;
}

}  // namespace funkrad::detail

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include <doctest.h>
#include <funkrad/errors.hpp>
#include <funkrad/fields.hpp>
#include <funkrad/geometry.hpp>
#include <funkrad/transform.hpp>

using namespace funkrad;

namespace {
constexpr double kPi = 3.14159265358979323846;

/// Exact arc length of the circle |x - y| = r (detector at distance R from the
/// origin) inside the disk |x| < a.
double arc_exact(double R, double r, double a) {
  const double c = (a * a - R * R - r * r) / (2.0 * R * r);
  if (c <= -1.0) return 0.0;
  if (c >= 1.0) return 2.0 * kPi * r;
  return 2.0 * r * (kPi - std::acos(c));
}

GridDensity centered_disk(double a, int n) {
  PhantomSpec spec;
  spec.primitives.push_back({PhantomPrimitive::Kind::kDisk, {0.0, 0.0}, a, 1.0});
  return make_phantom(spec, n, n);
}
}  // namespace

TEST_CASE("forward matches the closed-form disk transform") {
  auto geom = ScanGeometry::full_scan(1.5, 180, 51);
  auto f = centered_disk(0.5, 128);
  auto u = forward(f, geom);
  CHECK(u.kind == SinogramKind::kFunction);
  // radius node j = 25 sits exactly at r = 1.5
  REQUIRE(geom.radius(25) == doctest::Approx(1.5).epsilon(1e-15));
  const double want = arc_exact(1.5, 1.5, 0.5);
  CHECK(std::fabs(u.at(0, 25) - want) < 5e-3 * want);
  // symmetric detectors agree to quadrature accuracy (node sets differ, so
  // the match is approximate, not bitwise)
  CHECK(u.at(45, 25) == doctest::Approx(u.at(0, 25)).epsilon(1e-3));
  // circles that miss the ball give exact zeros
  CHECK(u.at(0, 0) == 0.0);                  // r = 0.5 around y = (1.5, 0)
  CHECK(u.at(0, geom.n_radii - 1) == 0.0);   // r = 2.5 encloses the ball
}

TEST_CASE("dual of the unit weight is -2 pi R at the center") {
  auto geom = ScanGeometry::full_scan(1.5, 180, 160);
  Sinogram u(geom, SinogramKind::kDensity);
  for (auto& v : u.values) v = 1.0;
  auto g = dual(u, geom, 65, 65);
  CHECK(g.cell_center(32, 32).norm() < 1e-14);
  CHECK(g.at(32, 32) == doctest::Approx(-2 * kPi * 1.5).epsilon(1e-13));
  // hard zero outside the open unit ball
  CHECK(g.at(0, 0) == 0.0);
}

TEST_CASE("backprojection is the dual of the cutoff-weighted data") {
  auto geom = ScanGeometry::partial_scan(1.5, 0.3, 60, 48);
  auto u = random_smooth_weight(geom, 23);
  u.kind = SinogramKind::kFunction;
  auto bp = backproject(u, geom, 40, 40);

  Sinogram w(geom, SinogramKind::kDensity);
  for (int i = 0; i < geom.n_detectors; ++i)
    for (int j = 0; j < geom.n_radii; ++j)
      w.at(i, j) = u.at(i, j) * geom.cutoff_at(i);
  auto du = dual(w, geom, 40, 40);
  REQUIRE(bp.values.size() == du.values.size());
  for (std::size_t k = 0; k < bp.values.size(); ++k)
    CHECK(std::fabs(bp.values[k] - du.values[k]) <=
          1e-12 * (1.0 + std::fabs(du.values[k])));
}

TEST_CASE("kind tags are enforced") {
  auto geom = ScanGeometry::full_scan(1.5, 20, 16);
  Sinogram fn(geom, SinogramKind::kFunction);
  Sinogram de(geom, SinogramKind::kDensity);
  CHECK_THROWS_AS(dual(fn, geom, 16, 16), ValidationError);
  CHECK_THROWS_AS(backproject(de, geom, 16, 16), ValidationError);
  GridDensity f(16, 16);
  f.at(8, 8) = 1.0;
  CHECK_THROWS_AS(adjoint_residual(f, fn, geom), ValidationError);
  CHECK_THROWS_AS(forward(f, ScanGeometry::full_scan(0.5, 20, 16)),
                  ValidationError);
}

TEST_CASE("duality defect is small at moderate resolution") {
  auto geom = ScanGeometry::full_scan(1.5, 90, 64);
  PhantomSpec spec;
  spec.random_gaussians = 3;
  spec.seed = 4;
  auto f = make_phantom(spec, 48, 48);
  auto u = random_smooth_weight(geom, 14);
  CHECK(adjoint_residual(f, u, geom) < 1e-3);
}

TEST_CASE("normal kernel: frozen oracle, symmetry, validation") {
  auto geom = ScanGeometry::full_scan(1.5, 180, 160);
  CHECK(normal_kernel({0.3, 0.1}, {0.3, -0.1}, geom) ==
        doctest::Approx(15.034675478056121).epsilon(1e-12));
  CHECK(normal_kernel({0.3, 0.1}, {0.3, -0.1}, geom) ==
        doctest::Approx(normal_kernel({0.3, -0.1}, {0.3, 0.1}, geom))
            .epsilon(1e-14));
  // empty equidistant set gives zero
  auto narrow = ScanGeometry::full_scan(1.5, 180, 160, 0.5, 1.2);
  CHECK(normal_kernel({0.3, 0.0}, {-0.3, 0.0}, narrow) == 0.0);
  CHECK_THROWS_AS(normal_kernel({0.3, 0.1}, {0.3, 0.1}, geom),
                  ValidationError);
}

TEST_CASE("kernel probe fits the 1/|x-y| law") {
  auto geom = ScanGeometry::full_scan(1.5, 180, 160);
  auto rep = kernel_probe({0.3, 0.1}, {1.0, 0.5}, geom, 1e-3, 1e-2, 7);
  CHECK(rep.distances.size() == 7);
  CHECK(rep.values.size() == 7);
  CHECK(std::fabs(rep.direction.norm() - 1.0) < 1e-14);
  CHECK(rep.slope == doctest::Approx(-1.0).epsilon(1e-3));
  CHECK(rep.amplitude > 0.0);
  CHECK(rep.max_log_residual < 1e-3);
  CHECK_THROWS_AS(kernel_probe({0.3, 0.1}, {1, 0}, geom, 0.0, 1e-2, 7),
                  ValidationError);
  CHECK_THROWS_AS(kernel_probe({0.3, 0.1}, {1, 0}, geom, 1e-3, 1e-2, 1),
                  ValidationError);
  CHECK_THROWS_AS(kernel_probe({0.3, 0.1}, {0, 0}, geom, 1e-3, 1e-2, 7),
                  ValidationError);
}

TEST_CASE("spectrum probe: SPD ordering and guard rails") {
  auto geom = ScanGeometry::full_scan(1.5, 36, 24);
  auto rep = spectrum_probe(geom, 12, 12, {}, 2, 20);
  CHECK(rep.n_masked > 20);
  CHECK(std::is_sorted(rep.eigenvalues.rbegin(), rep.eigenvalues.rend()));
  CHECK(rep.eigenvalues.front() > 0.0);
  CHECK(rep.lambda_min > 0.0);
  CHECK(rep.slope < 0.0);

  CHECK_THROWS_AS(spectrum_probe(geom, 128, 128, {}, 10, 100),
                  ValidationError);  // too many masked cells
  CHECK_THROWS_AS(spectrum_probe(geom, 12, 12, {}, 0, 20), ValidationError);
  CHECK_THROWS_AS(spectrum_probe(geom, 12, 12, {}, 5, 5), ValidationError);
  std::vector<std::uint8_t> none(144, 0);
  CHECK_THROWS_AS(spectrum_probe(geom, 12, 12, none, 2, 20), ValidationError);
  std::vector<std::uint8_t> wrong(10, 1);
  CHECK_THROWS_AS(spectrum_probe(geom, 12, 12, wrong, 2, 20), ValidationError);
}

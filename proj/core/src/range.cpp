#include "funkrad/range.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "funkrad/errors.hpp"

namespace funkrad {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double v = 1.0;
  for (int i = 1; i <= k; ++i) v = v * (n - k + i) / i;
  return v;
}

// Analytic circle integral  I = R * Integral_0^{2pi} phi(t) cos^p(t - psi) dt
// for a single Fourier term phi(t) = ca cos(qt) + sa sin(qt), using
// cos^p x = 2^{-p} sum_i binom(p,i) cos((p-2i)x) and orthogonality.
double term_cospow_integral(const FourierTerm& term, int p, double psi,
                            double detector_radius) {
  const double scale = std::ldexp(1.0, -p);  // 2^{-p}
  long double acc = 0.0L;
  for (int i = 0; i <= p; ++i) {
    const int mprime = std::abs(p - 2 * i);
    if (mprime != term.frequency) continue;
    const double c = binom(p, i) * scale;
    if (mprime == 0) {
      acc += static_cast<long double>(c) * kTwoPi * term.cos_amp;
    } else {
      // cos(m'(t-psi)) = cos(m't)cos(m'psi) + sin(m't)sin(m'psi);
      // each product integrates to pi against the matching harmonic.
      const double pi = kTwoPi / 2.0;
      acc += static_cast<long double>(c) * pi *
             (term.cos_amp * std::cos(mprime * psi) +
              term.sin_amp * std::sin(mprime * psi));
    }
  }
  return static_cast<double>(acc) * detector_radius;
}

void require_full_scan(const ScanGeometry& geom, const char* what) {
  if (!geom.is_full())
    throw ValidationError(std::string("partial-scan-unsupported: ") + what +
                          " is defined for full-scan geometries only");
}

void require_matching_radius(const Annihilator& a, double detector_radius,
                             const char* what) {
  if (std::abs(a.detector_radius - detector_radius) > 1e-12)
    throw ValidationError(
        std::string("geometry-mismatch: ") + what +
        ": annihilator detector radius " + std::to_string(a.detector_radius) +
        " does not match geometry radius " + std::to_string(detector_radius));
}

}  // namespace

double Annihilator::coefficient(int j, double t) const {
  if (j < 0 || j >= static_cast<int>(terms.size())) return 0.0;
  long double acc = 0.0L;
  for (const auto& term : terms[j])
    acc += term.cos_amp * std::cos(term.frequency * t) +
           term.sin_amp * std::sin(term.frequency * t);
  return static_cast<double>(acc);
}

double Annihilator::evaluate(double t, double s) const {
  const double shift = s - detector_radius * detector_radius;
  long double acc = 0.0L;
  long double power = 1.0L;
  for (int j = 0; j <= degree; ++j) {
    acc += static_cast<long double>(coefficient(j, t)) * power;
    power *= shift;
  }
  return static_cast<double>(acc);
}

int Annihilator::max_frequency() const {
  int q = 0;
  for (const auto& series : terms)
    for (const auto& term : series) q = std::max(q, term.frequency);
  return q;
}

void Annihilator::validate() const {
  if (degree < 0)
    throw ValidationError("degenerate-input: annihilator degree must be >= 0");
  if (static_cast<int>(terms.size()) != degree + 1)
    throw ValidationError(
        "shape-mismatch: annihilator needs degree+1 coefficient series, got " +
        std::to_string(terms.size()) + " for degree " + std::to_string(degree));
  if (!(detector_radius > 0.0) || !std::isfinite(detector_radius))
    throw ValidationError(
        "degenerate-input: annihilator detector_radius must be positive");
  for (const auto& series : terms)
    for (const auto& term : series) {
      if (term.frequency < 0)
        throw ValidationError(
            "degenerate-input: annihilator frequencies must be >= 0");
      if (!std::isfinite(term.cos_amp) || !std::isfinite(term.sin_amp))
        throw ValidationError(
            "non-finite-value: annihilator amplitude is not finite");
    }
}

std::string Annihilator::to_json() const {
  nlohmann::json j;
  j["degree"] = degree;
  j["detector_radius"] = detector_radius;
  j["certified"] = certified;
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t jj = 0; jj < terms.size(); ++jj)
    for (const auto& term : terms[jj]) {
      nlohmann::json t;
      t["j"] = static_cast<int>(jj);
      t["frequency"] = term.frequency;
      t["cos_amp"] = term.cos_amp;
      t["sin_amp"] = term.sin_amp;
      arr.push_back(t);
    }
  j["terms"] = arr;
  return j.dump(2);
}

Annihilator Annihilator::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed-header: annihilator JSON: ") +
                          e.what());
  }
  Annihilator a;
  try {
    a.degree = j.at("degree").get<int>();
    a.detector_radius = j.at("detector_radius").get<double>();
    if (a.degree < 0 || a.degree > 64)
      throw ValidationError("degenerate-input: annihilator degree " +
                            std::to_string(a.degree) + " out of range");
    a.terms.assign(static_cast<std::size_t>(a.degree) + 1, {});
    for (const auto& t : j.at("terms")) {
      const int jj = t.at("j").get<int>();
      if (jj < 0 || jj > a.degree)
        throw ValidationError("shape-mismatch: annihilator term index " +
                              std::to_string(jj) + " exceeds degree");
      FourierTerm term;
      term.frequency = t.at("frequency").get<int>();
      term.cos_amp = t.at("cos_amp").get<double>();
      term.sin_amp = t.at("sin_amp").get<double>();
      a.terms[jj].push_back(term);
    }
    if (j.contains("certified")) a.certified = j.at("certified").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed-header: annihilator JSON: ") +
                          e.what());
  }
  a.validate();
  return a;
}

double hyperplane_check(const Vec2& x, double t, const ScanGeometry& geom) {
  const double R = geom.detector_radius;
  const Vec2 y{R * std::cos(t), R * std::sin(t)};
  const Vec2 d = x - y;
  const double s = d.norm2();
  return std::abs(2.0 * x.dot(y) + s - x.norm2() - R * R);
}

MomentResidualReport moment_residuals(const Annihilator& a) {
  a.validate();
  MomentResidualReport rep;
  const int k = a.degree;
  for (int m = 0; m <= 2 * k; ++m) {
    MomentResidualReport::Row row;
    row.m = m;
    const int n_probe = 2 * m + 1;
    for (int l = 0; l < n_probe; ++l) {
      const double psi = kTwoPi * l / n_probe;
      long double em = 0.0L;
      const int k_lo = (m + 1) / 2;
      const int k_hi = std::min(m, k);
      for (int kp = k_lo; kp <= k_hi; ++kp) {
        const int p = 2 * kp - m;
        const double coeff =
            binom(kp, p) * std::pow(-2.0, p) * std::pow(a.detector_radius, p);
        long double integral = 0.0L;
        for (const auto& term : a.terms[kp])
          integral += term_cospow_integral(term, p, psi, a.detector_radius);
        em += static_cast<long double>(coeff) * integral;
      }
      row.z_angles.push_back(psi);
      row.values.push_back(static_cast<double>(em));
      row.max_abs = std::max(row.max_abs, std::abs(static_cast<double>(em)));
    }
    rep.max_abs = std::max(rep.max_abs, row.max_abs);
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

std::string MomentResidualReport::to_table() const {
  std::string out = "    m   probes   max |E_m(z)|\n";
  char line[96];
  for (const auto& row : rows) {
    std::snprintf(line, sizeof line, "%5d  %7zu   %.11e\n", row.m,
                  row.z_angles.size(), row.max_abs);
    out += line;
  }
  std::snprintf(line, sizeof line, "overall max %.11e\n", max_abs);
  out += line;
  return out;
}

Annihilator build_annihilator(int k, int q,
                              const std::vector<double>& amplitudes,
                              double detector_radius, bool use_sine) {
  if (k < 0)
    throw ValidationError("degenerate-input: annihilator degree must be >= 0");
  if (q <= k)
    throw ValidationError(
        "frequency-too-low: harmonic frequency q = " + std::to_string(q) +
        " must exceed the degree k = " + std::to_string(k) +
        " (lower harmonics appear in <z,y>^j and the moments would not vanish)");
  if (static_cast<int>(amplitudes.size()) != k + 1)
    throw ValidationError("shape-mismatch: expected " + std::to_string(k + 1) +
                          " amplitudes for degree " + std::to_string(k) +
                          ", got " + std::to_string(amplitudes.size()));
  Annihilator a;
  a.degree = k;
  a.detector_radius = detector_radius;
  a.terms.assign(static_cast<std::size_t>(k) + 1, {});
  for (int j = 0; j <= k; ++j) {
    FourierTerm term;
    term.frequency = q;
    (use_sine ? term.sin_amp : term.cos_amp) = amplitudes[j];
    a.terms[j].push_back(term);
  }
  a.validate();
  const MomentResidualReport rep = moment_residuals(a);
  if (rep.max_abs > 1e-10)
    throw NumericalError(
        "annihilator certification failed: max moment residual " +
        std::to_string(rep.max_abs));
  a.certified = true;
  return a;
}

double annihilation_check(const Annihilator& a, const Vec2& x,
                          const ScanGeometry& geom) {
  a.validate();
  geom.validate();
  require_full_scan(geom, "annihilation_check");
  require_matching_radius(a, geom.detector_radius, "annihilation_check");
  if (x.norm2() > 1.0 + 1e-12)
    throw ValidationError(
        "support-violation: annihilation_check needs x in the closed unit ball");
  const double dt = geom.delta_t();
  long double acc = 0.0L;
  for (int i = 0; i < geom.n_detectors; ++i) {
    const double t = geom.detector_angle(i);
    const Vec2 d = x - geom.detector_position(i);
    acc += static_cast<long double>(a.evaluate(t, d.norm2())) *
           geom.detector_weight(i);
  }
  return std::abs(static_cast<double>(acc) * geom.detector_radius * dt);
}

Sinogram sample_annihilator(const Annihilator& a, const ScanGeometry& geom) {
  a.validate();
  geom.validate();
  require_matching_radius(a, geom.detector_radius, "sample_annihilator");
  Sinogram phi(geom, SinogramKind::kFunction);
  for (int i = 0; i < geom.n_detectors; ++i) {
    const double t = geom.detector_angle(i);
    for (int j = 0; j < geom.n_radii; ++j) {
      const double r = geom.radius(j);
      phi.at(i, j) = a.evaluate(t, r * r);
    }
  }
  return phi;
}

double range_residual(const Sinogram& g, const Annihilator& a) {
  g.validate();
  a.validate();
  require_full_scan(g.geom, "range_residual");
  require_matching_radius(a, g.geom.detector_radius, "range_residual");
  Sinogram phi = sample_annihilator(a, g.geom);
  phi.kind = g.kind;
  const double num = std::abs(inner_product_Sigma(g, phi));
  const double den = std::sqrt(std::max(0.0, inner_product_Sigma(g, g))) *
                         std::sqrt(std::max(0.0, inner_product_Sigma(phi, phi))) +
                     DBL_MIN;
  return num / den;
}

}  // namespace funkrad

#pragma once

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "starquad/engine.hpp"

namespace starquad {

template <int D>
using Vec = Eigen::Matrix<double, D, 1>;
template <int D>
using Mat = Eigen::Matrix<double, D, D>;

template <int D>
Vec<D> to_vec(const Point<D>& p) {
  return Eigen::Map<const Vec<D>>(p.data());
}

template <int D>
Point<D> to_point(const Vec<D>& v) {
  Point<D> p;
  for (int a = 0; a < D; ++a) p[a] = v(a);
  return p;
}

struct DetIdentity {
  double formula = 0.0;
  double direct = 0.0;
};

/// det(alpha I + beta u v^T) = alpha^{d-1} (alpha + beta (u, v)); `direct` is an LU
/// factorisation of the assembled matrix.
inline DetIdentity det_identity(double alpha, double beta, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size() || u.size() < 2) throw PreconditionError("det_identity: u and v need equal dimension >= 2");
  const auto d = u.size();
  Eigen::MatrixXd m = alpha * Eigen::MatrixXd::Identity(d, d) + beta * u * v.transpose();
  return {std::pow(alpha, static_cast<double>(d - 1)) * (alpha + beta * u.dot(v)), m.partialPivLu().determinant()};
}

/// Center o and radius R of the ball, active radius r, node x_k*, probe x, homotopy t.
template <int D>
struct AuxConfig {
  Point<D> o{};
  double R = 1.0;
  double r = 1.0;
  Point<D> node{};
  Point<D> x{};
  double t = 1.0;

  void validate(bool with_probe = true) const {
    if (!(R > 0.0)) throw PreconditionError("AuxConfig: R must be positive");
    if (!(r > 0.0 && r <= R)) throw PreconditionError("AuxConfig: r must lie in (0, R]");
    if (!(t >= 0.0 && t <= 1.0)) throw PreconditionError("AuxConfig: t must lie in [0, 1]");
    if (!(dist2<D>(node, o) > R)) throw PreconditionError("AuxConfig: node must lie outside the ball");
    if (with_probe && !(dist2<D>(x, o) > R)) throw PreconditionError("AuxConfig: probe must lie outside the ball");
  }
};

/// p_k(x; r) = (r (x + x_k*) + |x - x_k*|_2 o) / (|x - x_k*|_2 + 2r).
template <int D>
Point<D> p_map(const AuxConfig<D>& c) {
  c.validate();
  const double L = dist2<D>(c.x, c.node);
  Point<D> p;
  for (int a = 0; a < D; ++a) p[a] = (c.r * (c.x[a] + c.node[a]) + L * c.o[a]) / (L + 2.0 * c.r);
  return p;
}

/// phi_k(x; r, t) = (1 - t) x_k* + t p_k(x; r).
template <int D>
Point<D> phi_map(const AuxConfig<D>& c) {
  return lerp<D>(c.node, p_map<D>(c), c.t);
}

/// psi_k(x; r, t) = t x + (1 - t) p_k(x; r).
template <int D>
Point<D> psi_map(const AuxConfig<D>& c) {
  return lerp<D>(p_map<D>(c), c.x, c.t);
}

/// Intersection of the diagonals x o1 and x_k* o2 of the trapezoid whose other base is the
/// diameter o1 o2 of the r-circle around o parallel to x x_k*. Returns the distance to
/// p_map. Throws DegenerateConfiguration when o x and o x_k* are (nearly) collinear.
template <int D>
double geometric_sense_check(const AuxConfig<D>& c) {
  c.validate();
  const Vec<D> o = to_vec<D>(c.o), x = to_vec<D>(c.x), xk = to_vec<D>(c.node);
  const Vec<D> ox = x - o, ok = xk - o;
  const double cos_angle = ox.dot(ok) / (ox.norm() * ok.norm());
  const double sin_angle = std::sqrt(std::max(0.0, 1.0 - cos_angle * cos_angle));
  if (!(sin_angle >= 1e-5)) throw DegenerateConfiguration("geometric_sense_check: o, x, x_k* are collinear");
  const Vec<D> w = (x - xk).normalized();
  const Vec<D> o1 = o - c.r * w;
  const Vec<D> o2 = o + c.r * w;
  Eigen::Matrix<double, D, 2> m;
  m.col(0) = o1 - x;
  m.col(1) = -(o2 - xk);
  const Eigen::Vector2d st = m.colPivHouseholderQr().solve(xk - x);
  const Vec<D> hit = x + st(0) * (o1 - x);
  return (hit - to_vec<D>(p_map<D>(c))).norm();
}

template <int D>
struct DistanceBoundReport {
  bool passed = true;
  double constant = 0.0;  // C = diam Q sqrt(d) / (2r)
  double lhs = 0.0;       // max(|x - p|_inf, |x_k* - p|_inf)
  double rhs = 0.0;       // C |x - x_k*|_inf
  std::optional<Point<D>> witness;
  std::string message;
};

/// Checks max(|x - p|_inf, |x_k* - p|_inf) <= C |x - x_k*|_inf and that 33 equally spaced
/// points of the segments x -> p and p -> x_k* lie in the closure of Q (within `tolerance`).
template <int D>
DistanceBoundReport<D> distance_bound_check(const StarDomain<D>& dom, const AuxConfig<D>& c, double diam,
                                            double tolerance) {
  if (!dom.near_closure(c.x, tolerance) || !dom.near_closure(c.node, tolerance))
    throw PreconditionError("distance_bound_check: x and x_k* must lie in Q");
  DistanceBoundReport<D> rep;
  rep.constant = diam * std::sqrt(static_cast<double>(D)) / (2.0 * c.r);
  const Point<D> p = p_map<D>(c);
  rep.lhs = std::max(dist_inf<D>(c.x, p), dist_inf<D>(c.node, p));
  rep.rhs = rep.constant * dist_inf<D>(c.x, c.node);
  if (rep.lhs > rep.rhs * (1.0 + 1e-12)) {
    rep.passed = false;
    rep.witness = p;
    rep.message = "distance bound violated";
    return rep;
  }
  for (const auto& [a, b] : {std::pair{c.x, p}, std::pair{p, c.node}}) {
    for (int i = 0; i <= 32; ++i) {
      const Point<D> y = lerp<D>(a, b, i / 32.0);
      if (!dom.near_closure(y, tolerance)) {
        rep.passed = false;
        rep.witness = y;
        rep.message = "segment leaves Q";
        return rep;
      }
    }
  }
  return rep;
}

template <int D>
DistanceBoundReport<D> distance_bound_check(const StarDomain<D>& dom, const AuxConfig<D>& c) {
  double width = 0.0;
  for (int a = 0; a < D; ++a) width = std::max(width, dom.bbox().hi[a] - dom.bbox().lo[a]);
  return distance_bound_check<D>(dom, c, diameter<D>(dom, 4096), width / 1024.0);
}

namespace detail {

template <int D>
struct JacobianParts {
  double L, alpha, beta, mo_dx;
  Vec<D> mo, dx;
};

template <int D>
JacobianParts<D> jacobian_parts(const AuxConfig<D>& c) {
  c.validate();
  const Vec<D> x = to_vec<D>(c.x), xk = to_vec<D>(c.node), o = to_vec<D>(c.o);
  const double L = (x - xk).norm();
  if (!(L > 0.0)) throw PreconditionError("Jacobian formulas need x != x_k*");
  JacobianParts<D> j;
  j.L = L;
  j.alpha = c.r / (2.0 * c.r + L);
  j.beta = 2.0 * c.r / ((2.0 * c.r + L) * (2.0 * c.r + L));
  j.mo = o - 0.5 * (x + xk);
  j.dx = (x - xk) / L;
  j.mo_dx = j.mo.dot(j.dx);
  return j;
}

}  // namespace detail

/// Dp_k/Dx = r / (2r + L) I + 2r / (2r + L)^2 mo dx^T with L = |x - x_k*|_2, m the midpoint
/// of x x_k*, mo = o - m and dx = (x - x_k*) / L.
template <int D>
Mat<D> jacobian_p(const AuxConfig<D>& c) {
  const auto j = detail::jacobian_parts<D>(c);
  return j.alpha * Mat<D>::Identity() + j.beta * j.mo * j.dx.transpose();
}

/// det D phi_k(.; r, t) = t^d r^d (2r + L + 2 (mo, dx)) / (2r + L)^{d+1}.
template <int D>
double jacobian_phi(const AuxConfig<D>& c) {
  const auto j = detail::jacobian_parts<D>(c);
  const double s = 2.0 * c.r + j.L;
  return std::pow(c.t * c.r, D) * (s + 2.0 * j.mo_dx) / std::pow(s, D + 1);
}

/// det D psi_k(.; r, t) = (r (1 - t) / (2r + L) + t)^{d-1} (A (t - 1) + 1) with
/// A = (2r^2 + 3rL + L^2 - 2r (mo, dx)) / (2r + L)^2.
template <int D>
double jacobian_psi(const AuxConfig<D>& c) {
  const auto j = detail::jacobian_parts<D>(c);
  const double s = 2.0 * c.r + j.L;
  const double A = (2.0 * c.r * c.r + 3.0 * c.r * j.L + j.L * j.L - 2.0 * c.r * j.mo_dx) / (s * s);
  return std::pow(c.r * (1.0 - c.t) / s + c.t, D - 1) * (A * (c.t - 1.0) + 1.0);
}

/// Central differences of map(cfg with probe x) at cfg.x, step 1e-5 max(1, |x|_inf).
template <int D, class Map>
Mat<D> finite_difference_jacobian(const AuxConfig<D>& c, Map&& map) {
  const double h = 1e-5 * std::max(1.0, norm_inf<D>(c.x));
  Mat<D> J;
  for (int b = 0; b < D; ++b) {
    AuxConfig<D> plus = c, minus = c;
    plus.x[b] += h;
    minus.x[b] -= h;
    const Point<D> fp = map(plus), fm = map(minus);
    for (int a = 0; a < D; ++a) J(a, b) = (fp[a] - fm[a]) / (2.0 * h);
  }
  return J;
}

/// Planar frame in which x_k* = (x_*, 2 y_*), o = (0, y_*) and q = (x_q, y_q); every x with
/// psi_k(x; r, t) = q lies on the abscissa, x = origin + z w_hat.
template <int D>
struct PreimageFrame {
  Point<D> origin{};
  Point<D> w_hat{};
  double x_star = 0.0, y_star = 0.0, x_q = 0.0, y_q = 0.0;
  bool collinear = false;   // q, o, x_k* on one line: y_* = 0
  bool degenerate = false;  // q = o - t (x_k* - o): the only candidate is 2o - x_k*
};

template <int D>
PreimageFrame<D> preimage_frame(const AuxConfig<D>& c, const Point<D>& q) {
  const Vec<D> o = to_vec<D>(c.o), xk = to_vec<D>(c.node), qv = to_vec<D>(q);
  const Vec<D> reflected = 2.0 * o - xk;
  const double scale = std::max({1.0, (xk - o).norm(), (qv - o).norm()});
  PreimageFrame<D> f;
  Vec<D> w = (qv - o) + c.t * (xk - o);
  if (w.norm() <= 1e-14 * scale) {
    f.degenerate = true;
    w = xk - o;
  }
  const Vec<D> w_hat = w.normalized();
  const Vec<D> to_o = o - reflected;
  f.x_star = to_o.dot(w_hat);
  const Vec<D> origin = reflected + f.x_star * w_hat;
  Vec<D> nu = o - origin;
  if (nu.norm() <= 1e-12 * scale) {
    f.collinear = true;
    nu.setZero();
  } else {
    nu.normalize();
  }
  f.y_star = to_o.dot(nu);
  f.x_q = (qv - origin).dot(w_hat);
  f.y_q = (qv - origin).dot(nu);
  f.origin = to_point<D>(origin);
  f.w_hat = to_point<D>(w_hat);
  return f;
}

/// Unsquared scalar equation (1 - t) r (z + x_*) / (2r + sqrt((z - x_*)^2 + 4 y_*^2)) + t z - x_q.
inline double preimage_residual(double z, double r, double t, double x_star, double y_star, double x_q) {
  const double L = std::sqrt((z - x_star) * (z - x_star) + 4.0 * y_star * y_star);
  return (1.0 - t) * r * (z + x_star) / (2.0 * r + L) + t * z - x_q;
}

inline double preimage_residual_derivative(double z, double r, double t, double x_star, double y_star) {
  const double L = std::sqrt((z - x_star) * (z - x_star) + 4.0 * y_star * y_star);
  const double s = 2.0 * r + L;
  const double dL = L > 0.0 ? (z - x_star) / L : 0.0;
  return (1.0 - t) * r * (s - (z + x_star) * dL) / (s * s) + t;
}

/// Coefficients c0..c4 of [(1-t) r (z + x_*) - 2r (x_q - t z)]^2 - (x_q - t z)^2 ((x_* - z)^2 + 4 y_*^2).
inline std::array<double, 5> preimage_quartic(double r, double t, double x_star, double y_star, double x_q) {
  const double a1 = r * (1.0 + t), a0 = r * ((1.0 - t) * x_star - 2.0 * x_q);
  const double b1 = -t, b0 = x_q;
  const double c2 = 1.0, c1 = -2.0 * x_star, c0 = x_star * x_star + 4.0 * y_star * y_star;
  const double s2 = b1 * b1, s1 = 2.0 * b1 * b0, s0 = b0 * b0;
  std::array<double, 5> p{};
  p[0] = a0 * a0 - s0 * c0;
  p[1] = 2.0 * a1 * a0 - (s1 * c0 + s0 * c1);
  p[2] = a1 * a1 - (s2 * c0 + s1 * c1 + s0 * c2);
  p[3] = -(s2 * c1 + s1 * c2);
  p[4] = -(s2 * c2);
  return p;
}

/// Real parts of the eigenvalues of the companion matrix whose imaginary part is small
/// relative to their modulus. Leading coefficients below 1e-14 max|c| are dropped.
inline std::vector<double> polynomial_real_roots(std::span<const double> coeffs, double imag_tol = 1e-6) {
  double cmax = 0.0;
  for (double c : coeffs) cmax = std::max(cmax, std::abs(c));
  if (cmax == 0.0) return {};
  int deg = static_cast<int>(coeffs.size()) - 1;
  while (deg > 0 && std::abs(coeffs[deg]) <= 1e-14 * cmax) --deg;
  if (deg == 0) return {};
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
  for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < deg; ++i) comp(i, deg - 1) = -coeffs[i] / coeffs[deg];
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  std::vector<double> out;
  for (int i = 0; i < deg; ++i) {
    const auto z = es.eigenvalues()(i);
    if (std::abs(z.imag()) <= imag_tol * std::max(1.0, std::abs(z))) out.push_back(z.real());
  }
  std::sort(out.begin(), out.end());
  return out;
}

template <int D>
struct PreimageResult {
  int count = 0;
  std::vector<double> z;
  std::vector<Point<D>> roots;
  PreimageFrame<D> frame;
};

/// Points x with psi_k(x; r, t) = q, found as the real roots of the quartic that also
/// satisfy the unsquared equation. Uses cfg.o, cfg.r, cfg.node and cfg.t; cfg.x is ignored.
template <int D>
PreimageResult<D> preimage_count(const AuxConfig<D>& c, const Point<D>& q) {
  c.validate(false);
  PreimageResult<D> res;
  res.frame = preimage_frame<D>(c, q);
  const auto& f = res.frame;
  const double mag = std::max({1.0, std::abs(f.x_star), std::abs(f.y_star), std::abs(f.x_q), c.r});
  auto emit = [&](double z) {
    for (double e : res.z)
      if (std::abs(e - z) <= 1e-7 * mag) return;
    res.z.push_back(z);
  };
  if (f.degenerate) {
    emit(f.x_q);
  } else if (std::abs(f.y_q - (1.0 - c.t) * f.y_star) <= 1e-9 * mag) {
    const auto P = preimage_quartic(c.r, c.t, f.x_star, f.y_star, f.x_q);
    auto F = [&](double z) { return preimage_residual(z, c.r, c.t, f.x_star, f.y_star, f.x_q); };
    for (double z : polynomial_real_roots(P, 1e-4)) {
      const double p = (((P[4] * z + P[3]) * z + P[2]) * z + P[1]) * z + P[0];
      const double dp = ((4.0 * P[4] * z + 3.0 * P[3]) * z + 2.0 * P[2]) * z + P[1];
      // one Newton step on P, skipped at (near) double roots
      if (dp != 0.0 && std::abs(p / dp) <= 1e-6 * mag) z -= p / dp;
      // drop roots of the squared equation that are not roots of F
      if (!(std::abs(F(z)) <= 1e-4 * mag)) continue;
      for (int it = 0; it < 8 && std::abs(F(z)) > 1e-14 * mag; ++it) {
        const double d = preimage_residual_derivative(z, c.r, c.t, f.x_star, f.y_star);
        if (d == 0.0) break;
        const double next = z - F(z) / d;
        if (!(std::abs(F(next)) < std::abs(F(z)))) break;
        z = next;
      }
      if (std::abs(F(z)) <= 1e-8 * mag) emit(z);
    }
  }
  std::sort(res.z.begin(), res.z.end());
  for (double z : res.z) res.roots.push_back(add<D>(f.origin, scale<D>(f.w_hat, z)));
  res.count = static_cast<int>(res.z.size());
  return res;
}

/// Sign changes of the unsquared residual on `samples` equally spaced points of the
/// interval that must contain every root when t > 0.
template <int D>
int preimage_scan_count(const AuxConfig<D>& c, const PreimageFrame<D>& f, int samples) {
  if (!(c.t > 0.0)) throw PreconditionError("preimage_scan_count: t must be positive");
  const double K = (1.0 - c.t) * std::max(c.r, std::abs(f.x_star));
  const double lo = (f.x_q - K) / c.t - 1e-9, hi = (f.x_q + K) / c.t + 1e-9;
  int count = 0;
  double prev = preimage_residual(lo, c.r, c.t, f.x_star, f.y_star, f.x_q);
  for (int i = 1; i <= samples; ++i) {
    const double z = lo + (hi - lo) * i / samples;
    const double v = preimage_residual(z, c.r, c.t, f.x_star, f.y_star, f.x_q);
    if (v == 0.0 || (prev < 0.0) != (v < 0.0)) ++count;
    prev = v == 0.0 ? -prev : v;
  }
  return count;
}

/// f(y) - f(x) - int_0^1 (y - x, grad f((1-t) x + t y)) dt with 64-point Gauss-Legendre.
template <int D>
double segment_identity_residual(const TestFunction<D>& f, const Point<D>& x, const Point<D>& y) {
  const Point<D> dir = sub<D>(y, x);
  auto integrand = [&](double t) { return dot<D>(dir, f.gradient(lerp<D>(x, y, t))); };
  const double integral = boost::math::quadrature::gauss<double, 64>::integrate(integrand, 0.0, 1.0);
  return f.value(y) - f.value(x) - integral;
}

struct WRegionReport {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> min_abs_jacobian{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                                         std::numeric_limits<double>::infinity()};
  std::array<double, 3> bound{};  // 3^{-(d+1)}, 4 3^{-(d+1)}, 3^{-(d+1)}
  double max_distance = 0.0;      // max |x - x_k*|_2 over all U probe points
  std::size_t population = 0;     // U probe points
  std::size_t sampled = 0;
  std::size_t violations = 0;
  bool passed = true;
};

/// Splits the U_k probe points by (mo, dx): W1 below -2R, W2 in [-2R, -R/2], W3 above -R/2,
/// and checks |J_phi(R, 1)| > 3^{-(d+1)} on W1 u W3 and |J_phi(R/8, 1)| > 4 3^{-(d+1)} on W2.
/// Requires every U probe point within R/8 of its node; `samples` = 0 uses all points,
/// otherwise an evenly strided subset.
template <int D>
WRegionReport w_region_bounds(const StarDomain<D>& dom, const CubatureRule<D>& rule, std::size_t samples) {
  if (!rule.nodeset) throw PreconditionError("w_region_bounds: rule has no node set");
  const NodeSet<D>& set = *rule.nodeset;
  const double R = dom.ball_radius();
  struct Probe {
    Point<D> x;
    std::size_t k;
  };
  std::vector<Probe> probes;
  WRegionReport rep;
  scan_partition<D>(dom, set, rule.subgrid, [&](const Point<D>& x, std::optional<std::size_t> k, bool covered) {
    if (!k || covered) return;
    probes.push_back({x, *k});
    rep.max_distance = std::max(rep.max_distance, dist2<D>(x, set.nodes[*k]));
  });
  rep.population = probes.size();
  if (!(rep.max_distance < R / 8.0))
    throw PreconditionError("w_region_bounds: max |x - x_k*|_2 = " + format_exact(rep.max_distance) +
                            " is not below R/8 = " + format_exact(R / 8.0) + "; increase n");
  const double base = std::pow(3.0, -(D + 1));
  rep.bound = {base, 4.0 * base, base};
  const std::size_t take = samples == 0 ? probes.size() : std::min(samples, probes.size());
  for (std::size_t s = 0; s < take; ++s) {
    const Probe& pr = probes[take == probes.size() ? s : s * probes.size() / take];
    // probes on their node up to rounding: p_k is not differentiable there
    if (dist2<D>(pr.x, set.nodes[pr.k]) <= 1e-12 * std::max(1.0, norm_inf<D>(set.nodes[pr.k]))) continue;
    AuxConfig<D> c{dom.center(), R, R, set.nodes[pr.k], pr.x, 1.0};
    const auto parts = detail::jacobian_parts<D>(c);
    const int region = parts.mo_dx < -2.0 * R ? 0 : (parts.mo_dx <= -0.5 * R ? 1 : 2);
    if (region == 1) c.r = R / 8.0;
    const double J = std::abs(jacobian_phi<D>(c));
    ++rep.counts[region];
    ++rep.sampled;
    rep.min_abs_jacobian[region] = std::min(rep.min_abs_jacobian[region], J);
    if (!(J > rep.bound[region])) ++rep.violations;
  }
  rep.passed = rep.violations == 0;
  return rep;
}

/// Configuration with o in [-1,1]^D, R in [0.5, 1.5], r in (0, R], node and probe outside
/// the ball at distance up to 4R, t uniform in [0, 1].
template <int D>
AuxConfig<D> random_aux_config(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AuxConfig<D> c;
  for (int a = 0; a < D; ++a) c.o[a] = 2.0 * u(rng) - 1.0;
  c.R = 0.5 + u(rng);
  c.r = c.R * (0.05 + 0.95 * u(rng));
  auto outside = [&] { return add<D>(c.o, scale<D>(random_direction<D>(rng), c.R * (1.05 + 2.95 * u(rng)))); };
  c.node = outside();
  c.x = outside();
  c.t = u(rng);
  return c;
}

}  // namespace starquad

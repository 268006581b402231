#pragma once

// Independent reference computations shared by the unit tests and the acceptance binary.

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// c(d,p) from a Monte Carlo estimate of int_{|x|_inf <= 1} | |x|_inf^{1-d} - |x|_inf |^{p'} dx.
/// Points are drawn with density q(x) = (d - g) |x|_inf^{-g} / (d 2^d), g = (d-1) p', which
/// is sampled by t = U^{1/(d-g)} followed by a uniform point on the l_inf sphere of radius t.
/// The weight |...|^{p'} / q stays bounded near the origin, so the variance is finite.
inline McEstimate mc_cdp(int d, double p_conj, long samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double g = (d - 1) * p_conj;
  const double two_d = std::ldexp(1.0, d);
  std::vector<double> x(static_cast<std::size_t>(d));
  double sum = 0.0, sum_sq = 0.0;
  for (long i = 0; i < samples; ++i) {
    const double t = std::pow(1.0 - u(rng), 1.0 / (d - g));
    const int face = static_cast<int>(u(rng) * d) % d;
    for (int a = 0; a < d; ++a) x[a] = (2.0 * u(rng) - 1.0) * t;
    x[face] = u(rng) < 0.5 ? -t : t;
    double norm = 0.0;
    for (double v : x) norm = std::max(norm, std::abs(v));
    const double f = std::pow(std::abs(std::pow(norm, 1.0 - d) - norm), p_conj);
    const double q = (d - g) * std::pow(norm, -g) / (d * two_d);
    const double w = f / q;
    sum += w;
    sum_sq += w * w;
  }
  const double mean = sum / samples;
  const double var = std::max(0.0, sum_sq / samples - mean * mean);
  // c = (1/d) I^{1/p'}; delta method for the standard error
  const double c = std::pow(mean, 1.0 / p_conj) / d;
  return {c, c / p_conj * std::sqrt(var / samples) / mean};
}

/// c(d,p) by tanh-sinh quadrature of the radial integral in t, singularity left in place.
inline double tanh_sinh_cdp(int d, double p_conj) {
  boost::math::quadrature::tanh_sinh<double> ts;
  const double e = (d - 1) * (1.0 - p_conj);
  auto f = [d, p_conj, e](double t) { return std::pow(t, e) * std::pow(1.0 - std::pow(t, double(d)), p_conj); };
  const double integral = ts.integrate(f, 0.0, 1.0);
  return std::pow(d * std::ldexp(1.0, d) * integral, 1.0 / p_conj) / d;
}

/// Determinant by cofactor expansion along the first row.
inline double cofactor_det(const std::vector<std::vector<double>>& m) {
  const std::size_t n = m.size();
  if (n == 1) return m[0][0];
  if (n == 2) return m[0][0] * m[1][1] - m[0][1] * m[1][0];
  double det = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<std::vector<double>> minor(n - 1, std::vector<double>(n - 1));
    for (std::size_t r = 1; r < n; ++r)
      for (std::size_t c = 0, cc = 0; c < n; ++c)
        if (c != j) minor[r - 1][cc++] = m[r][c];
    det += (j % 2 == 0 ? 1.0 : -1.0) * m[0][j] * cofactor_det(minor);
  }
  return det;
}

/// int over a cell of side 2h of |x - center|_inf: d 2^d h^{d+1} / (d + 1).
inline double cell_distance_integral(int d, double h) { return d * std::ldexp(1.0, d) * std::pow(h, d + 1) / (d + 1.0); }

/// Determinant by Gaussian elimination with partial pivoting.
inline double elimination_det(std::vector<std::vector<double>> m) {
  const std::size_t n = m.size();
  double det = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    if (m[piv][c] == 0.0) return 0.0;
    if (piv != c) {
      std::swap(m[piv], m[c]);
      det = -det;
    }
    det *= m[c][c];
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = m[r][c] / m[c][c];
      for (std::size_t k = c; k < n; ++k) m[r][k] -= f * m[c][k];
    }
  }
  return det;
}

/// Central differences of map(cfg) in cfg.x, one column per coordinate.
template <int D, class Cfg, class Map>
std::vector<std::vector<double>> fd_matrix(Cfg c, Map map, double h = 1e-5) {
  std::vector<std::vector<double>> J(D, std::vector<double>(D));
  const auto x = c.x;
  for (int j = 0; j < D; ++j) {
    c.x = x;
    c.x[j] = x[j] + h;
    const auto fp = map(c);
    c.x[j] = x[j] - h;
    const auto fm = map(c);
    for (int i = 0; i < D; ++i) J[i][j] = (fp[i] - fm[i]) / (2 * h);
  }
  return J;
}

/// Planar diagonal intersection by Cramer's rule: with w = (x - k) / |x - k|, o1 = o - r w and
/// o2 = o + r w, the line x + s (o1 - x) meets the line k + u (o2 - k).
inline std::array<double, 2> diagonal_intersection(std::array<double, 2> o, double r, std::array<double, 2> k,
                                                   std::array<double, 2> x) {
  const double L = std::hypot(x[0] - k[0], x[1] - k[1]);
  const double wx = (x[0] - k[0]) / L, wy = (x[1] - k[1]) / L;
  const double o1x = o[0] - r * wx, o1y = o[1] - r * wy, o2x = o[0] + r * wx, o2y = o[1] + r * wy;
  const double a11 = o1x - x[0], a12 = -(o2x - k[0]);
  const double a21 = o1y - x[1], a22 = -(o2y - k[1]);
  const double b1 = k[0] - x[0], b2 = k[1] - x[1];
  const double s = (b1 * a22 - a12 * b2) / (a11 * a22 - a12 * a21);
  return {x[0] + s * a11, x[1] + s * a21};
}

/// Preimage count of q under x -> t x + (1 - t) p(x), p(x) = (r (x + k) + |x - k| o) / (|x - k| + 2r),
/// in planar coordinates where k = (x_*, 2 y_*), o = (0, y_*) and preimages lie on the
/// abscissa. Counts sign changes of the first coordinate of the forward map minus x_q on
/// `samples` points of [(x_q - K) / t, (x_q + K) / t], K = (1 - t) max(r, |x_*|): the map's
/// p-part has first coordinate r (z + x_*) / (2r + L), a convex combination of values of
/// modulus at most r and |x_*|.
inline int forward_scan_count(double r, double t, double x_star, double y_star, double x_q, int samples) {
  auto residual = [&](double z) {
    const double dx = z - x_star, dy = -2.0 * y_star;
    const double L = std::sqrt(dx * dx + dy * dy);
    const double px = (r * (z + x_star) + L * 0.0) / (L + 2.0 * r);
    return t * z + (1.0 - t) * px - x_q;
  };
  const double K = (1.0 - t) * std::max(r, std::abs(x_star));
  const double lo = (x_q - K) / t - 1e-9, hi = (x_q + K) / t + 1e-9;
  int count = 0;
  double prev = residual(lo);
  for (int i = 1; i <= samples; ++i) {
    const double v = residual(lo + (hi - lo) * i / samples);
    if (v == 0.0 || (prev < 0.0) != (v < 0.0)) ++count;
    prev = v == 0.0 ? -prev : v;
  }
  return count;
}

}  // namespace oracle

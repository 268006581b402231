#pragma once

#include <cstdio>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "starquad/lemma_lab.hpp"

namespace starquad {

struct LemmaCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct LemmaSuiteOptions {
  std::uint64_t seed = 1;
  int det_instances = 1000;
  int geometry_configs = 1000;
  int distance_pairs = 10000;
  int jacobian_configs = 100;
  int preimage_configs = 10000;
  int scan_samples = 100000;
  int segment_samples = 100;
  std::int64_t w_region_n = 65536;
  std::size_t w_region_samples = 0;
};

namespace detail {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

template <int D>
double matrix_rel_err(const Mat<D>& a, const Mat<D>& b) {
  double worst = 0.0;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / std::max(1e-300, b.cwiseAbs().maxCoeff()));
  return worst;
}

inline LemmaCheck check_det_identity(std::mt19937_64& rng, int instances) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> dim(2, 6);
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const int d = dim(rng);
    Eigen::VectorXd a(d), b(d);
    for (int k = 0; k < d; ++k) {
      a(k) = u(rng);
      b(k) = u(rng);
    }
    const double alpha = u(rng), beta = u(rng);
    const auto r = det_identity(alpha, beta, a, b);
    worst = std::max(worst, std::abs(r.formula - r.direct) / (1.0 + std::abs(r.direct)));
  }
  return {"det_identity", worst <= 1e-9, fmt("max_rel_err=%.3e", worst)};
}

template <int D>
LemmaCheck check_geometric_sense(std::mt19937_64& rng, int configs) {
  double worst = 0.0;
  int degenerate = 0;
  for (int i = 0; i < configs; ++i) {
    try {
      worst = std::max(worst, geometric_sense_check<D>(random_aux_config<D>(rng)));
    } catch (const DegenerateConfiguration&) {
      ++degenerate;
    }
  }
  return {"p_map_geometric_sense", worst <= 1e-10,
          fmt("max_residual=%.3e", worst) + " degenerate=" + std::to_string(degenerate)};
}

/// Pairs x, x_k* in Q outside the ball with |x - x_k*|_inf <= R, r = R.
template <int D>
LemmaCheck check_distance_bound(const StarDomain<D>& dom, std::mt19937_64& rng, int pairs) {
  const Box<D>& box = dom.bbox();
  const double R = dom.ball_radius();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double width = 0.0;
  for (int a = 0; a < D; ++a) width = std::max(width, box.hi[a] - box.lo[a]);
  const double diam = diameter<D>(dom, 4096), tol = width / 1024.0;
  auto outside_ball = [&](const Point<D>& p) { return dom.contains(p) && dist2<D>(p, dom.center()) > R; };
  double worst_ratio = 0.0;
  for (int i = 0; i < pairs; ++i) {
    Point<D> node, x;
    do {
      for (int a = 0; a < D; ++a) node[a] = box.lo[a] + (box.hi[a] - box.lo[a]) * u(rng);
    } while (!outside_ball(node));
    do {
      for (int a = 0; a < D; ++a) x[a] = node[a] + R * (2.0 * u(rng) - 1.0);
    } while (!outside_ball(x));
    const auto rep = distance_bound_check<D>(dom, AuxConfig<D>{dom.center(), R, R, node, x, 1.0}, diam, tol);
    if (!rep.passed) return {"distance_bound", false, rep.message + " at pair " + std::to_string(i)};
    if (rep.rhs > 0.0) worst_ratio = std::max(worst_ratio, rep.lhs / rep.rhs);
  }
  return {"distance_bound", true, fmt("max_lhs_over_rhs=%.4f", worst_ratio) + " pairs=" + std::to_string(pairs)};
}

template <int D>
std::vector<LemmaCheck> check_jacobians(std::mt19937_64& rng, int configs) {
  double wp = 0.0, wphi = 0.0, wpsi = 0.0, wid = 0.0;
  for (int i = 0; i < configs; ++i) {
    AuxConfig<D> c = random_aux_config<D>(rng);
    const Mat<D> fd_p = finite_difference_jacobian<D>(c, [](const AuxConfig<D>& s) { return p_map<D>(s); });
    wp = std::max(wp, matrix_rel_err<D>(jacobian_p<D>(c), fd_p));
    const Mat<D> fd_phi = finite_difference_jacobian<D>(c, [](const AuxConfig<D>& s) { return phi_map<D>(s); });
    wphi = std::max(wphi, rel_err(jacobian_phi<D>(c), fd_phi.determinant()));
    const Mat<D> fd_psi = finite_difference_jacobian<D>(c, [](const AuxConfig<D>& s) { return psi_map<D>(s); });
    wpsi = std::max(wpsi, rel_err(jacobian_psi<D>(c), fd_psi.determinant()));
    c.t = 1.0;
    wid = std::max(wid, std::abs(jacobian_psi<D>(c) - 1.0));
  }
  return {{"jacobian_p", wp <= 1e-6, fmt("max_rel_err=%.3e", wp)},
          {"jacobian_phi", wphi <= 1e-6, fmt("max_rel_err=%.3e", wphi)},
          {"jacobian_psi", wpsi <= 1e-6, fmt("max_rel_err=%.3e", wpsi)},
          {"jacobian_psi_identity", wid <= 1e-14, fmt("max_abs_dev=%.3e", wid)}};
}

/// Half of the targets are images psi(x) of a random probe (x must be recovered), half are
/// random points near the ball.
template <int D>
LemmaCheck check_preimages(std::mt19937_64& rng, int configs, int scan_samples) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int max_count = 0, mismatches = 0, missed = 0, identity_fail = 0;
  for (int i = 0; i < configs; ++i) {
    AuxConfig<D> c = random_aux_config<D>(rng);
    c.t = 0.05 + 0.95 * u(rng);
    Point<D> q;
    const bool forward = i % 2 == 0;
    if (forward) {
      q = psi_map<D>(c);
    } else {
      for (int a = 0; a < D; ++a) q[a] = c.o[a] + 3.0 * c.R * (2.0 * u(rng) - 1.0);
    }
    const auto res = preimage_count<D>(c, q);
    max_count = std::max(max_count, res.count);
    if (res.count != preimage_scan_count<D>(c, res.frame, scan_samples)) ++mismatches;
    if (forward) {
      bool found = false;
      for (const auto& z : res.roots) found = found || dist2<D>(z, c.x) <= 1e-6 * std::max(1.0, norm2<D>(c.x));
      if (!found) ++missed;
    }
    AuxConfig<D> id = c;
    id.t = 1.0;
    const auto one = preimage_count<D>(id, q);
    if (one.count != 1 || dist2<D>(one.roots[0], q) > 1e-9 * std::max(1.0, norm2<D>(q))) ++identity_fail;
  }
  const bool ok = max_count <= 4 && mismatches == 0 && missed == 0 && identity_fail == 0;
  return {"preimage_count", ok,
          "max_count=" + std::to_string(max_count) + " scan_mismatches=" + std::to_string(mismatches) +
              " missed_forward=" + std::to_string(missed) + " t1_failures=" + std::to_string(identity_fail)};
}

template <int D>
TestFunction<D> cubic_test_function(const Point<D>& coeff) {
  TestFunction<D> f;
  f.name = "cubic";
  f.value = [coeff](const Point<D>& x) {
    double s = x[0] * x[1] * x[1];
    for (int a = 0; a < D; ++a) s += coeff[a] * x[a] * x[a] * x[a];
    return s;
  };
  f.gradient = [coeff](const Point<D>& x) {
    Point<D> g;
    for (int a = 0; a < D; ++a) g[a] = 3.0 * coeff[a] * x[a] * x[a];
    g[0] += x[1] * x[1];
    g[1] += 2.0 * x[0] * x[1];
    return g;
  };
  return f;
}

template <int D>
LemmaCheck check_segment_identity(const StarDomain<D>& dom, std::mt19937_64& rng, int samples) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Box<D>& box = dom.bbox();
  auto sample = [&] {
    Point<D> p;
    do {
      for (int a = 0; a < D; ++a) p[a] = box.lo[a] + (box.hi[a] - box.lo[a]) * u(rng);
    } while (!dom.contains(p));
    return p;
  };
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    Point<D> coeff;
    for (int a = 0; a < D; ++a) coeff[a] = 2.0 * u(rng) - 1.0;
    const auto f = cubic_test_function<D>(coeff);
    worst = std::max(worst, std::abs(segment_identity_residual<D>(f, sample(), sample())));
  }
  return {"segment_identity", worst <= 1e-8, fmt("max_residual=%.3e", worst)};
}

template <int D>
LemmaCheck check_w_regions(const StarDomain<D>& dom, std::int64_t n, std::size_t samples) {
  try {
    const auto rule = build_rule<D>(dom, n);
    const auto rep = w_region_bounds<D>(dom, rule, samples);
    std::string detail = "n=" + std::to_string(n) + " sampled=" + std::to_string(rep.sampled);
    for (int k = 0; k < 3; ++k)
      detail += " W" + std::to_string(k + 1) + "=" + std::to_string(rep.counts[k]) +
                (rep.counts[k] ? fmt(",min|J|=%.4g", rep.min_abs_jacobian[k]) : std::string());
    detail += fmt(" max_dist=%.4g", rep.max_distance);
    return {"w_region_bounds", rep.passed, detail};
  } catch (const PreconditionError& e) {
    return {"w_region_bounds", false, e.what()};
  }
}

}  // namespace detail

/// Every lemma check in a fixed order. Distance, segment and W-region checks run on `dom`;
/// the configuration-based checks run in dimension 2 and 3.
template <int D>
std::vector<LemmaCheck> run_lemma_suite(const StarDomain<D>& dom, const LemmaSuiteOptions& opt = {}) {
  std::mt19937_64 rng(opt.seed);
  std::vector<LemmaCheck> out;
  out.push_back(detail::check_det_identity(rng, opt.det_instances));
  auto g2 = detail::check_geometric_sense<2>(rng, opt.geometry_configs);
  auto g3 = detail::check_geometric_sense<3>(rng, opt.geometry_configs);
  out.push_back({g2.name, g2.passed && g3.passed, "d2:" + g2.detail + " d3:" + g3.detail});
  out.push_back(detail::check_distance_bound<D>(dom, rng, opt.distance_pairs));
  auto j2 = detail::check_jacobians<2>(rng, opt.jacobian_configs);
  auto j3 = detail::check_jacobians<3>(rng, opt.jacobian_configs);
  for (std::size_t i = 0; i < j2.size(); ++i)
    out.push_back({j2[i].name, j2[i].passed && j3[i].passed, "d2:" + j2[i].detail + " d3:" + j3[i].detail});
  auto p2 = detail::check_preimages<2>(rng, opt.preimage_configs, opt.scan_samples);
  auto p3 = detail::check_preimages<3>(rng, opt.preimage_configs / 10, opt.scan_samples);
  out.push_back({p2.name, p2.passed && p3.passed, "d2:" + p2.detail + " d3:" + p3.detail});
  out.push_back(detail::check_segment_identity<D>(dom, rng, opt.segment_samples));
  out.push_back(detail::check_w_regions<D>(dom, opt.w_region_n, opt.w_region_samples));
  return out;
}

inline void write_lemma_table(std::ostream& out, const std::vector<LemmaCheck>& checks) {
  out << "check\tresult\tdetail\n";
  for (const auto& c : checks) out << c.name << '\t' << (c.passed ? "pass" : "FAIL") << '\t' << c.detail << '\n';
}

}  // namespace starquad

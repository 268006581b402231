#pragma once

#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "starquad/common.hpp"

namespace starquad {

template <int D>
struct Box {
  Point<D> lo{};
  Point<D> hi{};

  double volume() const {
    double v = 1.0;
    for (int i = 0; i < D; ++i) v *= hi[i] - lo[i];
    return v;
  }
  bool contains(const Point<D>& x) const {
    for (int i = 0; i < D; ++i)
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
  }
};

// Built-in boundary models. Every shape is described relative to the domain center o.

/// Axis-aligned cube of the given side, centred at o.
struct CubeShape {
  double side = 1.0;
};

struct BallShape {
  double radius = 1.0;
};

/// Union over axes i of the boxes with half-length `arm_halflength` along axis i and
/// half-width `arm_halfwidth` along every other axis.
struct CrossShape {
  double arm_halfwidth = 1.0;
  double arm_halflength = 3.0;
};

/// Planar star polygon with 2*spikes vertices alternating between r_out and r_in; the
/// first outer vertex points along +y.
struct StarPolygonShape {
  int spikes = 5;
  double r_in = 0.5;
  double r_out = 1.0;
};

/// Planar radial function rho(theta) = radius + sum_k a_k cos(k theta) + b_k sin(k theta),
/// coefficients stored as a1, b1, a2, b2, ...
struct FourierShape {
  double radius = 1.0;
  std::vector<double> coeffs;
};

/// Planar radial function given by samples at theta_j = 2 pi j / m, linearly interpolated.
struct TabulatedShape {
  std::vector<double> rho;
};

using Shape = std::variant<CubeShape, BallShape, CrossShape, StarPolygonShape, FourierShape, TabulatedShape>;

inline std::string shape_name(const Shape& shape) {
  struct Namer {
    std::string operator()(const CubeShape&) const { return "cube"; }
    std::string operator()(const BallShape&) const { return "ball"; }
    std::string operator()(const CrossShape&) const { return "cross"; }
    std::string operator()(const StarPolygonShape&) const { return "star-polygon"; }
    std::string operator()(const FourierShape&) const { return "fourier-radial"; }
    std::string operator()(const TabulatedShape&) const { return "tabulated"; }
  };
  return std::visit(Namer{}, shape);
}

inline bool is_planar_only(const Shape& shape) {
  return std::holds_alternative<StarPolygonShape>(shape) || std::holds_alternative<FourierShape>(shape) ||
         std::holds_alternative<TabulatedShape>(shape);
}

namespace detail {

inline double wrap_angle(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  theta = std::fmod(theta, two_pi);
  if (theta < 0.0) theta += two_pi;
  return theta;
}

inline std::vector<std::array<double, 2>> star_vertices(const StarPolygonShape& s) {
  std::vector<std::array<double, 2>> v;
  const int count = 2 * s.spikes;
  v.reserve(count);
  for (int j = 0; j < count; ++j) {
    const double theta = std::numbers::pi / 2 + j * std::numbers::pi / s.spikes;
    const double r = (j % 2 == 0) ? s.r_out : s.r_in;
    v.push_back({r * std::cos(theta), r * std::sin(theta)});
  }
  return v;
}

inline double star_rho(const StarPolygonShape& s, double theta) {
  const double step = std::numbers::pi / s.spikes;
  const double rel = wrap_angle(theta - std::numbers::pi / 2);
  int j = static_cast<int>(std::floor(rel / step));
  j = std::clamp(j, 0, 2 * s.spikes - 1);
  const double ra = (j % 2 == 0) ? s.r_out : s.r_in;
  const double rb = (j % 2 == 0) ? s.r_in : s.r_out;
  const double phi = rel - j * step;  // angle measured from vertex j
  // ray/edge intersection: rho = ra rb sin(step) / (ra sin(phi) + rb sin(step - phi))
  return ra * rb * std::sin(step) / (ra * std::sin(phi) + rb * std::sin(step - phi));
}

inline double fourier_rho(const FourierShape& s, double theta) {
  double r = s.radius;
  for (std::size_t k = 0; 2 * k < s.coeffs.size(); ++k) {
    const double a = s.coeffs[2 * k];
    const double b = 2 * k + 1 < s.coeffs.size() ? s.coeffs[2 * k + 1] : 0.0;
    r += a * std::cos((k + 1) * theta) + b * std::sin((k + 1) * theta);
  }
  return r;
}

inline double tabulated_rho(const TabulatedShape& s, double theta) {
  const std::size_t m = s.rho.size();
  const double pos = wrap_angle(theta) / (2.0 * std::numbers::pi) * static_cast<double>(m);
  std::size_t j = static_cast<std::size_t>(std::floor(pos));
  if (j >= m) j = m - 1;
  const double frac = pos - static_cast<double>(j);
  return (1.0 - frac) * s.rho[j] + frac * s.rho[(j + 1) % m];
}

inline double planar_rho(const Shape& shape, double theta) {
  if (auto* s = std::get_if<StarPolygonShape>(&shape)) return star_rho(*s, theta);
  if (auto* s = std::get_if<FourierShape>(&shape)) return fourier_rho(*s, theta);
  if (auto* s = std::get_if<TabulatedShape>(&shape)) return tabulated_rho(*s, theta);
  return 0.0;
}

}  // namespace detail

/// Bounded domain Q that is star-shaped around `center` by construction of its radial
/// model. The stronger property (star with respect to the ball of radius `ball_radius`)
/// is not enforced here; validate_star_ball checks it.
template <int D>
class StarDomain {
  static_assert(D >= 2, "domains need at least two dimensions");

 public:
  StarDomain(Point<D> center, double ball_radius, Shape shape, std::string name = {})
      : center_(center), ball_radius_(ball_radius), shape_(std::move(shape)), name_(std::move(name)) {
    if (!(ball_radius_ > 0.0)) throw ConfigError("ball_radius must be positive");
    if (is_planar_only(shape_) && D != 2)
      throw ConfigError(shape_name(shape_) + " domains are only supported for dim = 2");
    check_shape();
    if (name_.empty()) name_ = shape_name(shape_);
    const double e = extent();
    for (int i = 0; i < D; ++i) {
      bbox_.lo[i] = center_[i] - e;
      bbox_.hi[i] = center_[i] + e;
    }
  }

  const Point<D>& center() const { return center_; }
  double ball_radius() const { return ball_radius_; }
  const Shape& shape() const { return shape_; }
  const std::string& name() const { return name_; }
  const Box<D>& bbox() const { return bbox_; }

  /// Open-set membership; boundary points are outside.
  bool contains(const Point<D>& x) const { return classify(sub<D>(x, center_), false); }

  /// Membership in the closure of Q.
  bool closure_contains(const Point<D>& x) const { return classify(sub<D>(x, center_), true); }

  /// |x - o| <= rho(u) + tol: closure membership with a radial tolerance.
  bool near_closure(const Point<D>& x, double tol) const {
    const Point<D> y = sub<D>(x, center_);
    const double r = norm2<D>(y);
    if (r == 0.0) return true;
    return r <= rho(scale<D>(y, 1.0 / r)) + tol;
  }

  /// Radial extent rho(u) of Q in the unit direction u.
  double rho(const Point<D>& u) const {
    if (auto* c = std::get_if<CubeShape>(&shape_)) return 0.5 * c->side / norm_inf<D>(u);
    if (auto* b = std::get_if<BallShape>(&shape_)) return b->radius;
    if (auto* x = std::get_if<CrossShape>(&shape_)) {
      double best = 0.0;
      for (int arm = 0; arm < D; ++arm) {
        double t = std::numeric_limits<double>::infinity();
        for (int j = 0; j < D; ++j) {
          const double half = (j == arm) ? x->arm_halflength : x->arm_halfwidth;
          if (u[j] != 0.0) t = std::min(t, half / std::abs(u[j]));
        }
        best = std::max(best, t);
      }
      return best;
    }
    return detail::planar_rho(shape_, std::atan2(u[1], u[0]));
  }

  /// Closed-form diameter when the shape admits one.
  std::optional<double> exact_diameter() const {
    if (auto* c = std::get_if<CubeShape>(&shape_)) return c->side * std::sqrt(static_cast<double>(D));
    if (auto* b = std::get_if<BallShape>(&shape_)) return 2.0 * b->radius;
    if (auto* x = std::get_if<CrossShape>(&shape_))
      return 2.0 * std::sqrt(x->arm_halflength * x->arm_halflength +
                             (D - 1) * x->arm_halfwidth * x->arm_halfwidth);
    if (auto* s = std::get_if<StarPolygonShape>(&shape_)) {
      const auto v = detail::star_vertices(*s);
      double best = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j)
          best = std::max(best, std::hypot(v[i][0] - v[j][0], v[i][1] - v[j][1]));
      return best;
    }
    return std::nullopt;
  }

 private:
  bool classify(const Point<D>& y, bool closed) const {
    auto less = [closed](double a, double b) { return closed ? a <= b : a < b; };
    if (auto* c = std::get_if<CubeShape>(&shape_)) return less(norm_inf<D>(y), 0.5 * c->side);
    if (auto* b = std::get_if<BallShape>(&shape_)) return less(dot<D>(y, y), b->radius * b->radius);
    if (auto* x = std::get_if<CrossShape>(&shape_)) {
      for (int arm = 0; arm < D; ++arm) {
        bool inside = true;
        for (int j = 0; j < D && inside; ++j)
          inside = less(std::abs(y[j]), j == arm ? x->arm_halflength : x->arm_halfwidth);
        if (inside) return true;
      }
      return false;
    }
    const double r = std::hypot(y[0], y[1]);
    if (r == 0.0) return true;
    return less(r, detail::planar_rho(shape_, std::atan2(y[1], y[0])));
  }

  double extent() const {
    if (auto* c = std::get_if<CubeShape>(&shape_)) return 0.5 * c->side;
    if (auto* b = std::get_if<BallShape>(&shape_)) return b->radius;
    if (auto* x = std::get_if<CrossShape>(&shape_)) return x->arm_halflength;
    if (auto* s = std::get_if<StarPolygonShape>(&shape_)) return s->r_out;
    if (auto* f = std::get_if<FourierShape>(&shape_)) {
      double e = f->radius;
      for (double c : f->coeffs) e += std::abs(c);
      return e;
    }
    const auto& t = std::get<TabulatedShape>(shape_);
    return *std::max_element(t.rho.begin(), t.rho.end());
  }

  void check_shape() const {
    auto positive = [](double v, const char* what) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive");
    };
    if (auto* c = std::get_if<CubeShape>(&shape_)) positive(c->side, "side");
    if (auto* b = std::get_if<BallShape>(&shape_)) positive(b->radius, "radius");
    if (auto* x = std::get_if<CrossShape>(&shape_)) {
      positive(x->arm_halfwidth, "arm_halfwidth");
      positive(x->arm_halflength, "arm_halflength");
      if (x->arm_halflength < x->arm_halfwidth) throw ConfigError("arm_halflength must be >= arm_halfwidth");
    }
    if (auto* s = std::get_if<StarPolygonShape>(&shape_)) {
      if (s->spikes < 2) throw ConfigError("spikes must be >= 2");
      positive(s->r_in, "r_in");
      positive(s->r_out, "r_out");
    }
    if (auto* f = std::get_if<FourierShape>(&shape_)) {
      positive(f->radius, "radius");
      for (int j = 0; j < 4096; ++j)
        if (!(detail::fourier_rho(*f, 2.0 * std::numbers::pi * j / 4096) > 0.0))
          throw ConfigError("fourier-radial rho must stay positive");
    }
    if (auto* t = std::get_if<TabulatedShape>(&shape_)) {
      if (t->rho.size() < 3) throw ConfigError("rho_samples needs at least 3 values");
      for (double v : t->rho) positive(v, "rho_samples entries");
    }
  }

  Point<D> center_;
  double ball_radius_;
  Shape shape_;
  std::string name_;
  Box<D> bbox_;
};

/// Inner/outer grid volumes squeezing mes Q.
struct JordanBracket {
  double inner = 0.0;
  double outer = 0.0;
  std::int64_t resolution = 0;

  double midpoint() const { return 0.5 * (inner + outer); }
  double width() const { return outer - inner; }
};

/// Counts cells of a resolution^D grid over the bounding box. A cell is inner when its
/// 2^D corners and its center lie in the closure of Q, and meets Q when any of those
/// probes lies in the open set Q.
template <int D>
JordanBracket jordan_measure(const StarDomain<D>& dom, std::int64_t resolution) {
  if (resolution < 2) throw PreconditionError("jordan_measure: resolution must be >= 2");
  constexpr double cell_limit = 1ULL << 40;
  if (std::pow(static_cast<double>(resolution), D) > cell_limit)
    throw PreconditionError("jordan_measure: resolution too high for dimension");

  const Box<D>& box = dom.bbox();
  Point<D> step;
  for (int i = 0; i < D; ++i) step[i] = (box.hi[i] - box.lo[i]) / static_cast<double>(resolution);

  std::int64_t rest = 1;
  for (int i = 1; i < D; ++i) rest *= resolution;

  std::vector<std::int64_t> inner(resolution, 0), outer(resolution, 0);
  parallel_for(static_cast<std::size_t>(resolution), [&](std::size_t row) {
    std::int64_t in_count = 0, out_count = 0;
    for (std::int64_t flat = 0; flat < rest; ++flat) {
      Index<D> cell;
      cell[0] = static_cast<std::int64_t>(row);
      std::int64_t f = flat;
      for (int i = D - 1; i >= 1; --i) {
        cell[i] = f % resolution;
        f /= resolution;
      }
      Point<D> lo, hi, mid;
      for (int i = 0; i < D; ++i) {
        const double width = box.hi[i] - box.lo[i];
        lo[i] = box.lo[i] + width * static_cast<double>(cell[i]) / static_cast<double>(resolution);
        hi[i] = box.lo[i] + width * static_cast<double>(cell[i] + 1) / static_cast<double>(resolution);
        mid[i] = 0.5 * (lo[i] + hi[i]);
      }
      bool all_closed = dom.closure_contains(mid);
      bool any_open = dom.contains(mid);
      for (unsigned corner = 0; corner < (1u << D); ++corner) {
        Point<D> p;
        for (int i = 0; i < D; ++i) p[i] = ((corner >> i) & 1u) ? hi[i] : lo[i];
        if (all_closed && !dom.closure_contains(p)) all_closed = false;
        if (!any_open && dom.contains(p)) any_open = true;
        if (!all_closed && any_open) break;
      }
      in_count += (all_closed && any_open) ? 1 : 0;
      out_count += any_open ? 1 : 0;
    }
    inner[row] = in_count;
    outer[row] = out_count;
  });

  double cell_volume = 1.0;
  for (int i = 0; i < D; ++i) cell_volume *= step[i];
  std::int64_t in_total = 0, out_total = 0;
  for (std::int64_t r = 0; r < resolution; ++r) {
    in_total += inner[r];
    out_total += outer[r];
  }
  return {static_cast<double>(in_total) * cell_volume, static_cast<double>(out_total) * cell_volume, resolution};
}

/// Deterministic pseudo-random unit vectors (Gaussian then normalised).
template <int D>
Point<D> random_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (;;) {
    Point<D> u;
    for (int i = 0; i < D; ++i) u[i] = normal(rng);
    const double n = norm2<D>(u);
    if (n > 1e-12) return scale<D>(u, 1.0 / n);
  }
}

/// Diameter of Q. Shapes with a closed form (cube, ball, cross, star polygon) return it
/// exactly; otherwise the maximum pairwise distance of `samples` boundary points, which
/// is a lower estimate.
template <int D>
double diameter(const StarDomain<D>& dom, int samples) {
  if (samples < 2) throw PreconditionError("diameter: samples must be >= 2");
  if (auto exact = dom.exact_diameter()) return *exact;
  std::vector<Point<D>> boundary;
  boundary.reserve(samples);
  std::mt19937_64 rng(0x5eed);
  for (int j = 0; j < samples; ++j) {
    Point<D> u{};
    if constexpr (D == 2) {
      const double theta = 2.0 * std::numbers::pi * j / samples;
      u = {std::cos(theta), std::sin(theta)};
    } else {
      u = random_direction<D>(rng);
    }
    boundary.push_back(add<D>(dom.center(), scale<D>(u, dom.rho(u))));
  }
  double best = 0.0;
  for (std::size_t i = 0; i < boundary.size(); ++i)
    for (std::size_t j = i + 1; j < boundary.size(); ++j) best = std::max(best, dist2<D>(boundary[i], boundary[j]));
  return best;
}

template <int D>
struct StarBallReport {
  bool passed = true;
  int trials_run = 0;
  // First counterexample: segment ends x (near the boundary), y (in the ball) and the
  // probe on xy that left Q.
  std::optional<std::array<Point<D>, 3>> counterexample;
};

/// Randomised check that Q is star-shaped with respect to the closed ball S_R(o): for
/// x = o + (1 - 1e-6) rho(u) u and y uniform in the ball, the 2^6 + 1 dyadic points of
/// the segment xy must all lie in Q.
template <int D>
StarBallReport<D> validate_star_ball(const StarDomain<D>& dom, std::uint64_t seed, int trials) {
  if (trials < 1) throw PreconditionError("validate_star_ball: trials must be >= 1");
  constexpr int levels = 6;
  constexpr int pieces = 1 << levels;
  constexpr double inset = 1e-6;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  StarBallReport<D> report;
  for (int trial = 0; trial < trials; ++trial) {
    const Point<D> u = random_direction<D>(rng);
    const Point<D> x = add<D>(dom.center(), scale<D>(u, (1.0 - inset) * dom.rho(u)));
    const Point<D> v = random_direction<D>(rng);
    const double radius = dom.ball_radius() * std::pow(unit(rng), 1.0 / D);
    const Point<D> y = add<D>(dom.center(), scale<D>(v, radius));
    report.trials_run = trial + 1;
    for (int j = 0; j <= pieces; ++j) {
      const Point<D> probe = lerp<D>(y, x, static_cast<double>(j) / pieces);
      if (!dom.contains(probe)) {
        report.passed = false;
        report.counterexample = std::array<Point<D>, 3>{x, y, probe};
        return report;
      }
    }
  }
  return report;
}

}  // namespace starquad

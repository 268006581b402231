#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "starquad/rule_io.hpp"

namespace starquad {

/// Summability exponent p of the class W^inf_p(Q), p in (d, inf].
struct Exponent {
  double p = std::numeric_limits<double>::infinity();

  static Exponent infinity() { return {}; }
  static Exponent finite(double p) { return {p}; }

  /// Accepts "inf", "infinity" or a number.
  static Exponent parse(std::string_view text) {
    if (text == "inf" || text == "infinity" || text == "Inf") return infinity();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) throw ConfigError("invalid exponent '" + std::string(text) + "'");
    return finite(v);
  }

  bool is_infinite() const { return std::isinf(p); }
  /// p' = p / (p - 1), equal to 1 for p = inf.
  double conj() const { return is_infinite() ? 1.0 : p / (p - 1.0); }
  /// 1 / p' = 1 - 1 / p.
  double inv_conj() const { return is_infinite() ? 1.0 : 1.0 - 1.0 / p; }
  std::string str() const { return is_infinite() ? "inf" : format_exact(p); }

  void require_admissible(int d) const {
    if (!(p > d)) throw PreconditionError("exponent p = " + str() + " must exceed d = " + std::to_string(d));
  }
};

template <int D>
struct TestFunction {
  std::string name;
  std::function<double(const Point<D>&)> value;
  std::function<Point<D>(const Point<D>&)> gradient;
  double certified_norm = 0.0;  // upper bound on || |grad f|_1 ||_{L_p(Q)}
  std::string certificate;
  std::optional<double> exact_integral;
};

/// Bucket grid over the nodes for l_inf nearest-node queries.
template <int D>
class NodeLocator {
 public:
  NodeLocator(std::span<const Point<D>> nodes, double cell_size) : nodes_(nodes.begin(), nodes.end()), cell_(cell_size) {
    if (nodes_.empty()) return;
    for (int a = 0; a < D; ++a) {
      range_.lo[a] = std::numeric_limits<std::int64_t>::max();
      range_.hi[a] = std::numeric_limits<std::int64_t>::min();
    }
    std::vector<Index<D>> cells(nodes_.size());
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      cells[k] = cell_of(nodes_[k]);
      for (int a = 0; a < D; ++a) {
        range_.lo[a] = std::min(range_.lo[a], cells[k][a]);
        range_.hi[a] = std::max(range_.hi[a], cells[k][a]);
      }
    }
    offsets_.assign(range_.size() + 1, 0);
    for (const auto& c : cells) ++offsets_[range_.linear(c) + 1];
    for (std::size_t k = 1; k < offsets_.size(); ++k) offsets_[k] += offsets_[k - 1];
    items_.assign(nodes_.size(), 0);
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (std::size_t k = 0; k < nodes_.size(); ++k) items_[fill[range_.linear(cells[k])]++] = k;
  }

  /// (distance, index) of the l_inf-nearest node; ties go to the smallest index among
  /// the cells inspected.
  std::pair<double, std::size_t> nearest(const Point<D>& x) const {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_k = 0;
    if (nodes_.empty()) return {best, best_k};
    const Index<D> c = cell_of(x);
    std::int64_t max_ring = 0;
    for (int a = 0; a < D; ++a)
      max_ring = std::max({max_ring, std::abs(c[a] - range_.lo[a]), std::abs(c[a] - range_.hi[a])});
    for (std::int64_t r = 0; r <= max_ring; ++r) {
      visit_ring(c, r, [&](std::size_t k) {
        const double d = dist_inf<D>(x, nodes_[k]);
        if (d < best || (d == best && k < best_k)) {
          best = d;
          best_k = k;
        }
      });
      if (best <= cell_ * static_cast<double>(r)) break;
    }
    return {best, best_k};
  }

 private:
  Index<D> cell_of(const Point<D>& x) const {
    Index<D> i;
    for (int a = 0; a < D; ++a) i[a] = static_cast<std::int64_t>(std::floor(x[a] / cell_));
    return i;
  }

  template <class F>
  void visit_ring(const Index<D>& c, std::int64_t r, F&& f) const {
    Index<D> lo, hi;
    for (int a = 0; a < D; ++a) {
      lo[a] = std::max(c[a] - r, range_.lo[a]);
      hi[a] = std::min(c[a] + r, range_.hi[a]);
      if (lo[a] > hi[a]) return;
    }
    Index<D> i = lo;
    for (;;) {
      std::int64_t ring = 0;
      for (int a = 0; a < D; ++a) ring = std::max(ring, std::abs(i[a] - c[a]));
      if (ring == r) {
        const std::size_t l = range_.linear(i);
        for (std::size_t j = offsets_[l]; j < offsets_[l + 1]; ++j) f(items_[j]);
      }
      int a = D - 1;
      // on rows strictly inside the ring only the two end cells matter
      if (ring < r && i[a] == lo[a] && c[a] + r <= hi[a] && c[a] - r >= lo[a]) {
        i[a] = c[a] + r;
        continue;
      }
      while (a >= 0) {
        if (++i[a] <= hi[a]) break;
        i[a] = lo[a];
        --a;
      }
      if (a < 0) return;
    }
  }

  std::vector<Point<D>> nodes_;
  double cell_;
  IndexRange<D> range_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> items_;
};

/// Phi_n(f) = sum_k c_k* f(x_k*).
template <int D>
double evaluate(const CubatureRule<D>& rule, const TestFunction<D>& f) {
  double s = 0.0;
  for (std::size_t k = 0; k < rule.size(); ++k) s += rule.weights[k] * f.value(rule.nodes[k]);
  return s;
}

/// Midpoint sum over the resolution^D grid on the bounding box, keeping cells whose center
/// lies in Q. Error O(1 / resolution) for Lipschitz f on Jordan measurable Q. Rows are
/// summed independently and combined pairwise, so the result is schedule independent.
template <int D>
double reference_integral(const StarDomain<D>& dom, const TestFunction<D>& f, std::int64_t resolution) {
  if (resolution < 2) throw PreconditionError("reference_integral: resolution must be >= 2");
  if (std::pow(static_cast<double>(resolution), D) > static_cast<double>(1ULL << 40))
    throw PreconditionError("reference_integral: resolution too high for dimension");
  const Box<D>& box = dom.bbox();
  Point<D> step;
  double cell_volume = 1.0;
  for (int a = 0; a < D; ++a) {
    step[a] = (box.hi[a] - box.lo[a]) / static_cast<double>(resolution);
    cell_volume *= step[a];
  }
  std::int64_t rest = 1;
  for (int a = 1; a < D; ++a) rest *= resolution;
  std::vector<double> rows(static_cast<std::size_t>(resolution), 0.0);
  parallel_for(rows.size(), [&](std::size_t row) {
    double s = 0.0;
    Point<D> x;
    x[0] = box.lo[0] + step[0] * (static_cast<double>(row) + 0.5);
    for (std::int64_t flat = 0; flat < rest; ++flat) {
      std::int64_t fl = flat;
      for (int a = D - 1; a >= 1; --a) {
        x[a] = box.lo[a] + step[a] * (static_cast<double>(fl % resolution) + 0.5);
        fl /= resolution;
      }
      if (dom.contains(x)) s += f.value(x);
    }
    rows[row] = s;
  });
  return pairwise_sum(rows) * cell_volume;
}

/// `factor` reference cells per weight subcell: factor * subgrid cells per 2h_n-cell
/// across the widest side of the bounding box.
template <int D>
std::int64_t default_reference_resolution(const StarDomain<D>& dom, double h_n, int subgrid = 8,
                                          std::int64_t factor = 4) {
  double width = 0.0;
  for (int a = 0; a < D; ++a) width = std::max(width, dom.bbox().hi[a] - dom.bbox().lo[a]);
  const auto cells = static_cast<std::int64_t>(std::ceil(width / (2.0 * h_n) - 1e-9));
  return std::max<std::int64_t>(2, factor * std::max(subgrid, 1) * std::max<std::int64_t>(cells, 1));
}

/// |reference_integral - evaluate| for a single function.
template <int D>
double empirical_error(const StarDomain<D>& dom, const CubatureRule<D>& rule, const TestFunction<D>& f,
                       std::int64_t resolution) {
  return std::abs(reference_integral<D>(dom, f, resolution) - evaluate<D>(rule, f));
}

/// c(d, p) = (1/d) || |x|_inf^{1-d} - |x|_inf ||_{L_p'} over the unit l_inf ball.
///
/// The norm only depends on t = |x|_inf and the t-ball has volume (2t)^d, so
///   c^{p'} d^{p'} = d 2^d int_0^1 t^e (1 - t^d)^{p'} dt,   e = (d-1)(1-p') in (-1, 0].
/// The substitution t = s^{1/(1+e)} removes the endpoint singularity:
///   int_0^1 t^e (1 - t^d)^{p'} dt = 1/(1+e) int_0^1 (1 - s^{d/(1+e)})^{p'} ds.
/// For p = inf the value is 2^d d / (d + 1).
inline double cdp_constant(int d, const Exponent& exp, unsigned max_depth = 20) {
  if (d < 2) throw PreconditionError("cdp_constant: d must be >= 2");
  exp.require_admissible(d);
  const double two_d = std::ldexp(1.0, d);
  if (exp.is_infinite()) return two_d * d / (d + 1.0);
  const double pc = exp.conj();
  const double e = (d - 1) * (1.0 - pc);
  const double a = d / (1.0 + e);
  // 1 - s^a via expm1
  auto integrand = [a, pc](double s) { return s <= 0.0 ? 1.0 : std::pow(-std::expm1(a * std::log(s)), pc); };
  double err = 0.0;
  const double integral = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(integrand, 0.0, 1.0, max_depth,
                                                                                         1e-12, &err) /
                          (1.0 + e);
  return std::pow(d * two_d * integral, 1.0 / pc) / d;
}

/// Leading term c(d,p) (mes Q / 2^d)^{1/d + 1/p'} n^{-1/d} of the optimal error.
inline double theorem_bound(int d, const Exponent& exp, double mesQ, std::int64_t n) {
  if (n < 1) throw PreconditionError("theorem_bound: n must be >= 1");
  if (!(mesQ > 0.0)) throw PreconditionError("theorem_bound: mes Q must be positive");
  const double c = cdp_constant(d, exp);
  return c * std::pow(mesQ / std::ldexp(1.0, d), 1.0 / d + exp.inv_conj()) * std::pow(static_cast<double>(n), -1.0 / d);
}

/// Scale putting a function with |grad f|_1 <= 1 pointwise into the unit ball of
/// W^inf_p(Q): (outer Jordan volume)^{-1/p}, or 1 for p = inf.
inline double class_scale(const Exponent& exp, const JordanBracket& bracket) {
  if (exp.is_infinite()) return 1.0;
  return std::pow(bracket.outer, -1.0 / exp.p);
}

/// f(x) = sigma min_k |x - x_k*|_inf: zero at every node, |grad f|_1 = sigma a.e.
template <int D>
TestFunction<D> fooling_function(const CubatureRule<D>& rule, const Exponent& exp) {
  if (rule.size() == 0) throw PreconditionError("fooling_function: empty rule");
  const double sigma = class_scale(exp, rule.mes_bracket);
  const double cell = rule.h_n > 0.0 ? 2.0 * rule.h_n : 1.0;
  auto locator = std::make_shared<const NodeLocator<D>>(rule.nodes, cell);
  auto nodes = std::make_shared<const std::vector<Point<D>>>(rule.nodes);
  TestFunction<D> f;
  f.name = "fooling";
  f.value = [locator, sigma](const Point<D>& x) { return sigma * locator->nearest(x).first; };
  f.gradient = [locator, nodes, sigma](const Point<D>& x) {
    const Point<D>& c = (*nodes)[locator->nearest(x).second];
    int axis = 0;
    for (int a = 1; a < D; ++a)
      if (std::abs(x[a] - c[a]) > std::abs(x[axis] - c[axis])) axis = a;
    Point<D> g{};
    g[axis] = sigma * (x[axis] >= c[axis] ? 1.0 : -1.0);
    return g;
  };
  f.certified_norm = exp.is_infinite() ? sigma : sigma * std::pow(rule.mes_bracket.outer, 1.0 / exp.p);
  f.certificate = "|grad f|_1 = sigma a.e.; norm <= sigma * outer^{1/p}";
  return f;
}

template <int D>
TestFunction<D> constant_function() {
  TestFunction<D> f;
  f.name = "const";
  f.value = [](const Point<D>&) { return 1.0; };
  f.gradient = [](const Point<D>&) { return Point<D>{}; };
  f.certified_norm = 0.0;
  f.certificate = "grad f = 0";
  return f;
}

/// f(x) = x^1, not rescaled; |grad f|_1 = 1.
template <int D>
TestFunction<D> linear_x1_function(const Exponent& exp, const JordanBracket& bracket) {
  TestFunction<D> f;
  f.name = "linear-x1";
  f.value = [](const Point<D>& x) { return x[0]; };
  f.gradient = [](const Point<D>&) {
    Point<D> g{};
    g[0] = 1.0;
    return g;
  };
  f.certified_norm = exp.is_infinite() ? 1.0 : std::pow(bracket.outer, 1.0 / exp.p);
  f.certificate = "|grad f|_1 = 1";
  return f;
}

/// f(x) = sigma sin(sum_i x^i) / d; |grad f|_1 = sigma |cos(sum_i x^i)| <= sigma.
template <int D>
TestFunction<D> sin_sum_function(const Exponent& exp, const JordanBracket& bracket) {
  const double sigma = class_scale(exp, bracket);
  TestFunction<D> f;
  f.name = "sin-sum";
  f.value = [sigma](const Point<D>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return sigma * std::sin(s) / D;
  };
  f.gradient = [sigma](const Point<D>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return filled<D>(sigma * std::cos(s) / D);
  };
  f.certified_norm = exp.is_infinite() ? sigma : sigma * std::pow(bracket.outer, 1.0 / exp.p);
  f.certificate = "|grad f|_1 <= sigma";
  return f;
}

/// Test functions addressable by name: const, linear-x1, sin-sum, fooling.
template <int D>
TestFunction<D> named_function(std::string_view name, const CubatureRule<D>& rule, const Exponent& exp) {
  if (name == "const") return constant_function<D>();
  if (name == "linear-x1") return linear_x1_function<D>(exp, rule.mes_bracket);
  if (name == "sin-sum") return sin_sum_function<D>(exp, rule.mes_bracket);
  if (name == "fooling") return fooling_function<D>(rule, exp);
  throw ConfigError("unknown test function '" + std::string(name) + "' (const, linear-x1, sin-sum, fooling)");
}

}  // namespace starquad

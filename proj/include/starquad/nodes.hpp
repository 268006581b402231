#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "starquad/lattice.hpp"

namespace starquad {

/// h_n = (mes Q / n)^{1/d} / 2, the half side of the lattice cells for n nodes.
inline double step_size(double mesQ, std::int64_t n, int d) {
  if (!(mesQ > 0.0)) throw PreconditionError("step_size: mes Q must be positive");
  if (n < 1) throw PreconditionError("step_size: n must be >= 1");
  return 0.5 * std::pow(mesQ / static_cast<double>(n), 1.0 / d);
}

enum class Provenance : std::uint8_t { S1Center, S1LatticePoint, S1Interior, S2 };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::S1Center: return "S1-center";
    case Provenance::S1LatticePoint: return "S1-lattice-point";
    case Provenance::S1Interior: return "S1-interior";
    case Provenance::S2: return "S2";
  }
  return "?";
}

inline std::optional<Provenance> parse_provenance(std::string_view s) {
  for (Provenance p : {Provenance::S1Center, Provenance::S1LatticePoint, Provenance::S1Interior, Provenance::S2})
    if (to_string(p) == s) return p;
  return std::nullopt;
}

/// The informational set S(n) = S1(n) u S2(n) together with the lattice data it was built
/// from. Nodes are ordered S1 first (by big-cube index), then S2 (lexicographic).
template <int D>
struct NodeSet {
  double h_n = 0.0;
  Point<D> anchor{};
  std::int64_t n_requested = 0;

  std::vector<Point<D>> nodes;
  std::vector<Provenance> provenance;
  std::vector<Index<D>> big_cube;                   // owning cube of B(3h_n)
  std::vector<std::optional<Index<D>>> center_cell;  // set when the node is the center of an A(h_n) cell

  std::size_t s1_count = 0;
  bool s1_exceeds_n = false;  // |S1| >= n: the fill-up S2 is empty and |S(n)| may exceed n

  CubeClassification<D> small;  // A(h_n), B(h_n) over 3 x big_range
  IndexRange<D> big_range;
  std::vector<std::uint8_t> big_in_B;

  std::vector<std::size_t> owner_offsets;  // CSR: nodes owned by each big cube
  std::vector<std::size_t> owner_nodes;

  std::size_t size() const { return nodes.size(); }
  LatticeSpec<D> small_lattice() const { return {h_n, anchor}; }
  LatticeSpec<D> big_lattice() const { return {3.0 * h_n, anchor}; }

  std::span<const std::size_t> nodes_in(const Index<D>& big) const {
    if (!big_range.contains(big)) return {};
    const std::size_t k = big_range.linear(big);
    return std::span<const std::size_t>(owner_nodes).subspan(owner_offsets[k], owner_offsets[k + 1] - owner_offsets[k]);
  }

  void rebuild_owner_index() {
    owner_offsets.assign(big_range.size() + 1, 0);
    for (const auto& J : big_cube) ++owner_offsets[big_range.linear(J) + 1];
    for (std::size_t k = 1; k < owner_offsets.size(); ++k) owner_offsets[k] += owner_offsets[k - 1];
    owner_nodes.assign(nodes.size(), 0);
    std::vector<std::size_t> fill(owner_offsets.begin(), owner_offsets.end() - 1);
    for (std::size_t k = 0; k < nodes.size(); ++k) owner_nodes[fill[big_range.linear(big_cube[k])]++] = k;
  }
};

namespace detail {

template <int D>
Index<D> offset_index(const Index<D>& base, std::int64_t mult, std::size_t flat_offset, std::int64_t radix) {
  Index<D> i;
  for (int a = D - 1; a >= 0; --a) {
    i[a] = mult * base[a] + static_cast<std::int64_t>(flat_offset % radix);
    flat_offset /= radix;
  }
  return i;
}

constexpr std::size_t pow3(int d) {
  std::size_t n = 1;
  for (int i = 0; i < d; ++i) n *= 3;
  return n;
}

/// True when x and its 3^D - 1 neighbours at distance delta (axis and diagonal directions)
/// all lie in Q.
template <int D>
bool has_clearance(const StarDomain<D>& dom, const Point<D>& x, double delta) {
  if (!dom.contains(x)) return false;
  for (std::size_t flat = 0; flat < pow3(D); ++flat) {
    Point<D> e;
    std::size_t f = flat;
    for (int a = D - 1; a >= 0; --a) {
      e[a] = static_cast<double>(f % 3) - 1.0;
      f /= 3;
    }
    const double n = norm2<D>(e);
    if (n == 0.0) continue;
    if (!dom.contains(add<D>(x, scale<D>(e, delta / n)))) return false;
  }
  return true;
}

/// Internal point of Q n P for a big cube without A(h_n) cells. Scans the subgrid midpoints
/// of P (refined up to three times) and, at the first level where some midpoint has
/// clearance above one subcell diagonal, returns the one with the smallest largest l_2
/// distance to the midpoints in Q (ties: lexicographically first). If the scan finds none,
/// the first probe point of a B(h_n) cell that lies in Q is pulled towards the cube center
/// until it is interior to P and still in Q.
template <int D>
std::optional<Point<D>> interior_point(const StarDomain<D>& dom, const Box<D>& cube, const NodeSet<D>& partial,
                                       const Index<D>& big, int probe_resolution) {
  const double side = cube.hi[0] - cube.lo[0];
  for (int level = 0; level <= 3; ++level) {
    const std::int64_t res = 3LL * probe_resolution << level;
    const double delta = std::sqrt(static_cast<double>(D)) * side / static_cast<double>(res);
    std::int64_t total = 1;
    for (int a = 0; a < D; ++a) total *= res;
    std::vector<Point<D>> inside, candidates;
    for (std::int64_t flat = 0; flat < total; ++flat) {
      std::int64_t f = flat;
      Point<D> p;
      for (int a = D - 1; a >= 0; --a) {
        p[a] = cube.lo[a] + side * (static_cast<double>(f % res) + 0.5) / static_cast<double>(res);
        f /= res;
      }
      if (!dom.contains(p)) continue;
      inside.push_back(p);
      if (has_clearance<D>(dom, p, delta)) candidates.push_back(p);
    }
    std::optional<Point<D>> best;
    double best_reach = std::numeric_limits<double>::infinity();
    for (const auto& c : candidates) {
      double reach = 0.0;
      for (const auto& p : inside) reach = std::max(reach, dist2<D>(c, p));
      if (reach < best_reach) {
        best_reach = reach;
        best = c;
      }
    }
    if (best) return best;
  }

  Point<D> center;
  for (int a = 0; a < D; ++a) center[a] = 0.5 * (cube.lo[a] + cube.hi[a]);
  const auto lattice = partial.small_lattice();
  for (std::size_t off = 0; off < pow3(D); ++off) {
    const Index<D> c = offset_index<D>(big, 3, off, 3);
    if (!partial.small.in_B(c)) continue;
    std::optional<Point<D>> seed;
    for_each_probe<D>(lattice.cell(c), probe_resolution, [&](const Point<D>& p) {
      if (dom.contains(p)) seed = p;
      return seed.has_value();
    });
    if (!seed) continue;
    double tau = 0.5;
    for (int k = 0; k < 64; ++k, tau *= 0.5) {
      const Point<D> q = lerp<D>(*seed, center, tau);
      bool strictly_inside = true;
      for (int a = 0; a < D; ++a) strictly_inside = strictly_inside && q[a] > cube.lo[a] && q[a] < cube.hi[a];
      if (strictly_inside && dom.contains(q)) return q;
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// S1(n): one point per cube P of B(3h_n): the center of P if it is a center of A(h_n);
/// otherwise the lexicographically smallest center of an A(h_n) cell inside P; otherwise
/// an internal point of Q n P. The lattice anchor defaults to the origin.
template <int D>
NodeSet<D> build_S1(const StarDomain<D>& dom, double h_n, int probe_resolution, const Point<D>& anchor = {}) {
  if (!(h_n > 0.0)) throw PreconditionError("build_S1: h_n must be positive");
  if (probe_resolution < 1) throw PreconditionError("build_S1: probe_resolution must be >= 1");
  NodeSet<D> set;
  set.h_n = h_n;
  set.anchor = anchor;
  const LatticeSpec<D> big_lat = set.big_lattice();
  set.big_range = covering_range<D>(big_lat, dom.bbox());
  IndexRange<D> small_range;
  for (int a = 0; a < D; ++a) {
    small_range.lo[a] = 3 * set.big_range.lo[a];
    small_range.hi[a] = 3 * set.big_range.hi[a] + 2;
  }
  set.small = classify_cubes<D>(dom, set.small_lattice(), small_range, probe_resolution);

  const std::size_t big_count = set.big_range.size();
  set.big_in_B.assign(big_count, 0);
  for (std::size_t k = 0; k < big_count; ++k) {
    const Index<D> J = set.big_range.at(k);
    for (std::size_t off = 0; off < detail::pow3(D) && !set.big_in_B[k]; ++off)
      set.big_in_B[k] = set.small.in_B(detail::offset_index<D>(J, 3, off, 3)) ? 1 : 0;
  }

  const auto small_lat = set.small_lattice();
  for (std::size_t k = 0; k < big_count; ++k) {
    if (!set.big_in_B[k]) continue;
    const Index<D> J = set.big_range.at(k);
    Index<D> mid;
    for (int a = 0; a < D; ++a) mid[a] = 3 * J[a] + 1;
    std::optional<Index<D>> chosen;
    Provenance prov = Provenance::S1Center;
    if (set.small.in_A(mid)) {
      chosen = mid;
    } else {
      for (std::size_t off = 0; off < detail::pow3(D) && !chosen; ++off) {
        const Index<D> c = detail::offset_index<D>(J, 3, off, 3);
        if (set.small.in_A(c)) chosen = c;
      }
      prov = Provenance::S1LatticePoint;
    }
    if (chosen) {
      set.nodes.push_back(small_lat.center(*chosen));
      set.center_cell.push_back(chosen);
    } else {
      auto p = detail::interior_point<D>(dom, big_lat.cell(J), set, J, probe_resolution);
      if (!p) throw PreconditionError("build_S1: no interior point found in a cube of B(3h_n); increase probe resolution");
      set.nodes.push_back(*p);
      set.center_cell.push_back(std::nullopt);
      prov = Provenance::S1Interior;
    }
    set.provenance.push_back(prov);
    set.big_cube.push_back(J);
  }
  set.s1_count = set.nodes.size();
  set.rebuild_owner_index();
  return set;
}

/// S(n) = S1(n) u S2(n), where S2(n) is the first n - |S1(n)| centers of
/// a(h_n) \ S1(n) in lexicographic order (all of them if fewer exist).
template <int D>
NodeSet<D> build_nodeset(const StarDomain<D>& dom, std::int64_t n, double mesQ, int probe_resolution,
                         const Point<D>& anchor = {}) {
  const double h_n = step_size(mesQ, n, D);
  NodeSet<D> set = build_S1<D>(dom, h_n, probe_resolution, anchor);
  set.n_requested = n;
  set.s1_exceeds_n = static_cast<std::int64_t>(set.s1_count) >= n;
  std::int64_t wanted = std::max<std::int64_t>(0, n - static_cast<std::int64_t>(set.s1_count));

  std::vector<std::uint8_t> taken(set.small.cls.size(), 0);
  for (const auto& c : set.center_cell)
    if (c) taken[set.small.range.linear(*c)] = 1;
  const auto small_lat = set.small_lattice();
  for (std::size_t k = 0; k < set.small.cls.size() && wanted > 0; ++k) {
    if (set.small.cls[k] != CubeClass::Inside || taken[k]) continue;
    const Index<D> c = set.small.range.at(k);
    Index<D> J;
    for (int a = 0; a < D; ++a) J[a] = floor_div(c[a], 3);
    set.nodes.push_back(small_lat.center(c));
    set.provenance.push_back(Provenance::S2);
    set.big_cube.push_back(J);
    set.center_cell.push_back(c);
    --wanted;
  }
  set.rebuild_owner_index();
  return set;
}

}  // namespace starquad

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "starquad/nodes.hpp"

namespace starquad {

/// Nodes x_k*, weights c_k* = mes V_k and the diagnostics of the subgrid measurement.
template <int D>
struct CubatureRule {
  std::string domain_name;
  std::int64_t n_requested = 0;
  double h_n = 0.0;
  int subgrid = 0;
  std::vector<Point<D>> nodes;
  std::vector<double> weights;
  std::vector<Provenance> provenance;
  JordanBracket mes_bracket;

  double sum_weights = 0.0;
  double remainder_measure = 0.0;  // mes of the union of U_k = V_k \ R_n
  double unassigned_volume = 0.0;  // subcells in Q outside every node's big cube
  double probe_volume = 0.0;       // all subcells with center in Q
  double max_node_distance = 0.0;  // max |x - x_k*|_inf over assigned subcell centers
  double subcell_diagonal = 0.0;
  std::vector<std::size_t> zero_weight_nodes;

  std::shared_ptr<const NodeSet<D>> nodeset;  // absent for rules loaded from disk

  std::size_t size() const { return nodes.size(); }
};

/// Index k minimising |x - x_k*|_inf among nodes whose big cube P(3h_n; x_k*) contains x;
/// ties go to the smallest k. Empty when no such node exists.
template <int D>
std::optional<std::size_t> assign_cell(const Point<D>& x, const NodeSet<D>& set) {
  const auto big = set.big_lattice();
  Index<D> base;
  std::array<bool, D> on_face{};
  for (int a = 0; a < D; ++a) {
    const double q = (x[a] - big.anchor[a]) / big.side();
    const double f = std::floor(q);
    base[a] = static_cast<std::int64_t>(f);
    on_face[a] = (f == q);
  }
  std::optional<std::size_t> best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << D); ++mask) {
    Index<D> J = base;
    bool valid = true;
    for (int a = 0; a < D; ++a) {
      if ((mask >> a) & 1u) {
        if (!on_face[a]) valid = false;
        J[a] -= 1;
      }
    }
    if (!valid) continue;
    for (std::size_t k : set.nodes_in(J)) {
      const double d = dist_inf<D>(x, set.nodes[k]);
      if (d < best_dist || (d == best_dist && best && k < *best)) {
        best_dist = d;
        best = k;
      }
    }
  }
  return best;
}

namespace detail {

/// Small cells of A(h_n) whose centers are nodes; their union is R_n.
template <int D>
std::vector<std::uint8_t> covered_cells(const NodeSet<D>& set) {
  std::vector<std::uint8_t> in_R(set.small.cls.size(), 0);
  for (const auto& c : set.center_cell)
    if (c) in_R[set.small.range.linear(*c)] = 1;
  return in_R;
}

/// Visits the centers of the (3 * subgrid)^D subcells of big cube J that lie in Q, with
/// the assigned node (nearest in l_inf among the nodes owned by J) and whether the
/// subcell belongs to R_n.
template <int D, class Visit>
void scan_big_cube(const StarDomain<D>& dom, const NodeSet<D>& set, const Index<D>& J, int subgrid,
                   const std::vector<std::uint8_t>& in_R, Visit&& visit) {
  const auto big = set.big_lattice();
  const Box<D> cube = big.cell(J);
  const std::int64_t per_axis = 3LL * subgrid;
  const double sub_side = big.side() / static_cast<double>(per_axis);
  const auto candidates = set.nodes_in(J);
  std::int64_t total = 1;
  for (int a = 0; a < D; ++a) total *= per_axis;
  for (std::int64_t flat = 0; flat < total; ++flat) {
    std::int64_t f = flat;
    Point<D> x;
    Index<D> small;
    for (int a = D - 1; a >= 0; --a) {
      const std::int64_t j = f % per_axis;
      f /= per_axis;
      x[a] = cube.lo[a] + sub_side * (static_cast<double>(j) + 0.5);
      small[a] = 3 * J[a] + j / subgrid;
    }
    if (!dom.contains(x)) continue;
    std::optional<std::size_t> best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t k : candidates) {
      const double d = dist_inf<D>(x, set.nodes[k]);
      if (d < best_dist) {
        best_dist = d;
        best = k;
      }
    }
    const bool covered = set.small.range.contains(small) && in_R[set.small.range.linear(small)];
    visit(x, best, covered);
  }
}

}  // namespace detail

/// Sequential visit of every subcell center in Q, in big-cube lexicographic order.
template <int D, class Visit>
void scan_partition(const StarDomain<D>& dom, const NodeSet<D>& set, int subgrid, Visit&& visit) {
  const auto in_R = detail::covered_cells<D>(set);
  for (std::size_t k = 0; k < set.big_range.size(); ++k)
    detail::scan_big_cube<D>(dom, set, set.big_range.at(k), subgrid, in_R, visit);
}

/// c_k* = mes V_k by midpoint counting on a subgrid of `subgrid` subcells per axis per
/// h_n-cell. Counts are integers per node, so the weights do not depend on the schedule.
template <int D>
CubatureRule<D> compute_weights(const StarDomain<D>& dom, std::shared_ptr<const NodeSet<D>> set, int subgrid,
                                const JordanBracket& bracket) {
  if (subgrid < 2) throw PreconditionError("compute_weights: subgrid must be >= 2");
  const auto in_R = detail::covered_cells<D>(*set);
  const std::size_t big_count = set->big_range.size();
  std::vector<std::int64_t> counts(set->size(), 0), uncovered(set->size(), 0);
  std::vector<std::int64_t> unassigned(big_count, 0), in_q(big_count, 0);
  std::vector<double> max_dist(big_count, 0.0);

  parallel_for(big_count, [&](std::size_t b) {
    detail::scan_big_cube<D>(dom, *set, set->big_range.at(b), subgrid, in_R,
                             [&](const Point<D>& x, std::optional<std::size_t> k, bool covered) {
                               ++in_q[b];
                               if (!k) {
                                 ++unassigned[b];
                                 return;
                               }
                               ++counts[*k];
                               if (!covered) ++uncovered[*k];
                               max_dist[b] = std::max(max_dist[b], dist_inf<D>(x, set->nodes[*k]));
                             });
  });

  const double sub_side = 2.0 * set->h_n / subgrid;
  const double sub_volume = std::pow(sub_side, D);
  CubatureRule<D> rule;
  rule.domain_name = dom.name();
  rule.n_requested = set->n_requested;
  rule.h_n = set->h_n;
  rule.subgrid = subgrid;
  rule.nodes = set->nodes;
  rule.provenance = set->provenance;
  rule.mes_bracket = bracket;
  rule.subcell_diagonal = sub_side * std::sqrt(static_cast<double>(D));
  rule.weights.resize(set->size());
  std::int64_t total_count = 0, total_uncovered = 0, total_unassigned = 0, total_in_q = 0;
  for (std::size_t k = 0; k < set->size(); ++k) {
    rule.weights[k] = static_cast<double>(counts[k]) * sub_volume;
    total_count += counts[k];
    total_uncovered += uncovered[k];
    if (counts[k] == 0) rule.zero_weight_nodes.push_back(k);
  }
  for (std::size_t b = 0; b < big_count; ++b) {
    total_unassigned += unassigned[b];
    total_in_q += in_q[b];
    rule.max_node_distance = std::max(rule.max_node_distance, max_dist[b]);
  }
  rule.sum_weights = static_cast<double>(total_count) * sub_volume;
  rule.remainder_measure = static_cast<double>(total_uncovered) * sub_volume;
  rule.unassigned_volume = static_cast<double>(total_unassigned) * sub_volume;
  rule.probe_volume = static_cast<double>(total_in_q) * sub_volume;
  rule.nodeset = std::move(set);
  return rule;
}

/// mes of the union of U_k = V_k \ R_n, measured on the rule's subgrid.
template <int D>
double remainder_measure(const StarDomain<D>&, const CubatureRule<D>& rule) {
  return rule.remainder_measure;
}

/// Jordan resolution used when none is given: aligned with thirds and halves of the box.
inline std::int64_t default_jordan_resolution(int d) {
  switch (d) {
    case 2: return 1536;
    case 3: return 192;
    case 4: return 48;
    default: return 24;
  }
}

template <int D>
struct RuleOptions {
  int subgrid = 8;
  int probe_resolution = 2;
  std::int64_t jordan_resolution = 0;  // 0: default_jordan_resolution(D)
  std::optional<double> mesQ;          // overrides the bracket midpoint
  Point<D> anchor{};
};

/// Full pipeline: Jordan bracket, h_n, S(n), weights.
template <int D>
CubatureRule<D> build_rule(const StarDomain<D>& dom, std::int64_t n, const RuleOptions<D>& opt = {},
                           std::optional<JordanBracket> bracket = std::nullopt) {
  if (!bracket) {
    bracket = jordan_measure<D>(dom, opt.jordan_resolution > 0 ? opt.jordan_resolution : default_jordan_resolution(D));
  }
  const double mesQ = opt.mesQ.value_or(bracket->midpoint());
  auto set = std::make_shared<const NodeSet<D>>(build_nodeset<D>(dom, n, mesQ, opt.probe_resolution, opt.anchor));
  return compute_weights<D>(dom, std::move(set), opt.subgrid, *bracket);
}

}  // namespace starquad

#include <gtest/gtest.h>

#include <numbers>
#include <random>
#include <sstream>

#include "starquad/engine.hpp"

using namespace starquad;

namespace {

StarDomain<2> unit_square() { return {{0.5, 0.5}, 0.25, CubeShape{1.0}, "square"}; }
StarDomain<2> unit_disk() { return {{0.0, 0.0}, 0.5, BallShape{1.0}, "disk"}; }
StarDomain<2> cross() { return {{0.0, 0.0}, 0.5, CrossShape{1.0, 3.0}, "cross"}; }
StarDomain<2> star() { return {{0.0, 0.0}, 0.3, StarPolygonShape{5, 0.5, 1.0}, "star"}; }

RuleOptions<2> with_mes(double mes, int subgrid = 8) {
  RuleOptions<2> o;
  o.mesQ = mes;
  o.subgrid = subgrid;
  return o;
}

// Brute force over every node, checking big-cube containment directly.
std::optional<std::size_t> assign_brute(const Point<2>& x, const NodeSet<2>& set) {
  std::optional<std::size_t> best;
  double best_d = 1e300;
  for (std::size_t k = 0; k < set.size(); ++k) {
    if (!set.big_lattice().cell(set.big_cube[k]).contains(x)) continue;
    const double d = std::max(std::abs(x[0] - set.nodes[k][0]), std::abs(x[1] - set.nodes[k][1]));
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

}  // namespace

TEST(AssignCell, UnitSquareFour) {
  const auto set = build_nodeset<2>(unit_square(), 4, 1.0, 2);
  const auto k = assign_cell<2>({0.1, 0.1}, set);
  ASSERT_TRUE(k.has_value());
  EXPECT_EQ(set.nodes[*k], (Point<2>{0.25, 0.25}));
  for (std::size_t j = 0; j < set.size(); ++j) EXPECT_EQ(assign_cell<2>(set.nodes[j], set), j);
}

TEST(AssignCell, TiesGoToSmallestIndex) {
  const auto set = build_nodeset<2>(unit_square(), 4, 1.0, 2);
  // nodes: (0.75,0.75), (0.25,0.25), (0.25,0.75), (0.75,0.25)
  EXPECT_EQ(assign_cell<2>({0.5, 0.1}, set), 1u);
  EXPECT_EQ(assign_cell<2>({0.5, 0.5}, set), 0u);
  EXPECT_EQ(assign_cell<2>({0.9, 0.5}, set), 0u);
}

TEST(AssignCell, OutsideEveryBigCube) {
  const auto set = build_nodeset<2>(unit_square(), 4, 1.0, 2);
  EXPECT_FALSE(assign_cell<2>({-0.2, 0.5}, set).has_value());
}

TEST(AssignCell, MatchesBruteForce) {
  std::mt19937_64 rng(5);
  for (const auto& dom : {star(), cross()}) {
    const auto set = build_nodeset<2>(dom, 700, jordan_measure<2>(dom, 600).midpoint(), 2);
    std::uniform_real_distribution<double> u(-3.2, 3.2);
    int checked = 0;
    while (checked < 3000) {
      const Point<2> x{u(rng), u(rng)};
      if (!dom.contains(x)) continue;
      ++checked;
      const auto a = assign_cell<2>(x, set), b = assign_brute(x, set);
      ASSERT_EQ(a.has_value(), b.has_value());
      if (a) EXPECT_EQ(dist_inf<2>(x, set.nodes[*a]), dist_inf<2>(x, set.nodes[*b]));
    }
  }
}

TEST(ComputeWeights, UnitSquareFourQuadrants) {
  const auto rule = build_rule<2>(unit_square(), 4, with_mes(1.0));
  ASSERT_EQ(rule.size(), 4u);
  for (double w : rule.weights) EXPECT_EQ(w, 0.25);
  EXPECT_EQ(rule.sum_weights, 1.0);
  EXPECT_EQ(rule.unassigned_volume, 0.0);
  EXPECT_TRUE(rule.zero_weight_nodes.empty());
}

TEST(ComputeWeights, SingleNodeGetsEverything) {
  const auto rule = build_rule<2>(unit_square(), 1, with_mes(1.0));
  ASSERT_EQ(rule.size(), 1u);
  EXPECT_DOUBLE_EQ(rule.weights[0], 1.0);

  // disk, one big cube holding the whole domain
  RuleOptions<2> o = with_mes(std::numbers::pi, 64);
  const double h = step_size(std::numbers::pi, 1, 2);
  o.anchor = {-3 * h, -3 * h};
  const auto disk = build_rule<2>(unit_disk(), 1, o);
  ASSERT_EQ(disk.size(), 1u);
  EXPECT_EQ(disk.provenance[0], Provenance::S1Interior);
  EXPECT_NEAR(disk.weights[0], std::numbers::pi, 0.02);
  EXPECT_EQ(disk.remainder_measure, disk.weights[0]);
}

TEST(ComputeWeights, CrossTotalVolume) {
  const auto rule = build_rule<2>(cross(), 2000);
  EXPECT_GE(rule.sum_weights, 19.9);
  EXPECT_LE(rule.sum_weights, 20.1);
}

TEST(ComputeWeights, RejectsCoarseSubgrid) {
  auto set = std::make_shared<const NodeSet<2>>(build_nodeset<2>(unit_square(), 4, 1.0, 2));
  EXPECT_THROW(compute_weights<2>(unit_square(), set, 1, jordan_measure<2>(unit_square(), 4)), PreconditionError);
}

TEST(ComputeWeights, ZeroWeightNodesAreListed) {
  for (const auto& dom : {star(), cross()}) {
    const auto rule = build_rule<2>(dom, 900, with_mes(jordan_measure<2>(dom, 600).midpoint(), 2));
    std::vector<std::size_t> zeros;
    for (std::size_t k = 0; k < rule.size(); ++k) {
      EXPECT_GE(rule.weights[k], 0.0);
      if (rule.weights[k] == 0.0) zeros.push_back(k);
    }
    EXPECT_EQ(zeros, rule.zero_weight_nodes);
  }
}

class PartitionInvariants : public ::testing::TestWithParam<std::pair<int, std::int64_t>> {};

TEST_P(PartitionInvariants, Hold) {
  const auto [which, n] = GetParam();
  const StarDomain<2> dom = which == 0 ? unit_square() : which == 1 ? unit_disk() : which == 2 ? cross() : star();
  const auto rule = build_rule<2>(dom, n);
  const double sub_volume = std::pow(2 * rule.h_n / rule.subgrid, 2);

  // disjointness and exhaustion at probe level
  EXPECT_NEAR(rule.sum_weights + rule.unassigned_volume, rule.probe_volume, 1e-9 * rule.probe_volume);
  EXPECT_GE(rule.sum_weights, rule.mes_bracket.inner - rule.unassigned_volume - 0.05 * rule.probe_volume);
  EXPECT_LE(rule.sum_weights, rule.mes_bracket.outer + 0.05 * rule.probe_volume);

  // every assigned subcell center within 6 h_n (+ one subcell diagonal) of its node
  const double limit = 6 * rule.h_n + rule.subcell_diagonal;
  EXPECT_LE(rule.max_node_distance, limit);
  double max_seen = 0.0, uncovered = 0.0;
  std::vector<double> recount(rule.size(), 0.0);
  scan_partition<2>(dom, *rule.nodeset, rule.subgrid, [&](const Point<2>& x, std::optional<std::size_t> k, bool covered) {
    if (!k) return;
    max_seen = std::max(max_seen, dist_inf<2>(x, rule.nodes[*k]));
    recount[*k] += sub_volume;
    if (!covered) uncovered += sub_volume;
  });
  EXPECT_EQ(max_seen, rule.max_node_distance);
  for (std::size_t k = 0; k < rule.size(); ++k) EXPECT_NEAR(recount[k], rule.weights[k], 1e-9);
  EXPECT_NEAR(uncovered, rule.remainder_measure, 1e-9 * std::max(1.0, uncovered));
  EXPECT_LE(rule.remainder_measure, rule.sum_weights);
}

INSTANTIATE_TEST_SUITE_P(Domains, PartitionInvariants,
                         ::testing::Values(std::pair{0, 9}, std::pair{0, 256}, std::pair{1, 100}, std::pair{1, 1500},
                                           std::pair{2, 256}, std::pair{2, 2000}, std::pair{3, 400}, std::pair{3, 3000}));

TEST(RemainderMeasure, ZeroOnAlignedSquares) {
  for (std::int64_t m : {2, 4, 8, 16}) {
    const auto rule = build_rule<2>(unit_square(), m * m, with_mes(1.0));
    EXPECT_EQ(remainder_measure<2>(unit_square(), rule), 0.0) << m;
  }
}

TEST(RemainderMeasure, ShrinksOnCross) {
  const auto coarse = build_rule<2>(cross(), 256);
  const auto fine = build_rule<2>(cross(), 4096);
  EXPECT_LT(remainder_measure<2>(cross(), fine), remainder_measure<2>(cross(), coarse));
  EXPECT_GT(remainder_measure<2>(cross(), fine), 0.0);
}

TEST(ComputeWeights, BitIdenticalAcrossThreadCounts) {
  std::vector<CubatureRule<2>> runs;
  for (int threads : {1, 2, 7}) {
    ScopedThreadCount guard(threads);
    runs.push_back(build_rule<2>(star(), 5000));
  }
  for (std::size_t r = 1; r < runs.size(); ++r) {
    ASSERT_EQ(runs[r].weights.size(), runs[0].weights.size());
    EXPECT_EQ(std::memcmp(runs[r].weights.data(), runs[0].weights.data(), runs[0].weights.size() * sizeof(double)), 0);
    EXPECT_EQ(runs[r].remainder_measure, runs[0].remainder_measure);
    EXPECT_EQ(runs[r].max_node_distance, runs[0].max_node_distance);
  }
}

TEST(RuleCsv, RoundTripReproducesEvaluation) {
  const auto rule = build_rule<2>(star(), 777);
  std::stringstream s;
  write_rule_csv<2>(s, rule);
  const auto loaded = read_rule_csv<2>(s);
  ASSERT_EQ(loaded.size(), rule.size());
  EXPECT_EQ(loaded.nodes, rule.nodes);
  EXPECT_EQ(loaded.weights, rule.weights);
  EXPECT_EQ(loaded.provenance, rule.provenance);
  EXPECT_EQ(loaded.h_n, rule.h_n);
  EXPECT_EQ(loaded.mes_bracket.inner, rule.mes_bracket.inner);
  EXPECT_EQ(loaded.mes_bracket.outer, rule.mes_bracket.outer);
  const auto exp = Exponent::infinity();
  for (const char* name : {"const", "linear-x1", "sin-sum", "fooling"})
    EXPECT_EQ(evaluate<2>(loaded, named_function<2>(name, loaded, exp)), evaluate<2>(rule, named_function<2>(name, rule, exp)))
        << name;
}

TEST(RuleCsv, HeaderLayout) {
  const auto rule = build_rule<2>(unit_square(), 4, with_mes(1.0));
  std::ostringstream s;
  write_rule_csv<2>(s, rule);
  const std::string text = s.str();
  for (const char* key : {"# starquad-rule v1\n", "# d=2\n", "# n=4\n", "# h_n=0.25\n", "# sum_weights=1\n"})
    EXPECT_NE(text.find(key), std::string::npos) << key;
  EXPECT_NE(text.find("0.75,0.75,0.25,S1-center\n"), std::string::npos);
}

TEST(RuleCsv, RejectsWrongDimensionAndGarbage) {
  const auto rule = build_rule<2>(unit_square(), 4, with_mes(1.0));
  std::stringstream s;
  write_rule_csv<2>(s, rule);
  EXPECT_THROW(read_rule_csv<3>(s), ConfigError);
  std::istringstream bad("# starquad-rule v1\n# d=2\n0.5,0.5,x,S2\n");
  EXPECT_THROW(read_rule_csv<2>(bad), ConfigError);
  std::istringstream no_magic("0.5,0.5,1,S2\n");
  EXPECT_THROW(read_rule_csv<2>(no_magic), ConfigError);
}

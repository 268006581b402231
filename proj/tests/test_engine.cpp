#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "starquad/engine.hpp"

using namespace starquad;

namespace {

StarDomain<2> unit_square() { return {{0.5, 0.5}, 0.25, CubeShape{1.0}, "square"}; }
StarDomain<2> cross() { return {{0.0, 0.0}, 0.5, CrossShape{1.0, 3.0}, "cross"}; }
StarDomain<2> star() { return {{0.0, 0.0}, 0.3, StarPolygonShape{5, 0.5, 1.0}, "star"}; }

CubatureRule<2> square_rule(std::int64_t n) {
  RuleOptions<2> o;
  o.mesQ = 1.0;
  return build_rule<2>(unit_square(), n, o);
}

}  // namespace

TEST(Exponent, ConjugateAndParsing) {
  EXPECT_EQ(Exponent::infinity().conj(), 1.0);
  EXPECT_DOUBLE_EQ(Exponent::finite(4).conj(), 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(Exponent::finite(3).inv_conj(), 2.0 / 3.0);
  EXPECT_TRUE(Exponent::parse("inf").is_infinite());
  EXPECT_EQ(Exponent::parse("2.5").p, 2.5);
  EXPECT_THROW(Exponent::parse("abc"), ConfigError);
  EXPECT_THROW(Exponent::finite(2).require_admissible(2), PreconditionError);
  EXPECT_NO_THROW(Exponent::finite(2.01).require_admissible(2));
  for (double p : {2.1, 3.0, 7.0, 100.0}) {
    const double pc = Exponent::finite(p).conj();
    EXPECT_GE(pc, 1.0);
    EXPECT_LT(pc, 2.0);  // d / (d - 1) for d = 2
  }
}

TEST(CdpConstant, ClosedFormAtInfinity) {
  EXPECT_NEAR(cdp_constant(2, Exponent::infinity()), 8.0 / 3.0, 1e-15);
  EXPECT_NEAR(cdp_constant(3, Exponent::infinity()), 6.0, 1e-15);
  EXPECT_NEAR(cdp_constant(4, Exponent::infinity()), 64.0 / 5.0, 1e-14);
}

TEST(CdpConstant, LargeFiniteExponentApproachesInfinity) {
  // the quadrature route for p' -> 1 must meet the closed form
  EXPECT_NEAR(cdp_constant(2, Exponent::finite(1e9)), 8.0 / 3.0, 1e-7);
  EXPECT_NEAR(cdp_constant(3, Exponent::finite(1e9)), 6.0, 1e-7);
}

TEST(CdpConstant, MatchesTanhSinhRoute) {
  for (auto [d, p] : std::vector<std::pair<int, double>>{{2, 3}, {2, 4}, {3, 4}, {2, 2.2}, {3, 3.5}, {4, 9}}) {
    const double pc = Exponent::finite(p).conj();
    EXPECT_NEAR(cdp_constant(d, Exponent::finite(p)) / oracle::tanh_sinh_cdp(d, pc), 1.0, 1e-9) << d << "," << p;
  }
}

TEST(CdpConstant, MatchesMonteCarlo) {
  for (auto [d, p] : std::vector<std::pair<int, double>>{{2, 3}, {2, 4}, {3, 4}}) {
    const auto mc = oracle::mc_cdp(d, Exponent::finite(p).conj(), 400000, 17);
    const double c = cdp_constant(d, Exponent::finite(p));
    EXPECT_NEAR(c, mc.value, 5 * mc.std_error + 1e-3 * c) << d << "," << p;
  }
  const auto mc = oracle::mc_cdp(2, 1.0, 400000, 3);
  EXPECT_NEAR(mc.value, 8.0 / 3.0, 5 * mc.std_error);
}

TEST(CdpConstant, RejectsInadmissibleExponents) {
  EXPECT_THROW(cdp_constant(2, Exponent::finite(2)), PreconditionError);
  EXPECT_THROW(cdp_constant(3, Exponent::finite(1.5)), PreconditionError);
  EXPECT_THROW(cdp_constant(1, Exponent::infinity()), PreconditionError);
}

TEST(TheoremBound, Examples) {
  EXPECT_NEAR(theorem_bound(2, Exponent::infinity(), 1.0, 4), 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(theorem_bound(2, Exponent::infinity(), 1.0, 100), 1.0 / 30.0, 1e-15);
  for (std::int64_t n : {1, 7, 100, 12345})
    EXPECT_NEAR(theorem_bound(3, Exponent::infinity(), 1.0, n) / theorem_bound(3, Exponent::infinity(), 1.0, 8 * n), 2.0,
                1e-14);
  EXPECT_THROW(theorem_bound(2, Exponent::infinity(), 1.0, 0), PreconditionError);
}

TEST(TheoremBound, Homogeneity) {
  for (int d : {2, 3}) {
    for (double p : {4.0, 10.0, std::numeric_limits<double>::infinity()}) {
      const Exponent e{p};
      const double power = 1.0 / d + e.inv_conj();
      for (double lambda : {0.5, 3.0, 20.0})
        EXPECT_NEAR(theorem_bound(d, e, 2.0 * lambda, 50) / theorem_bound(d, e, 2.0, 50), std::pow(lambda, power), 1e-12);
    }
  }
}

TEST(Evaluate, UnitSquareFour) {
  const auto rule = square_rule(4);
  const auto exp = Exponent::infinity();
  EXPECT_EQ(evaluate<2>(rule, constant_function<2>()), 1.0);
  EXPECT_EQ(evaluate<2>(rule, linear_x1_function<2>(exp, rule.mes_bracket)), 0.5);
  EXPECT_EQ(evaluate<2>(rule, fooling_function<2>(rule, exp)), 0.0);
}

TEST(Evaluate, FoolingVanishesOnEveryRule) {
  for (const auto& dom : {star(), cross()}) {
    const auto rule = build_rule<2>(dom, 1234);
    EXPECT_EQ(evaluate<2>(rule, fooling_function<2>(rule, Exponent::finite(5))), 0.0);
  }
}

TEST(ReferenceIntegral, Examples) {
  const auto rule = square_rule(4);
  const auto exp = Exponent::infinity();
  EXPECT_NEAR(reference_integral<2>(unit_square(), constant_function<2>(), 64), 1.0, 1e-14);
  EXPECT_NEAR(reference_integral<2>(unit_square(), linear_x1_function<2>(exp, rule.mes_bracket), 1024), 0.5, 1e-3);
  EXPECT_NEAR(reference_integral<2>(unit_square(), fooling_function<2>(rule, exp), 1024), 1.0 / 6.0, 1e-3);
  EXPECT_THROW(reference_integral<2>(unit_square(), constant_function<2>(), 1), PreconditionError);
}

TEST(ReferenceIntegral, CrossAreaAndThreadIndependence) {
  const auto f = sin_sum_function<2>(Exponent::infinity(), {});
  double first = 0.0;
  for (int threads : {1, 3, 8}) {
    ScopedThreadCount guard(threads);
    const double v = reference_integral<2>(cross(), f, 600);
    if (threads == 1) first = v;
    EXPECT_EQ(v, first);
  }
  EXPECT_NEAR(reference_integral<2>(cross(), constant_function<2>(), 600), 20.0, 1e-12);
}

TEST(EmpiricalError, FoolingOnAlignedSquares) {
  const auto exp = Exponent::infinity();
  const auto four = square_rule(4);
  EXPECT_NEAR(empirical_error<2>(unit_square(), four, fooling_function<2>(four, exp), 1024), 1.0 / 6.0, 2e-3);
  EXPECT_NEAR(empirical_error<2>(unit_square(), four, constant_function<2>(), 64), 0.0, 1e-14);
  for (std::int64_t m : {2, 4, 8, 16}) {
    const auto rule = square_rule(m * m);
    const double exact = m * m * oracle::cell_distance_integral(2, 0.5 / m);
    EXPECT_NEAR(exact, 1.0 / (3.0 * m), 1e-15);
    const double err = empirical_error<2>(unit_square(), rule, fooling_function<2>(rule, exp), 2048);
    EXPECT_NEAR(err / exact, 1.0, 2e-3) << m;
    EXPECT_NEAR(err / theorem_bound(2, exp, 1.0, m * m), 1.0, 2e-3) << m;
  }
}

TEST(EmpiricalError, SmoothFunctionWellBelowBound) {
  const auto rule = build_rule<2>(cross(), 4096);
  const auto exp = Exponent::infinity();
  const auto f = sin_sum_function<2>(exp, rule.mes_bracket);
  const double err = empirical_error<2>(cross(), rule, f, default_reference_resolution<2>(cross(), rule.h_n));
  EXPECT_LE(err, 1.2 * theorem_bound(2, exp, rule.mes_bracket.midpoint(), 4096));
}

TEST(TestFunctions, GradientsMatchFiniteDifferences) {
  const auto rule = build_rule<2>(star(), 300);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const Exponent& exp : {Exponent::infinity(), Exponent::finite(4)}) {
    for (const char* name : {"const", "linear-x1", "sin-sum", "fooling"}) {
      const auto f = named_function<2>(name, rule, exp);
      int checked = 0;
      while (checked < 1000) {
        const Point<2> x{u(rng), u(rng)};
        if (!star().contains(x)) continue;
        ++checked;
        const auto g = f.gradient(x);
        // pointwise |grad f|_1 bound behind each certificate
        const double l1 = std::abs(g[0]) + std::abs(g[1]);
        const double bound = std::string(name) == "linear-x1" ? 1.0 : class_scale(exp, rule.mes_bracket);
        EXPECT_LE(l1, bound + 1e-12) << name;
        const double h = 1e-7;
        for (int a = 0; a < 2; ++a) {
          Point<2> xp = x, xm = x;
          xp[a] += h;
          xm[a] -= h;
          const double fd = (f.value(xp) - f.value(xm)) / (2 * h);
          // the fooling function is piecewise linear; skip kinks
          if (std::string(name) == "fooling" && std::abs(fd - g[a]) > 1e-3) continue;
          EXPECT_NEAR(fd, g[a], 1e-6) << name;
        }
      }
      if (std::string(name) != "linear-x1") EXPECT_LE(f.certified_norm, 1.0 + 1e-12) << name;
    }
  }
}

TEST(TestFunctions, FoolingScaleForFiniteP) {
  const auto rule = build_rule<2>(cross(), 500);
  const auto f = fooling_function<2>(rule, Exponent::finite(4));
  EXPECT_NEAR(f.certified_norm, 1.0, 1e-12);
  EXPECT_THROW(named_function<2>("cosine", rule, Exponent::infinity()), ConfigError);
}

TEST(NodeLocator, MatchesBruteForce) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<Point<2>> nodes(400);
  for (auto& p : nodes) p = {u(rng), u(rng)};
  for (double cell : {0.05, 0.3, 5.0}) {
    NodeLocator<2> loc(nodes, cell);
    for (int i = 0; i < 2000; ++i) {
      const Point<2> x{1.5 * u(rng), 1.5 * u(rng)};
      double best = 1e300;
      for (const auto& p : nodes) best = std::min(best, dist_inf<2>(x, p));
      const auto [d, k] = loc.nearest(x);
      EXPECT_EQ(d, best);
      EXPECT_EQ(dist_inf<2>(x, nodes[k]), best);
    }
  }
}

TEST(NodeLocator, ThreeDimensionsAndTies) {
  std::vector<Point<3>> nodes{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  NodeLocator<3> loc(nodes, 0.5);
  EXPECT_EQ(loc.nearest({0.5, 0.0, 0.0}).second, 0u);
  EXPECT_EQ(loc.nearest({0.9, 0.1, 0.0}).second, 1u);
  EXPECT_EQ(loc.nearest({5.0, 5.0, 5.0}).first, 5.0);
}

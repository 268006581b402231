#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <type_traits>

#include "starquad/starquad.hpp"

namespace sq = starquad;

namespace {

constexpr int kVerificationFailed = 3;

constexpr const char* kDefaultCross =
    "name = cross\ndim = 2\ncenter = 0, 0\nball_radius = 0.5\nshape = cross\narm_halfwidth = 1\narm_halflength = 3\n";

template <class F>
int with_dim(int d, F&& f) {
  switch (d) {
    case 2: return f(std::integral_constant<int, 2>{});
    case 3: return f(std::integral_constant<int, 3>{});
    case 4: return f(std::integral_constant<int, 4>{});
    case 5: return f(std::integral_constant<int, 5>{});
    default: throw sq::ConfigError("dimension " + std::to_string(d) + " is not supported by the command line (2..5)");
  }
}

void print_value(const char* key, double v) { std::printf("%s %.10f\n", key, v); }

struct Output {
  std::ofstream file;
  std::ostream* stream = &std::cout;

  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file.open(path);
    if (!file) throw sq::ConfigError("cannot write '" + path + "'");
    stream = &file;
  }
};

struct MeasureArgs {
  std::string domain;
  std::int64_t resolution = 0;
  bool diameter = false;
  bool validate = false;
  std::uint64_t seed = 1;
  int trials = 2000;
};

int run_measure(const MeasureArgs& a) {
  const auto spec = sq::load_domain_config(a.domain);
  return with_dim(spec.dim, [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    const auto dom = sq::make_domain<D>(spec);
    const std::int64_t res = a.resolution > 0 ? a.resolution : sq::default_jordan_resolution(D);
    const auto b = sq::jordan_measure<D>(dom, res);
    print_value("inner", b.inner);
    print_value("outer", b.outer);
    print_value("midpoint", b.midpoint());
    std::printf("resolution %lld\n", static_cast<long long>(b.resolution));
    if (a.diameter) print_value("diameter", sq::diameter<D>(dom, 20000));
    if (a.validate) {
      const auto rep = sq::validate_star_ball<D>(dom, a.seed, a.trials);
      std::printf("star_ball %s trials=%d\n", rep.passed ? "pass" : "FAIL", rep.trials_run);
      if (!rep.passed) return kVerificationFailed;
    }
    return 0;
  });
}

struct RuleArgs {
  std::string domain;
  std::int64_t n = 0;
  int subgrid = 8;
  int probe_resolution = 2;
  std::int64_t jordan_resolution = 0;
  std::optional<double> mes;
  std::string output;
};

template <int D>
sq::CubatureRule<D> make_rule(const sq::StarDomain<D>& dom, const RuleArgs& a) {
  sq::RuleOptions<D> opt;
  opt.subgrid = a.subgrid;
  opt.probe_resolution = a.probe_resolution;
  opt.jordan_resolution = a.jordan_resolution;
  opt.mesQ = a.mes;
  return sq::build_rule<D>(dom, a.n, opt);
}

int run_rule(const RuleArgs& a) {
  const auto spec = sq::load_domain_config(a.domain);
  return with_dim(spec.dim, [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    const auto dom = sq::make_domain<D>(spec);
    const auto rule = make_rule<D>(dom, a);
    Output out(a.output);
    sq::write_rule_csv<D>(*out.stream, rule);
    std::fprintf(stderr, "nodes %zu  sum_weights %.10f  remainder %.10f  h_n %.10f\n", rule.size(), rule.sum_weights,
                 rule.remainder_measure, rule.h_n);
    if (!rule.zero_weight_nodes.empty())
      std::fprintf(stderr, "warning: %zu node(s) received zero weight\n", rule.zero_weight_nodes.size());
    return 0;
  });
}

struct IntegrateArgs {
  RuleArgs rule;
  std::string rule_file;
  std::string function = "const";
  std::string p = "inf";
  std::int64_t resolution = 0;
};

int run_integrate(const IntegrateArgs& a) {
  if (a.rule_file.empty() && (a.rule.domain.empty() || a.rule.n <= 0))
    throw sq::ConfigError("integrate needs --rule, or --domain together with -n");
  std::optional<sq::DomainSpec> spec;
  if (!a.rule.domain.empty()) spec = sq::load_domain_config(a.rule.domain);
  const int d = a.rule_file.empty() ? spec->dim : sq::rule_csv_dimension(a.rule_file);
  if (spec && spec->dim != d) throw sq::ConfigError("rule and domain dimensions differ");
  const auto exp = sq::Exponent::parse(a.p);
  exp.require_admissible(d);
  return with_dim(d, [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    std::optional<sq::StarDomain<D>> dom;
    if (spec) dom = sq::make_domain<D>(*spec);
    const auto rule = a.rule_file.empty() ? make_rule<D>(*dom, a.rule) : sq::load_rule_csv<D>(a.rule_file);
    const auto f = sq::named_function<D>(a.function, rule, exp);
    const double estimate = sq::evaluate<D>(rule, f);
    print_value("estimate", estimate);
    if (dom) {
      const std::int64_t res = a.resolution > 0 ? a.resolution : sq::default_reference_resolution<D>(*dom, rule.h_n, rule.subgrid > 0 ? rule.subgrid : 8);
      const double ref = sq::reference_integral<D>(*dom, f, res);
      print_value("reference", ref);
      print_value("error", std::abs(ref - estimate));
      print_value("bound", sq::theorem_bound(D, exp, rule.mes_bracket.midpoint(), rule.n_requested));
    }
    return 0;
  });
}

struct ScalarArgs {
  int d = 2;
  std::string p = "inf";
  double mes = 1.0;
  std::int64_t n = 1;
};

struct ConvergenceArgs {
  std::string domain;
  std::string p = "inf";
  std::vector<std::int64_t> n_list = {64, 256, 1024, 4096};
  sq::ConvergenceOptions opt;
  std::string output;
};

int run_convergence_cmd(const ConvergenceArgs& a) {
  const auto spec = sq::load_domain_config(a.domain);
  const auto exp = sq::Exponent::parse(a.p);
  return with_dim(spec.dim, [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    const auto dom = sq::make_domain<D>(spec);
    const auto rep = sq::run_convergence<D>(dom, exp, a.n_list, a.opt);
    Output out(a.output);
    sq::write_convergence_csv(*out.stream, rep);
    std::fprintf(stderr, "slope %.10f\n", rep.slope);
    return 0;
  });
}

struct VerifyArgs {
  std::string domain;
  sq::LemmaSuiteOptions opt;
};

int run_verify(const VerifyArgs& a) {
  const auto spec = a.domain.empty() ? sq::parse_domain_config(kDefaultCross) : sq::load_domain_config(a.domain);
  return with_dim(spec.dim, [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    const auto dom = sq::make_domain<D>(spec);
    const auto checks = sq::run_lemma_suite<D>(dom, a.opt);
    sq::write_lemma_table(std::cout, checks);
    for (const auto& c : checks)
      if (!c.passed) return kVerificationFailed;
    return 0;
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cubature rules on star domains: nodes, weights, constants, error studies"};
  app.require_subcommand(1);
  int threads = -1;
  app.add_option("--threads", threads, "Worker threads (0 = auto; default: STARQUAD_THREADS or auto)");

  MeasureArgs measure;
  auto* m = app.add_subcommand("measure", "Jordan bracket of a domain");
  m->add_option("--domain", measure.domain, "Domain config file")->required();
  m->add_option("--resolution", measure.resolution, "Cells per axis (0 = default for the dimension)");
  m->add_flag("--diameter", measure.diameter, "Also print the diameter");
  m->add_flag("--validate-star", measure.validate, "Check the star-with-respect-to-a-ball property");
  m->add_option("--seed", measure.seed, "Seed for --validate-star");
  m->add_option("--trials", measure.trials, "Trials for --validate-star");

  RuleArgs rule;
  auto add_rule_options = [](CLI::App* c, RuleArgs& r, bool required) {
    auto* dom = c->add_option("--domain", r.domain, "Domain config file");
    auto* n = c->add_option("-n", r.n, "Number of nodes requested");
    if (required) {
      dom->required();
      n->required();
    }
    c->add_option("--subgrid", r.subgrid, "Subcells per axis per lattice cell for the weights");
    c->add_option("--probe-resolution", r.probe_resolution, "Probe midpoints per axis when classifying cubes");
    c->add_option("--jordan-resolution", r.jordan_resolution, "Cells per axis of the Jordan bracket (0 = default)");
    c->add_option("--mes", r.mes, "Use this value of mes Q instead of the bracket midpoint");
  };
  auto* r = app.add_subcommand("rule", "Build a cubature rule and write it as CSV");
  add_rule_options(r, rule, true);
  r->add_option("-o,--output", rule.output, "Output file (default: stdout)");

  IntegrateArgs integ;
  auto* in = app.add_subcommand("integrate", "Apply a rule to a named test function");
  add_rule_options(in, integ.rule, false);
  in->add_option("--rule", integ.rule_file, "Rule CSV written by `rule`");
  in->add_option("-f,--function", integ.function, "const | linear-x1 | sin-sum | fooling");
  in->add_option("-p", integ.p, "Exponent p > d or inf");
  in->add_option("--resolution", integ.resolution, "Reference grid cells per axis (0 = default)");

  ScalarArgs constant;
  auto* c = app.add_subcommand("constant", "Asymptotic constant c(d,p)");
  c->add_option("-d", constant.d, "Dimension")->required();
  c->add_option("-p", constant.p, "Exponent p > d or inf")->required();

  ScalarArgs bound;
  auto* b = app.add_subcommand("bound", "Leading term of the optimal error");
  b->add_option("-d", bound.d, "Dimension")->required();
  b->add_option("-p", bound.p, "Exponent p > d or inf")->required();
  b->add_option("--mes", bound.mes, "Measure of Q")->required();
  b->add_option("-n", bound.n, "Number of nodes")->required();

  ConvergenceArgs conv;
  auto* cv = app.add_subcommand("convergence", "Fooling-function error against the bound over a list of n");
  cv->add_option("--domain", conv.domain, "Domain config file")->required();
  cv->add_option("-p", conv.p, "Exponent p > d or inf");
  cv->add_option("--n-list", conv.n_list, "Ascending node counts, comma separated")->delimiter(',');
  cv->add_option("--subgrid", conv.opt.subgrid, "Subcells per axis per lattice cell");
  cv->add_option("--resolution", conv.opt.reference_resolution, "Fixed reference grid resolution (0 = scale with n)");
  cv->add_option("--reference-factor", conv.opt.reference_factor, "Reference cells per weight subcell and axis");
  cv->add_option("--seed", conv.opt.seed, "Seed recorded in the report");
  cv->add_flag("--timing", conv.opt.timing, "Record wall time per row (output no longer reproducible)");
  cv->add_option("-o,--output", conv.output, "Output file (default: stdout)");

  VerifyArgs verify;
  auto* v = app.add_subcommand("verify-lemmas", "Numerical checks of the auxiliary identities and bounds (TSV)");
  v->add_option("--domain", verify.domain, "Domain config (default: the 2x6 cross with R = 0.5)");
  v->add_option("--seed", verify.opt.seed, "Random seed");
  v->add_option("-n", verify.opt.w_region_n, "Node count for the W-region check");
  v->add_option("--preimage-configs", verify.opt.preimage_configs, "Random configurations for root counting");
  v->add_option("--scan-samples", verify.opt.scan_samples, "Samples of the sign-change scan");
  v->add_option("--distance-pairs", verify.opt.distance_pairs, "Sampled pairs for the distance bound");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  std::optional<sq::ScopedThreadCount> scoped;
  if (threads >= 0) scoped.emplace(static_cast<unsigned>(threads));

  try {
    if (*m) return run_measure(measure);
    if (*r) return run_rule(rule);
    if (*in) return run_integrate(integ);
    if (*c) {
      std::printf("%.10f\n", sq::cdp_constant(constant.d, sq::Exponent::parse(constant.p)));
      return 0;
    }
    if (*b) {
      std::printf("%.10f\n", sq::theorem_bound(bound.d, sq::Exponent::parse(bound.p), bound.mes, bound.n));
      return 0;
    }
    if (*cv) return run_convergence_cmd(conv);
    if (*v) return run_verify(verify);
  } catch (const sq::PreconditionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const sq::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}

#pragma once

#include <chrono>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "starquad/engine.hpp"

namespace starquad {

struct ConvergenceRow {
  std::int64_t n = 0;
  std::int64_t nodes = 0;
  double h_n = 0.0;
  double sum_weights = 0.0;
  double remainder_measure = 0.0;
  double fooling_error = 0.0;
  double theorem_bound = 0.0;
  double ratio = 0.0;
  double wall_time_s = 0.0;
  std::string error;  // non-empty for a failed row

  bool failed() const { return !error.empty(); }
};

struct ConvergenceReport {
  std::string domain;
  std::string p;
  std::uint64_t seed = 0;
  double slope = 0.0;
  std::vector<ConvergenceRow> rows;
};

inline bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

inline bool operator==(const ConvergenceRow& a, const ConvergenceRow& b) {
  return a.n == b.n && a.nodes == b.nodes && same_bits(a.h_n, b.h_n) && same_bits(a.sum_weights, b.sum_weights) &&
         same_bits(a.remainder_measure, b.remainder_measure) && same_bits(a.fooling_error, b.fooling_error) &&
         same_bits(a.theorem_bound, b.theorem_bound) && same_bits(a.ratio, b.ratio) &&
         same_bits(a.wall_time_s, b.wall_time_s) && a.error == b.error;
}

inline bool operator==(const ConvergenceReport& a, const ConvergenceReport& b) {
  return a.domain == b.domain && a.p == b.p && a.seed == b.seed && same_bits(a.slope, b.slope) && a.rows == b.rows;
}

/// Least-squares slope of log(fooling_error) against log(n) over the rows with index >= k/2.
inline double fit_slope(const std::vector<ConvergenceRow>& rows) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = rows.size() / 2; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.failed() || !(r.fooling_error > 0.0)) continue;
    const double x = std::log(static_cast<double>(r.n)), y = std::log(r.fooling_error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 2) return std::numeric_limits<double>::quiet_NaN();
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

struct ConvergenceOptions {
  int subgrid = 8;
  int probe_resolution = 2;
  std::int64_t jordan_resolution = 0;
  std::int64_t reference_factor = 4;      // reference cells per weight subcell and axis
  std::int64_t reference_resolution = 0;  // fixed resolution, overrides the factor when > 0
  std::uint64_t seed = 0;
  bool timing = false;  // wall_time_s stays 0 unless set, keeping reports reproducible
};

template <int D>
ConvergenceRow convergence_row(const StarDomain<D>& dom, const Exponent& exp, std::int64_t n,
                               const ConvergenceOptions& opt, const JordanBracket& bracket) {
  const auto start = std::chrono::steady_clock::now();
  ConvergenceRow row;
  row.n = n;
  RuleOptions<D> ro;
  ro.subgrid = opt.subgrid;
  ro.probe_resolution = opt.probe_resolution;
  const CubatureRule<D> rule = build_rule<D>(dom, n, ro, bracket);
  row.nodes = static_cast<std::int64_t>(rule.size());
  row.h_n = rule.h_n;
  row.sum_weights = rule.sum_weights;
  row.remainder_measure = rule.remainder_measure;
  std::int64_t res = opt.reference_resolution;
  if (res <= 0) res = default_reference_resolution<D>(dom, rule.h_n, opt.subgrid, opt.reference_factor);
  row.fooling_error = empirical_error<D>(dom, rule, fooling_function<D>(rule, exp), res);
  row.theorem_bound = theorem_bound(D, exp, bracket.midpoint(), n);
  row.ratio = row.fooling_error / row.theorem_bound;
  if (opt.timing) row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

/// Rule, fooling-function error and leading bound for each n. Rows that throw are kept
/// with NaN values and the error message.
template <int D>
ConvergenceReport run_convergence(const StarDomain<D>& dom, const Exponent& exp, const std::vector<std::int64_t>& n_list,
                                  const ConvergenceOptions& opt = {}) {
  if (n_list.size() < 3) throw PreconditionError("run_convergence: n_list needs at least 3 entries");
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] <= n_list[i - 1]) throw PreconditionError("run_convergence: n_list must be strictly ascending");
  exp.require_admissible(D);
  const JordanBracket bracket =
      jordan_measure<D>(dom, opt.jordan_resolution > 0 ? opt.jordan_resolution : default_jordan_resolution(D));
  ConvergenceReport rep;
  rep.domain = dom.name();
  rep.p = exp.str();
  rep.seed = opt.seed;
  for (std::int64_t n : n_list) {
    try {
      rep.rows.push_back(convergence_row<D>(dom, exp, n, opt, bracket));
    } catch (const std::exception& e) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      rep.rows.push_back({n, 0, nan, nan, nan, nan, nan, nan, 0.0, e.what()});
    }
  }
  rep.slope = fit_slope(rep.rows);
  return rep;
}

inline constexpr const char* kConvergenceColumns =
    "n,nodes,h_n,sum_weights,remainder_measure,fooling_error,theorem_bound,ratio,wall_time_s";

inline void write_convergence_csv(std::ostream& out, const ConvergenceReport& rep) {
  out << "# starquad-convergence v1\n";
  out << "# domain=" << rep.domain << "\n";
  out << "# p=" << rep.p << "\n";
  out << "# seed=" << rep.seed << "\n";
  out << "# slope=" << format_exact(rep.slope) << "\n";
  out << kConvergenceColumns << "\n";
  for (const auto& r : rep.rows) {
    if (r.failed()) out << "# failed n=" << r.n << ": " << r.error << "\n";
    out << r.n << ',' << r.nodes << ',' << format_exact(r.h_n) << ',' << format_exact(r.sum_weights) << ','
        << format_exact(r.remainder_measure) << ',' << format_exact(r.fooling_error) << ','
        << format_exact(r.theorem_bound) << ',' << format_exact(r.ratio) << ',' << format_exact(r.wall_time_s) << '\n';
  }
}

inline std::string convergence_csv(const ConvergenceReport& rep) {
  std::ostringstream s;
  write_convergence_csv(s, rep);
  return s.str();
}

namespace detail {

inline double parse_real_or_nan(std::string_view text, int line, std::string_view key) {
  if (trim(text) == "nan" || trim(text) == "-nan") return std::numeric_limits<double>::quiet_NaN();
  return parse_number(text, line, key);
}

}  // namespace detail

inline ConvergenceReport parse_convergence_csv(std::istream& in) {
  ConvergenceReport rep;
  std::string line, pending_error;
  int line_no = 0;
  bool magic = false, columns = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string_view body = detail::trim(std::string_view(line).substr(1));
      if (body == "starquad-convergence v1") magic = true;
      else if (body.starts_with("domain=")) rep.domain = std::string(body.substr(7));
      else if (body.starts_with("p=")) rep.p = std::string(body.substr(2));
      else if (body.starts_with("seed=")) rep.seed = static_cast<std::uint64_t>(std::stoull(std::string(body.substr(5))));
      else if (body.starts_with("slope=")) rep.slope = detail::parse_real_or_nan(body.substr(6), line_no, "slope");
      else if (body.starts_with("failed n=")) {
        const auto colon = body.find(": ");
        pending_error = colon == std::string_view::npos ? "failed" : std::string(body.substr(colon + 2));
      }
      continue;
    }
    if (line == kConvergenceColumns) {
      columns = true;
      continue;
    }
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    if (f.size() != 9) throw ConfigError("convergence report line " + std::to_string(line_no) + ": expected 9 fields");
    ConvergenceRow r;
    r.n = static_cast<std::int64_t>(detail::parse_number(f[0], line_no, "n"));
    r.nodes = static_cast<std::int64_t>(detail::parse_number(f[1], line_no, "nodes"));
    r.h_n = detail::parse_real_or_nan(f[2], line_no, "h_n");
    r.sum_weights = detail::parse_real_or_nan(f[3], line_no, "sum_weights");
    r.remainder_measure = detail::parse_real_or_nan(f[4], line_no, "remainder_measure");
    r.fooling_error = detail::parse_real_or_nan(f[5], line_no, "fooling_error");
    r.theorem_bound = detail::parse_real_or_nan(f[6], line_no, "theorem_bound");
    r.ratio = detail::parse_real_or_nan(f[7], line_no, "ratio");
    r.wall_time_s = detail::parse_real_or_nan(f[8], line_no, "wall_time_s");
    r.error = std::move(pending_error);
    pending_error.clear();
    rep.rows.push_back(std::move(r));
  }
  if (!magic || !columns) throw ConfigError("convergence report: missing header");
  return rep;
}

inline ConvergenceReport parse_convergence_csv(const std::string& text) {
  std::istringstream in(text);
  return parse_convergence_csv(in);
}

}  // namespace starquad

#pragma once

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include "starquad/config.hpp"
#include "starquad/partition.hpp"

namespace starquad {

/// Shortest decimal form that parses back to the same double.
inline std::string format_exact(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

/// Rule CSV, version 1:
///   # starquad-rule v1, # d=, # n=, # h_n=, # mesQ_inner=, # mesQ_outer=, # sum_weights=
/// followed by one row per node: x1,...,xd,weight,provenance.
template <int D>
void write_rule_csv(std::ostream& out, const CubatureRule<D>& rule) {
  out << "# starquad-rule v1\n";
  out << "# d=" << D << "\n";
  out << "# n=" << rule.n_requested << "\n";
  out << "# h_n=" << format_exact(rule.h_n) << "\n";
  out << "# mesQ_inner=" << format_exact(rule.mes_bracket.inner) << "\n";
  out << "# mesQ_outer=" << format_exact(rule.mes_bracket.outer) << "\n";
  out << "# sum_weights=" << format_exact(rule.sum_weights) << "\n";
  for (std::size_t k = 0; k < rule.size(); ++k) {
    for (int a = 0; a < D; ++a) out << format_exact(rule.nodes[k][a]) << ',';
    out << format_exact(rule.weights[k]) << ',' << to_string(rule.provenance[k]) << '\n';
  }
}

namespace detail {

struct RuleHeader {
  int d = 0;
  std::int64_t n = 0;
  double h_n = 0.0, inner = 0.0, outer = 0.0, sum_weights = 0.0;
};

inline RuleHeader read_rule_header(std::istream& in, int& line_no) {
  RuleHeader h;
  std::string line;
  bool magic = false;
  while (in.peek() == '#') {
    std::getline(in, line);
    ++line_no;
    if (line == "# starquad-rule v1") {
      magic = true;
      continue;
    }
    const auto eq = line.find('=');
    if (line.size() < 3 || eq == std::string::npos) continue;
    const std::string key(trim(std::string_view(line).substr(1, eq - 1)));
    const std::string_view value = std::string_view(line).substr(eq + 1);
    if (key == "d") h.d = static_cast<int>(parse_number(value, line_no, key));
    else if (key == "n") h.n = static_cast<std::int64_t>(parse_number(value, line_no, key));
    else if (key == "h_n") h.h_n = parse_number(value, line_no, key);
    else if (key == "mesQ_inner") h.inner = parse_number(value, line_no, key);
    else if (key == "mesQ_outer") h.outer = parse_number(value, line_no, key);
    else if (key == "sum_weights") h.sum_weights = parse_number(value, line_no, key);
  }
  if (!magic) throw ConfigError("rule file: missing '# starquad-rule v1' header");
  if (h.d < 2) throw ConfigError("rule file: missing or invalid '# d=' header");
  return h;
}

}  // namespace detail

inline int rule_csv_dimension(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open rule file '" + path + "'");
  int line_no = 0;
  return detail::read_rule_header(in, line_no).d;
}

template <int D>
CubatureRule<D> read_rule_csv(std::istream& in) {
  int line_no = 0;
  const detail::RuleHeader h = detail::read_rule_header(in, line_no);
  if (h.d != D) throw ConfigError("rule file: dimension " + std::to_string(h.d) + " does not match " + std::to_string(D));
  CubatureRule<D> rule;
  rule.n_requested = h.n;
  rule.h_n = h.h_n;
  rule.mes_bracket = {h.inner, h.outer, 0};
  rule.sum_weights = h.sum_weights;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty() || line[0] == '#') continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    if (fields.size() != static_cast<std::size_t>(D) + 2)
      throw ConfigError("rule file line " + std::to_string(line_no) + ": expected " + std::to_string(D + 2) + " fields");
    Point<D> x;
    for (int a = 0; a < D; ++a) x[a] = detail::parse_number(fields[a], line_no, "x");
    const double w = detail::parse_number(fields[D], line_no, "weight");
    auto prov = parse_provenance(detail::trim(fields[D + 1]));
    if (!prov) throw ConfigError("rule file line " + std::to_string(line_no) + ": unknown provenance");
    rule.nodes.push_back(x);
    rule.weights.push_back(w);
    rule.provenance.push_back(*prov);
  }
  return rule;
}

template <int D>
void save_rule_csv(const std::string& path, const CubatureRule<D>& rule) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write rule file '" + path + "'");
  write_rule_csv<D>(out, rule);
}

template <int D>
CubatureRule<D> load_rule_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open rule file '" + path + "'");
  return read_rule_csv<D>(in);
}

}  // namespace starquad

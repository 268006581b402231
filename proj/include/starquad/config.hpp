#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "starquad/domain.hpp"

namespace starquad {

/// Dimension-erased description of a domain, as read from a config file.
struct DomainSpec {
  int dim = 2;
  std::vector<double> center;
  double ball_radius = 0.0;
  Shape shape;
  std::string name;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline double parse_number(std::string_view text, int line, std::string_view key) {
  text = trim(text);
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty() || !std::isfinite(value))
    throw ConfigError("line " + std::to_string(line) + ": key '" + std::string(key) + "' expects a number, got '" +
                      std::string(text) + "'");
  return value;
}

inline std::vector<double> parse_list(std::string_view text, int line, std::string_view key) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    if (comma == std::string_view::npos) comma = text.size();
    values.push_back(parse_number(text.substr(start, comma - start), line, key));
    start = comma + 1;
  }
  return values;
}

}  // namespace detail

/// Parses the line-oriented `key = value` domain format (`#` starts a comment).
inline DomainSpec parse_domain_config(std::string_view text) {
  struct Entry {
    std::string value;
    int line;
  };
  std::map<std::string, Entry, std::less<>> entries;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string value(detail::trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (value.empty()) throw ConfigError("line " + std::to_string(line_no) + ": key '" + key + "' has no value");
    if (entries.contains(key)) throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    entries.emplace(key, Entry{value, line_no});
  }

  auto require = [&](const std::string& key) -> const Entry& {
    auto it = entries.find(key);
    if (it == entries.end()) throw ConfigError("missing required key '" + key + "'");
    return it->second;
  };
  auto number = [&](const std::string& key) {
    const Entry& e = require(key);
    return detail::parse_number(e.value, e.line, key);
  };

  DomainSpec spec;
  {
    const Entry& e = require("dim");
    const double d = detail::parse_number(e.value, e.line, "dim");
    if (d != std::floor(d) || d < 2 || d > 8)
      throw ConfigError("line " + std::to_string(e.line) + ": dim must be an integer in [2, 8]");
    spec.dim = static_cast<int>(d);
  }
  {
    const Entry& e = require("center");
    spec.center = detail::parse_list(e.value, e.line, "center");
    if (static_cast<int>(spec.center.size()) != spec.dim)
      throw ConfigError("line " + std::to_string(e.line) + ": center needs " + std::to_string(spec.dim) +
                        " coordinates");
  }
  spec.ball_radius = number("ball_radius");

  const Entry& shape_entry = require("shape");
  const std::string& shape = shape_entry.value;
  std::vector<std::string> allowed = {"dim", "center", "ball_radius", "shape", "name"};
  if (shape == "cube") {
    spec.shape = CubeShape{number("side")};
    allowed.push_back("side");
  } else if (shape == "ball") {
    spec.shape = BallShape{number("radius")};
    allowed.push_back("radius");
  } else if (shape == "cross") {
    spec.shape = CrossShape{number("arm_halfwidth"), number("arm_halflength")};
    allowed.insert(allowed.end(), {"arm_halfwidth", "arm_halflength"});
  } else if (shape == "star-polygon") {
    const Entry& e = require("spikes");
    const double spikes = detail::parse_number(e.value, e.line, "spikes");
    if (spikes != std::floor(spikes) || spikes < 2)
      throw ConfigError("line " + std::to_string(e.line) + ": spikes must be an integer >= 2");
    spec.shape = StarPolygonShape{static_cast<int>(spikes), number("r_in"), number("r_out")};
    allowed.insert(allowed.end(), {"spikes", "r_in", "r_out"});
  } else if (shape == "fourier-radial") {
    FourierShape f{number("radius"), {}};
    if (auto it = entries.find("fourier"); it != entries.end())
      f.coeffs = detail::parse_list(it->second.value, it->second.line, "fourier");
    spec.shape = f;
    allowed.insert(allowed.end(), {"radius", "fourier"});
  } else if (shape == "tabulated") {
    const Entry& e = require("rho_samples");
    spec.shape = TabulatedShape{detail::parse_list(e.value, e.line, "rho_samples")};
    allowed.push_back("rho_samples");
  } else {
    throw ConfigError("line " + std::to_string(shape_entry.line) + ": unknown shape '" + shape + "'");
  }
  for (const auto& [key, entry] : entries) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("line " + std::to_string(entry.line) + ": key '" + key + "' is not valid for shape '" +
                        shape + "'");
  }
  if (is_planar_only(spec.shape) && spec.dim != 2)
    throw ConfigError("line " + std::to_string(shape_entry.line) + ": shape '" + shape + "' requires dim = 2");
  if (auto it = entries.find("name"); it != entries.end()) spec.name = it->second.value;
  return spec;
}

inline DomainSpec load_domain_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open domain config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_domain_config(buffer.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

template <int D>
StarDomain<D> make_domain(const DomainSpec& spec) {
  if (spec.dim != D) throw ConfigError("domain dimension mismatch");
  Point<D> center;
  std::copy(spec.center.begin(), spec.center.end(), center.begin());
  return StarDomain<D>(center, spec.ball_radius, spec.shape, spec.name);
}

}  // namespace starquad

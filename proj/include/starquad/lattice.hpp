#pragma once

#include <cstdint>
#include <vector>

#include "starquad/domain.hpp"

namespace starquad {

/// Lattice generated by 2h e_1, ..., 2h e_D and translated by `anchor`; cell i is the
/// closed cube anchor + [2h i, 2h (i + 1)] per axis.
template <int D>
struct LatticeSpec {
  double h = 1.0;
  Point<D> anchor{};

  double side() const { return 2.0 * h; }
  double cell_volume() const { return std::pow(side(), D); }

  Box<D> cell(const Index<D>& i) const {
    Box<D> b;
    for (int a = 0; a < D; ++a) {
      b.lo[a] = anchor[a] + side() * static_cast<double>(i[a]);
      b.hi[a] = anchor[a] + side() * static_cast<double>(i[a] + 1);
    }
    return b;
  }

  Point<D> center(const Index<D>& i) const {
    Point<D> c;
    for (int a = 0; a < D; ++a) c[a] = anchor[a] + h * static_cast<double>(2 * i[a] + 1);
    return c;
  }

  /// Lexicographically smallest cell whose closure contains x.
  Index<D> owning_cell(const Point<D>& x) const {
    Index<D> i;
    for (int a = 0; a < D; ++a) {
      const double q = (x[a] - anchor[a]) / side();
      double f = std::floor(q);
      if (f == q) f -= 1.0;  // on a face: the lower neighbour also contains x
      i[a] = static_cast<std::int64_t>(f);
    }
    return i;
  }
};

/// Inclusive box of integer cell indices, linearised row-major with axis 0 slowest so
/// that linear order equals lexicographic order.
template <int D>
struct IndexRange {
  Index<D> lo{};
  Index<D> hi{};

  std::int64_t extent(int a) const { return hi[a] - lo[a] + 1; }

  std::size_t size() const {
    std::size_t n = 1;
    for (int a = 0; a < D; ++a) n *= static_cast<std::size_t>(std::max<std::int64_t>(0, extent(a)));
    return n;
  }

  bool contains(const Index<D>& i) const {
    for (int a = 0; a < D; ++a)
      if (i[a] < lo[a] || i[a] > hi[a]) return false;
    return true;
  }

  std::size_t linear(const Index<D>& i) const {
    std::size_t idx = 0;
    for (int a = 0; a < D; ++a) idx = idx * static_cast<std::size_t>(extent(a)) + static_cast<std::size_t>(i[a] - lo[a]);
    return idx;
  }

  Index<D> at(std::size_t linear_index) const {
    Index<D> i;
    for (int a = D - 1; a >= 0; --a) {
      const auto e = static_cast<std::size_t>(extent(a));
      i[a] = lo[a] + static_cast<std::int64_t>(linear_index % e);
      linear_index /= e;
    }
    return i;
  }
};

/// Cells of `lat` that cover `box`.
template <int D>
IndexRange<D> covering_range(const LatticeSpec<D>& lat, const Box<D>& box) {
  IndexRange<D> r;
  for (int a = 0; a < D; ++a) {
    r.lo[a] = static_cast<std::int64_t>(std::floor((box.lo[a] - lat.anchor[a]) / lat.side()));
    r.hi[a] = static_cast<std::int64_t>(std::ceil((box.hi[a] - lat.anchor[a]) / lat.side())) - 1;
    r.hi[a] = std::max(r.hi[a], r.lo[a]);
  }
  return r;
}

enum class CubeClass : std::uint8_t { Outside = 0, Meets = 1, Inside = 2 };

template <int D>
struct CubeClassification {
  LatticeSpec<D> lattice;
  IndexRange<D> range;
  std::vector<CubeClass> cls;

  CubeClass at(const Index<D>& i) const { return range.contains(i) ? cls[range.linear(i)] : CubeClass::Outside; }
  bool in_A(const Index<D>& i) const { return at(i) == CubeClass::Inside; }
  bool in_B(const Index<D>& i) const { return at(i) != CubeClass::Outside; }

  std::vector<Index<D>> collect(bool inside_only) const {
    std::vector<Index<D>> out;
    for (std::size_t k = 0; k < cls.size(); ++k)
      if (inside_only ? cls[k] == CubeClass::Inside : cls[k] != CubeClass::Outside) out.push_back(range.at(k));
    return out;
  }
  std::vector<Index<D>> A() const { return collect(true); }
  std::vector<Index<D>> B() const { return collect(false); }
};

/// Calls probe(x) on the 2^D corners of `cell`, then on the probe_resolution^D subcell
/// midpoints in lexicographic order; stops early when probe returns true.
template <int D, class Probe>
bool for_each_probe(const Box<D>& cell, int probe_resolution, Probe&& probe) {
  for (unsigned corner = 0; corner < (1u << D); ++corner) {
    Point<D> p;
    for (int a = 0; a < D; ++a) p[a] = ((corner >> (D - 1 - a)) & 1u) ? cell.hi[a] : cell.lo[a];
    if (probe(p)) return true;
  }
  std::int64_t total = 1;
  for (int a = 0; a < D; ++a) total *= probe_resolution;
  for (std::int64_t flat = 0; flat < total; ++flat) {
    std::int64_t f = flat;
    Point<D> p;
    for (int a = D - 1; a >= 0; --a) {
      const auto j = f % probe_resolution;
      f /= probe_resolution;
      p[a] = cell.lo[a] + (cell.hi[a] - cell.lo[a]) * (static_cast<double>(j) + 0.5) / probe_resolution;
    }
    if (probe(p)) return true;
  }
  return false;
}

/// A(h): cells whose probe grid lies in the closure of Q (and meets Q). B(h): cells with
/// at least one probe point in the open set Q. A is a subset of B.
template <int D>
CubeClass classify_cube(const StarDomain<D>& dom, const Box<D>& cell, int probe_resolution) {
  bool any_open = false;
  bool all_closed = true;
  for_each_probe<D>(cell, probe_resolution, [&](const Point<D>& p) {
    if (!any_open && dom.contains(p)) any_open = true;
    if (all_closed && !dom.closure_contains(p)) all_closed = false;
    return any_open && !all_closed;
  });
  if (!any_open) return CubeClass::Outside;
  return all_closed ? CubeClass::Inside : CubeClass::Meets;
}

template <int D>
CubeClassification<D> classify_cubes(const StarDomain<D>& dom, const LatticeSpec<D>& lat, const IndexRange<D>& range,
                                     int probe_resolution) {
  if (probe_resolution < 1) throw PreconditionError("classify_cubes: probe_resolution must be >= 1");
  CubeClassification<D> out{lat, range, std::vector<CubeClass>(range.size(), CubeClass::Outside)};
  parallel_for(out.cls.size(), [&](std::size_t k) { out.cls[k] = classify_cube<D>(dom, lat.cell(range.at(k)), probe_resolution); });
  return out;
}

template <int D>
CubeClassification<D> classify_cubes(const StarDomain<D>& dom, const LatticeSpec<D>& lat, int probe_resolution) {
  return classify_cubes<D>(dom, lat, covering_range<D>(lat, dom.bbox()), probe_resolution);
}

}  // namespace starquad

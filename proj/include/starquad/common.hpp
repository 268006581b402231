#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace starquad {

template <int D>
using Point = std::array<double, D>;

template <int D>
using Index = std::array<std::int64_t, D>;

// Bad input files, malformed configs, unsupported shape/dimension combinations.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical precondition does not hold (p <= d, n too small, resolution overflow, ...).
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input configuration is geometrically degenerate for the requested construction.
class DegenerateConfiguration : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

template <int D>
Point<D> add(const Point<D>& a, const Point<D>& b) {
  Point<D> r;
  for (int i = 0; i < D; ++i) r[i] = a[i] + b[i];
  return r;
}

template <int D>
Point<D> sub(const Point<D>& a, const Point<D>& b) {
  Point<D> r;
  for (int i = 0; i < D; ++i) r[i] = a[i] - b[i];
  return r;
}

template <int D>
Point<D> scale(const Point<D>& a, double s) {
  Point<D> r;
  for (int i = 0; i < D; ++i) r[i] = a[i] * s;
  return r;
}

/// (1 - t) a + t b
template <int D>
Point<D> lerp(const Point<D>& a, const Point<D>& b, double t) {
  Point<D> r;
  for (int i = 0; i < D; ++i) r[i] = (1.0 - t) * a[i] + t * b[i];
  return r;
}

template <int D>
double dot(const Point<D>& a, const Point<D>& b) {
  double s = 0.0;
  for (int i = 0; i < D; ++i) s += a[i] * b[i];
  return s;
}

template <int D>
double norm2(const Point<D>& a) {
  return std::sqrt(dot<D>(a, a));
}

template <int D>
double norm_inf(const Point<D>& a) {
  double m = 0.0;
  for (int i = 0; i < D; ++i) m = std::max(m, std::abs(a[i]));
  return m;
}

template <int D>
double norm1(const Point<D>& a) {
  double s = 0.0;
  for (int i = 0; i < D; ++i) s += std::abs(a[i]);
  return s;
}

template <int D>
double dist_inf(const Point<D>& a, const Point<D>& b) {
  double m = 0.0;
  for (int i = 0; i < D; ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <int D>
double dist2(const Point<D>& a, const Point<D>& b) {
  return norm2<D>(sub<D>(a, b));
}

template <int D>
Point<D> filled(double v) {
  Point<D> r;
  r.fill(v);
  return r;
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

/// Sum in a fixed pairwise tree; the result depends only on the order of `values`.
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

namespace detail {
inline std::atomic<int>& thread_override() {
  static std::atomic<int> value{-1};
  return value;
}
}  // namespace detail

/// Worker count: explicit override if set, else STARQUAD_THREADS (0 = auto), else auto.
inline unsigned thread_count() {
  int forced = detail::thread_override().load();
  long requested = 0;
  if (forced >= 0) {
    requested = forced;
  } else if (const char* env = std::getenv("STARQUAD_THREADS")) {
    requested = std::strtol(env, nullptr, 10);
  }
  if (requested <= 0) requested = static_cast<long>(std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::max(1L, requested));
}

/// Pins the worker count for the lifetime of the object (tests, CLI flags).
class ScopedThreadCount {
 public:
  explicit ScopedThreadCount(int threads) : previous_(detail::thread_override().exchange(threads)) {}
  ~ScopedThreadCount() { detail::thread_override().store(previous_); }
  ScopedThreadCount(const ScopedThreadCount&) = delete;
  ScopedThreadCount& operator=(const ScopedThreadCount&) = delete;

 private:
  int previous_;
};

/// Calls f(i) for i in [0, count). Work is split into contiguous blocks; callers write
/// results into per-index slots so the outcome does not depend on the schedule.
template <class F>
void parallel_for(std::size_t count, F&& f) {
  const std::size_t threads = std::min<std::size_t>(thread_count(), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    const std::size_t begin = count * w / threads;
    const std::size_t end = count * (w + 1) / threads;
    workers.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) f(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  workers.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace starquad

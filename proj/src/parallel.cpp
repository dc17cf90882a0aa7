#include "hsflow/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <limits>

namespace hsflow {

namespace {
std::atomic<int> g_workers{1};

double pairwise_sum_impl(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_impl(v, half) + pairwise_sum_impl(v + half, n - half);
}
}  // namespace

void set_workers(int n) { g_workers = std::max(1, n); }
int workers() { return g_workers.load(); }

double pairwise_sum(std::span<const double> values) {
  return pairwise_sum_impl(values.data(), values.size());
}

double max_of(std::span<const double> values) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) m = std::max(m, v);
  return m;
}

double min_of(std::span<const double> values) {
  double m = std::numeric_limits<double>::infinity();
  for (double v : values) m = std::min(m, v);
  return m;
}

}  // namespace hsflow

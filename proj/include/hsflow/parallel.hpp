#pragma once

#include <cstddef>
#include <span>

namespace hsflow {

// Worker count used by every data-parallel field kernel. Kernels only ever
// partition independent per-point work, so results do not depend on it.
void set_workers(int n);
int workers();

template <class F>
void parallel_for(std::size_t n, F&& body) {
  const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(static) num_threads(workers())
  for (long long i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
}

/// Sum in a fixed pairwise tree order, independent of the worker count.
double pairwise_sum(std::span<const double> values);

double max_of(std::span<const double> values);
double min_of(std::span<const double> values);

}  // namespace hsflow

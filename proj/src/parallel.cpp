#include "grpolab/parallel.hpp"

#include <algorithm>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace grpolab {

namespace {
int g_workers = 0;
}

int worker_count() {
#ifdef _OPENMP
  return g_workers > 0 ? g_workers : omp_get_max_threads();
#else
  return 1;
#endif
}

void set_worker_count(int n) { g_workers = std::max(0, n); }

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(worker_count())
#endif
  for (std::int64_t i = 0; i < n; ++i) body(i);
}

double det_sum(std::int64_t n, const std::function<double(std::int64_t)>& f) {
  if (n <= 0) return 0.0;
  const std::int64_t nblocks = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> partial(static_cast<std::size_t>(nblocks), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(worker_count())
#endif
  for (std::int64_t b = 0; b < nblocks; ++b) {
    const std::int64_t lo = b * kReduceBlock;
    const std::int64_t hi = std::min(n, lo + kReduceBlock);
    double acc = 0.0;
    for (std::int64_t i = lo; i < hi; ++i) acc += f(i);
    partial[static_cast<std::size_t>(b)] = acc;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

void det_sum_vec(std::int64_t n, std::size_t dim, double* out,
                 const std::function<void(std::int64_t, double*)>& body) {
  std::memset(out, 0, dim * sizeof(double));
  if (n <= 0) return;
  const std::int64_t nblocks = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> partial(static_cast<std::size_t>(nblocks) * dim, 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(worker_count())
#endif
  for (std::int64_t b = 0; b < nblocks; ++b) {
    double* acc = partial.data() + static_cast<std::size_t>(b) * dim;
    const std::int64_t lo = b * kReduceBlock;
    const std::int64_t hi = std::min(n, lo + kReduceBlock);
    for (std::int64_t i = lo; i < hi; ++i) body(i, acc);
  }
  for (std::int64_t b = 0; b < nblocks; ++b) {
    const double* acc = partial.data() + static_cast<std::size_t>(b) * dim;
    for (std::size_t k = 0; k < dim; ++k) out[k] += acc[k];
  }
}

}  // namespace grpolab

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace grpolab {

// OpenMP-backed kernels with thread-count-independent results.
//
// Reductions are computed over fixed-size index blocks: every block is
// accumulated serially and the block partials are combined in index order,
// so the result is bit-identical whether 1 or N threads run the blocks.

int worker_count();
void set_worker_count(int n);  // 0 restores the OpenMP default

inline constexpr std::int64_t kReduceBlock = 4096;

// parallel loop over [0, n); bodies must be independent
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& body);

// deterministic scalar reduction of f(i) over [0, n)
double det_sum(std::int64_t n, const std::function<double(std::int64_t)>& f);

// deterministic vector reduction: body(i, acc) adds term i into acc (length dim)
void det_sum_vec(std::int64_t n, std::size_t dim, double* out,
                 const std::function<void(std::int64_t, double*)>& body);

}  // namespace grpolab

#pragma once

#include <vector>

#include "grpolab/policy.hpp"

namespace grpolab::ref {

// Serial reference implementations, written as direct recursions over the
// generation tree (no path tables, no block reductions).  They exist to
// check the OpenMP kernels and to anchor the benchmark comparison.

double value_exact(const PolicyParams& p, const Environment& env, int prompt_id);

std::vector<double> exact_gradient(const PolicyParams& p, const Environment& env);

struct ScalarMoments {
  double value = 0.0;
  double e_score_sq = 0.0;
  double e_score_sq_z2 = 0.0;
};

ScalarMoments scalar_moments(const PolicyParams& p, const Environment& env, int prompt_id);

}  // namespace grpolab::ref

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "grpolab/grad.hpp"

namespace grpolab {

// Orthogonal split of the pairwise-averaged gradient estimator:
// h0 is the kernel expectation (the exact per-prompt gradient), the
// first-order part equals the oracle estimator minus h0, and the
// second-order part is the degenerate remainder.
struct HoeffdingParts {
  std::vector<double> h0;
  std::vector<double> first_order;
  std::vector<double> second_order;
  std::string to_json() const;
};

// symmetric kernel h((y_i,z_i),(y_j,z_j)) = [score(y_i)-score(y_j)] (z_i-z_j) / 2
std::vector<double> kernel_h(const PolicyParams& p, const Environment& env, int prompt_id,
                             const std::pair<TokenSeq, double>& yi,
                             const std::pair<TokenSeq, double>& yj);

// average of kernel_h over all unordered pairs of the group; requires G >= 2
std::vector<double> ustat_average(const PolicyParams& p, const Environment& env,
                                  const GroupSample& group);

HoeffdingParts hoeffding_decompose(const PolicyParams& p, const Environment& env,
                                   const GroupSample& group);

}  // namespace grpolab

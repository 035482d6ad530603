#pragma once

#include <cstdint>
#include <vector>

#include "grpolab/grad.hpp"

namespace grpolab {

// Exact per-prompt enumeration statistics of the score/reward pair under
// pi_theta.  Everything downstream (MSE laws, covariances, scaling-law
// constants) reduces to these moments.
struct PromptMoments {
  int prompt_idx = 0;
  double weight = 0.0;
  double value = 0.0;   // V(x)
  double var_z = 0.0;   // Var(Z | x)
  std::vector<double> grad;  // g(x; theta), full dimension
  double grad_sq_norm = 0.0;
  double e_score_sq = 0.0;      // E ||W||^2
  double e_score_sq_z = 0.0;    // E ||W||^2 Z
  double e_score_sq_z2 = 0.0;   // E ||W||^2 Z^2
  double e_score_sq_zc2 = 0.0;  // E ||W||^2 (Z - V)^2

  double tr_sigma_oracle() const { return e_score_sq_zc2 - grad_sq_norm; }
  double tr_var_vanilla() const { return e_score_sq_z2 - grad_sq_norm; }
  double tr_var_custom(double baseline) const;
  // trace Var of the degenerate Hoeffding kernel component
  double tr_var_zeta2() const { return 0.5 * (e_score_sq * var_z + grad_sq_norm); }
};

PromptMoments prompt_moments(const PolicyParams& p, const Environment& env, int prompt_idx);
std::vector<PromptMoments> all_prompt_moments(const PolicyParams& p, const Environment& env);

// sum_x weight(x) ||g(x) - g||^2 (the prompt-sampling variance of Eq. 8)
double prompt_variance_of_gradient(const std::vector<PromptMoments>& moments);

// exact conditional MSE of the group estimator at one prompt
double exact_mse_per_prompt(const PromptMoments& m, const BaselineKind& baseline, int G);

struct MinibatchMse {
  double total = 0.0;
  double prompt_variance_term = 0.0;  // (1/B) E ||g(X) - g||^2
  double conditional_term = 0.0;      // (1/B) E_X [per-prompt MSE]
};

// minibatch MSE assembled through the conditional-variance identity
MinibatchMse exact_mse_minibatch(const PolicyParams& p, const Environment& env,
                                 const BaselineKind& baseline, int B, int G);

// Independent brute-force oracle: enumerates every batch realization of one
// group (prompt draw plus G outputs) and averages the squared error.
// Rejects when (#outputs)^G * (#prompts)^B exceeds the cap.
double mse_exact_small(const PolicyParams& p, const Environment& env,
                       const BaselineKind& baseline, int B, int G,
                       std::int64_t cap = 10'000'000);

// exact KL(p || p_ref) by enumeration
double exact_kl(const PolicyParams& p, const PolicyParams& p_ref, const Environment& env);

}  // namespace grpolab

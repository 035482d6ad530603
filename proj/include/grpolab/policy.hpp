#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "grpolab/env.hpp"
#include "grpolab/rng.hpp"

namespace grpolab {

// Layout of the tabular autoregressive softmax policy for one environment
// shape.  Parameters are logits indexed by (prompt, prefix state, token);
// prefix states enumerate content prefixes of length 0..max_len-2 (the
// positions where a free token choice is made).
struct PolicyShape {
  int n_prompts = 0;
  int n_states = 0;  // per prompt
  int vocab = 0;
  int eos_id = 0;
  int max_len = 0;
  std::int64_t dim = 0;

  // free decisions per output, as (within-prompt state, token) pairs
  std::vector<std::vector<std::pair<int, int>>> paths;
  std::vector<std::int64_t> level_offset;  // state id offset per prefix length

  static std::shared_ptr<const PolicyShape> from_env(const Environment& env);

  std::int64_t param_index(int prompt_idx, int state, int token) const {
    return (static_cast<std::int64_t>(prompt_idx) * n_states + state) * vocab + token;
  }
  std::int64_t block_offset(int prompt_idx) const {
    return static_cast<std::int64_t>(prompt_idx) * n_states * vocab;
  }
  std::int64_t block_size() const { return static_cast<std::int64_t>(n_states) * vocab; }
  int child_state(int state, int level, int content_rank, int n_content) const {
    return static_cast<int>(level_offset[static_cast<std::size_t>(level) + 1] +
                            (state - level_offset[static_cast<std::size_t>(level)]) * n_content +
                            content_rank);
  }
};

// The theta of pi_theta.  Value-like: copies share the immutable shape.
struct PolicyParams {
  std::shared_ptr<const PolicyShape> shape;
  std::vector<double> logits;

  static PolicyParams zeros(std::shared_ptr<const PolicyShape> shape);
  static PolicyParams random_init(std::shared_ptr<const PolicyShape> shape, double scale,
                                  Rng& rng);
  std::int64_t dim() const { return shape->dim; }
};

// per-state softmax probabilities for one prompt block, row-major n_states x vocab
std::vector<double> softmax_table(const PolicyParams& p, int prompt_idx);

TokenSeq sample_output(const PolicyParams& p, const Environment& env, int prompt_id, Rng& rng);

double log_prob(const PolicyParams& p, const Environment& env, int prompt_id, const TokenSeq& y);

// dense score vector: per visited (state, token), indicator minus softmax
std::vector<double> score(const PolicyParams& p, const Environment& env, int prompt_id,
                          const TokenSeq& y);

// adds alpha * score(y) into acc (length dim), given the prompt's softmax table
void add_score(const PolicyShape& shape, const std::vector<double>& probs, int prompt_idx,
               int output_idx, double alpha, double* acc);

double value_exact(const PolicyParams& p, const Environment& env, int prompt_id);

// exact policy gradient of sum_x weight(x) * value(x), and its per-prompt slice
std::vector<double> exact_gradient(const PolicyParams& p, const Environment& env);
std::vector<double> exact_gradient_prompt(const PolicyParams& p, const Environment& env,
                                          int prompt_idx);

// central finite differences of exact_gradient; symmetrized
struct HessianOptions {
  double step = 1e-4;
  std::int64_t dim_cap = 200;
};
std::vector<std::vector<double>> exact_hessian(const PolicyParams& p, const Environment& env,
                                               const HessianOptions& opts = {});

// flat (prompt id, state id, token id, logit) records
void save_policy_csv(const PolicyParams& p, const Environment& env, const std::string& path);
PolicyParams load_policy_csv(std::shared_ptr<const PolicyShape> shape, const Environment& env,
                             const std::string& path);

}  // namespace grpolab

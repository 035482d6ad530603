#pragma once

#include "grpolab/env.hpp"
#include "grpolab/policy.hpp"

namespace grpolab::testing {

// 2-symbol alphabet with one eos; outputs {[eos], [1, eos]}
inline EnvSpec tiny_binary_spec() {
  EnvSpec spec;
  spec.alphabet_size = 2;
  spec.eos_id = 0;
  spec.max_len = 2;
  spec.prompts = {{0, 1.0}};
  spec.reward_rule = RewardRule::kMatchTarget;  // target [1, eos]
  spec.z_max = 1.0;
  return spec;
}

// 3 prompts, 3 symbols, horizon 3: 7 outputs per prompt, dim 27
inline EnvSpec small_random_spec(std::uint64_t reward_seed = 42) {
  EnvSpec spec;
  spec.alphabet_size = 3;
  spec.eos_id = 2;
  spec.max_len = 3;
  spec.prompts = {{0, 0.5}, {1, 0.3}, {2, 0.2}};
  spec.reward_rule = RewardRule::kBoundedRandom;
  spec.reward_seed = reward_seed;
  spec.z_max = 2.0;
  return spec;
}

inline PolicyParams random_policy(const Environment& env, double scale, std::uint64_t seed) {
  Rng rng(seed);
  return PolicyParams::random_init(PolicyShape::from_env(env), scale, rng);
}

}  // namespace grpolab::testing

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "grpolab/env.hpp"
#include "grpolab/policy.hpp"
#include "grpolab/stats.hpp"
#include "test_support.hpp"

using namespace grpolab;
using namespace grpolab::testing;

TEST_CASE("smallest binary env has the hand-enumerated reward table") {
  const Environment env = Environment::build(tiny_binary_spec());
  // outputs: [eos] and [1, eos]; target is the single-content-token sequence
  REQUIRE(env.output_count() == 2);
  CHECK(env.reward(0, TokenSeq{1, 0}) == 1.0);
  CHECK(env.reward(0, TokenSeq{0}) == 0.0);
}

TEST_CASE("prompt weights must sum to one") {
  EnvSpec spec = small_random_spec();
  spec.prompts = {{0, 0.3}, {1, 0.7}};
  CHECK_NOTHROW(Environment::build(spec));
  spec.prompts = {{0, 0.3}, {1, 0.6}};
  CHECK_THROWS_AS(Environment::build(spec), ValidationError);
}

TEST_CASE("enumeration cap rejects oversized horizons with the product count") {
  EnvSpec spec;
  spec.alphabet_size = 10;
  spec.eos_id = 0;
  spec.max_len = 8;
  spec.prompts = {{0, 1.0}};
  spec.reward_rule = RewardRule::kBoundedRandom;
  try {
    Environment::build(spec);
    FAIL("expected rejection");
  } catch (const RejectionError& e) {
    CHECK(std::string(e.what()).find("10^8") != std::string::npos);
  }
}

TEST_CASE("hand enumeration of the prefix tree, 2 symbols horizon 2") {
  EnvSpec spec = tiny_binary_spec();
  const Environment env = Environment::build(spec);
  const OutputSpace outputs = enumerate_outputs(env);
  REQUIRE(outputs.sequences.size() == 2);
  CHECK(outputs.sequences[0] == TokenSeq{0});
  CHECK(outputs.sequences[1] == TokenSeq{1, 0});
}

TEST_CASE("horizon one leaves only the eos sequence") {
  EnvSpec spec = tiny_binary_spec();
  spec.max_len = 1;
  const Environment env = Environment::build(spec);
  REQUIRE(env.output_count() == 1);
  CHECK(env.outputs().sequences[0] == TokenSeq{0});
}

TEST_CASE("enumeration order is stable and duplicate-free") {
  const Environment a = Environment::build(small_random_spec());
  const Environment b = Environment::build(small_random_spec());
  REQUIRE(a.output_count() == b.output_count());
  std::set<TokenSeq> seen;
  for (int o = 0; o < a.output_count(); ++o) {
    CHECK(a.outputs().sequences[o] == b.outputs().sequences[o]);
    CHECK(a.outputs().sequences[o].back() == a.alphabet().eos_id);
    seen.insert(a.outputs().sequences[o]);
  }
  CHECK(static_cast<int>(seen.size()) == a.output_count());
}

TEST_CASE("bounded-random rewards are frozen and bounded") {
  const Environment env = Environment::build(small_random_spec());
  const Environment env2 = Environment::build(small_random_spec());
  double max_r = 0.0;
  for (int x = 0; x < env.prompt_count(); ++x)
    for (int o = 0; o < env.output_count(); ++o) {
      CHECK(env.reward_by_index(x, o) == env2.reward_by_index(x, o));
      CHECK(env.reward_by_index(x, o) >= 0.0);
      max_r = std::max(max_r, env.reward_by_index(x, o));
    }
  CHECK(max_r <= env.z_max());
}

TEST_CASE("reward lookup is total and output_index round-trips") {
  const Environment env = Environment::build(small_random_spec());
  for (int o = 0; o < env.output_count(); ++o)
    CHECK(env.output_index(env.outputs().sequences[static_cast<std::size_t>(o)]) == o);
  CHECK_THROWS_AS(env.reward(99, TokenSeq{2}), RejectionError);
  CHECK_THROWS_AS(env.reward(0, TokenSeq{0, 0, 0, 0, 0, 2}), RejectionError);
}

TEST_CASE("sampled outputs never leave the enumerated space") {
  const Environment env = Environment::build(small_random_spec());
  const PolicyParams p = random_policy(env, 1.0, 9);
  Rng rng(17);
  std::set<TokenSeq> space(env.outputs().sequences.begin(), env.outputs().sequences.end());
  for (int i = 0; i < 10000; ++i) {
    const int prompt_id = env.prompts()[rng.uniform_below(3)].id;
    CHECK(space.count(sample_output(p, env, prompt_id, rng)) == 1);
  }
}

TEST_CASE("env spec json round trip") {
  const EnvSpec spec = small_random_spec();
  const EnvSpec back = env_spec_from_json_text(env_spec_to_json_text(spec));
  CHECK(back.alphabet_size == spec.alphabet_size);
  CHECK(back.eos_id == spec.eos_id);
  CHECK(back.max_len == spec.max_len);
  CHECK(back.prompts.size() == spec.prompts.size());
  CHECK(back.z_max == spec.z_max);
  const Environment a = Environment::build(spec);
  const Environment b = Environment::build(back);
  for (int x = 0; x < a.prompt_count(); ++x)
    for (int o = 0; o < a.output_count(); ++o)
      CHECK(a.reward_by_index(x, o) == b.reward_by_index(x, o));
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "grpolab/exact.hpp"
#include "grpolab/grad.hpp"
#include "grpolab/parallel.hpp"
#include "grpolab/stats.hpp"
#include "test_support.hpp"

using namespace grpolab;
using namespace grpolab::testing;

TEST_CASE("leave-one-out means by hand") {
  CHECK(leave_one_out_means({1, 0}) == std::vector<double>{0, 1});
  CHECK(leave_one_out_means({3, 3, 3}) == std::vector<double>{3, 3, 3});
  const auto m = leave_one_out_means({1, 1, 0, 0});
  CHECK(m[0] == doctest::Approx(1.0 / 3));
  CHECK(m[1] == doctest::Approx(1.0 / 3));
  CHECK(m[2] == doctest::Approx(2.0 / 3));
  CHECK(m[3] == doctest::Approx(2.0 / 3));
  CHECK_THROWS_AS(leave_one_out_means({1}), RejectionError);
}

TEST_CASE("collect_batch basics: sizes, determinism, prompt frequencies") {
  const Environment env = Environment::build(small_random_spec());
  const PolicyParams p = random_policy(env, 0.8, 4);
  Rng a(9), b(9);
  const GroupBatch one = collect_batch(p, env, 1, 1, a);
  CHECK(one.size() == 1);
  CHECK(one.groups[0].size() == 1);
  const GroupBatch x = collect_batch(p, env, 5, 3, b);
  Rng c(9);
  const GroupBatch y = collect_batch(p, env, 5, 3, c);
  for (int i = 0; i < 5; ++i) {
    CHECK(x.groups[i].prompt_id == y.groups[i].prompt_id);
    CHECK(x.groups[i].outputs == y.groups[i].outputs);
  }
  // multinomial frequencies within 4 sigma of the weights
  Rng r(31);
  std::vector<int> counts(3, 0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const GroupBatch batch = collect_batch(p, env, 1, 1, r);
    counts[static_cast<std::size_t>(env.prompt_index(batch.groups[0].prompt_id))]++;
  }
  for (int xid = 0; xid < 3; ++xid) {
    const double w = env.prompts()[static_cast<std::size_t>(xid)].weight;
    const double sd = std::sqrt(w * (1 - w) * n);
    CHECK(std::abs(counts[static_cast<std::size_t>(xid)] - w * n) <= 4 * sd);
  }
}

TEST_CASE("constant rewards vanish under the leave-one-out baseline") {
  EnvSpec spec = small_random_spec();
  spec.reward_rule = RewardRule::kMatchTarget;
  spec.max_len = 1;  // every output is [eos]: constant reward
  const Environment env = Environment::build(spec);
  const PolicyParams p = PolicyParams::zeros(PolicyShape::from_env(env));
  Rng rng(3);
  const GroupBatch batch = collect_batch(p, env, 2, 4, rng);
  const GradientEstimate est = estimate_gradient_meta(p, env, batch, BaselineKind::leave_one_out());
  CHECK(max_abs(est.vector) == 0.0);
}

TEST_CASE("vanilla on B=G=1 is score times reward") {
  const Environment env = Environment::build(small_random_spec());
  const PolicyParams p = random_policy(env, 1.0, 6);
  Rng rng(12);
  const GroupBatch batch = collect_batch(p, env, 1, 1, rng);
  const GradientEstimate est = estimate_gradient_meta(p, env, batch, BaselineKind::vanilla());
  std::vector<double> expected =
      score(p, env, batch.groups[0].prompt_id, batch.groups[0].outputs[0]);
  for (auto& v : expected) v *= batch.groups[0].rewards[0];
  CHECK(max_abs(vec_sub(est.vector, expected)) <= 1e-14);
}

TEST_CASE("Monte-Carlo mean of each estimator matches the exact gradient (4 sigma)") {
  const Environment env = Environment::build(small_random_spec());
  const PolicyParams p = random_policy(env, 0.7, 10);
  const std::vector<double> g_bar = exact_gradient(p, env);
  const std::size_t d = g_bar.size();
  std::map<int, double> custom;
  for (const auto& prompt : env.prompts()) custom[prompt.id] = 0.37;

  for (const BaselineKind& kind :
       {BaselineKind::vanilla(), BaselineKind::leave_one_out(), BaselineKind::oracle_value(),
        BaselineKind::custom_of_prompt(custom)}) {
    const int reps = 100000;
    std::vector<double> packed(2 * d, 0.0);
    det_sum_vec(reps, 2 * d, packed.data(), [&](std::int64_t r, double* acc) {
      Rng rng(555, static_cast<std::uint64_t>(r));
      const GroupBatch batch = collect_batch(p, env, 2, 4, rng);
      const GradientEstimate est = estimate_gradient_meta(p, env, batch, kind);
      for (std::size_t i = 0; i < d; ++i) {
        acc[i] += est.vector[i];
        acc[d + i] += est.vector[i] * est.vector[i];
      }
    });
    for (std::size_t i = 0; i < d; ++i) {
      const double mean = packed[i] / reps;
      const double var = packed[d + i] / reps - mean * mean;
      const double sd = std::sqrt(std::max(var, 1e-30) / reps);
      INFO(kind.name() << " component " << i);
      CHECK(std::abs(mean - g_bar[i]) <= 4.0 * sd + 1e-12);
    }
  }
}

TEST_CASE("baseline invariance of the exact expectation") {
  // replacing Z by Z - c(X) leaves the enumerated expectation unchanged
  const Environment env = Environment::build(small_random_spec());
  const PolicyParams p = random_policy(env, 1.1, 23);
  std::map<int, double> custom;
  for (const auto& prompt : env.prompts()) custom[prompt.id] = 0.9 + prompt.id * 0.3;
  // E[ghat_custom] = sum_x w(x) sum_y pi W (z - c(x)) = g since E W = 0
  std::vector<double> expectation(static_cast<std::size_t>(p.dim()), 0.0);
  for (const auto& prompt : env.prompts()) {
    for (const TokenSeq& y : env.outputs().sequences) {
      const double pr = std::exp(log_prob(p, env, prompt.id, y));
      const double zc = env.reward(prompt.id, y) - custom[prompt.id];
      axpy(prompt.weight * pr * zc, score(p, env, prompt.id, y), expectation);
    }
  }
  CHECK(max_abs(vec_sub(expectation, exact_gradient(p, env))) <= 1e-10);
}

TEST_CASE("normalized advantages match the hand-evaluated displays") {
  const auto a = advantage_normalized({1, 1, 0, 0});
  CHECK(a[0] == doctest::Approx(1.15470).epsilon(1e-4));
  CHECK(a[2] == doctest::Approx(-1.15470).epsilon(1e-4));
  const auto b = advantage_normalized({1, 0});
  CHECK(b[0] == doctest::Approx(1.41421).epsilon(1e-4));
  CHECK(b[1] == doctest::Approx(-1.41421).epsilon(1e-4));
  const auto zeros = advantage_normalized({0.7, 0.7, 0.7});
  CHECK(max_abs(zeros) == 0.0);
  CHECK_THROWS_AS(advantage_normalized({1.0}), RejectionError);
}

TEST_CASE("practical estimator reduces to normalized-advantage meta form on policy") {
  const Environment env = Environment::build(small_random_spec());
  const PolicyParams p = random_policy(env, 0.9, 40);
  Rng rng(41);
  const GroupBatch batch = collect_batch(p, env, 3, 4, rng);
  PracticalOptions opts;
  opts.kappa = 0.0;
  const GradientEstimate practical = estimate_gradient_practical(p, p, p, env, batch, opts);

  std::vector<double> expected(static_cast<std::size_t>(p.dim()), 0.0);
  for (const GroupSample& grp : batch.groups) {
    const std::vector<double> adv = advantage_normalized(grp.rewards);
    for (int g = 0; g < grp.size(); ++g)
      axpy(adv[static_cast<std::size_t>(g)] / (3.0 * 4.0),
           score(p, env, grp.prompt_id, grp.outputs[static_cast<std::size_t>(g)]), expected);
  }
  CHECK(max_abs(vec_sub(practical.vector, expected)) <= 1e-12);
}

TEST_CASE("KL gradient term vanishes when the reference equals the policy") {
  const Environment env = Environment::build(small_random_spec());
  const PolicyParams p = random_policy(env, 0.9, 44);
  Rng rng(45);
  const GroupBatch batch = collect_batch(p, env, 2, 4, rng);
  PracticalOptions opts;
  opts.kappa = 100.0;
  const GradientEstimate with_kl = estimate_gradient_practical(p, p, p, env, batch, opts);
  opts.kappa = 0.0;
  const GradientEstimate without = estimate_gradient_practical(p, p, p, env, batch, opts);
  CHECK(max_abs(vec_sub(with_kl.vector, without.vector)) <= 1e-12);
}

TEST_CASE("practical estimator matches a hand expansion with off-policy ratios") {
  const Environment env = Environment::build(tiny_binary_spec());
  auto shape = PolicyShape::from_env(env);
  PolicyParams p_old = PolicyParams::zeros(shape);
  PolicyParams p_cur = PolicyParams::zeros(shape);
  p_cur.logits = {0.3, -0.2};
  PolicyParams p_ref = PolicyParams::zeros(shape);
  p_ref.logits = {-0.1, 0.4};
  GroupBatch batch;
  batch.groups.push_back(GroupSample{0, {TokenSeq{1, 0}, TokenSeq{0}}, {1.0, 0.0}});
  PracticalOptions opts;
  opts.kappa = 0.7;

  const GradientEstimate est = estimate_gradient_practical(p_cur, p_old, p_ref, env, batch, opts);

  // hand expansion of the two-output display
  auto soft = [](const std::vector<double>& l, int t) {
    const double m = std::max(l[0], l[1]);
    const double z = std::exp(l[0] - m) + std::exp(l[1] - m);
    return std::exp(l[static_cast<std::size_t>(t)] - m) / z;
  };
  const std::vector<double> adv = advantage_normalized({1.0, 0.0});
  std::vector<double> expected(2, 0.0);
  for (int g = 0; g < 2; ++g) {
    const int tok = g == 0 ? 1 : 0;
    const double pc = soft(p_cur.logits, tok);
    const double po = soft(p_old.logits, tok);
    const double pr = soft(p_ref.logits, tok);
    const double coeff = ((pc / po) * adv[static_cast<std::size_t>(g)] + 0.7 * (pr / pc - 1.0)) / 2.0;
    expected[0] += coeff * ((tok == 0 ? 1.0 : 0.0) - soft(p_cur.logits, 0));
    expected[1] += coeff * ((tok == 1 ? 1.0 : 0.0) - soft(p_cur.logits, 1));
  }
  CHECK(max_abs(vec_sub(est.vector, expected)) <= 1e-12);
}

TEST_CASE("coverage floor violations name the state") {
  const Environment env = Environment::build(tiny_binary_spec());
  auto shape = PolicyShape::from_env(env);
  PolicyParams p_old = PolicyParams::zeros(shape);
  PolicyParams p_cur = PolicyParams::zeros(shape);
  p_cur.logits = {30.0, 0.0};  // content token prob ~ 1e-13 under cur
  GroupBatch batch;
  batch.groups.push_back(GroupSample{0, {TokenSeq{1, 0}, TokenSeq{0}}, {1.0, 0.0}});
  PracticalOptions opts;
  opts.coverage_floor = 1e-6;
  try {
    estimate_gradient_practical(p_cur, p_old, p_old, env, batch, opts);
    FAIL("expected coverage rejection");
  } catch (const RejectionError& e) {
    CHECK(std::string(e.what()).find("state") != std::string::npos);
  }
}

TEST_CASE("K3 estimate: zero at equality, nonnegative, unbiased for the true KL") {
  const Environment env = Environment::build(small_random_spec());
  const PolicyParams p = random_policy(env, 0.8, 50);
  const PolicyParams q = random_policy(env, 0.8, 51);
  Rng rng(52);
  const GroupBatch batch = collect_batch(p, env, 4, 8, rng);
  CHECK(k3_kl_estimate(p, p, env, batch) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(k3_kl_estimate(p, q, env, batch) >= 0.0);

  const double exact = exact_kl(p, q, env);
  const int reps = 100000;
  std::vector<double> vals(reps);
  parallel_for(reps, [&](std::int64_t r) {
    Rng rr(600, static_cast<std::uint64_t>(r));
    const GroupBatch b = collect_batch(p, env, 1, 1, rr);
    vals[static_cast<std::size_t>(r)] = k3_kl_estimate(p, q, env, b);
  });
  const MeanCi ci = mean_ci(vals);
  const double sd = ci.ci_halfwidth / 1.96;
  CHECK(std::abs(ci.mean - exact) <= 4.0 * sd);
}

TEST_CASE("gradient estimate serializes to the documented json") {
  GradientEstimate est;
  est.estimator = "vanilla";
  est.B = 2;
  est.G = 3;
  est.seed = 7;
  est.vector = {0.5, -0.25};
  const std::string j = est.to_json();
  CHECK(j.find("\"estimator\":\"vanilla\"") != std::string::npos);
  CHECK(j.find("\"B\":2") != std::string::npos);
  CHECK(j.find("\"vector\":[0.5,-0.25]") != std::string::npos);
}

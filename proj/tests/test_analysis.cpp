#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "grpolab/analysis.hpp"
#include "grpolab/stats.hpp"
#include "test_support.hpp"

using namespace grpolab;
using namespace grpolab::testing;

TEST_CASE("monte-carlo MSE report covers the exact value and shrinks like 1/sqrt(reps)") {
  const Environment env = Environment::build(small_random_spec());
  const PolicyParams p = random_policy(env, 0.8, 3);
  const MseReport r1 = mse_monte_carlo(p, env, BaselineKind::vanilla(), 1, 2, 4000, 5);
  REQUIRE(r1.exact_mse.has_value());
  CHECK(std::abs(r1.mse_mean - *r1.exact_mse) <= 3.0 * r1.ci_halfwidth);
  const MseReport r2 = mse_monte_carlo(p, env, BaselineKind::vanilla(), 1, 2, 16000, 5);
  CHECK(r2.ci_halfwidth <= 0.65 * r1.ci_halfwidth);  // factor-2 CLT shrink, with slack
  CHECK_THROWS_AS(mse_monte_carlo(p, env, BaselineKind::vanilla(), 1, 2, 50, 5), RejectionError);
}

TEST_CASE("deterministic policy and rewards give zero MSE") {
  const Environment env = Environment::build(tiny_binary_spec());
  PolicyParams p = PolicyParams::zeros(PolicyShape::from_env(env));
  p.logits[1] = 60.0;  // deterministic on the rewarded output
  const MseReport r = mse_monte_carlo(p, env, BaselineKind::vanilla(), 1, 2, 500, 6);
  CHECK(r.mse_mean <= 1e-15);
}

TEST_CASE("oracle convergence curve: positive difference, slope near -2, flat oracle*G") {
  const Environment env = Environment::build(small_random_spec());
  const PolicyParams p = random_policy(env, 1.0, 8);
  const OracleCurve curve = oracle_convergence_curve(p, env, {2, 4, 8, 16, 32, 64});
  for (const auto& row : curve.rows) CHECK(row.difference > 0.0);
  CHECK(curve.difference_slope >= -2.6);
  CHECK(curve.difference_slope <= -1.4);
  CHECK(curve.oracle_times_g_spread <= 1e-12);  // exactly trace/G in exact mode
}

TEST_CASE("scaling constants: direct substitution and the single-prompt flag") {
  const Environment env = Environment::build(small_random_spec());
  const PolicyParams p = random_policy(env, 0.9, 9);
  const ScalingEstimate est = estimate_constants({p}, env, 4, 64);
  CHECK(est.c1 > 0.0);
  CHECK(est.c2 > 0.0);
  CHECK(est.c3 > 0.0);
  CHECK(est.g_star == doctest::Approx(std::sqrt(est.c3 / est.c1)));

  EnvSpec single = small_random_spec();
  single.prompts = {{0, 1.0}};
  const Environment env1 = Environment::build(single);
  const PolicyParams p1 = random_policy(env1, 0.9, 9);
  const ScalingEstimate est1 = estimate_constants({p1}, env1, 4, 64);
  CHECK(est1.g_star_infinite);
}

TEST_CASE("recovered c3 matches the decomposition-based coefficient within 5 percent") {
  const Environment env = Environment::build(small_random_spec());
  const PolicyParams p = random_policy(env, 0.9, 10);
  const ScalingEstimate est = estimate_constants({p}, env, 16, 32);
  // 2 E||zeta2||^2 G/(G-1) at the fit scale, from the exact moments
  const std::vector<PromptMoments> moments = all_prompt_moments(p, env);
  double coeff = 0.0;
  for (const auto& m : moments) coeff += m.weight * 2.0 * m.tr_var_zeta2();
  // the interpolated coefficient absorbs G/(G-1) curvature near the fit pair
  CHECK(est.c3 == doctest::Approx(coeff * 16.0 / 15.0).epsilon(0.05));
}

TEST_CASE("group sweep rejects non-dividing group sizes and is deterministic") {
  const Environment env = Environment::build(small_random_spec());
  const PolicyParams init = random_policy(env, 0.4, 12);
  TrainConfig tmpl;
  tmpl.n = 5;
  tmpl.schedule = {LrSchedule::Kind::kConstant, 0.2};
  CHECK_THROWS_AS(group_size_sweep(env, init, 12, {5}, tmpl, 4, 1), RejectionError);
  const GroupSweepResult a = group_size_sweep(env, init, 8, {2, 4}, tmpl, 6, 99);
  const GroupSweepResult b = group_size_sweep(env, init, 8, {2, 4}, tmpl, 6, 99);
  for (std::size_t i = 0; i < a.cells.size(); ++i)
    CHECK(a.cells[i].mean_final_j == b.cells[i].mean_final_j);
}

TEST_CASE("practical ground truth reduces to the arcsin-direction gradient on policy") {
  // at theta_cur = theta_old and kappa = 0: g_dagger(x) = g(x) / std_x
  const Environment env = Environment::build(small_random_spec());
  const PolicyParams p = random_policy(env, 0.6, 13);
  const std::vector<double> gd = practical_ground_truth(p, p, env, 0.0);
  std::vector<double> expected(static_cast<std::size_t>(p.dim()), 0.0);
  for (int x = 0; x < env.prompt_count(); ++x) {
    const PromptMoments m = prompt_moments(p, env, x);
    axpy(m.weight / std::sqrt(m.var_z), m.grad, expected);
  }
  CHECK(max_abs(vec_sub(gd, expected)) <= 1e-10);
}

TEST_CASE("bias curve: zero on policy within noise, decays with displacement") {
  const Environment env = Environment::build(small_random_spec());
  const PolicyParams p = random_policy(env, 0.6, 14);
  std::vector<double> direction(p.logits.size());
  Rng rng(15);
  for (auto& v : direction) v = rng.normal();
  const double dn = norm(direction);
  for (auto& v : direction) v /= dn;
  // the on-policy bias floor scales like 1/G: G = 64 leaves the displacement
  // term dominant over the fitted decade
  const BiasCurve curve =
      practical_bias_curve(env, p, direction, {0.0, 0.25, 0.5, 1.0, 2.0}, 0.0, 4, 64, 8000, 16);
  CHECK(curve.rows[0].bias_norm <= 3.0 * curve.rows[0].mc_halfwidth + 0.01);
  CHECK(curve.slope >= 0.8);
  // kappa adds its own bias term
  const BiasCurve with_kl =
      practical_bias_curve(env, p, direction, {1.0}, 1.0, 4, 64, 8000, 16);
  CHECK(with_kl.rows[0].bias_norm >= curve.rows[3].bias_norm - curve.rows[3].mc_halfwidth);
}

TEST_CASE("arcsin check on a binary two-prompt env") {
  EnvSpec spec;
  spec.alphabet_size = 3;
  spec.eos_id = 2;
  spec.max_len = 2;  // outputs: [eos], [0,eos], [1,eos]
  spec.prompts = {{0, 0.5}, {1, 0.5}};
  spec.reward_rule = RewardRule::kMatchTarget;
  spec.z_max = 1.0;
  const Environment env = Environment::build(spec);
  const PolicyParams p = PolicyParams::zeros(PolicyShape::from_env(env));  // V = 1/3 per prompt
  const ArcsinReport report = arcsin_gradient_check(p, env, 64);
  CHECK(report.max_rel_err <= 1e-2);
  for (double v : report.prompt_values) CHECK(v == doctest::Approx(1.0 / 3));

  // V = 1/2 contributes 2 asin(sqrt(.5)) = pi/2 to the objective
  CHECK(2.0 * std::asin(std::sqrt(0.5)) == doctest::Approx(3.14159265 / 2).epsilon(1e-8));
}

TEST_CASE("arcsin check rejects degenerate and non-binary rewards") {
  EnvSpec spec = small_random_spec();  // bounded-random: not binary
  const Environment env = Environment::build(spec);
  const PolicyParams p = random_policy(env, 0.4, 17);
  CHECK_THROWS_AS(arcsin_gradient_check(p, env, 16), RejectionError);

  EnvSpec uniform;
  uniform.alphabet_size = 2;
  uniform.eos_id = 0;
  uniform.max_len = 1;  // single output: V = 1 (degenerate)
  uniform.prompts = {{0, 1.0}};
  uniform.reward_rule = RewardRule::kMatchTarget;
  uniform.z_max = 1.0;
  const Environment env2 = Environment::build(uniform);
  const PolicyParams p2 = PolicyParams::zeros(PolicyShape::from_env(env2));
  CHECK_THROWS_AS(arcsin_gradient_check(p2, env2, 16), RejectionError);
}

TEST_CASE("gradient covariance: exact matches monte carlo entrywise at 4 sigma") {
  const Environment env = Environment::build(small_random_spec());
  const PolicyParams p = random_policy(env, 0.7, 18);
  const Mat exact = gradient_covariance(p, env, BaselineKind::leave_one_out(), 2, 4);
  const int reps = 200000;
  const Mat mc = gradient_covariance(p, env, BaselineKind::leave_one_out(), 2, 4,
                                     CovarianceMode::kMonteCarlo, reps, 19);
  // covariance-of-covariance scale ~ entry magnitudes / sqrt(reps)
  const double scale = exact.cwiseAbs().maxCoeff();
  CHECK((exact - mc).cwiseAbs().maxCoeff() <= 6.0 * scale / std::sqrt(static_cast<double>(reps)) * 10.0);
}

TEST_CASE("GRPO-minus-oracle covariance gap shrinks at the second order in G") {
  const Environment env = Environment::build(small_random_spec());
  const PolicyParams p = random_policy(env, 0.7, 20);
  std::vector<double> gs, gaps;
  for (int g : {4, 8, 16, 32}) {
    const Mat loo = gradient_covariance(p, env, BaselineKind::leave_one_out(), 1, g);
    const Mat oracle = gradient_covariance(p, env, BaselineKind::oracle_value(), 1, g);
    gs.push_back(g);
    gaps.push_back((loo - oracle).norm());
  }
  const double slope = fit_loglog(gs, gaps).slope;
  CHECK(slope >= -2.5);
  CHECK(slope <= -1.5);
}

TEST_CASE("chi2 mixture sampling moments") {
  Rng rng(21);
  const auto single = chi2_mixture_sample({0.7}, 100000, rng);
  const MeanCi m1 = mean_ci(single);
  CHECK(std::abs(m1.mean - 0.7) <= 4.0 * m1.ci_halfwidth / 1.96);
  const auto zero = chi2_mixture_sample({0.0, 0.0}, 100, rng);
  CHECK(max_abs(zero) == 0.0);
  const auto mix = chi2_mixture_sample({0.5, 0.25, 0.1}, 100000, rng);
  const MeanCi m2 = mean_ci(mix);
  CHECK(std::abs(m2.mean - 0.85) <= 4.0 * m2.ci_halfwidth / 1.96);
}

TEST_CASE("ks harness calibration: a distribution against itself") {
  Rng rng(22);
  const auto a = chi2_mixture_sample({0.6, 0.3}, 10000, rng);
  const auto b = chi2_mixture_sample({0.6, 0.3}, 10000, rng);
  CHECK(ks_two_sample(a, b) <= 0.05);
}

TEST_CASE("asymptotics pipeline on the rank-1 flat example") {
  SyntheticQuadratic quad;
  quad.m = Mat::Zero(2, 2);
  quad.m(0, 0) = 2.0;
  quad.theta_star = Vec::Zero(2);
  quad.gamma = 0.5 * Mat::Identity(2, 2);
  AsymptoticsConfig config;
  config.beta = 0.8;
  config.n = 10000;
  config.runs = 1200;
  config.mixture_samples = 60000;
  const AsymptoticsReport report = asymptotics_pipeline(quad, config, 23);
  REQUIRE(report.rank == 1);
  CHECK(report.lambdas[0] == doctest::Approx(2.0));
  // scalar check: w = lambda/2 * beta^2 gamma / (2 beta lambda - 1)
  const double expect_w = 0.5 * 2.0 * (0.8 * 0.8 * 0.5) / (2 * 0.8 * 2.0 - 1.0);
  CHECK(report.weights[0] == doctest::Approx(expect_w).epsilon(1e-9));
  CHECK(report.ks_stat <= 0.05);
}

TEST_CASE("pipeline weights halve with the noise and vanish without it") {
  SyntheticQuadratic quad;
  quad.m = Mat::Zero(2, 2);
  quad.m(0, 0) = 2.0;
  quad.m(1, 1) = 1.0;
  quad.theta_star = Vec::Zero(2);
  quad.gamma = Mat::Identity(2, 2);
  AsymptoticsConfig config;
  config.beta = 0.9;
  config.n = 2000;
  config.runs = 100;
  config.mixture_samples = 1000;
  const AsymptoticsReport full = asymptotics_pipeline(quad, config, 24);
  quad.gamma = 0.5 * Mat::Identity(2, 2);
  const AsymptoticsReport half = asymptotics_pipeline(quad, config, 24);
  REQUIRE(full.weights.size() == half.weights.size());
  for (std::size_t k = 0; k < full.weights.size(); ++k)
    CHECK(half.weights[k] == doctest::Approx(0.5 * full.weights[k]).epsilon(0.02));

  quad.gamma = Mat::Zero(2, 2);
  const AsymptoticsReport none = asymptotics_pipeline(quad, config, 25);
  for (double w : none.weights) CHECK(w == 0.0);
  for (double g : none.scaled_gaps) CHECK(g <= 1e-4);
}

TEST_CASE("pipeline rejects unstable beta naming the bound") {
  SyntheticQuadratic quad;
  quad.m = Mat::Zero(2, 2);
  quad.m(0, 0) = 2.0;
  quad.m(1, 1) = 0.5;  // min positive eigenvalue 0.5: needs beta > 1
  quad.theta_star = Vec::Zero(2);
  quad.gamma = Mat::Identity(2, 2);
  AsymptoticsConfig config;
  config.beta = 0.9;
  config.n = 100;
  config.runs = 10;
  config.mixture_samples = 100;
  CHECK_THROWS_AS(asymptotics_pipeline(quad, config, 26), RejectionError);
}

TEST_CASE("conditional uncorrelation diagnostic runs per prompt") {
  const Environment env = Environment::build(small_random_spec());
  const PolicyParams p = random_policy(env, 0.8, 27);
  const auto corrs = conditional_uncorrelation_diagnostic(p, env);
  REQUIRE(corrs.size() == 3);
  for (double c : corrs) {
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
  }
}

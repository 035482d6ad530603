// Timing comparison between the OpenMP kernels and the serial reference
// walkers on a mid-size enumeration workload.

#include <chrono>
#include <cstdio>

#include "grpolab/analysis.hpp"
#include "grpolab/parallel.hpp"
#include "grpolab/reference.hpp"

using namespace grpolab;

namespace {

double time_ms(const std::function<void()>& fn, int iters) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < iters; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / iters;
}

}  // namespace

int main() {
  EnvSpec spec;
  spec.alphabet_size = 4;
  spec.eos_id = 0;
  spec.max_len = 7;  // 3^6 = 729 leaf prefixes, 1093 outputs
  spec.prompts = {{0, 0.25}, {1, 0.25}, {2, 0.25}, {3, 0.25}};
  spec.reward_rule = RewardRule::kBoundedRandom;
  spec.reward_seed = 7;
  const Environment env = Environment::build(spec);
  auto shape = PolicyShape::from_env(env);
  Rng rng(1);
  const PolicyParams p = PolicyParams::random_init(shape, 0.4, rng);

  std::printf("env: %d outputs, %d prompts, dim %lld\n", env.output_count(), env.prompt_count(),
              static_cast<long long>(shape->dim));

  const double t_ref = time_ms([&] { ref::exact_gradient(p, env); }, 3);
  const double t_par = time_ms([&] { exact_gradient(p, env); }, 3);
  std::printf("exact_gradient      serial-ref %8.2f ms   kernels %8.2f ms   speedup %.2fx\n",
              t_ref, t_par, t_ref / t_par);

  const double t_ref_m = time_ms([&] { ref::scalar_moments(p, env, 0); }, 3);
  const double t_par_m = time_ms([&] { prompt_moments(p, env, 0); }, 3);
  std::printf("prompt moments      serial-ref %8.2f ms   kernels %8.2f ms   speedup %.2fx\n",
              t_ref_m, t_par_m, t_ref_m / t_par_m);

  const double t_mc = time_ms(
      [&] { mse_monte_carlo(p, env, BaselineKind::leave_one_out(), 2, 8, 2000, 11, false); }, 2);
  set_worker_count(1);
  const double t_mc1 = time_ms(
      [&] { mse_monte_carlo(p, env, BaselineKind::leave_one_out(), 2, 8, 2000, 11, false); }, 2);
  set_worker_count(0);
  std::printf("mse_monte_carlo     1 worker   %8.2f ms   pool    %8.2f ms   speedup %.2fx\n",
              t_mc1, t_mc, t_mc1 / t_mc);
  return 0;
}

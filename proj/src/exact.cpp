#include "grpolab/exact.hpp"

#include <cmath>
#include <sstream>

#include "grpolab/parallel.hpp"
#include "grpolab/stats.hpp"

namespace grpolab {

double PromptMoments::tr_var_custom(double baseline) const {
  const double e_sq = e_score_sq_z2 - 2.0 * baseline * e_score_sq_z + baseline * baseline * e_score_sq;
  return e_sq - grad_sq_norm;
}

PromptMoments prompt_moments(const PolicyParams& p, const Environment& env, int prompt_idx) {
  const PolicyShape& shape = *p.shape;
  const std::vector<double> probs = softmax_table(p, prompt_idx);
  const std::int64_t n_out = env.output_count();

  PromptMoments m;
  m.prompt_idx = prompt_idx;
  m.weight = env.prompts()[static_cast<std::size_t>(prompt_idx)].weight;

  // per-output probability and squared score norm
  std::vector<double> pr(static_cast<std::size_t>(n_out));
  std::vector<double> w_sq(static_cast<std::size_t>(n_out));
  parallel_for(n_out, [&](std::int64_t o) {
    const auto& path = shape.paths[static_cast<std::size_t>(o)];
    double prob = 1.0;
    double ssq = 0.0;
    for (const auto& [state, tok] : path) {
      const double* prow = probs.data() + static_cast<std::int64_t>(state) * shape.vocab;
      prob *= prow[tok];
      // visited states are distinct along a path, so rows add independently
      for (int a = 0; a < shape.vocab; ++a) {
        const double e = (a == tok ? 1.0 : 0.0) - prow[a];
        ssq += e * e;
      }
    }
    pr[static_cast<std::size_t>(o)] = prob;
    w_sq[static_cast<std::size_t>(o)] = ssq;
  });

  // scalar moments (deterministic block reduction)
  auto reward = [&](std::int64_t o) { return env.reward_by_index(prompt_idx, static_cast<int>(o)); };
  m.value = det_sum(n_out, [&](std::int64_t o) { return pr[static_cast<std::size_t>(o)] * reward(o); });
  const double ez2 =
      det_sum(n_out, [&](std::int64_t o) { return pr[static_cast<std::size_t>(o)] * reward(o) * reward(o); });
  m.var_z = std::max(0.0, ez2 - m.value * m.value);
  m.e_score_sq =
      det_sum(n_out, [&](std::int64_t o) { return pr[static_cast<std::size_t>(o)] * w_sq[static_cast<std::size_t>(o)]; });
  m.e_score_sq_z = det_sum(n_out, [&](std::int64_t o) {
    return pr[static_cast<std::size_t>(o)] * w_sq[static_cast<std::size_t>(o)] * reward(o);
  });
  m.e_score_sq_z2 = det_sum(n_out, [&](std::int64_t o) {
    return pr[static_cast<std::size_t>(o)] * w_sq[static_cast<std::size_t>(o)] * reward(o) * reward(o);
  });
  m.e_score_sq_zc2 = m.e_score_sq_z2 - 2.0 * m.value * m.e_score_sq_z + m.value * m.value * m.e_score_sq;

  // gradient g(x) via a deterministic vector reduction over outputs
  m.grad.assign(static_cast<std::size_t>(shape.dim), 0.0);
  det_sum_vec(n_out, static_cast<std::size_t>(shape.dim), m.grad.data(),
              [&](std::int64_t o, double* acc) {
                const double c = pr[static_cast<std::size_t>(o)] * reward(o);
                if (c != 0.0) add_score(shape, probs, prompt_idx, static_cast<int>(o), c, acc);
              });
  m.grad_sq_norm = norm2(m.grad);
  return m;
}

std::vector<PromptMoments> all_prompt_moments(const PolicyParams& p, const Environment& env) {
  std::vector<PromptMoments> out;
  out.reserve(static_cast<std::size_t>(env.prompt_count()));
  for (int x = 0; x < env.prompt_count(); ++x) out.push_back(prompt_moments(p, env, x));
  return out;
}

double prompt_variance_of_gradient(const std::vector<PromptMoments>& moments) {
  if (moments.empty()) return 0.0;
  const std::size_t d = moments.front().grad.size();
  std::vector<double> mean(d, 0.0);
  for (const auto& m : moments) axpy(m.weight, m.grad, mean);
  double v = 0.0;
  for (const auto& m : moments) {
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double e = m.grad[i] - mean[i];
      sq += e * e;
    }
    v += m.weight * sq;
  }
  return v;
}

double exact_mse_per_prompt(const PromptMoments& m, const BaselineKind& baseline, int G) {
  if (G < 1) throw RejectionError("exact_mse_per_prompt: G must be >= 1");
  switch (baseline.tag) {
    case BaselineKind::Tag::kVanilla:
      return m.tr_var_vanilla() / static_cast<double>(G);
    case BaselineKind::Tag::kOracleValue:
      return m.tr_sigma_oracle() / static_cast<double>(G);
    case BaselineKind::Tag::kCustom:
      throw RejectionError("exact_mse_per_prompt: custom baseline needs the prompt id context");
    case BaselineKind::Tag::kLeaveOneOut: {
      if (G < 2) throw RejectionError("exact_mse_per_prompt: leave_one_out needs G >= 2");
      const double first = m.tr_sigma_oracle() / static_cast<double>(G);
      const double second =
          2.0 * m.tr_var_zeta2() / (static_cast<double>(G) * static_cast<double>(G - 1));
      return first + second;
    }
  }
  return 0.0;
}

MinibatchMse exact_mse_minibatch(const PolicyParams& p, const Environment& env,
                                 const BaselineKind& baseline, int B, int G) {
  if (B < 1) throw RejectionError("exact_mse_minibatch: B must be >= 1");
  const std::vector<PromptMoments> moments = all_prompt_moments(p, env);
  MinibatchMse out;
  out.prompt_variance_term = prompt_variance_of_gradient(moments) / static_cast<double>(B);
  double cond = 0.0;
  for (const auto& m : moments) {
    double per_prompt;
    if (baseline.tag == BaselineKind::Tag::kCustom) {
      const int id = env.prompts()[static_cast<std::size_t>(m.prompt_idx)].id;
      const auto it = baseline.custom.find(id);
      if (it == baseline.custom.end())
        throw RejectionError("exact_mse_minibatch: custom baseline missing prompt " +
                             std::to_string(id));
      per_prompt = m.tr_var_custom(it->second) / static_cast<double>(G);
    } else {
      per_prompt = exact_mse_per_prompt(m, baseline, G);
    }
    cond += m.weight * per_prompt;
  }
  out.conditional_term = cond / static_cast<double>(B);
  out.total = out.prompt_variance_term + out.conditional_term;
  return out;
}

double mse_exact_small(const PolicyParams& p, const Environment& env,
                       const BaselineKind& baseline, int B, int G, std::int64_t cap) {
  if (B < 1 || G < 1) throw RejectionError("mse_exact_small: B and G must be >= 1");
  const double count = std::pow(static_cast<double>(env.output_count()), G) *
                       std::pow(static_cast<double>(env.prompt_count()), B);
  if (!(count <= static_cast<double>(cap))) {
    std::ostringstream msg;
    msg << "mse_exact_small: enumeration cap exceeded: " << env.output_count() << "^" << G
        << " x " << env.prompt_count() << "^" << B << " = " << count << " > " << cap;
    throw RejectionError(msg.str());
  }

  const PolicyShape& shape = *p.shape;
  const std::size_t d = static_cast<std::size_t>(shape.dim);
  const std::vector<double> g_bar = exact_gradient(p, env);

  const std::int64_t n_out = env.output_count();
  std::int64_t tuples = 1;
  for (int g = 0; g < G; ++g) tuples *= n_out;

  // one group: prompt draw plus G i.i.d. outputs; accumulate the first two
  // moments of the group estimator about the exact gradient
  double e_err_sq = 0.0;
  std::vector<double> e_est(d, 0.0);
  for (int x = 0; x < env.prompt_count(); ++x) {
    const double wx = env.prompts()[static_cast<std::size_t>(x)].weight;
    const int prompt_id = env.prompts()[static_cast<std::size_t>(x)].id;
    const std::vector<double> probs = softmax_table(p, x);
    std::vector<double> pr(static_cast<std::size_t>(n_out));
    for (std::int64_t o = 0; o < n_out; ++o) {
      double prob = 1.0;
      for (const auto& [state, tok] : shape.paths[static_cast<std::size_t>(o)])
        prob *= probs[static_cast<std::size_t>(state) * shape.vocab + static_cast<std::size_t>(tok)];
      pr[static_cast<std::size_t>(o)] = prob;
    }

    const double oracle_v =
        baseline.tag == BaselineKind::Tag::kOracleValue ? value_exact(p, env, prompt_id) : 0.0;
    double custom_v = 0.0;
    if (baseline.tag == BaselineKind::Tag::kCustom) {
      const auto it = baseline.custom.find(prompt_id);
      if (it == baseline.custom.end())
        throw RejectionError("mse_exact_small: custom baseline missing prompt " +
                             std::to_string(prompt_id));
      custom_v = it->second;
    }

    e_err_sq += wx * det_sum(tuples, [&](std::int64_t t) {
      // decode the G-tuple of output indices
      std::vector<int> idx(static_cast<std::size_t>(G));
      std::vector<double> rewards(static_cast<std::size_t>(G));
      std::int64_t rem = t;
      double prob = 1.0;
      for (int g = 0; g < G; ++g) {
        const int o = static_cast<int>(rem % n_out);
        rem /= n_out;
        idx[static_cast<std::size_t>(g)] = o;
        rewards[static_cast<std::size_t>(g)] = env.reward_by_index(x, o);
        prob *= pr[static_cast<std::size_t>(o)];
      }
      if (prob == 0.0) return 0.0;
      std::vector<double> baselines(static_cast<std::size_t>(G), 0.0);
      switch (baseline.tag) {
        case BaselineKind::Tag::kVanilla: break;
        case BaselineKind::Tag::kLeaveOneOut: baselines = leave_one_out_means(rewards); break;
        case BaselineKind::Tag::kOracleValue:
          baselines.assign(static_cast<std::size_t>(G), oracle_v);
          break;
        case BaselineKind::Tag::kCustom:
          baselines.assign(static_cast<std::size_t>(G), custom_v);
          break;
      }
      std::vector<double> est(d, 0.0);
      for (int g = 0; g < G; ++g)
        add_score(shape, probs, x, idx[static_cast<std::size_t>(g)],
                  (rewards[static_cast<std::size_t>(g)] - baselines[static_cast<std::size_t>(g)]) /
                      static_cast<double>(G),
                  est.data());
      double err = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double e = est[i] - g_bar[i];
        err += e * e;
      }
      return prob * err;
    });

    // group-estimator mean, for the bias correction of general baselines
    std::vector<double> mean_x(d, 0.0);
    det_sum_vec(tuples, d, mean_x.data(), [&](std::int64_t t, double* acc) {
      std::vector<int> idx(static_cast<std::size_t>(G));
      std::vector<double> rewards(static_cast<std::size_t>(G));
      std::int64_t rem = t;
      double prob = 1.0;
      for (int g = 0; g < G; ++g) {
        const int o = static_cast<int>(rem % n_out);
        rem /= n_out;
        idx[static_cast<std::size_t>(g)] = o;
        rewards[static_cast<std::size_t>(g)] = env.reward_by_index(x, o);
        prob *= pr[static_cast<std::size_t>(o)];
      }
      if (prob == 0.0) return;
      std::vector<double> baselines(static_cast<std::size_t>(G), 0.0);
      switch (baseline.tag) {
        case BaselineKind::Tag::kVanilla: break;
        case BaselineKind::Tag::kLeaveOneOut: baselines = leave_one_out_means(rewards); break;
        case BaselineKind::Tag::kOracleValue:
          baselines.assign(static_cast<std::size_t>(G), oracle_v);
          break;
        case BaselineKind::Tag::kCustom:
          baselines.assign(static_cast<std::size_t>(G), custom_v);
          break;
      }
      for (int g = 0; g < G; ++g)
        add_score(shape, probs, x, idx[static_cast<std::size_t>(g)],
                  prob *
                      (rewards[static_cast<std::size_t>(g)] - baselines[static_cast<std::size_t>(g)]) /
                      static_cast<double>(G),
                  acc);
    });
    axpy(wx, mean_x, e_est);
  }

  // MSE over B i.i.d. groups: (1/B) Var + squared bias
  const std::vector<double> bias = vec_sub(e_est, g_bar);
  const double bias_sq = norm2(bias);
  const double var_part = e_err_sq - bias_sq;
  return var_part / static_cast<double>(B) + bias_sq;
}

double exact_kl(const PolicyParams& p, const PolicyParams& p_ref, const Environment& env) {
  double kl = 0.0;
  for (int x = 0; x < env.prompt_count(); ++x) {
    const int prompt_id = env.prompts()[static_cast<std::size_t>(x)].id;
    const double wx = env.prompts()[static_cast<std::size_t>(x)].weight;
    double kx = 0.0;
    for (const TokenSeq& y : env.outputs().sequences) {
      const double lp = log_prob(p, env, prompt_id, y);
      const double lr = log_prob(p_ref, env, prompt_id, y);
      kx += std::exp(lp) * (lp - lr);
    }
    kl += wx * kx;
  }
  return kl;
}

}  // namespace grpolab

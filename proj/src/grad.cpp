#include "grpolab/grad.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "json.hpp"

namespace grpolab {

std::string BaselineKind::name() const {
  switch (tag) {
    case Tag::kVanilla: return "vanilla";
    case Tag::kLeaveOneOut: return "leave_one_out";
    case Tag::kOracleValue: return "oracle_value";
    case Tag::kCustom: return "custom_of_prompt";
  }
  return "?";
}

std::string GradientEstimate::to_json() const {
  nlohmann::json j;
  j["estimator"] = estimator;
  j["B"] = B;
  j["G"] = G;
  j["seed"] = seed;
  j["vector"] = vector;
  return j.dump();
}

std::uint64_t params_snapshot_id(const PolicyParams& p) {
  // FNV-1a over the raw logit bytes
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(p.logits.data());
  for (std::size_t i = 0; i < p.logits.size() * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

GroupBatch collect_batch(const PolicyParams& p, const Environment& env, int B, int G, Rng& rng) {
  if (B < 1 || G < 1) throw RejectionError("collect_batch: B and G must be >= 1");
  std::vector<double> weights(static_cast<std::size_t>(env.prompt_count()));
  for (int x = 0; x < env.prompt_count(); ++x)
    weights[static_cast<std::size_t>(x)] = env.prompts()[static_cast<std::size_t>(x)].weight;
  GroupBatch batch;
  batch.snapshot_id = params_snapshot_id(p);
  batch.groups.resize(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    const int prompt_idx = rng.discrete(weights);
    GroupSample& grp = batch.groups[static_cast<std::size_t>(b)];
    grp.prompt_id = env.prompts()[static_cast<std::size_t>(prompt_idx)].id;
    grp.outputs.reserve(static_cast<std::size_t>(G));
    grp.rewards.reserve(static_cast<std::size_t>(G));
    for (int g = 0; g < G; ++g) {
      TokenSeq y = sample_output(p, env, grp.prompt_id, rng);
      grp.rewards.push_back(env.reward(grp.prompt_id, y));
      grp.outputs.push_back(std::move(y));
    }
  }
  return batch;
}

std::vector<double> leave_one_out_means(const std::vector<double>& rewards) {
  const int G = static_cast<int>(rewards.size());
  if (G < 2) throw RejectionError("leave_one_out_means: needs G >= 2");
  double total = 0.0;
  for (double z : rewards) total += z;
  std::vector<double> out(rewards.size());
  for (int g = 0; g < G; ++g)
    out[static_cast<std::size_t>(g)] =
        (total - rewards[static_cast<std::size_t>(g)]) / static_cast<double>(G - 1);
  return out;
}

GradientEstimate estimate_gradient_meta(const PolicyParams& p, const Environment& env,
                                        const GroupBatch& batch, const BaselineKind& baseline) {
  if (batch.size() < 1) throw RejectionError("estimate_gradient_meta: empty batch");

  GradientEstimate est;
  est.estimator = baseline.name();
  est.B = batch.size();
  est.G = batch.groups.front().size();
  est.vector.assign(static_cast<std::size_t>(p.dim()), 0.0);

  const double scale = 1.0 / (static_cast<double>(est.B) * static_cast<double>(est.G));
  for (const GroupSample& grp : batch.groups) {
    const int G = grp.size();
    if (G != est.G) throw RejectionError("estimate_gradient_meta: ragged group sizes");
    const int prompt_idx = env.prompt_index(grp.prompt_id);
    const std::vector<double> probs = softmax_table(p, prompt_idx);

    std::vector<double> baselines(static_cast<std::size_t>(G), 0.0);
    switch (baseline.tag) {
      case BaselineKind::Tag::kVanilla:
        break;
      case BaselineKind::Tag::kLeaveOneOut:
        baselines = leave_one_out_means(grp.rewards);
        break;
      case BaselineKind::Tag::kOracleValue: {
        const double v = value_exact(p, env, grp.prompt_id);
        baselines.assign(static_cast<std::size_t>(G), v);
        break;
      }
      case BaselineKind::Tag::kCustom: {
        const auto it = baseline.custom.find(grp.prompt_id);
        if (it == baseline.custom.end())
          throw RejectionError("estimate_gradient_meta: custom baseline missing prompt " +
                               std::to_string(grp.prompt_id));
        baselines.assign(static_cast<std::size_t>(G), it->second);
        break;
      }
    }

    for (int g = 0; g < G; ++g) {
      const double coeff =
          scale * (grp.rewards[static_cast<std::size_t>(g)] - baselines[static_cast<std::size_t>(g)]);
      if (coeff == 0.0) continue;
      const int output_idx = env.output_index(grp.outputs[static_cast<std::size_t>(g)]);
      add_score(*p.shape, probs, prompt_idx, output_idx, coeff, est.vector.data());
    }
  }
  return est;
}

std::vector<double> advantage_normalized(const std::vector<double>& rewards,
                                         const EpsPolicy& eps) {
  const int G = static_cast<int>(rewards.size());
  if (G < 2) throw RejectionError("advantage_normalized: needs G >= 2");
  double mean = 0.0;
  for (double z : rewards) mean += z;
  mean /= static_cast<double>(G);
  double ss = 0.0;
  double scale = 1.0;
  for (double z : rewards) {
    ss += (z - mean) * (z - mean);
    scale = std::max(scale, std::abs(z));
  }
  double se = std::sqrt(ss / static_cast<double>(G - 1));
  if (se <= 1e-12 * scale) se = 0.0;  // constant group up to rounding
  const std::vector<double> loo = leave_one_out_means(rewards);
  std::vector<double> adv(rewards.size(), 0.0);
  const double denom = se + eps.eps_se;
  if (denom == 0.0) return adv;  // degenerate group: zero advantages
  for (int g = 0; g < G; ++g)
    adv[static_cast<std::size_t>(g)] =
        (rewards[static_cast<std::size_t>(g)] - loo[static_cast<std::size_t>(g)]) / denom;
  return adv;
}

namespace {

// per-token softmax probability along an output's free decisions
double token_prob(const std::vector<double>& probs, const PolicyShape& shape, int state,
                  int tok) {
  return probs[static_cast<std::size_t>(state) * static_cast<std::size_t>(shape.vocab) +
               static_cast<std::size_t>(tok)];
}

}  // namespace

GradientEstimate estimate_gradient_practical(const PolicyParams& p_cur,
                                             const PolicyParams& p_old,
                                             const PolicyParams& p_ref, const Environment& env,
                                             const GroupBatch& batch,
                                             const PracticalOptions& opts) {
  if (opts.kappa < 0.0) throw RejectionError("estimate_gradient_practical: kappa must be >= 0");
  if (batch.size() < 1) throw RejectionError("estimate_gradient_practical: empty batch");

  GradientEstimate est;
  est.estimator = "practical";
  est.B = batch.size();
  est.G = batch.groups.front().size();
  est.vector.assign(static_cast<std::size_t>(p_cur.dim()), 0.0);
  const PolicyShape& shape = *p_cur.shape;
  const double scale = 1.0 / (static_cast<double>(est.B) * static_cast<double>(est.G));

  for (const GroupSample& grp : batch.groups) {
    if (grp.size() < 2) throw RejectionError("estimate_gradient_practical: needs G >= 2");
    const int prompt_idx = env.prompt_index(grp.prompt_id);
    const std::vector<double> probs_cur = softmax_table(p_cur, prompt_idx);
    const std::vector<double> probs_old = softmax_table(p_old, prompt_idx);
    const std::vector<double> probs_ref = softmax_table(p_ref, prompt_idx);
    const std::vector<double> adv = advantage_normalized(grp.rewards, opts.eps);

    for (int g = 0; g < grp.size(); ++g) {
      const int output_idx = env.output_index(grp.outputs[static_cast<std::size_t>(g)]);
      const auto& path = shape.paths[static_cast<std::size_t>(output_idx)];
      double* block = est.vector.data() + shape.block_offset(prompt_idx);
      for (const auto& [state, tok] : path) {
        const double pc = token_prob(probs_cur, shape, state, tok);
        const double po = token_prob(probs_old, shape, state, tok);
        const double pr = token_prob(probs_ref, shape, state, tok);
        if (pc < opts.coverage_floor || po < opts.coverage_floor || pr < opts.coverage_floor) {
          std::ostringstream msg;
          msg << "estimate_gradient_practical: coverage floor violated at prompt "
              << grp.prompt_id << " state " << state << " token " << tok << " (min prob "
              << std::min({pc, po, pr}) << " < " << opts.coverage_floor << ")";
          throw RejectionError(msg.str());
        }
        const double coeff =
            scale * ((pc / po) * adv[static_cast<std::size_t>(g)] +
                     opts.kappa * (pr / pc - 1.0));
        if (coeff == 0.0) continue;
        // per-token score of the current policy: indicator minus softmax row
        const double* prow = probs_cur.data() + static_cast<std::int64_t>(state) * shape.vocab;
        double* arow = block + static_cast<std::int64_t>(state) * shape.vocab;
        for (int a = 0; a < shape.vocab; ++a) arow[a] -= coeff * prow[a];
        arow[tok] += coeff;
      }
    }
  }
  return est;
}

double k3_kl_estimate(const PolicyParams& p, const PolicyParams& p_ref, const Environment& env,
                      const GroupBatch& batch) {
  if (batch.size() < 1) throw RejectionError("k3_kl_estimate: empty batch");
  double total = 0.0;
  std::int64_t count = 0;
  for (const GroupSample& grp : batch.groups) {
    for (const TokenSeq& y : grp.outputs) {
      const double lp = log_prob(p, env, grp.prompt_id, y);
      const double lp_ref = log_prob(p_ref, env, grp.prompt_id, y);
      if (!std::isfinite(lp) || std::exp(lp) == 0.0)
        throw RejectionError("k3_kl_estimate: output has zero probability under p");
      const double log_ratio = lp_ref - lp;
      total += std::exp(log_ratio) - log_ratio - 1.0;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace grpolab

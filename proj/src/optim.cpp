#include "grpolab/optim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "grpolab/stats.hpp"

namespace grpolab {

namespace {

double objective(const PolicyParams& p, const Environment& env) {
  double j = 0.0;
  for (const auto& prompt : env.prompts()) j += prompt.weight * value_exact(p, env, prompt.id);
  return j;
}

// clamp into [-R, R]^d; returns whether any coordinate moved
bool project_box(std::vector<double>& v, double radius) {
  bool clipped = false;
  for (double& x : v) {
    if (x > radius) {
      x = radius;
      clipped = true;
    } else if (x < -radius) {
      x = -radius;
      clipped = true;
    }
  }
  return clipped;
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

void record(TrainTrace& trace, const Environment& env, const PolicyParams& p, int iter,
            double grad_norm, bool clipped) {
  TraceRow row;
  row.iter = iter;
  row.objective = objective(p, env);
  row.gap = env_optimum(env) - row.objective;
  row.grad_norm = grad_norm;
  row.clipped = clipped;
  trace.rows.push_back(row);
}

void validate_config(const TrainConfig& config) {
  if (config.B < 1 || config.G < 1 || config.n < 0)
    throw RejectionError("train: B, G must be >= 1 and n >= 0");
  if (!(config.schedule.beta > 0.0)) throw RejectionError("train: beta must be positive");
  if (config.baseline.tag == BaselineKind::Tag::kLeaveOneOut && config.G < 2)
    throw RejectionError("train: leave_one_out baseline needs G >= 2");
  if (config.practical) {
    if (config.G < 2) throw RejectionError("train: practical estimator needs G >= 2");
    if (config.practical->m < 1 || config.B % config.practical->m != 0)
      throw RejectionError("train: minibatch count m must divide B");
  }
}

}  // namespace

void TrainTrace::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("train trace: cannot write " + path);
  out.precision(17);
  out << "iter,J,gap,grad_norm,clipped\n";
  for (const auto& row : rows)
    out << row.iter << ',' << row.objective << ',' << row.gap << ',' << row.grad_norm << ','
        << (row.clipped ? 1 : 0) << '\n';
}

TrainTrace train_meta(const Environment& env, const PolicyParams& init, const TrainConfig& config,
                      Rng& rng) {
  validate_config(config);
  TrainTrace trace;
  PolicyParams p = init;
  record(trace, env, p, 0, 0.0, false);
  for (int i = 0; i < config.n; ++i) {
    const GroupBatch batch = collect_batch(p, env, config.B, config.G, rng);
    const GradientEstimate est = estimate_gradient_meta(p, env, batch, config.baseline);
    const double eta = config.schedule.rate(i);
    axpy(eta, est.vector, p.logits);
    const bool clipped = project_box(p.logits, config.box_radius);
    if (clipped) ++trace.clip_count;
    if (!all_finite(p.logits)) {
      trace.diverged = true;
      break;
    }
    const int iter = i + 1;
    if (iter % config.record_stride == 0 || iter == config.n)
      record(trace, env, p, iter, norm(est.vector), clipped);
    if (config.snapshot_stride > 0 && iter % config.snapshot_stride == 0)
      trace.snapshots.emplace_back(iter, p);
  }
  trace.final_params = p;
  return trace;
}

TrainTrace train_grpo_practical(const Environment& env, const PolicyParams& init,
                                const TrainConfig& config, Rng& rng,
                                const PolicyParams* reference) {
  validate_config(config);
  if (!config.practical) throw RejectionError("train_grpo_practical: practical config required");
  const PracticalConfig& pc = *config.practical;
  const PolicyParams p_ref = reference ? *reference : init;

  PracticalOptions opts;
  opts.kappa = pc.kappa;
  opts.coverage_floor = pc.coverage_floor;

  TrainTrace trace;
  PolicyParams p = init;
  record(trace, env, p, 0, 0.0, false);
  const int mb_size = config.B / pc.m;
  for (int i = 0; i < config.n; ++i) {
    const PolicyParams p_old = p;  // frozen sampling snapshot
    const GroupBatch batch = collect_batch(p_old, env, config.B, config.G, rng);
    const double eta = config.schedule.rate(i);  // all m steps share eta_{i+1}
    double last_norm = 0.0;
    bool clipped = false;
    for (int j = 0; j < pc.m; ++j) {
      GroupBatch minibatch;
      minibatch.snapshot_id = batch.snapshot_id;
      minibatch.groups.assign(batch.groups.begin() + j * mb_size,
                              batch.groups.begin() + (j + 1) * mb_size);
      const GradientEstimate est =
          estimate_gradient_practical(p, p_old, p_ref, env, minibatch, opts);
      axpy(eta, est.vector, p.logits);
      clipped = project_box(p.logits, config.box_radius) || clipped;
      last_norm = norm(est.vector);
    }
    if (clipped) ++trace.clip_count;
    if (!all_finite(p.logits)) {
      trace.diverged = true;
      break;
    }
    const int iter = i + 1;
    if (iter % config.record_stride == 0 || iter == config.n)
      record(trace, env, p, iter, last_norm, clipped);
    if (config.snapshot_stride > 0 && iter % config.snapshot_stride == 0)
      trace.snapshots.emplace_back(iter, p);
  }
  trace.final_params = p;
  return trace;
}

double env_optimum(const Environment& env) {
  double j = 0.0;
  for (int x = 0; x < env.prompt_count(); ++x)
    j += env.prompts()[static_cast<std::size_t>(x)].weight * env.max_reward(x);
  return j;
}

double suboptimality_gap(const PolicyParams& p, const Environment& env) {
  return std::max(0.0, env_optimum(env) - objective(p, env));
}

Lemma2Bound lemma2_bound(const LrSchedule& schedule, const BoundParams& params, int n,
                         double epsilon) {
  if (!(params.mu > 0.0) || !(params.lipschitz > 0.0))
    throw RejectionError("lemma2_bound: mu and L must be positive");
  if (params.mu > params.lipschitz + 1e-12)
    throw RejectionError("lemma2_bound: mu must not exceed L");
  if (params.mse_bound < 0.0 || params.delta0 < 0.0)
    throw RejectionError("lemma2_bound: M and delta0 must be nonnegative");
  if (n < 1) throw RejectionError("lemma2_bound: n must be >= 1");
  const double beta = params.beta;

  Lemma2Bound out;
  if (schedule.kind == LrSchedule::Kind::kConstant) {
    if (!(beta > 0.0) || !(beta < 0.5 / params.lipschitz))
      throw RejectionError("lemma2_bound: constant schedule requires 0 < beta < 1/(2L)");
    const double rho = 1.0 - 2.0 * params.mu * beta + params.lipschitz * params.mu * beta * beta;
    const double floor = params.lipschitz * beta * beta * params.mse_bound /
                         (4.0 * params.mu * beta - 2.0 * params.lipschitz * params.mu * beta * beta);
    out.main_branch = std::pow(rho, n) * params.delta0 + floor;
    out.value = out.main_branch;
  } else {
    if (!(beta > 0.5 / params.mu))
      throw RejectionError("lemma2_bound: 1/i schedule requires beta > 1/(2 mu)");
    out.main_branch = (1.0 + epsilon) * params.lipschitz * beta * beta * params.mse_bound /
                      ((4.0 * params.mu * beta - 2.0) * static_cast<double>(n));
    // c branch: c = a * n0 with a the sequence envelope (delta0) and n0 from
    // the recursion constants A = 2 mu beta, B = mu L beta^2
    const double big_a = 2.0 * params.mu * beta;
    const double big_b = params.mu * params.lipschitz * beta * beta;
    const double n0 = std::ceil(big_b * (1.0 + epsilon) / (epsilon * (big_a - 1.0))) + 1.0;
    out.c_branch = params.delta0 * n0 / static_cast<double>(n);
    out.value = std::max(out.main_branch, out.c_branch);
  }
  return out;
}

Landscape env_landscape(const Environment& env, std::shared_ptr<const PolicyShape> shape) {
  Landscape l;
  l.dim = shape->dim;
  l.gradient = [&env, shape](const std::vector<double>& theta) {
    PolicyParams p;
    p.shape = shape;
    p.logits = theta;
    return exact_gradient(p, env);
  };
  l.gap = [&env, shape](const std::vector<double>& theta) {
    PolicyParams p;
    p.shape = shape;
    p.logits = theta;
    return suboptimality_gap(p, env);
  };
  return l;
}

SmoothnessPl estimate_smoothness_and_pl(const Landscape& landscape,
                                        const std::vector<std::vector<double>>& probes,
                                        double gap_floor) {
  if (probes.empty()) throw RejectionError("estimate_smoothness_and_pl: no probes");
  std::vector<std::vector<double>> grads;
  grads.reserve(probes.size());
  for (const auto& theta : probes) grads.push_back(landscape.gradient(theta));

  SmoothnessPl out;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    for (std::size_t j = i + 1; j < probes.size(); ++j) {
      const double dt = norm(vec_sub(probes[i], probes[j]));
      if (dt == 0.0) continue;
      out.lipschitz = std::max(out.lipschitz, norm(vec_sub(grads[i], grads[j])) / dt);
    }
  }
  double mu = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const double gap = landscape.gap(probes[i]);
    if (gap <= gap_floor) continue;
    mu = std::min(mu, norm2(grads[i]) / (2.0 * gap));
    ++out.admissible_probes;
  }
  if (out.admissible_probes == 0)
    throw RejectionError("estimate_smoothness_and_pl: no probe has gap above the floor");
  out.mu = mu;
  return out;
}

}  // namespace grpolab

#include "grpolab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "grpolab/parallel.hpp"
#include "grpolab/stats.hpp"
#include "json.hpp"

namespace grpolab {

MseReport mse_monte_carlo(const PolicyParams& p, const Environment& env,
                          const BaselineKind& estimator, int B, int G, int reps,
                          std::uint64_t seed, bool attach_exact) {
  if (reps < 100) throw RejectionError("mse_monte_carlo: needs reps >= 100");
  const std::vector<double> g_bar = exact_gradient(p, env);
  std::vector<double> errs(static_cast<std::size_t>(reps));
  parallel_for(reps, [&](std::int64_t r) {
    Rng rng(seed, static_cast<std::uint64_t>(r));
    const GroupBatch batch = collect_batch(p, env, B, G, rng);
    const GradientEstimate est = estimate_gradient_meta(p, env, batch, estimator);
    errs[static_cast<std::size_t>(r)] = norm2(vec_sub(est.vector, g_bar));
  });
  const MeanCi ci = mean_ci(errs);
  MseReport report;
  report.estimator = estimator.name();
  report.B = B;
  report.G = G;
  report.replications = reps;
  report.mse_mean = ci.mean;
  report.ci_halfwidth = ci.ci_halfwidth;
  if (attach_exact) report.exact_mse = exact_mse_minibatch(p, env, estimator, B, G).total;
  return report;
}

OracleCurve oracle_convergence_curve(const PolicyParams& p, const Environment& env,
                                     const std::vector<int>& g_list) {
  if (g_list.size() < 3)
    throw RejectionError("oracle_convergence_curve: needs at least 3 group sizes");
  const std::vector<PromptMoments> moments = all_prompt_moments(p, env);
  OracleCurve curve;
  std::vector<double> gs, diffs;
  double og_min = std::numeric_limits<double>::infinity();
  double og_max = 0.0;
  for (int g : g_list) {
    OracleCurveRow row;
    row.G = g;
    for (const auto& m : moments) {
      row.mse_loo += m.weight * exact_mse_per_prompt(m, BaselineKind::leave_one_out(), g);
      row.mse_oracle += m.weight * exact_mse_per_prompt(m, BaselineKind::oracle_value(), g);
    }
    row.difference = row.mse_loo - row.mse_oracle;
    og_min = std::min(og_min, row.mse_oracle * g);
    og_max = std::max(og_max, row.mse_oracle * g);
    gs.push_back(static_cast<double>(g));
    diffs.push_back(row.difference);
    curve.rows.push_back(row);
  }
  curve.difference_slope = fit_loglog(gs, diffs).slope;
  curve.oracle_times_g_spread = og_min > 0.0 ? og_max / og_min - 1.0 : 0.0;
  return curve;
}

ScalingEstimate estimate_constants(const std::vector<PolicyParams>& probes,
                                   const Environment& env, int g_fit_lo, int g_fit_hi) {
  if (probes.empty()) throw RejectionError("estimate_constants: needs at least one probe");
  if (g_fit_lo < 2 || g_fit_hi <= g_fit_lo)
    throw RejectionError("estimate_constants: fit group sizes must satisfy 2 <= lo < hi");
  ScalingEstimate est;
  est.g_fit_lo = g_fit_lo;
  est.g_fit_hi = g_fit_hi;
  est.probes = static_cast<int>(probes.size());
  for (const PolicyParams& probe : probes) {
    const std::vector<PromptMoments> moments = all_prompt_moments(probe, env);
    est.c1 = std::max(est.c1, prompt_variance_of_gradient(moments));
    double c2 = 0.0;
    double cond_lo = 0.0, cond_hi = 0.0;
    for (const auto& m : moments) {
      c2 += m.weight * m.tr_sigma_oracle();
      cond_lo += m.weight * exact_mse_per_prompt(m, BaselineKind::leave_one_out(), g_fit_lo);
      cond_hi += m.weight * exact_mse_per_prompt(m, BaselineKind::leave_one_out(), g_fit_hi);
    }
    est.c2 = std::max(est.c2, c2);
    // conditional MSE obeys MSE * G = c2 + c3 / G at the two fit points
    const double c3 = (cond_lo * g_fit_lo - cond_hi * g_fit_hi) /
                      (1.0 / g_fit_lo - 1.0 / g_fit_hi);
    est.c3 = std::max(est.c3, c3);
  }
  if (est.c1 > 1e-14) {
    est.g_star = std::sqrt(est.c3 / est.c1);
  } else {
    est.g_star = std::numeric_limits<double>::infinity();
    est.g_star_infinite = true;
  }
  return est;
}

std::vector<ScalingShapeRow> scaling_shape_table(const PolicyParams& probe,
                                                 const Environment& env,
                                                 const ScalingEstimate& constants, int budget,
                                                 const std::vector<int>& g_grid) {
  std::vector<ScalingShapeRow> rows;
  for (int g : g_grid) {
    if (budget % g != 0)
      throw RejectionError("scaling_shape_table: G=" + std::to_string(g) +
                           " does not divide the budget");
    ScalingShapeRow row;
    row.G = g;
    row.B = budget / g;
    row.exact_mse =
        exact_mse_minibatch(probe, env, BaselineKind::leave_one_out(), row.B, g).total;
    row.model_mse = (constants.c1 * g + constants.c2 + constants.c3 / g) /
                    static_cast<double>(budget);
    row.rel_err = std::abs(row.model_mse - row.exact_mse) / row.exact_mse;
    rows.push_back(row);
  }
  return rows;
}

GroupSweepResult group_size_sweep(const Environment& env, const PolicyParams& init, int budget,
                                  const std::vector<int>& g_list, const TrainConfig& tmpl,
                                  int runs, std::uint64_t seed) {
  GroupSweepResult result;
  double best_j = -std::numeric_limits<double>::infinity();
  for (std::size_t gi = 0; gi < g_list.size(); ++gi) {
    const int g = g_list[gi];
    if (budget % g != 0)
      throw RejectionError("group_size_sweep: G=" + std::to_string(g) +
                           " does not divide N=" + std::to_string(budget));
    SweepCell cell;
    cell.G = g;
    cell.B = budget / g;
    cell.runs = runs;
    TrainConfig config = tmpl;
    config.B = cell.B;
    config.G = g;
    config.record_stride = std::max(1, config.n);  // final point only
    config.snapshot_stride = 0;

    std::vector<double> finals_j(static_cast<std::size_t>(runs));
    std::vector<double> finals_gap(static_cast<std::size_t>(runs));
    std::vector<int> clips(static_cast<std::size_t>(runs));
    parallel_for(runs, [&](std::int64_t r) {
      Rng rng(seed, gi * static_cast<std::uint64_t>(runs) + static_cast<std::uint64_t>(r));
      const TrainTrace trace = train_meta(env, init, config, rng);
      finals_j[static_cast<std::size_t>(r)] = trace.rows.back().objective;
      finals_gap[static_cast<std::size_t>(r)] = trace.rows.back().gap;
      clips[static_cast<std::size_t>(r)] = trace.clip_count;
    });
    for (int c : clips) cell.clip_count += c;
    const MeanCi cj = mean_ci(finals_j);
    const MeanCi cg = mean_ci(finals_gap);
    cell.mean_final_j = cj.mean;
    cell.ci_j = cj.ci_halfwidth;
    cell.mean_final_gap = cg.mean;
    cell.ci_gap = cg.ci_halfwidth;
    if (cell.mean_final_j > best_j) {
      best_j = cell.mean_final_j;
      result.best_g = g;
    }
    result.cells.push_back(cell);
  }
  return result;
}

std::vector<double> practical_ground_truth(const PolicyParams& p_cur, const PolicyParams& p_old,
                                           const Environment& env, double kappa) {
  const PolicyShape& shape = *p_cur.shape;
  std::vector<double> g_dagger(static_cast<std::size_t>(shape.dim), 0.0);
  for (int x = 0; x < env.prompt_count(); ++x) {
    const double wx = env.prompts()[static_cast<std::size_t>(x)].weight;
    const PromptMoments m_old = prompt_moments(p_old, env, x);
    if (m_old.var_z <= 1e-12)
      throw RejectionError("practical_ground_truth: prompt " +
                           std::to_string(env.prompts()[static_cast<std::size_t>(x)].id) +
                           " has (near) zero reward std under p_old");
    const double inv_std = 1.0 / std::sqrt(m_old.var_z);
    const std::vector<double> probs_cur = softmax_table(p_cur, x);
    const std::vector<double> probs_old = softmax_table(p_old, x);

    // advantage part: E_{pi_cur}[ W (Z - V_old) ] / std_old
    // KL part:        kappa E_{pi_cur}[ sum_t (mu_t - 1) W_t ]
    std::vector<double> acc(static_cast<std::size_t>(shape.dim), 0.0);
    for (int o = 0; o < env.output_count(); ++o) {
      const auto& path = shape.paths[static_cast<std::size_t>(o)];
      double prob_cur = 1.0;
      for (const auto& [state, tok] : path)
        prob_cur *= probs_cur[static_cast<std::size_t>(state) * shape.vocab +
                              static_cast<std::size_t>(tok)];
      if (prob_cur == 0.0) continue;
      const double z = env.reward_by_index(x, o);
      add_score(shape, probs_cur, x, o, prob_cur * (z - m_old.value) * inv_std, acc.data());
      if (kappa > 0.0) {
        double* block = acc.data() + shape.block_offset(x);
        for (const auto& [state, tok] : path) {
          const double pc = probs_cur[static_cast<std::size_t>(state) * shape.vocab +
                                      static_cast<std::size_t>(tok)];
          const double po = probs_old[static_cast<std::size_t>(state) * shape.vocab +
                                      static_cast<std::size_t>(tok)];
          const double coeff = kappa * prob_cur * (pc / po - 1.0);
          const double* prow = probs_cur.data() + static_cast<std::int64_t>(state) * shape.vocab;
          double* arow = block + static_cast<std::int64_t>(state) * shape.vocab;
          for (int a = 0; a < shape.vocab; ++a) arow[a] -= coeff * prow[a];
          arow[tok] += coeff;
        }
      }
    }
    axpy(wx, acc, g_dagger);
  }
  return g_dagger;
}

BiasCurve practical_bias_curve(const Environment& env, const PolicyParams& p_old,
                               const std::vector<double>& direction,
                               const std::vector<double>& displacements, double kappa, int B,
                               int G, int reps, std::uint64_t seed) {
  if (direction.size() != p_old.logits.size())
    throw RejectionError("practical_bias_curve: direction dimension mismatch");
  BiasCurve curve;
  PracticalOptions opts;
  opts.kappa = kappa;

  const std::size_t d = p_old.logits.size();
  std::vector<double> fit_s, fit_b;
  for (std::size_t si = 0; si < displacements.size(); ++si) {
    const double s = displacements[si];
    PolicyParams p_cur = p_old;
    axpy(s, direction, p_cur.logits);
    const std::vector<double> truth = practical_ground_truth(p_cur, p_old, env, kappa);

    // mean estimate over reps, with a per-coordinate CI for the norm error
    std::vector<double> packed((d + 1), 0.0);
    det_sum_vec(reps, d + 1, packed.data(), [&](std::int64_t r, double* acc) {
      Rng rng(seed, si * 1000003ULL + static_cast<std::uint64_t>(r));
      const GroupBatch batch = collect_batch(p_old, env, B, G, rng);
      const GradientEstimate est = estimate_gradient_practical(p_cur, p_old, p_old, env, batch, opts);
      for (std::size_t i = 0; i < d; ++i) acc[i] += est.vector[i];
      acc[d] += norm2(vec_sub(est.vector, truth));
    });
    std::vector<double> mean_est(packed.begin(), packed.begin() + static_cast<std::ptrdiff_t>(d));
    for (double& v : mean_est) v /= static_cast<double>(reps);

    BiasCurveRow row;
    row.displacement = s;
    row.bias_norm = norm(vec_sub(mean_est, truth));
    // rough scale of the Monte-Carlo error on the mean: sqrt(E||err||^2 / reps)
    row.mc_halfwidth =
        2.0 * std::sqrt(std::max(0.0, packed[d] / static_cast<double>(reps)) /
                        static_cast<double>(reps));
    curve.rows.push_back(row);
    if (s > 0.0) {
      fit_s.push_back(s);
      fit_b.push_back(row.bias_norm);
    }
  }
  if (fit_s.size() >= 2) curve.slope = fit_loglog(fit_s, fit_b).slope;
  return curve;
}

namespace {

// E_k[a(z, k)] under k ~ Binomial(G-1, V): the normalized-advantage factor
// for binary rewards, with the se = 0 groups contributing zero
double binary_advantage_mean(int z, double v, int G) {
  double total = 0.0;
  // log binomial pmf recursion for numerical sanity at large G
  for (int k = 0; k <= G - 1; ++k) {
    double logw = 0.0;
    for (int i = 0; i < k; ++i)
      logw += std::log(static_cast<double>(G - 1 - i)) - std::log(static_cast<double>(i + 1));
    logw += k * std::log(v) + (G - 1 - k) * std::log1p(-v);
    const int s = z + k;
    if (s == 0 || s == G) continue;
    const double se = std::sqrt(static_cast<double>(s) * (G - s) /
                                (static_cast<double>(G) * (G - 1)));
    const double a = (z - static_cast<double>(k) / (G - 1)) / se;
    total += std::exp(logw) * a;
  }
  return total;
}

}  // namespace

ArcsinReport arcsin_gradient_check(const PolicyParams& p, const Environment& env, int G,
                                   double delta, double fd_step) {
  if (G < 2) throw RejectionError("arcsin_gradient_check: needs G >= 2");
  for (int x = 0; x < env.prompt_count(); ++x)
    for (int o = 0; o < env.output_count(); ++o) {
      const double z = env.reward_by_index(x, o);
      if (z != 0.0 && z != 1.0)
        throw RejectionError("arcsin_gradient_check: rewards must be binary");
    }

  ArcsinReport report;
  report.G = G;
  const std::size_t d = p.logits.size();
  std::vector<double> estimate(d, 0.0);
  for (int x = 0; x < env.prompt_count(); ++x) {
    const double v = value_exact(p, env, env.prompts()[static_cast<std::size_t>(x)].id);
    report.prompt_values.push_back(v);
    if (v <= delta || v >= 1.0 - delta)
      throw RejectionError("arcsin_gradient_check: prompt value " + std::to_string(v) +
                           " outside (" + std::to_string(delta) + ", " +
                           std::to_string(1.0 - delta) + "); reward std degenerate");
    const double factor = binary_advantage_mean(1, v, G) - binary_advantage_mean(0, v, G);
    report.prompt_factors.push_back(factor * std::sqrt(v * (1.0 - v)));
    const std::vector<double> gx = exact_gradient_prompt(p, env, x);
    axpy(env.prompts()[static_cast<std::size_t>(x)].weight * factor, gx, estimate);
  }

  // finite differences of F(theta) = sum_x w(x) 2 arcsin(sqrt V_x)
  auto arcsin_objective = [&](const PolicyParams& q) {
    double f = 0.0;
    for (const auto& prompt : env.prompts())
      f += prompt.weight * 2.0 * std::asin(std::sqrt(value_exact(q, env, prompt.id)));
    return f;
  };
  std::vector<double> fd(d, 0.0);
  PolicyParams work = p;
  for (std::size_t i = 0; i < d; ++i) {
    const double orig = work.logits[i];
    work.logits[i] = orig + fd_step;
    const double fp = arcsin_objective(work);
    work.logits[i] = orig - fd_step;
    const double fm = arcsin_objective(work);
    work.logits[i] = orig;
    fd[i] = (fp - fm) / (2.0 * fd_step);
  }

  const double scale = max_abs(fd);
  double max_err = 0.0;
  for (std::size_t i = 0; i < d; ++i) max_err = std::max(max_err, std::abs(estimate[i] - fd[i]));
  report.max_rel_err = scale > 0.0 ? max_err / scale : max_err;
  return report;
}

namespace {

struct PromptMatrices {
  Mat second_moment_oracle;  // E[(Z-V)^2 W W^T], block
  Mat second_moment_vanilla; // E[Z^2 W W^T], block
  Mat score_second_moment;   // E[W W^T], block
  Vec grad_block;
};

PromptMatrices prompt_matrices(const PolicyParams& p, const Environment& env, int prompt_idx,
                               const PromptMoments& m) {
  const PolicyShape& shape = *p.shape;
  const std::vector<double> probs = softmax_table(p, prompt_idx);
  const Eigen::Index bs = static_cast<Eigen::Index>(shape.block_size());
  PromptMatrices out;
  out.second_moment_oracle = Mat::Zero(bs, bs);
  out.second_moment_vanilla = Mat::Zero(bs, bs);
  out.score_second_moment = Mat::Zero(bs, bs);
  std::vector<double> w_full(static_cast<std::size_t>(shape.dim), 0.0);
  for (int o = 0; o < env.output_count(); ++o) {
    const auto& path = shape.paths[static_cast<std::size_t>(o)];
    double prob = 1.0;
    for (const auto& [state, tok] : path)
      prob *= probs[static_cast<std::size_t>(state) * shape.vocab + static_cast<std::size_t>(tok)];
    if (prob == 0.0) continue;
    std::fill(w_full.begin(), w_full.end(), 0.0);
    add_score(shape, probs, prompt_idx, o, 1.0, w_full.data());
    Vec w(bs);
    const double* block = w_full.data() + shape.block_offset(prompt_idx);
    for (Eigen::Index i = 0; i < bs; ++i) w(i) = block[i];
    const double z = env.reward_by_index(prompt_idx, o);
    const double zc = z - m.value;
    out.second_moment_oracle.selfadjointView<Eigen::Lower>().rankUpdate(w, prob * zc * zc);
    out.second_moment_vanilla.selfadjointView<Eigen::Lower>().rankUpdate(w, prob * z * z);
    out.score_second_moment.selfadjointView<Eigen::Lower>().rankUpdate(w, prob);
  }
  for (Mat* mat : {&out.second_moment_oracle, &out.second_moment_vanilla, &out.score_second_moment})
    *mat = mat->selfadjointView<Eigen::Lower>();
  out.grad_block = Vec(bs);
  const double* gb = m.grad.data() + shape.block_offset(prompt_idx);
  for (Eigen::Index i = 0; i < bs; ++i) out.grad_block(i) = gb[i];
  return out;
}

}  // namespace

Mat gradient_covariance(const PolicyParams& p, const Environment& env,
                        const BaselineKind& estimator, int B, int G, CovarianceMode mode,
                        int reps, std::uint64_t seed) {
  const PolicyShape& shape = *p.shape;
  const Eigen::Index d = static_cast<Eigen::Index>(shape.dim);

  if (mode == CovarianceMode::kMonteCarlo) {
    if (reps < 2) throw RejectionError("gradient_covariance: monte_carlo mode needs reps >= 2");
    const std::size_t dd = static_cast<std::size_t>(d);
    std::vector<double> packed(dd + dd * dd, 0.0);
    det_sum_vec(reps, dd + dd * dd, packed.data(), [&](std::int64_t r, double* acc) {
      Rng rng(seed, static_cast<std::uint64_t>(r));
      const GroupBatch batch = collect_batch(p, env, B, G, rng);
      const GradientEstimate est = estimate_gradient_meta(p, env, batch, estimator);
      for (std::size_t i = 0; i < dd; ++i) acc[i] += est.vector[i];
      for (std::size_t i = 0; i < dd; ++i)
        for (std::size_t j = 0; j < dd; ++j)
          acc[dd + i * dd + j] += est.vector[i] * est.vector[j];
    });
    Mat cov(d, d);
    const double n = static_cast<double>(reps);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) {
        const double mi = packed[static_cast<std::size_t>(i)] / n;
        const double mj = packed[static_cast<std::size_t>(j)] / n;
        cov(i, j) = packed[static_cast<std::size_t>(d) + static_cast<std::size_t>(i * d + j)] / n -
                    mi * mj;
      }
    return 0.5 * (cov + cov.transpose()).eval();
  }

  // exact mode: (1/B) [ E_x Cov_x(estimator) + Var_x(g(X)) ]
  const std::vector<PromptMoments> moments = all_prompt_moments(p, env);
  Mat cov = Mat::Zero(d, d);
  Vec g_bar = Vec::Zero(d);
  for (const auto& m : moments) g_bar += m.weight * to_vec(m.grad);
  for (int x = 0; x < env.prompt_count(); ++x) {
    const PromptMoments& m = moments[static_cast<std::size_t>(x)];
    const PromptMatrices mats = prompt_matrices(p, env, x, m);
    const Eigen::Index off = static_cast<Eigen::Index>(shape.block_offset(x));
    const Eigen::Index bs = static_cast<Eigen::Index>(shape.block_size());
    Mat cov_x;
    switch (estimator.tag) {
      case BaselineKind::Tag::kVanilla:
        cov_x = (mats.second_moment_vanilla - mats.grad_block * mats.grad_block.transpose()) /
                static_cast<double>(G);
        break;
      case BaselineKind::Tag::kOracleValue:
        cov_x = (mats.second_moment_oracle - mats.grad_block * mats.grad_block.transpose()) /
                static_cast<double>(G);
        break;
      case BaselineKind::Tag::kLeaveOneOut: {
        if (G < 2) throw RejectionError("gradient_covariance: leave_one_out needs G >= 2");
        const Mat sigma_oracle =
            mats.second_moment_oracle - mats.grad_block * mats.grad_block.transpose();
        const Mat var_zeta2 = 0.5 * (m.var_z * mats.score_second_moment +
                                     mats.grad_block * mats.grad_block.transpose());
        cov_x = sigma_oracle / static_cast<double>(G) +
                2.0 * var_zeta2 / (static_cast<double>(G) * static_cast<double>(G - 1));
        break;
      }
      case BaselineKind::Tag::kCustom:
        throw RejectionError("gradient_covariance: custom baseline not supported in exact mode");
    }
    cov.block(off, off, bs, bs) += m.weight * cov_x;
    // prompt-sampling variance: E[g(X) g(X)^T] - g g^T, assembled blockwise
    cov.block(off, off, bs, bs) += m.weight * mats.grad_block * mats.grad_block.transpose();
  }
  cov -= g_bar * g_bar.transpose();
  return cov / static_cast<double>(B);
}

std::vector<double> chi2_mixture_sample(const std::vector<double>& weights, int count, Rng& rng) {
  for (double w : weights)
    if (w < 0.0) throw RejectionError("chi2_mixture_sample: weights must be >= 0");
  std::vector<double> out(static_cast<std::size_t>(count));
  for (auto& v : out) {
    double s = 0.0;
    for (double w : weights) s += w * rng.chi2_1();
    v = s;
  }
  return out;
}

std::string AsymptoticsReport::to_json(bool include_samples) const {
  nlohmann::json j;
  j["rank"] = rank;
  j["lambdas"] = lambdas;
  auto mat_to_json = [](const Mat& m) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      auto row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
      rows.push_back(row);
    }
    return rows;
  };
  j["Q"] = mat_to_json(q);
  j["Gamma"] = mat_to_json(gamma);
  j["Omega"] = mat_to_json(omega);
  j["Sigma"] = mat_to_json(sigma);
  j["weights"] = weights;
  j["ks_stat"] = ks_stat;
  j["min_eig_omega"] = min_eig_omega;
  j["runs"] = runs;
  j["iterations"] = iterations;
  j["mixture_samples"] = mixture_samples;
  if (include_samples) j["scaled_gaps"] = scaled_gaps;
  return j.dump(2);
}

AsymptoticsReport asymptotics_pipeline(const SyntheticQuadratic& quad,
                                       const AsymptoticsConfig& config, std::uint64_t seed) {
  quad.validate();
  AsymptoticsReport report;
  report.runs = config.runs;
  report.iterations = config.n;
  report.mixture_samples = config.mixture_samples;
  report.gamma = quad.gamma;

  // (i) spectrum of -H = M
  const Spectrum spec = hessian_spectrum(-quad.m);
  report.rank = spec.rank;
  report.lambdas = spec.lambdas;
  report.q = spec.q;
  if (spec.rank == 0) throw RejectionError("asymptotics_pipeline: curvature has rank 0");

  // stability: beta > 1/(2 min lambda)
  const double min_lambda = spec.lambdas.back();
  if (!(config.beta > 0.5 / min_lambda))
    throw RejectionError("asymptotics_pipeline: beta " + std::to_string(config.beta) +
                         " violates beta > 1/(2*" + std::to_string(min_lambda) + ")");

  // (ii) projected noise covariance
  report.omega = spec.q.transpose() * quad.gamma * spec.q;
  Eigen::SelfAdjointEigenSolver<Mat> oeig(report.omega);
  report.min_eig_omega = oeig.eigenvalues()(0);

  // (iii) CLT covariance via the Lyapunov equation; the quadratic variation
  // of the scaled noise is beta^2 Omega
  Mat a = Mat::Zero(spec.rank, spec.rank);
  for (int k = 0; k < spec.rank; ++k)
    a(k, k) = config.beta * spec.lambdas[static_cast<std::size_t>(k)] - 0.5;
  const bool zero_noise = report.omega.cwiseAbs().maxCoeff() == 0.0;
  if (zero_noise) {
    report.sigma = Mat::Zero(spec.rank, spec.rank);
  } else {
    report.sigma =
        solve_lyapunov(a, (config.beta * config.beta) * report.omega);
  }

  // (iv) mixture weights
  report.weights = chi2_mixture_weights(report.sigma, report.lambdas);

  // (v)-(vi) trajectories and the scaled-gap sample
  Vec theta0 = config.theta0;
  if (theta0.size() == 0) theta0 = quad.theta_star + Vec::Ones(quad.dim());
  if (theta0.size() != quad.dim())
    throw RejectionError("asymptotics_pipeline: theta0 dimension mismatch");
  report.scaled_gaps.resize(static_cast<std::size_t>(config.runs));
  QuadraticNoise noise(quad);
  parallel_for(config.runs, [&](std::int64_t r) {
    Rng rng(seed, static_cast<std::uint64_t>(r));
    Vec theta = theta0;
    for (int i = 0; i < config.n; ++i)
      theta += config.beta / static_cast<double>(i + 1) * (quad.gradient(theta) + noise.draw(rng));
    report.scaled_gaps[static_cast<std::size_t>(r)] =
        static_cast<double>(config.n) * quad.gap(theta);
  });

  // (vii) two-sample KS against the mixture
  Rng mix_rng(seed, 0x6d69787475726530ULL);
  const std::vector<double> mixture =
      chi2_mixture_sample(report.weights, config.mixture_samples, mix_rng);
  report.ks_stat = ks_two_sample(report.scaled_gaps, mixture);
  return report;
}

std::vector<double> conditional_uncorrelation_diagnostic(const PolicyParams& p,
                                                         const Environment& env) {
  const PolicyShape& shape = *p.shape;
  std::vector<double> corrs;
  for (int x = 0; x < env.prompt_count(); ++x) {
    const std::vector<double> probs = softmax_table(p, x);
    double e_w = 0, e_z = 0, e_wz = 0, e_ww = 0, e_zz = 0;
    for (int o = 0; o < env.output_count(); ++o) {
      const auto& path = shape.paths[static_cast<std::size_t>(o)];
      double prob = 1.0;
      double ssq = 0.0;
      for (const auto& [state, tok] : path) {
        const double* prow = probs.data() + static_cast<std::int64_t>(state) * shape.vocab;
        prob *= prow[tok];
        for (int a = 0; a < shape.vocab; ++a) {
          const double e = (a == tok ? 1.0 : 0.0) - prow[a];
          ssq += e * e;
        }
      }
      const double z = env.reward_by_index(x, o);
      e_w += prob * ssq;
      e_z += prob * z;
      e_wz += prob * ssq * z;
      e_ww += prob * ssq * ssq;
      e_zz += prob * z * z;
    }
    const double cov = e_wz - e_w * e_z;
    const double vw = e_ww - e_w * e_w;
    const double vz = e_zz - e_z * e_z;
    corrs.push_back((vw > 0 && vz > 0) ? cov / std::sqrt(vw * vz) : 0.0);
  }
  return corrs;
}

}  // namespace grpolab

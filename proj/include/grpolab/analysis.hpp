#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "grpolab/exact.hpp"
#include "grpolab/linalg.hpp"
#include "grpolab/optim.hpp"
#include "grpolab/quadratic.hpp"

namespace grpolab {

struct MseReport {
  std::string estimator;
  int B = 0;
  int G = 0;
  int replications = 0;
  double mse_mean = 0.0;
  double ci_halfwidth = 0.0;
  std::optional<double> exact_mse;
};

MseReport mse_monte_carlo(const PolicyParams& p, const Environment& env,
                          const BaselineKind& estimator, int B, int G, int reps,
                          std::uint64_t seed, bool attach_exact = true);

struct OracleCurveRow {
  int G = 0;
  double mse_loo = 0.0;
  double mse_oracle = 0.0;
  double difference = 0.0;
};

struct OracleCurve {
  std::vector<OracleCurveRow> rows;
  double difference_slope = 0.0;      // log-log fit of difference vs G
  double oracle_times_g_spread = 0.0; // max/min of MSE(oracle)*G minus 1
};

// exact per-prompt-averaged MSEs of the two estimators across a G grid
OracleCurve oracle_convergence_curve(const PolicyParams& p, const Environment& env,
                                     const std::vector<int>& g_list);

struct ScalingEstimate {
  double c1 = 0.0;  // sup_theta E ||g(X) - g||^2
  double c2 = 0.0;  // sup_theta trace Sigma_oracle
  double c3 = 0.0;  // second-order coefficient from two-G interpolation
  double g_star = 0.0;
  bool g_star_infinite = false;  // raised when c1 = 0 (single-prompt env)
  int g_fit_lo = 0;
  int g_fit_hi = 0;
  int probes = 0;
};

ScalingEstimate estimate_constants(const std::vector<PolicyParams>& probes,
                                   const Environment& env, int g_fit_lo = 4, int g_fit_hi = 64);

struct ScalingShapeRow {
  int G = 0;
  int B = 0;
  double exact_mse = 0.0;
  double model_mse = 0.0;
  double rel_err = 0.0;
};

// Eq.-12 shape check: exact fixed-budget MSE against c1 G/N + c2/N + c3/(N G)
std::vector<ScalingShapeRow> scaling_shape_table(const PolicyParams& probe,
                                                 const Environment& env,
                                                 const ScalingEstimate& constants, int budget,
                                                 const std::vector<int>& g_grid);

struct SweepCell {
  int G = 0;
  int B = 0;
  int runs = 0;
  double mean_final_j = 0.0;
  double ci_j = 0.0;
  double mean_final_gap = 0.0;
  double ci_gap = 0.0;
  int clip_count = 0;  // box-projection hits across all runs
};

struct GroupSweepResult {
  std::vector<SweepCell> cells;
  int best_g = 0;  // argmax of mean final J
};

GroupSweepResult group_size_sweep(const Environment& env, const PolicyParams& init, int budget,
                                  const std::vector<int>& g_list, const TrainConfig& tmpl,
                                  int runs, std::uint64_t seed);

struct BiasCurveRow {
  double displacement = 0.0;
  double bias_norm = 0.0;
  double mc_halfwidth = 0.0;  // Monte-Carlo CI on the bias norm
};

struct BiasCurve {
  std::vector<BiasCurveRow> rows;
  double slope = 0.0;  // log-log fit of bias norm vs displacement (s > 0 rows)
};

// bias of the practical estimator against the sequential-ratio ground truth
BiasCurve practical_bias_curve(const Environment& env, const PolicyParams& p_old,
                               const std::vector<double>& direction,
                               const std::vector<double>& displacements, double kappa, int B,
                               int G, int reps, std::uint64_t seed);

// enumerated ground-truth gradient with sequential importance ratios
std::vector<double> practical_ground_truth(const PolicyParams& p_cur, const PolicyParams& p_old,
                                           const Environment& env, double kappa);

struct ArcsinReport {
  double max_rel_err = 0.0;
  std::vector<double> prompt_values;   // V(x) per prompt
  std::vector<double> prompt_factors;  // exact finite-G factor vs 1/std
  int G = 0;
};

// exact expectation of the normalized-advantage estimator at theta_old
// against finite differences of E[2 arcsin(sqrt V)]; binary rewards only
ArcsinReport arcsin_gradient_check(const PolicyParams& p, const Environment& env, int G,
                                   double delta = 0.05, double fd_step = 1e-5);

enum class CovarianceMode { kExact, kMonteCarlo };

// covariance of the gradient estimate at fixed parameters
Mat gradient_covariance(const PolicyParams& p, const Environment& env,
                        const BaselineKind& estimator, int B, int G,
                        CovarianceMode mode = CovarianceMode::kExact, int reps = 0,
                        std::uint64_t seed = 0);

std::vector<double> chi2_mixture_sample(const std::vector<double>& weights, int count, Rng& rng);

struct AsymptoticsReport {
  int rank = 0;
  std::vector<double> lambdas;
  Mat q;
  Mat gamma;
  Mat omega;        // Q^T Gamma Q
  Mat sigma;        // Lyapunov solution for the CLT covariance
  std::vector<double> weights;
  double ks_stat = 0.0;
  double min_eig_omega = 0.0;
  int runs = 0;
  int iterations = 0;
  int mixture_samples = 0;
  std::vector<double> scaled_gaps;  // {n * gap} over runs
  std::string to_json(bool include_samples = false) const;
};

struct AsymptoticsConfig {
  double beta = 1.0;
  int n = 10000;
  int runs = 2000;
  int mixture_samples = 100000;
  Vec theta0;  // empty: theta_star + 1 in every coordinate
};

AsymptoticsReport asymptotics_pipeline(const SyntheticQuadratic& quad,
                                       const AsymptoticsConfig& config, std::uint64_t seed);

// Assumption-5 diagnostic: correlation of ||score||^2 with Z, per prompt,
// by exact enumeration
std::vector<double> conditional_uncorrelation_diagnostic(const PolicyParams& p,
                                                         const Environment& env);

}  // namespace grpolab

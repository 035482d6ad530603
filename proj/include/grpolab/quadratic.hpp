#pragma once

#include <cstdint>
#include <vector>

#include "grpolab/linalg.hpp"
#include "grpolab/optim.hpp"
#include "grpolab/rng.hpp"

namespace grpolab {

// Quadratic landscape J(theta) = -1/2 (theta - t*)^T M (theta - t*) with a
// possibly singular psd curvature M and an additive-noise gradient oracle
// of covariance Gamma.  An admissible instance of the abstract ascent update
// with exact gap, used for the rate and asymptotics experiments.
struct SyntheticQuadratic {
  Mat m;            // symmetric psd
  Vec theta_star;
  Mat gamma;        // noise covariance (zero matrix: deterministic oracle)

  int dim() const { return static_cast<int>(m.rows()); }
  Vec gradient(const Vec& theta) const { return -(m * (theta - theta_star)); }
  double objective(const Vec& theta) const {
    const Vec d = theta - theta_star;
    return -0.5 * d.dot(m * d);
  }
  double gap(const Vec& theta) const { return -objective(theta); }

  Landscape landscape() const;
  void validate() const;
};

// noise sampler: caches Gamma^{1/2}
class QuadraticNoise {
 public:
  explicit QuadraticNoise(const SyntheticQuadratic& quad);
  Vec draw(Rng& rng) const;

 private:
  Mat root_;
};

struct QuadraticRunResult {
  double final_gap = 0.0;
  Vec final_theta;
};

// stochastic ascent with eta_i = beta / i (update i uses eta_{i+1})
QuadraticRunResult run_quadratic_inverse_iter(const SyntheticQuadratic& quad, const Vec& theta0,
                                              double beta, int n, Rng& rng);

// per-recorded-iteration mean gaps over many runs, either schedule
struct QuadraticSweepResult {
  std::vector<int> iters;
  std::vector<double> mean_gap;
  std::vector<double> ci_halfwidth;
};

QuadraticSweepResult quadratic_gap_curve(const SyntheticQuadratic& quad, const Vec& theta0,
                                         const LrSchedule& schedule, int n,
                                         const std::vector<int>& record_iters, int runs,
                                         std::uint64_t seed);

}  // namespace grpolab

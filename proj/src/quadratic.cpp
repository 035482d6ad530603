#include "grpolab/quadratic.hpp"

#include <algorithm>
#include <cmath>

#include "grpolab/parallel.hpp"
#include "grpolab/stats.hpp"

namespace grpolab {

void SyntheticQuadratic::validate() const {
  if (m.rows() != m.cols()) throw ValidationError("quadratic: M must be square");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw ValidationError("quadratic: M must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> eig(m);
  if (eig.eigenvalues()(0) < -1e-10) throw ValidationError("quadratic: M must be psd");
  if (theta_star.size() != m.rows()) throw ValidationError("quadratic: theta_star size mismatch");
  if (gamma.rows() != m.rows() || gamma.cols() != m.rows())
    throw ValidationError("quadratic: Gamma size mismatch");
  Eigen::SelfAdjointEigenSolver<Mat> geig(gamma);
  if (geig.eigenvalues()(0) < -1e-10) throw ValidationError("quadratic: Gamma must be psd");
}

Landscape SyntheticQuadratic::landscape() const {
  Landscape l;
  l.dim = dim();
  l.gradient = [this](const std::vector<double>& theta) {
    return from_vec(gradient(to_vec(theta)));
  };
  l.gap = [this](const std::vector<double>& theta) { return gap(to_vec(theta)); };
  return l;
}

QuadraticNoise::QuadraticNoise(const SyntheticQuadratic& quad) {
  root_ = matrix_sqrt_psd(quad.gamma);
}

Vec QuadraticNoise::draw(Rng& rng) const {
  Vec z(root_.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return root_ * z;
}

QuadraticRunResult run_quadratic_inverse_iter(const SyntheticQuadratic& quad, const Vec& theta0,
                                              double beta, int n, Rng& rng) {
  QuadraticNoise noise(quad);
  Vec theta = theta0;
  for (int i = 0; i < n; ++i) {
    const double eta = beta / static_cast<double>(i + 1);
    theta += eta * (quad.gradient(theta) + noise.draw(rng));
  }
  QuadraticRunResult out;
  out.final_gap = quad.gap(theta);
  out.final_theta = theta;
  return out;
}

QuadraticSweepResult quadratic_gap_curve(const SyntheticQuadratic& quad, const Vec& theta0,
                                         const LrSchedule& schedule, int n,
                                         const std::vector<int>& record_iters, int runs,
                                         std::uint64_t seed) {
  QuadraticNoise noise(quad);
  std::vector<int> iters = record_iters;
  std::sort(iters.begin(), iters.end());
  const std::size_t n_rec = iters.size();

  // gaps[run][record point]
  std::vector<std::vector<double>> gaps(static_cast<std::size_t>(runs),
                                        std::vector<double>(n_rec, 0.0));
  parallel_for(runs, [&](std::int64_t r) {
    Rng rng(seed, static_cast<std::uint64_t>(r));
    Vec theta = theta0;
    std::size_t next = 0;
    for (int i = 0; i < n && next < n_rec; ++i) {
      theta += schedule.rate(i) * (quad.gradient(theta) + noise.draw(rng));
      while (next < n_rec && iters[next] == i + 1) {
        gaps[static_cast<std::size_t>(r)][next] = quad.gap(theta);
        ++next;
      }
    }
  });

  QuadraticSweepResult out;
  out.iters = iters;
  for (std::size_t k = 0; k < n_rec; ++k) {
    std::vector<double> col(static_cast<std::size_t>(runs));
    for (int r = 0; r < runs; ++r) col[static_cast<std::size_t>(r)] = gaps[static_cast<std::size_t>(r)][k];
    const MeanCi ci = mean_ci(col);
    out.mean_gap.push_back(ci.mean);
    out.ci_halfwidth.push_back(ci.ci_halfwidth);
  }
  return out;
}

}  // namespace grpolab

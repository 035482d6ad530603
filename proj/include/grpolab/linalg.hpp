#pragma once

#include <Eigen/Dense>
#include <vector>

#include "grpolab/errors.hpp"

namespace grpolab {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

Vec to_vec(const std::vector<double>& v);
std::vector<double> from_vec(const Vec& v);
Mat to_mat(const std::vector<std::vector<double>>& rows);

struct Spectrum {
  int rank = 0;
  std::vector<double> lambdas;  // positive eigenvalues of -H, descending
  Mat q;                        // d x rank, orthonormal columns
};

// Eigenstructure of -H for a symmetric negative-semidefinite H at an
// optimum.  Rejects when -H has an eigenvalue below -rank_tol (H not
// negative semidefinite) or H is materially asymmetric.
Spectrum hessian_spectrum(const Mat& h, double rank_tol = -1.0, double symmetry_tol = 1e-6);

// Solves A^T Sigma + Sigma A = Omega for general A with spectrum in the
// open right half plane; rejects otherwise, naming the offending eigenvalue.
Mat solve_lyapunov(const Mat& a, const Mat& omega, double residual_tol = 1e-8);

// eigenvalues of (1/2) Sigma^{1/2} diag(lambdas) Sigma^{1/2}, non-increasing,
// clamped to >= 0 (tolerating -1e-10 numerical dips)
std::vector<double> chi2_mixture_weights(const Mat& sigma, const std::vector<double>& lambdas);

Mat matrix_sqrt_psd(const Mat& m);

}  // namespace grpolab

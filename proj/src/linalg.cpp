#include "grpolab/linalg.hpp"

#include <algorithm>
#include <sstream>

namespace grpolab {

Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> from_vec(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Mat to_mat(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Mat(0, 0);
  Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

Spectrum hessian_spectrum(const Mat& h, double rank_tol, double symmetry_tol) {
  if (h.rows() != h.cols()) throw RejectionError("hessian_spectrum: matrix must be square");
  const double asym = (h - h.transpose()).cwiseAbs().maxCoeff();
  if (asym > symmetry_tol)
    throw RejectionError("hessian_spectrum: matrix asymmetry " + std::to_string(asym) +
                         " exceeds tolerance");
  const Mat neg_h = -0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(neg_h);
  if (eig.info() != Eigen::Success) throw RejectionError("hessian_spectrum: eigensolver failed");
  const Vec vals = eig.eigenvalues();  // ascending
  const double max_abs = std::max(std::abs(vals(0)), std::abs(vals(vals.size() - 1)));
  const double tol = rank_tol > 0.0 ? rank_tol : 1e-6 * std::max(max_abs, 1e-300);
  if (vals(0) < -tol) {
    std::ostringstream msg;
    msg << "hessian_spectrum: -H has eigenvalue " << vals(0)
        << " below -tol; H is not negative semidefinite at an optimum";
    throw RejectionError(msg.str());
  }
  Spectrum s;
  for (Eigen::Index i = vals.size() - 1; i >= 0; --i) {
    if (vals(i) > tol) {
      s.lambdas.push_back(vals(i));
    }
  }
  s.rank = static_cast<int>(s.lambdas.size());
  s.q.resize(h.rows(), s.rank);
  for (int k = 0; k < s.rank; ++k)
    s.q.col(k) = eig.eigenvectors().col(vals.size() - 1 - k);  // descending order
  return s;
}

Mat solve_lyapunov(const Mat& a, const Mat& omega, double residual_tol) {
  if (a.rows() != a.cols() || omega.rows() != omega.cols() || a.rows() != omega.rows())
    throw RejectionError("solve_lyapunov: dimension mismatch");
  const Eigen::Index n = a.rows();
  const Eigen::EigenSolver<Mat> eig(a);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (eig.eigenvalues()(i).real() <= 0.0) {
      std::ostringstream msg;
      msg << "solve_lyapunov: eigenvalue " << eig.eigenvalues()(i).real()
          << (eig.eigenvalues()(i).imag() != 0.0 ? " (+imag)" : "")
          << " of A is not in the open right half plane (stability condition beta > 1/(2 mu))";
      throw RejectionError(msg.str());
    }
  }

  // vectorized solve: (I (x) A^T + A^T (x) I) vec(Sigma) = vec(Omega)
  Mat big = Mat::Zero(n * n, n * n);
  const Mat at = a.transpose();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k) {
        big(i + n * j, k + n * j) += at(i, k);  // A^T Sigma
        big(i + n * j, i + n * k) += a(k, j);   // Sigma A
      }
  Vec rhs(n * n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) rhs(i + n * j) = omega(i, j);
  const Vec sol = big.partialPivLu().solve(rhs);
  Mat sigma(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) sigma(i, j) = sol(i + n * j);
  sigma = 0.5 * (sigma + sigma.transpose()).eval();

  const double res = (at * sigma + sigma * a - omega).cwiseAbs().maxCoeff();
  const double scale = std::max(omega.cwiseAbs().maxCoeff(), 1e-300);
  if (res > residual_tol * scale)
    throw RejectionError("solve_lyapunov: residual " + std::to_string(res) +
                         " exceeds tolerance");
  return sigma;
}

Mat matrix_sqrt_psd(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (m + m.transpose()));
  if (eig.info() != Eigen::Success) throw RejectionError("matrix_sqrt_psd: eigensolver failed");
  Vec vals = eig.eigenvalues();
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (vals(i) < -1e-10 * std::max(1.0, std::abs(vals(vals.size() - 1))))
      throw RejectionError("matrix_sqrt_psd: matrix is not positive semidefinite");
    vals(i) = std::sqrt(std::max(0.0, vals(i)));
  }
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

std::vector<double> chi2_mixture_weights(const Mat& sigma, const std::vector<double>& lambdas) {
  const Eigen::Index r = sigma.rows();
  if (static_cast<std::size_t>(r) != lambdas.size() || sigma.cols() != r)
    throw RejectionError("chi2_mixture_weights: dimension mismatch");
  for (double l : lambdas)
    if (!(l > 0.0)) throw RejectionError("chi2_mixture_weights: lambdas must be positive");
  const Mat root = matrix_sqrt_psd(sigma);
  Vec lam(r);
  for (Eigen::Index i = 0; i < r; ++i) lam(i) = lambdas[static_cast<std::size_t>(i)];
  const Mat w = 0.5 * root * lam.asDiagonal() * root;
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (w + w.transpose()));
  std::vector<double> weights;
  for (Eigen::Index i = r - 1; i >= 0; --i) {
    const double v = eig.eigenvalues()(i);
    if (v < -1e-10)
      throw RejectionError("chi2_mixture_weights: negative weight " + std::to_string(v));
    weights.push_back(std::max(0.0, v));
  }
  return weights;
}

}  // namespace grpolab

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace grpolab {

struct MeanCi {
  double mean = 0.0;
  double ci_halfwidth = 0.0;  // 95%, normal approximation
  std::size_t count = 0;
};

MeanCi mean_ci(std::span<const double> samples);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

// least-squares line through (x, y)
LineFit fit_line(std::span<const double> x, std::span<const double> y);

// least-squares line through (log x, log y); requires positive inputs
LineFit fit_loglog(std::span<const double> x, std::span<const double> y);

// two-sample Kolmogorov-Smirnov distance
double ks_two_sample(std::vector<double> a, std::vector<double> b);

// Pearson correlation
double correlation(std::span<const double> a, std::span<const double> b);

// small dense-vector helpers used throughout
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);            // squared l2 norm
double norm(std::span<const double> a);
double max_abs(std::span<const double> a);
void axpy(double alpha, std::span<const double> x, std::span<double> y);  // y += alpha x
std::vector<double> vec_sub(std::span<const double> a, std::span<const double> b);

}  // namespace grpolab

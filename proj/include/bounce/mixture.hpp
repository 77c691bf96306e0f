#pragma once

#include <Eigen/Dense>
#include <vector>

#include "bounce/rng.hpp"

namespace bounce::mdn {

/// Diagonal multivariate Gaussian.
struct GaussianD {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;

  int dim() const { return static_cast<int>(mean.size()); }
  void validate() const;
};

/// Mixture of K diagonal Gaussians over a D-dimensional target.
struct MixtureOfGaussians {
  Eigen::VectorXd weights;   // K, nonnegative, sums to 1
  Eigen::MatrixXd means;     // K x D
  Eigen::MatrixXd variances; // K x D, strictly positive

  int components() const { return static_cast<int>(weights.size()); }
  int dim() const { return static_cast<int>(means.cols()); }
  void validate() const;
};

double log_pdf(const MixtureOfGaussians& m, const Eigen::VectorXd& x);
double log_pdf(const GaussianD& g, const Eigen::VectorXd& x);

/// Moment-matched single-Gaussian projection: exact first two moments.
GaussianD project_to_gaussian(const MixtureOfGaussians& m);

/// Precision-weighted density product, renormalized: var^-1 = sum var_i^-1,
/// mean = var * sum(mean_i / var_i), per dimension.
GaussianD multiply_gaussians(const std::vector<GaussianD>& factors);

/// Ancestral sampling: component by weight, then the component's Gaussian.
/// Returns n rows of D columns.
Eigen::MatrixXd sample_mixture(const MixtureOfGaussians& m, int n, Rng& rng);

/// Mode by dense grid scan (201 points per dimension) over the search box,
/// refined by per-coordinate ternary search around the best cell. box is
/// D x 2 (lower, upper).
Eigen::VectorXd mixture_mode(const MixtureOfGaussians& m, const Eigen::MatrixXd& box);

/// Probability mass of the mixture inside an axis-aligned box (product of
/// per-dimension normal CDF differences, exact for diagonal components).
double box_mass(const MixtureOfGaussians& m, const Eigen::MatrixXd& box);

inline Eigen::VectorXd clamp_to_box(Eigen::VectorXd x, const Eigen::MatrixXd& box) {
  for (int d = 0; d < x.size(); ++d)
    x[d] = std::clamp(x[d], box(d, 0), box(d, 1));
  return x;
}

}  // namespace bounce::mdn

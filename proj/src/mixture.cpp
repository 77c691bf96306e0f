#include "bounce/mixture.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "bounce/stats.hpp"

namespace bounce::mdn {

void GaussianD::validate() const {
  if (mean.size() != variance.size())
    throw std::invalid_argument("GaussianD: mean/variance dimension mismatch");
  if ((variance.array() <= 0.0).any())
    throw std::invalid_argument("GaussianD: variance must be positive");
}

void MixtureOfGaussians::validate() const {
  const int k = components();
  if (k < 1 || means.rows() != k || variances.rows() != k ||
      means.cols() != variances.cols())
    throw std::invalid_argument("MixtureOfGaussians: inconsistent shapes");
  if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("MixtureOfGaussians: weights must form a simplex");
  if ((variances.array() <= 0.0).any())
    throw std::invalid_argument("MixtureOfGaussians: variances must be positive");
}

double log_pdf(const GaussianD& g, const Eigen::VectorXd& x) {
  const Eigen::ArrayXd r = (x - g.mean).array();
  return -0.5 * (r * r / g.variance.array() + g.variance.array().log() +
                 std::log(2.0 * kPi))
              .sum();
}

double log_pdf(const MixtureOfGaussians& m, const Eigen::VectorXd& x) {
  const int k = m.components();
  Eigen::VectorXd terms(k);
  for (int i = 0; i < k; ++i) {
    const Eigen::ArrayXd r = (x.transpose() - m.means.row(i)).array();
    const Eigen::ArrayXd v = m.variances.row(i).array();
    const double logn = -0.5 * (r * r / v + v.log() + std::log(2.0 * kPi)).sum();
    terms[i] = (m.weights[i] > 0.0 ? std::log(m.weights[i]) : -std::numeric_limits<double>::infinity()) + logn;
  }
  const double mx = terms.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((terms.array() - mx).exp().sum());
}

GaussianD project_to_gaussian(const MixtureOfGaussians& m) {
  m.validate();
  const int d = m.dim();
  GaussianD g;
  g.mean = Eigen::VectorXd::Zero(d);
  g.variance = Eigen::VectorXd::Zero(d);
  for (int k = 0; k < m.components(); ++k)
    g.mean += m.weights[k] * m.means.row(k).transpose();
  for (int k = 0; k < m.components(); ++k) {
    const Eigen::ArrayXd mu = m.means.row(k).transpose().array();
    g.variance.array() +=
        m.weights[k] * (m.variances.row(k).transpose().array() + mu * mu);
  }
  g.variance.array() -= g.mean.array() * g.mean.array();
  g.variance = g.variance.cwiseMax(0.0);  // guard roundoff for collapsed mixtures
  return g;
}

GaussianD multiply_gaussians(const std::vector<GaussianD>& factors) {
  if (factors.empty()) throw std::invalid_argument("multiply_gaussians: empty factor list");
  const int d = factors.front().dim();
  Eigen::ArrayXd precision = Eigen::ArrayXd::Zero(d);
  Eigen::ArrayXd weighted_mean = Eigen::ArrayXd::Zero(d);
  for (const auto& g : factors) {
    if (g.dim() != d) throw std::invalid_argument("multiply_gaussians: dimension mismatch");
    g.validate();
    precision += 1.0 / g.variance.array();
    weighted_mean += g.mean.array() / g.variance.array();
  }
  GaussianD out;
  out.variance = (1.0 / precision).matrix();
  out.mean = (weighted_mean / precision).matrix();
  return out;
}

Eigen::MatrixXd sample_mixture(const MixtureOfGaussians& m, int n, Rng& rng) {
  m.validate();
  const int d = m.dim();
  Eigen::MatrixXd out(n, d);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    int k = 0;
    double acc = 0.0;
    for (; k < m.components() - 1; ++k) {
      acc += m.weights[k];
      if (u < acc) break;
    }
    for (int j = 0; j < d; ++j)
      out(i, j) = m.means(k, j) + std::sqrt(m.variances(k, j)) * rng.gauss();
  }
  return out;
}

namespace {
constexpr int kGridPointsPerDim = 201;

double eval_at(const MixtureOfGaussians& m, const Eigen::VectorXd& x) {
  return log_pdf(m, x);
}
}  // namespace

Eigen::VectorXd mixture_mode(const MixtureOfGaussians& m, const Eigen::MatrixXd& box) {
  m.validate();
  const int d = m.dim();
  if (box.rows() != d || box.cols() != 2)
    throw std::invalid_argument("mixture_mode: box must be D x 2");

  // Dense scan.
  Eigen::VectorXd best(d);
  double best_val = -std::numeric_limits<double>::infinity();
  std::vector<int> idx(d, 0);
  Eigen::VectorXd x(d);
  const auto coord = [&](int dim, int i) {
    return box(dim, 0) + (box(dim, 1) - box(dim, 0)) * i / double(kGridPointsPerDim - 1);
  };
  while (true) {
    for (int j = 0; j < d; ++j) x[j] = coord(j, idx[j]);
    const double v = eval_at(m, x);
    if (v > best_val) {
      best_val = v;
      best = x;
    }
    int j = 0;
    for (; j < d; ++j) {
      if (++idx[j] < kGridPointsPerDim) break;
      idx[j] = 0;
    }
    if (j == d) break;
  }

  // Per-coordinate ternary refinement within one grid cell of the best point.
  for (int sweep = 0; sweep < 3; ++sweep) {
    for (int j = 0; j < d; ++j) {
      const double cell = (box(j, 1) - box(j, 0)) / double(kGridPointsPerDim - 1);
      double lo = std::max(box(j, 0), best[j] - cell);
      double hi = std::min(box(j, 1), best[j] + cell);
      for (int it = 0; it < 60; ++it) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        Eigen::VectorXd x1 = best, x2 = best;
        x1[j] = m1;
        x2[j] = m2;
        if (eval_at(m, x1) < eval_at(m, x2))
          lo = m1;
        else
          hi = m2;
      }
      best[j] = 0.5 * (lo + hi);
      best_val = eval_at(m, best);
    }
  }
  return best;
}

double box_mass(const MixtureOfGaussians& m, const Eigen::MatrixXd& box) {
  m.validate();
  double mass = 0.0;
  for (int k = 0; k < m.components(); ++k) {
    double comp = 1.0;
    for (int j = 0; j < m.dim(); ++j) {
      const double sd = std::sqrt(m.variances(k, j));
      comp *= normal_cdf((box(j, 1) - m.means(k, j)) / sd) -
              normal_cdf((box(j, 0) - m.means(k, j)) / sd);
    }
    mass += m.weights[k] * comp;
  }
  return mass;
}

}  // namespace bounce::mdn

#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "bounce/sim.hpp"

namespace bounce::features {

/// The 4-dim observation extracted from the first three bounces of a
/// trajectory: inter-bounce time ratio, the two inter-bounce distances, and
/// the signed turn angle at the middle bounce. Raw physical units; any
/// standardization happens inside the inference models.
struct FeatureVector {
  double t_ratio = 0.0;  // t2 / t1, dimensionless
  double d1 = 0.0;       // m
  double d2 = 0.0;       // m
  double alpha = 0.0;    // rad, in (-pi, pi]

  Eigen::Vector4d to_vector() const { return {t_ratio, d1, d2, alpha}; }
  static FeatureVector from_vector(const Eigen::Vector4d& v) {
    return {v[0], v[1], v[2], v[3]};
  }
};

/// One training sample for the learned transition function: the (time,
/// distance) of a bounce-to-bounce hop, and the following hop's time,
/// distance and turn angle.
struct TransitionPair {
  double t_in = 0.0;       // s
  double d_in = 0.0;       // m
  double t_next = 0.0;     // s
  double d_next = 0.0;     // m
  double alpha_next = 0.0; // rad
};

/// Signed angle from v1 to v2 in (-pi, pi]: magnitude from the normalized dot
/// product, sign from the 2-D cross product (counterclockwise positive).
double signed_angle(const Eigen::Vector2d& v1, const Eigen::Vector2d& v2);

FeatureVector extract_features(std::span<const sim::BounceEvent> bounces);

std::vector<TransitionPair> extract_transition_pairs(std::span<const sim::BounceEvent> bounces);

/// Displacements below this are treated as degenerate (vertical bounce):
/// the turn angle is defined as 0 there.
inline constexpr double kDegenerateDistance = 1e-9;

}  // namespace bounce::features

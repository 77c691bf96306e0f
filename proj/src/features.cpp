#include "bounce/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bounce::features {

double signed_angle(const Eigen::Vector2d& v1, const Eigen::Vector2d& v2) {
  const double n1 = v1.norm(), n2 = v2.norm();
  if (n1 <= 0.0 || n2 <= 0.0)
    throw std::invalid_argument("signed_angle: zero-length input");
  const double cosang = std::clamp(v1.dot(v2) / (n1 * n2), -1.0, 1.0);
  const double cross = v1.x() * v2.y() - v2.x() * v1.y();
  const double sign = cross < 0.0 ? -1.0 : 1.0;  // cross == 0 maps pi to +pi
  return sign * std::acos(cosang);
}

namespace {
void check_ordered(std::span<const sim::BounceEvent> bounces, std::size_t needed) {
  if (bounces.size() < needed)
    throw std::invalid_argument("insufficient bounce observations");
  for (std::size_t i = 1; i < bounces.size(); ++i) {
    if (!(bounces[i].time > bounces[i - 1].time))
      throw std::invalid_argument("bounce times must strictly increase");
  }
}

double turn_angle(const Eigen::Vector2d& p1, const Eigen::Vector2d& p2) {
  if (p1.norm() < kDegenerateDistance || p2.norm() < kDegenerateDistance) return 0.0;
  return signed_angle(p1, p2);
}
}  // namespace

FeatureVector extract_features(std::span<const sim::BounceEvent> bounces) {
  check_ordered(bounces, 3);
  const double t1 = bounces[1].time - bounces[0].time;
  const double t2 = bounces[2].time - bounces[1].time;
  const Eigen::Vector2d p1 = bounces[1].position - bounces[0].position;
  const Eigen::Vector2d p2 = bounces[2].position - bounces[1].position;
  FeatureVector f;
  f.t_ratio = t2 / t1;
  f.d1 = p1.norm();
  f.d2 = p2.norm();
  f.alpha = turn_angle(p1, p2);
  return f;
}

std::vector<TransitionPair> extract_transition_pairs(std::span<const sim::BounceEvent> bounces) {
  check_ordered(bounces, 3);
  std::vector<TransitionPair> pairs;
  pairs.reserve(bounces.size() - 2);
  for (std::size_t i = 2; i < bounces.size(); ++i) {
    const Eigen::Vector2d p1 = bounces[i - 1].position - bounces[i - 2].position;
    const Eigen::Vector2d p2 = bounces[i].position - bounces[i - 1].position;
    TransitionPair pair;
    pair.t_in = bounces[i - 1].time - bounces[i - 2].time;
    pair.d_in = p1.norm();
    pair.t_next = bounces[i].time - bounces[i - 1].time;
    pair.d_next = p2.norm();
    pair.alpha_next = turn_angle(p1, p2);
    pairs.push_back(pair);
  }
  return pairs;
}

}  // namespace bounce::features

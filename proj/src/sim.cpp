#include "bounce/sim.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <stdexcept>

#include "bounce/stats.hpp"

namespace bounce::sim {

namespace {
constexpr double kMinBounceInterval = 1e-9;  // s; rejects the t=0 root when starting on the plane
constexpr double kMinImpactSpeed = 1e-7;     // m/s normal speed below which the ball has settled
}  // namespace

void SimParams::validate() const {
  if (!(e > 0.0 && e < 1.0)) throw std::invalid_argument("SimParams: e must be in (0,1)");
  if (!std::isfinite(log10_kappa)) throw std::invalid_argument("SimParams: log10_kappa must be finite");
  if (!(gravity > 0.0)) throw std::invalid_argument("SimParams: gravity must be positive");
  if (ball_radius < 0.0) throw std::invalid_argument("SimParams: ball_radius must be >= 0");
}

SurfacePlane::SurfacePlane(const Eigen::Vector3d& p, const Eigen::Vector3d& normal)
    : point(p), unit_normal(normal) {
  if (std::abs(unit_normal.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("SurfacePlane: normal must be unit length");
  // Deterministic in-plane basis: project the world axis least aligned with
  // the normal. For a horizontal plane this yields axis_u = x, axis_v = y.
  const Eigen::Vector3d ref = std::abs(unit_normal.x()) < 0.9
                                  ? Eigen::Vector3d::UnitX()
                                  : Eigen::Vector3d::UnitY();
  axis_u = (ref - ref.dot(unit_normal) * unit_normal).normalized();
  axis_v = unit_normal.cross(axis_u);
}

SurfacePlane SurfacePlane::horizontal(double z) {
  return SurfacePlane(Eigen::Vector3d(0, 0, z), Eigen::Vector3d::UnitZ());
}

SurfacePlane SurfacePlane::inclined(double angle_rad) {
  const Eigen::Vector3d n(-std::sin(angle_rad), 0.0, std::cos(angle_rad));
  return SurfacePlane(Eigen::Vector3d::Zero(), n);
}

Eigen::Vector3d sample_vmf(const Eigen::Vector3d& mu, double kappa, Rng& rng) {
  if (!(kappa > 0.0)) throw std::invalid_argument("sample_vmf: kappa must be positive");
  if (std::abs(mu.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("sample_vmf: mu must be a unit vector");

  double xi = rng.uniform();
  while (xi <= 0.0) xi = rng.uniform();

  // Inverse CDF of the polar cosine w = cos(angle to mu).
  double w;
  if (kappa > 500.0) {
    // exp(-2k) underflows; ln(xi + (1-xi)e^{-2k}) -> ln(xi)
    w = 1.0 + std::log(xi) / kappa;
  } else {
    w = 1.0 + std::log(xi + (1.0 - xi) * std::exp(-2.0 * kappa)) / kappa;
  }
  w = std::clamp(w, -1.0, 1.0);

  const double phi = 2.0 * kPi * rng.uniform();
  const double s = std::sqrt(std::max(0.0, 1.0 - w * w));
  const Eigen::Vector3d local(s * std::cos(phi), s * std::sin(phi), w);

  const Eigen::Quaterniond q =
      Eigen::Quaterniond::FromTwoVectors(Eigen::Vector3d::UnitZ(), mu);
  return (q * local).normalized();
}

Eigen::Vector3d apply_collision(const Eigen::Vector3d& v_in, const SurfacePlane& plane,
                                const SimParams& params, Rng& rng) {
  const Eigen::Vector3d& n = plane.unit_normal;
  const double vn = v_in.dot(n);
  if (!(vn < 0.0)) throw std::invalid_argument("apply_collision: velocity must point into the plane");

  Eigen::Vector3d u0;
  if (params.restitution_mode == RestitutionMode::kFullSpeed) {
    u0 = params.e * (v_in - 2.0 * vn * n);
  } else {
    u0 = v_in - (1.0 + params.e) * vn * n;
  }
  const double speed = u0.norm();
  if (speed <= 0.0) throw std::invalid_argument("apply_collision: zero exit speed");
  const Eigen::Vector3d mean_dir = u0 / speed;
  const double kappa = params.kappa();

  Eigen::Vector3d dir = sample_vmf(mean_dir, kappa, rng);
  for (int attempt = 0; attempt < 64 && dir.dot(n) <= 0.0; ++attempt) {
    dir = sample_vmf(mean_dir, kappa, rng);
  }
  if (dir.dot(n) <= 0.0) {
    dir = (dir - 2.0 * dir.dot(n) * n).normalized();  // mirror above the surface
  }
  return speed * dir;
}

std::optional<Impact> step_to_next_bounce(const BallState& state, const SurfacePlane& plane,
                                          double gravity) {
  const Eigen::Vector3d accel(0.0, 0.0, -gravity);
  const double s0 = plane.signed_distance(state.position);
  const double vn = state.velocity.dot(plane.unit_normal);
  const double half_an = 0.5 * accel.dot(plane.unit_normal);

  // Signed distance along the arc: s(t) = half_an t^2 + vn t + s0.
  double t_hit = -1.0;
  if (std::abs(half_an) < 1e-14) {
    if (vn < 0.0) {
      const double t = -s0 / vn;
      if (t > kMinBounceInterval) t_hit = t;
    }
  } else {
    const double disc = vn * vn - 4.0 * half_an * s0;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      const double q = -0.5 * (vn + std::copysign(sq, vn));
      double roots[2] = {q / half_an, std::abs(q) > 0.0 ? s0 / q : -1.0};
      for (double t : roots) {
        if (t > kMinBounceInterval && (t_hit < 0.0 || t < t_hit)) t_hit = t;
      }
    }
  }
  if (t_hit < 0.0) return std::nullopt;

  Impact impact;
  impact.state.position =
      state.position + state.velocity * t_hit + 0.5 * accel * t_hit * t_hit;
  impact.state.velocity = state.velocity + accel * t_hit;
  impact.state.time = state.time + t_hit;
  impact.event.time = impact.state.time;
  impact.event.position = plane.to_plane_coords(impact.state.position);
  return impact;
}

std::vector<BounceEvent> simulate_trajectory(const BallState& init, const SurfacePlane& plane,
                                             const SimParams& params, int n_bounces, Rng& rng) {
  params.validate();
  std::vector<BounceEvent> events;
  events.reserve(static_cast<std::size_t>(n_bounces));
  BallState state = init;
  while (static_cast<int>(events.size()) < n_bounces) {
    const auto impact = step_to_next_bounce(state, plane, params.gravity);
    if (!impact) throw SimulationError("trajectory terminated before requested bounce count");
    const double approach = impact->state.velocity.dot(plane.unit_normal);
    if (approach >= -kMinImpactSpeed) throw SimulationError("ball settled on the surface");
    events.push_back(impact->event);
    state = impact->state;
    state.velocity = apply_collision(impact->state.velocity, plane, params, rng);
  }
  return events;
}

std::vector<BounceEvent> simulate_drop(const SimParams& params, double drop_height,
                                       double init_velocity_noise_sigma, int n_bounces,
                                       Rng& rng, const SurfacePlane& plane) {
  if (n_bounces < 3) throw std::invalid_argument("simulate_drop: need n_bounces >= 3");
  BallState init;
  init.position = plane.point + Eigen::Vector3d(0, 0, drop_height);
  init.velocity = init_velocity_noise_sigma *
                  Eigen::Vector3d(rng.gauss(), rng.gauss(), rng.gauss());
  return simulate_trajectory(init, plane, params, n_bounces, rng);
}

}  // namespace bounce::sim

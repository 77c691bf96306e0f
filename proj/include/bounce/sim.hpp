#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "bounce/rng.hpp"

namespace bounce::sim {

/// How the restitution coefficient is applied at a collision.
/// kFullSpeed scales the whole reflected velocity by e, so the speed ratio
/// across a collision is exactly e and, for a vertical drop, e equals the
/// ratio of successive inter-bounce times. kNormalOnly scales only the normal
/// component; kept as a sensitivity switch.
enum class RestitutionMode { kFullSpeed, kNormalOnly };

struct SimParams {
  double e = 0.8;            // restitution ratio, in (0,1)
  double log10_kappa = 3.0;  // log10 of the vMF concentration
  double gravity = 9.81;     // m/s^2
  double ball_radius = 0.02;   // m; used only by contact tests downstream
  double ball_mass = 0.0027;   // kg
  RestitutionMode restitution_mode = RestitutionMode::kFullSpeed;

  double kappa() const { return std::pow(10.0, log10_kappa); }
  void validate() const;
};

struct BallState {
  Eigen::Vector3d position{0, 0, 0};  // m
  Eigen::Vector3d velocity{0, 0, 0};  // m/s
  double time = 0.0;                  // s
};

/// Infinite plane with a deterministic in-plane basis (axis_u, axis_v) used
/// to express bounce positions in 2-D surface coordinates. For a horizontal
/// plane the basis is the world x/y axes.
struct SurfacePlane {
  Eigen::Vector3d point{0, 0, 0};
  Eigen::Vector3d unit_normal{0, 0, 1};
  Eigen::Vector3d axis_u{1, 0, 0};
  Eigen::Vector3d axis_v{0, 1, 0};

  SurfacePlane() = default;
  SurfacePlane(const Eigen::Vector3d& p, const Eigen::Vector3d& normal);

  static SurfacePlane horizontal(double z = 0.0);
  /// Plane through the origin rising in +x: surface height z = tan(angle) * x.
  static SurfacePlane inclined(double angle_rad);

  /// Signed distance from a world point to the plane.
  double signed_distance(const Eigen::Vector3d& p) const {
    return (p - point).dot(unit_normal);
  }
  Eigen::Vector2d to_plane_coords(const Eigen::Vector3d& p) const {
    const Eigen::Vector3d r = p - point;
    return {r.dot(axis_u), r.dot(axis_v)};
  }
};

/// One ball-surface collision: time plus position in surface-plane
/// coordinates. The atomic observation of the whole pipeline.
struct BounceEvent {
  double time = 0.0;            // s
  Eigen::Vector2d position{0, 0};  // m, in-plane coordinates
};

struct Impact {
  BallState state;   // ball at the moment of impact (incoming velocity)
  BounceEvent event;
};

/// Draw a unit vector from the von Mises-Fisher distribution on the 2-sphere
/// with mean direction mu and concentration kappa. Inverse-CDF sampling of
/// the polar cosine, uniform azimuth, then rotation of the z-axis frame onto
/// mu; no rejection loop. Stable up to kappa ~ 1e12 (log-space branch above
/// kappa = 500).
Eigen::Vector3d sample_vmf(const Eigen::Vector3d& mu, double kappa, Rng& rng);

/// Collision response: reflect the incoming velocity, apply restitution, then
/// perturb the exit direction by a vMF draw centered on the unperturbed exit
/// direction. The perturbation preserves speed, so in kFullSpeed mode
/// |out| = e * |v_in| exactly. A perturbed direction that points into the
/// surface is resampled up to 64 times, then mirrored above the plane.
Eigen::Vector3d apply_collision(const Eigen::Vector3d& v_in, const SurfacePlane& plane,
                                const SimParams& params, Rng& rng);

/// Propagate a ballistic arc to its next plane intersection analytically
/// (smallest positive root of the quadratic plane-crossing equation).
/// Returns nullopt if the arc never returns to the plane.
std::optional<Impact> step_to_next_bounce(const BallState& state, const SurfacePlane& plane,
                                          double gravity);

/// Run the bounce loop from an initial state and collect the first n_bounces
/// events. Throws SimulationError if the trajectory terminates early.
std::vector<BounceEvent> simulate_trajectory(const BallState& init, const SurfacePlane& plane,
                                             const SimParams& params, int n_bounces, Rng& rng);

/// Drop from rest at drop_height above the plane reference point, with an
/// isotropic Gaussian initial-velocity perturbation of the given sigma.
std::vector<BounceEvent> simulate_drop(const SimParams& params, double drop_height,
                                       double init_velocity_noise_sigma, int n_bounces,
                                       Rng& rng,
                                       const SurfacePlane& plane = SurfacePlane::horizontal());

/// Raised when a trajectory cannot supply the requested number of bounces
/// (grazing exit, separation failure, or numerical termination).
struct SimulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace bounce::sim

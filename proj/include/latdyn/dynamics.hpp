#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "latdyn/linalg.hpp"
#include "latdyn/net.hpp"
#include "latdyn/pose_features.hpp"

namespace latdyn {

struct LatentState {
  Vec z;
  Vec v;
};

// Per-dimension force outputs; kappa, c, m are softplus-enforced positive.
struct ForceParams {
  Vec g;
  Vec kappa;
  Vec c;
  Vec m;
};

struct ForceGains {
  double pose = 1.0;
  double damp = 1.0;
  double spring = 1.0;
};

enum class Variant : std::uint8_t {
  full = 0,            // spring-damper acceleration (default)
  direct_latent = 1,   // head output is z_t itself
  velocity = 2,        // head output is v_t
  accel_no_spring = 3  // acceleration with spring/damper removed
};

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

struct DynamicsModel {
  nn::DenseNet head_g;      // linear head
  nn::DenseNet head_kappa;  // softplus
  nn::DenseNet head_c;      // softplus
  nn::DenseNet head_m;      // softplus
  Vec z_ref;
  double dt = 1.0;
  Variant variant = Variant::full;
  std::size_t d_z = 0;
  std::size_t d_p = kPoseDescriptorDim;

  std::size_t input_dim() const { return d_p + 2 * d_z + 1; }
  std::vector<nn::Param*> params();
  std::vector<const nn::Param*> params() const;
  void zero_grad();
};

// Freshly initialized model with the given head shape. hidden/layers default
// to the production configuration (width 256, 4 hidden layers).
DynamicsModel make_dynamics_model(std::size_t d_z, std::uint64_t seed,
                                  Variant variant = Variant::full,
                                  std::size_t hidden = 256, std::size_t layers = 4,
                                  std::size_t d_p = kPoseDescriptorDim);

// Rescale the output layers so the model starts as a near-neutral
// spring-damper (g ~ 0, kappa ~ 0.05, c ~ 0.2, m ~ 1): early free rollouts
// stay bounded instead of amplifying the untrained heads' noise, which is
// what makes aggressive curricula diverge.
void calm_init(DynamicsModel& model);

ForceParams predict_forces(const DynamicsModel& model, const Vec& f_pose,
                           const Vec& f_state);

// The three gained force vectors of the update rule.
struct ForceComponents {
  Vec pose;     // alpha_pose * g
  Vec damping;  // alpha_damp * c (*) v
  Vec spring;   // alpha_spring * kappa (*) (z - z_ref)
};
ForceComponents force_components(const LatentState& state, const ForceParams& forces,
                                 const ForceGains& gains, const Vec& z_ref);

// Semi-implicit Euler: v' = v + dt * a, z' = z + dt * v'.
LatentState step(const LatentState& state, const ForceParams& forces,
                 const ForceGains& gains, const Vec& z_ref, double dt);

// Ablation update rules; Variant::full delegates to step().
LatentState step_variant(Variant variant, const LatentState& state,
                         const ForceParams& forces, const ForceGains& gains,
                         const Vec& z_ref, double dt);

using ForceProvider = std::function<ForceParams(const Vec& f_pose, const Vec& f_state)>;

// Autoregressive rollout over per-frame pose descriptors (one row each).
// Throws DivergenceError with the first bad step if |z|_inf exceeds 1e6 or a
// non-finite value appears.
std::vector<LatentState> rollout_with(const ForceProvider& forces, Variant variant,
                                      const Matrix& descriptors, const LatentState& init,
                                      const ForceGains& gains, const Vec& z_ref, double dt);

std::vector<LatentState> rollout(const DynamicsModel& model, const Matrix& descriptors,
                                 const LatentState& init, const ForceGains& gains);

inline constexpr double kDivergenceLimit = 1e6;

}  // namespace latdyn

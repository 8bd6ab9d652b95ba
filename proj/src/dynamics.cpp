#include "latdyn/dynamics.hpp"

#include <cmath>

namespace latdyn {

Variant variant_from_string(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "direct_latent") return Variant::direct_latent;
  if (s == "velocity") return Variant::velocity;
  if (s == "accel_no_spring") return Variant::accel_no_spring;
  throw ConfigError("unknown dynamics variant '" + s + "'");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::direct_latent: return "direct_latent";
    case Variant::velocity: return "velocity";
    case Variant::accel_no_spring: return "accel_no_spring";
  }
  throw ConfigError("unknown dynamics variant tag");
}

std::vector<nn::Param*> DynamicsModel::params() {
  std::vector<nn::Param*> out;
  for (nn::DenseNet* n : {&head_g, &head_kappa, &head_c, &head_m})
    for (nn::Param* p : n->params()) out.push_back(p);
  return out;
}

std::vector<const nn::Param*> DynamicsModel::params() const {
  std::vector<const nn::Param*> out;
  for (const nn::DenseNet* n : {&head_g, &head_kappa, &head_c, &head_m})
    for (const nn::Param* p : n->params()) out.push_back(p);
  return out;
}

void DynamicsModel::zero_grad() {
  head_g.zero_grad();
  head_kappa.zero_grad();
  head_c.zero_grad();
  head_m.zero_grad();
}

DynamicsModel make_dynamics_model(std::size_t d_z, std::uint64_t seed, Variant variant,
                                  std::size_t hidden, std::size_t layers, std::size_t d_p) {
  DynamicsModel m;
  m.d_z = d_z;
  m.d_p = d_p;
  m.variant = variant;
  m.z_ref.assign(d_z, 0.0);

  std::vector<std::size_t> widths;
  widths.push_back(d_p + 2 * d_z + 1);
  for (std::size_t l = 0; l < layers; ++l) widths.push_back(hidden);
  widths.push_back(d_z);

  m.head_g = nn::DenseNet("g", widths, nn::HeadKind::linear);
  m.head_kappa = nn::DenseNet("kappa", widths, nn::HeadKind::softplus);
  m.head_c = nn::DenseNet("c", widths, nn::HeadKind::softplus);
  m.head_m = nn::DenseNet("m", widths, nn::HeadKind::softplus);

  Rng rng(seed);
  m.head_g.init(rng);
  m.head_kappa.init(rng);
  m.head_c.init(rng);
  m.head_m.init(rng);
  return m;
}

void calm_init(DynamicsModel& model) {
  auto calm_head = [](nn::DenseNet& net, double out_bias) {
    std::vector<nn::Param*> ps = net.params();
    for (double& w : ps[ps.size() - 2]->value.data) w *= 0.01;
    ps[ps.size() - 1]->value.fill(out_bias);
  };
  // softplus(b) = y  <=>  b = ln(e^y - 1)
  auto isp = [](double y) { return std::log(std::exp(y) - 1.0); };
  calm_head(model.head_g, 0.0);
  calm_head(model.head_kappa, isp(0.05));
  calm_head(model.head_c, isp(0.2));
  calm_head(model.head_m, isp(1.0));
}

ForceParams predict_forces(const DynamicsModel& model, const Vec& f_pose,
                           const Vec& f_state) {
  if (f_pose.size() != model.d_p)
    throw DimensionError("predict_forces: pose descriptor length mismatch");
  if (f_state.size() != 2 * model.d_z + 1)
    throw DimensionError("predict_forces: state feature length mismatch");
  Vec x;
  x.reserve(model.input_dim());
  x.insert(x.end(), f_pose.begin(), f_pose.end());
  x.insert(x.end(), f_state.begin(), f_state.end());
  return ForceParams{model.head_g.forward(x), model.head_kappa.forward(x),
                     model.head_c.forward(x), model.head_m.forward(x)};
}

ForceComponents force_components(const LatentState& state, const ForceParams& forces,
                                 const ForceGains& gains, const Vec& z_ref) {
  std::size_t n = state.z.size();
  ForceComponents out;
  out.pose.resize(n);
  out.damping.resize(n);
  out.spring.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    // gain applied last so scaling a gain rescales the component exactly
    out.pose[i] = forces.g[i] * gains.pose;
    out.damping[i] = forces.c[i] * state.v[i] * gains.damp;
    out.spring[i] = forces.kappa[i] * (state.z[i] - z_ref[i]) * gains.spring;
  }
  return out;
}

LatentState step(const LatentState& state, const ForceParams& forces,
                 const ForceGains& gains, const Vec& z_ref, double dt) {
  std::size_t n = state.z.size();
  if (state.v.size() != n || forces.g.size() != n || z_ref.size() != n)
    throw DimensionError("step: inconsistent latent dimensions");
  LatentState next;
  next.z.resize(n);
  next.v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double a = (gains.pose * forces.g[i] - gains.damp * forces.c[i] * state.v[i] -
                gains.spring * forces.kappa[i] * (state.z[i] - z_ref[i])) /
               forces.m[i];
    next.v[i] = state.v[i] + dt * a;
    next.z[i] = state.z[i] + dt * next.v[i];
  }
  return next;
}

LatentState step_variant(Variant variant, const LatentState& state,
                         const ForceParams& forces, const ForceGains& gains,
                         const Vec& z_ref, double dt) {
  std::size_t n = state.z.size();
  LatentState next;
  switch (variant) {
    case Variant::full:
      return step(state, forces, gains, z_ref, dt);
    case Variant::direct_latent:
      // Head output is the new latent; v is bookkeeping only.
      next.z = forces.g;
      next.v.resize(n);
      for (std::size_t i = 0; i < n; ++i) next.v[i] = next.z[i] - state.z[i];
      return next;
    case Variant::velocity:
      next.v = forces.g;
      next.z.resize(n);
      for (std::size_t i = 0; i < n; ++i) next.z[i] = state.z[i] + dt * next.v[i];
      return next;
    case Variant::accel_no_spring:
      next.z.resize(n);
      next.v.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        double a = gains.pose * forces.g[i] / forces.m[i];
        next.v[i] = state.v[i] + dt * a;
        next.z[i] = state.z[i] + dt * next.v[i];
      }
      return next;
  }
  throw ConfigError("step_variant: unknown variant tag");
}

std::vector<LatentState> rollout_with(const ForceProvider& forces, Variant variant,
                                      const Matrix& descriptors, const LatentState& init,
                                      const ForceGains& gains, const Vec& z_ref,
                                      double dt) {
  if (descriptors.rows == 0) throw DimensionError("rollout: empty descriptor sequence");
  std::vector<LatentState> traj;
  traj.reserve(descriptors.rows);
  LatentState state = init;
  for (std::size_t t = 0; t < descriptors.rows; ++t) {
    Vec f_pose(descriptors.row(t), descriptors.row(t) + descriptors.cols);
    Vec f_state = state_feature(state.z, state.v);
    ForceParams fp = forces(f_pose, f_state);
    state = step_variant(variant, state, fp, gains, z_ref, dt);
    for (double x : state.z) {
      if (!std::isfinite(x) || std::abs(x) > kDivergenceLimit)
        throw DivergenceError(t, "rollout diverged at step " + std::to_string(t));
    }
    traj.push_back(state);
  }
  return traj;
}

std::vector<LatentState> rollout(const DynamicsModel& model, const Matrix& descriptors,
                                 const LatentState& init, const ForceGains& gains) {
  return rollout_with(
      [&model](const Vec& fp, const Vec& fs) { return predict_forces(model, fp, fs); },
      model.variant, descriptors, init, gains, model.z_ref, model.dt);
}

}  // namespace latdyn

#include "latdyn/oracle.hpp"

#include <cmath>

#include "latdyn/rng.hpp"

namespace latdyn::oracle {

std::array<double, 4> transition_matrix(double kappa, double c, double m, double dt) {
  if (m <= 0.0) throw DimensionError("transition_matrix: mass must be positive");
  return {1.0 - dt * dt * kappa / m, dt * (1.0 - dt * c / m), -dt * kappa / m,
          1.0 - dt * c / m};
}

double spectral_radius(const std::array<double, 4>& m) {
  double tr = m[0] + m[3];
  double det = m[0] * m[3] - m[1] * m[2];
  double disc = tr * tr - 4.0 * det;
  if (disc >= 0.0) {
    double s = std::sqrt(disc);
    return std::max(std::abs((tr + s) / 2.0), std::abs((tr - s) / 2.0));
  }
  return std::sqrt(det);  // complex conjugate pair, |lambda| = sqrt(det)
}

Vec SyntheticSystem::spectral_radii() const {
  Vec out(d_z());
  for (std::size_t i = 0; i < d_z(); ++i)
    out[i] = spectral_radius(transition_matrix(kappa[i], c[i], m[i], dt));
  return out;
}

void SyntheticSystem::validate() const {
  if (c.size() != d_z() || m.size() != d_z() || z_ref.size() != d_z())
    throw DimensionError("SyntheticSystem: inconsistent dimensions");
  if (w_pose.rows != d_z())
    throw DimensionError("SyntheticSystem: coupling matrix row count mismatch");
  for (std::size_t i = 0; i < d_z(); ++i)
    if (kappa[i] <= 0.0 || c[i] <= 0.0 || m[i] <= 0.0)
      throw ConfigError("SyntheticSystem: coefficients must be positive");
  Vec rho = spectral_radii();
  for (std::size_t i = 0; i < d_z(); ++i)
    if (rho[i] >= 1.0)
      throw ConfigError("SyntheticSystem: dimension " + std::to_string(i) +
                        " is unstable (spectral radius " + std::to_string(rho[i]) + ")");
}

SyntheticSystem make_system(std::size_t d_z, std::uint64_t seed, double rho_lo,
                            double rho_hi, double pose_coupling) {
  if (!(rho_lo > 0.0 && rho_hi < 1.0 && rho_lo <= rho_hi))
    throw ConfigError("make_system: need 0 < rho_lo <= rho_hi < 1");
  Rng rng(seed);
  SyntheticSystem sys;
  sys.kappa.resize(d_z);
  sys.c.resize(d_z);
  sys.m.resize(d_z);
  sys.z_ref.assign(d_z, 0.0);
  for (std::size_t i = 0; i < d_z; ++i) {
    double rho = rng.uniform(rho_lo, rho_hi);
    double mass = rng.uniform(0.5, 2.0);
    // Complex eigenvalue pair: det = 1 - dt c/m = rho^2, so c fixes rho; kappa
    // anywhere strictly inside ((1-rho)^2, (1+rho)^2) * m/dt^2 keeps the pair
    // complex.
    double det = rho * rho;
    double c = mass * (1.0 - det) / sys.dt;
    double lo = (1.0 - rho) * (1.0 - rho);
    double hi = (1.0 + rho) * (1.0 + rho);
    double u = rng.uniform(0.15, 0.85);
    double kappa = (lo + u * (hi - lo)) * mass / (sys.dt * sys.dt);
    sys.kappa[i] = kappa;
    sys.c[i] = c;
    sys.m[i] = mass;
  }
  sys.w_pose = Matrix(d_z, kPoseDescriptorDim);
  for (double& w : sys.w_pose.data) w = rng.normal() * pose_coupling;
  sys.validate();
  return sys;
}

so3::RotationSequence gen_pose_signal(std::uint64_t seed, std::size_t frames,
                                      std::size_t quiescent_tail, std::size_t joints,
                                      double period_min, double period_max) {
  if (quiescent_tail >= frames)
    throw ConfigError("gen_pose_signal: quiescent tail must be shorter than the clip");
  Rng rng(seed);

  struct Component {
    double amp, period, phase;
    so3::AxisAngle axis;
  };
  std::vector<std::vector<Component>> comps(joints);
  for (std::size_t j = 0; j < joints; ++j) {
    std::size_t n = 2 + rng.uniform_index(3);  // 2..4 sinusoids
    double amp_budget = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      Component c;
      c.amp = rng.uniform(0.2, 1.0) * amp_budget;
      c.period = rng.uniform(period_min, period_max);
      c.phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
      double ax = rng.normal(), ay = rng.normal(), az = rng.normal();
      double nm = std::sqrt(ax * ax + ay * ay + az * az);
      if (nm < 1e-12) nm = 1.0;
      c.axis = {ax / nm, ay / nm, az / nm};
      comps[j].push_back(c);
    }
  }

  // Amplitude envelope: full amplitude during the active part, smoothstep down
  // to zero over the first frames of the tail, exactly zero afterwards. The
  // sinusoids are anchored so the signal vanishes at t = 0 too; the sequence
  // therefore starts at, and returns to, the identity pose, which doubles as
  // the descriptor reference and produces an exactly zero descriptor once the
  // tail has settled.
  std::size_t active = frames - quiescent_tail;
  std::size_t ramp = std::min({quiescent_tail, active, std::size_t{30}});
  std::vector<double> env(frames, 1.0);
  for (std::size_t t = active; t < frames; ++t) {
    std::size_t k = t - active + 1;  // position inside the tail
    if (k >= ramp) {
      env[t] = 0.0;
    } else {
      double u = static_cast<double>(k) / static_cast<double>(ramp);
      env[t] = 1.0 - u * u * (3.0 - 2.0 * u);
    }
  }

  so3::RotationSequence seq(frames, joints);
  const double two_pi = 2.0 * 3.14159265358979323846;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t j = 0; j < joints; ++j) {
      so3::AxisAngle v = {0.0, 0.0, 0.0};
      for (const Component& c : comps[j]) {
        double base = std::sin(two_pi * static_cast<double>(t) / c.period + c.phase);
        double s = env[t] * c.amp * (base - std::sin(c.phase));
        v[0] += s * c.axis[0];
        v[1] += s * c.axis[1];
        v[2] += s * c.axis[2];
      }
      seq.at(t, j) = so3::exp_map(v);
    }
  }
  return seq;
}

TrainingClip simulate(const SyntheticSystem& sys, const Matrix& descriptors,
                      std::uint64_t noise_seed) {
  sys.validate();
  if (descriptors.rows == 0) throw DimensionError("simulate: empty descriptor sequence");
  if (descriptors.cols != sys.w_pose.cols)
    throw DimensionError("simulate: descriptor width mismatch");

  TrainingClip clip;
  clip.descriptors = descriptors;
  clip.targets = Matrix(descriptors.rows, sys.d_z());

  Rng noise(noise_seed);
  ForceGains unit;
  LatentState state{sys.z_ref, Vec(sys.d_z(), 0.0)};
  for (std::size_t t = 0; t < descriptors.rows; ++t) {
    Vec f_pose(descriptors.row(t), descriptors.row(t) + descriptors.cols);
    ForceParams fp{matvec(sys.w_pose, f_pose), sys.kappa, sys.c, sys.m};
    state = step(state, fp, unit, sys.z_ref, sys.dt);
    for (double x : state.z)
      if (!std::isfinite(x) || std::abs(x) > kDivergenceLimit)
        throw DivergenceError(t, "simulate: trajectory diverged at step " + std::to_string(t));
    for (std::size_t i = 0; i < sys.d_z(); ++i) {
      double obs = state.z[i];
      if (sys.noise_sigma > 0.0) obs += sys.noise_sigma * noise.normal();
      clip.targets(t, i) = obs;
    }
  }
  return clip;
}

}  // namespace latdyn::oracle

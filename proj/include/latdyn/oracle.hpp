#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "latdyn/dynamics.hpp"
#include "latdyn/linalg.hpp"
#include "latdyn/so3.hpp"
#include "latdyn/training.hpp"

namespace latdyn::oracle {

// Per-dimension linearization of the update on (z - z_ref, v):
// M = [[1 - dt^2 k/m, dt (1 - dt c/m)], [-dt k/m, 1 - dt c/m]]
std::array<double, 4> transition_matrix(double kappa, double c, double m, double dt);

// Spectral radius of a 2x2 matrix (closed form, handles complex pairs).
double spectral_radius(const std::array<double, 4>& m);

// Known linear spring-damper system used as training ground truth. The
// coefficients are constant so closed-form references exist.
struct SyntheticSystem {
  Vec kappa, c, m;   // d_z each, > 0
  Matrix w_pose;     // d_z x 96 coupling
  Vec z_ref;         // d_z
  double dt = 1.0;
  double noise_sigma = 0.0;  // optional observation noise on targets

  std::size_t d_z() const { return kappa.size(); }

  // Per-dimension spectral radii; construction requires all < 1.
  Vec spectral_radii() const;
  void validate() const;
};

// Random stable system with per-dimension spectral radius in [rho_lo, rho_hi].
SyntheticSystem make_system(std::size_t d_z, std::uint64_t seed, double rho_lo,
                            double rho_hi, double pose_coupling = 0.05);

// Per-joint sums of 2-4 random-phase sinusoidal axis-angle curves (amplitude
// <= 1 rad, periods 20-200 frames), smoothly ramped to a constant pose over
// the final quiescent_tail frames.
so3::RotationSequence gen_pose_signal(std::uint64_t seed, std::size_t frames,
                                      std::size_t quiescent_tail, std::size_t joints = 24,
                                      double period_min = 20.0, double period_max = 200.0);

// z*_t generated by the semi-implicit step with g = W_pose f_pose(t), starting
// from (z_ref, 0). noise_seed only matters when sys.noise_sigma > 0.
TrainingClip simulate(const SyntheticSystem& sys, const Matrix& descriptors,
                      std::uint64_t noise_seed = 0);

}  // namespace latdyn::oracle

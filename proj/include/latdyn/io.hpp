#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latdyn/dynamics.hpp"
#include "latdyn/latent_space.hpp"
#include "latdyn/linalg.hpp"
#include "latdyn/net.hpp"
#include "latdyn/so3.hpp"

namespace latdyn::io {

// All containers are little-endian, 64-bit floats, row-major, with a shape
// header and a trailing FNV-1a checksum over everything before it.

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n);

// ---- .featmat: a single 2-D f64 matrix ----
void save_matrix(const std::string& path, const Matrix& m);
Matrix load_matrix(const std::string& path);

// ---- .quatseq: T x J unit quaternions plus frame interval ----
void save_rotation_sequence(const std::string& path, const so3::RotationSequence& seq);
so3::RotationSequence load_rotation_sequence(const std::string& path);

// ---- .ldck: model checkpoint ----
struct Checkpoint {
  std::uint32_t format_version = 1;
  DynamicsModel model;
  LatentSpaceModel latent_space;  // may be empty (d_z == 0) when trained on latents directly
  std::string config_echo;        // canonical JSON of the run configuration
  // Optimizer state; present (non-empty moments) only in resume checkpoints.
  std::vector<Vec> adam_m, adam_v;
  std::int64_t adam_steps = 0;
  double adam_lr = 0.0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// CSV loss history: epoch, horizon, p_tf, loss
struct LossRow {
  std::size_t epoch;
  std::size_t horizon;
  double p_tf;
  double loss;
};

void save_loss_history(const std::string& path, const std::vector<LossRow>& rows);

}  // namespace latdyn::io

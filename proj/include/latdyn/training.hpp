#pragma once

#include <cstdint>
#include <vector>

#include "latdyn/dynamics.hpp"
#include "latdyn/linalg.hpp"
#include "latdyn/rng.hpp"
#include "latdyn/tape.hpp"

namespace latdyn {

// Frame-aligned latent targets and pose descriptors for one motion clip.
struct TrainingClip {
  Matrix targets;      // T x d_z standardized latents z*_t
  Matrix descriptors;  // T x 96

  std::size_t frames() const { return targets.rows; }
  void validate() const;
};

struct CurriculumSchedule {
  std::size_t horizon_start = 4;
  std::size_t horizon_end = 50;
  double tf_start = 0.9;
  double tf_end = 0.02;
  std::size_t total_epochs = 1500;
};

// Linear interpolation between the endpoints; horizon rounded down, endpoints
// exact at the first and last epoch.
struct ScheduleEntry {
  std::size_t horizon;
  double p_tf;
};
ScheduleEntry schedule_at(const CurriculumSchedule& s, std::size_t epoch);

struct TrainConfig {
  std::size_t epochs = 1500;
  std::size_t batch_size = 256;
  // Optimizer steps per epoch; each consumes one freshly sampled batch.
  std::size_t batches_per_epoch = 1;
  double lr = 5e-5;
  std::uint64_t seed = 0;
  // On teacher forcing, reset v to the target finite difference (default) or
  // keep the propagated velocity.
  bool force_velocity_reset = true;
  // Cap on the global L2 norm of the accumulated batch gradient (0 = off).
  // Long low-teacher-forcing rollouts occasionally explode mid-curriculum;
  // the resulting spike poisons the Adam second moments for the rest of the
  // run, so capping it keeps training stable without changing the update.
  double grad_clip = 0.0;
  // Window-step budget per epoch (0 = off). When set, the number of batches
  // at each epoch is round(window_budget / (batch_size * horizon)) instead of
  // batches_per_epoch, so every epoch costs roughly the same wall time and
  // the cheap short-horizon epochs get proportionally more optimizer steps.
  std::size_t window_budget = 0;
  // Std-dev of Gaussian noise added to the pose descriptors, redrawn each
  // epoch (0 = off). Long free rollouts visit descriptor/state pairs off the
  // target manifold; a small input jitter keeps the learned forces tame
  // there instead of letting rare inputs hit an explosive extrapolation.
  double descriptor_jitter = 0.0;

  void validate() const;
};

struct WindowRef {
  std::size_t clip;
  std::size_t start;  // first supervised frame, >= 1
};

// All (clip, start) pairs valid for the given horizon.
std::vector<WindowRef> valid_windows(const std::vector<TrainingClip>& clips,
                                     std::size_t horizon);

// Initial state for a window: z from the frame before `start`, v from the
// target finite difference when two earlier frames exist, else zero.
LatentState window_init_state(const TrainingClip& clip, std::size_t start, double dt);

// Teacher-forced multi-step rollout loss for one batch of same-horizon
// windows, recorded on the tape. The loss is the mean over windows, steps and
// dimensions of the squared error, always measured before any replacement.
// Returns the loss VarId; caller runs tape.backward.
nn::VarId batch_rollout_loss(nn::Tape& tape, DynamicsModel& model,
                             const std::vector<TrainingClip>& clips,
                             const std::vector<WindowRef>& batch, std::size_t horizon,
                             double p_tf, Rng& rng, bool force_velocity_reset = true);

// Single-window convenience wrapper (batch of one); returns the loss value.
double rollout_loss(DynamicsModel& model, const TrainingClip& clip, std::size_t start,
                    std::size_t horizon, double p_tf, Rng& rng,
                    bool force_velocity_reset = true);

struct LossRecord {
  std::size_t epoch;
  std::size_t horizon;
  double p_tf;
  double loss;
};

struct TrainResult {
  std::vector<LossRecord> history;  // one row per epoch (mean over its batches)
};

// Curriculum training: per epoch the schedule fixes (horizon, p_tf); each
// batch samples windows uniformly without replacement when possible,
// accumulates gradients via BPTT and applies one Adam step. Deterministic
// given the seed.
TrainResult train(DynamicsModel& model, const std::vector<TrainingClip>& clips,
                  const TrainConfig& config, const CurriculumSchedule& schedule,
                  nn::AdamState* resume_optimizer = nullptr);

}  // namespace latdyn

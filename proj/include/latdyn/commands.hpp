#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "latdyn/dynamics.hpp"
#include "latdyn/io.hpp"
#include "latdyn/pose_features.hpp"
#include "latdyn/training.hpp"

namespace latdyn::cmd {

// Group map on disk: {"groups": {"left_upper_leg": [1], ...}} with all 14
// canonical names present. Unknown keys are rejected.
JointGroupMap load_group_map(const std::string& path);
void save_group_map(const std::string& path, const JointGroupMap& map);

struct GenSyntheticConfig {
  std::string out_dir;
  std::uint64_t seed = 1;
  std::size_t num_clips = 20;
  std::size_t frames = 500;
  std::size_t quiescent_tail = 0;
  std::size_t d_z = 8;
  double rho_lo = 0.85;
  double rho_hi = 0.97;
  double pose_coupling = 0.05;
  double noise_sigma = 0.0;
  std::size_t joints = 24;
  double period_min = 20.0;
  double period_max = 200.0;
  std::string group_map_path;  // empty -> built-in 24-joint map
};

// Writes clip_###.quatseq / .descriptors.featmat / .latents.featmat plus
// manifest.json echoing the system parameters.
void gen_synthetic(const GenSyntheticConfig& cfg);

struct ExtractFeaturesConfig {
  std::string motion_path;
  std::string out_path;
  std::string group_map_path;  // empty -> built-in
  std::size_t ref_frame = 0;
};
void extract_features(const ExtractFeaturesConfig& cfg);

struct FitLatentSpaceConfig {
  std::string features_path;
  std::string out_checkpoint;
  std::string out_latents;  // optional: encoded training latents
  std::size_t d_z = 128;
  double eps = 1e-8;
  std::size_t rest_frame = 0;
  std::uint64_t seed = 1;
  std::string variant = "full";
  std::size_t hidden_width = 256;
  std::size_t hidden_layers = 4;
};
void fit_latent_space(const FitLatentSpaceConfig& cfg);

struct TrainCommandConfig {
  std::string data_dir;           // clip_###.latents/.descriptors pairs
  std::string out_checkpoint;
  std::string out_loss_csv;
  std::string init_checkpoint;    // optional, e.g. from fit-latent-space
  std::string resume_checkpoint;  // optional, continues an interrupted run
  std::uint64_t seed = 1;
  std::size_t d_z = 128;
  std::string variant = "full";
  std::size_t hidden_width = 256;
  std::size_t hidden_layers = 4;
  TrainConfig train;
  CurriculumSchedule curriculum;
  // Stop after this many epochs of the full schedule (0 = run to the end);
  // the saved optimizer state lets a later --resume run finish the rest.
  std::size_t stop_after = 0;
  std::string config_echo;  // canonical JSON recorded in the checkpoint
};
void train_command(const TrainCommandConfig& cfg);

struct RolloutConfig {
  std::string checkpoint;
  std::string motion_path;       // either a .quatseq ...
  std::string descriptors_path;  // ... or a precomputed descriptor matrix
  std::string group_map_path;
  std::string out_path;
  std::string init_latent_path;  // optional 1 x d_z featmat overriding z_0
  std::optional<Variant> variant_override;
  ForceGains gains;
  std::size_t ref_frame = 0;
};
void rollout_command(const RolloutConfig& cfg);

struct EvalConfig {
  std::string checkpoint;
  std::string data_dir;
  std::string out_path;  // metrics JSON
  std::size_t quiescent_tail = 0;  // > 0 enables the rest-return metric
};

struct EvalMetrics {
  double teacher_forced_mse = 0.0;
  double rollout_mse_h10 = 0.0;
  double rollout_mse_h50 = 0.0;
  double rollout_mse_h200 = 0.0;
  double target_variance = 0.0;
  // terminal |z - z_ref| after the quiescent tail, and its ratio to the
  // value at motion cessation (only meaningful when quiescent_tail > 0)
  double rest_return_terminal = 0.0;
  double rest_return_ratio = 0.0;
  double ms_per_step = 0.0;  // timing, excluded from determinism guarantees
};

EvalMetrics eval_model(const DynamicsModel& model, const std::vector<TrainingClip>& clips,
                       std::size_t quiescent_tail);
void eval_command(const EvalConfig& cfg);

// Loads clip_###.latents.featmat / clip_###.descriptors.featmat pairs from a
// directory, sorted by filename.
std::vector<TrainingClip> load_clips(const std::string& data_dir);

}  // namespace latdyn::cmd

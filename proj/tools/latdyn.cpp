// latdyn: latent spring-damper dynamics CLI.
//
// Subcommands: gen-synthetic, extract-features, fit-latent-space, train,
// rollout, eval. Every subcommand accepts --config <json>; explicit flags
// override config values; LATDYN_SEED overrides any configured seed.
// Exit codes: 0 success, 2 config error, 3 dimension/format error,
// 4 numerical divergence.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "latdyn/commands.hpp"
#include "latdyn/errors.hpp"

using nlohmann::json;
using namespace latdyn;

namespace {

json load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config '" + path + "': expected a JSON object");
  return j;
}

// Pulls cfg[key] into out if present; removes it so leftovers can be rejected.
template <typename T>
void take(json& cfg, const char* key, T& out) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
  cfg.erase(it);
}

void reject_leftovers(const json& cfg, const std::string& command) {
  if (!cfg.empty()) {
    std::string keys;
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
      if (!keys.empty()) keys += ", ";
      keys += "'" + it.key() + "'";
    }
    throw ConfigError("config for " + command + ": unknown key(s) " + keys);
  }
}

void apply_env_seed(std::uint64_t& seed) {
  if (const char* env = std::getenv("LATDYN_SEED")) {
    try {
      seed = std::stoull(env);
    } catch (...) {
      throw ConfigError("LATDYN_SEED is not a valid integer: '" + std::string(env) + "'");
    }
  }
}

int run(int argc, char** argv) {
  CLI::App app{"latdyn: pose-driven spring-damper latent dynamics"};
  app.require_subcommand(1);

  // ---- gen-synthetic ----
  auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic oracle dataset");
  std::string gen_config;
  cmd::GenSyntheticConfig gc;
  gen->add_option("--config", gen_config, "JSON config file");
  gen->add_option("--out-dir", gc.out_dir, "output directory");
  gen->add_option("--seed", gc.seed, "generator seed");
  gen->add_option("--num-clips", gc.num_clips);
  gen->add_option("--frames", gc.frames);
  gen->add_option("--quiescent-tail", gc.quiescent_tail);
  gen->add_option("--dz", gc.d_z);
  gen->add_option("--rho-lo", gc.rho_lo);
  gen->add_option("--rho-hi", gc.rho_hi);
  gen->add_option("--pose-coupling", gc.pose_coupling);
  gen->add_option("--noise-sigma", gc.noise_sigma);
  gen->add_option("--joints", gc.joints);
  gen->add_option("--period-min", gc.period_min);
  gen->add_option("--period-max", gc.period_max);
  gen->add_option("--group-map", gc.group_map_path);
  gen->callback([&]() {
    if (!gen_config.empty()) {
      json j = load_config_file(gen_config);
      cmd::GenSyntheticConfig c;
      take(j, "out_dir", c.out_dir);
      take(j, "seed", c.seed);
      take(j, "num_clips", c.num_clips);
      take(j, "frames", c.frames);
      take(j, "quiescent_tail", c.quiescent_tail);
      take(j, "d_z", c.d_z);
      take(j, "rho_lo", c.rho_lo);
      take(j, "rho_hi", c.rho_hi);
      take(j, "pose_coupling", c.pose_coupling);
      take(j, "noise_sigma", c.noise_sigma);
      take(j, "joints", c.joints);
      take(j, "period_min", c.period_min);
      take(j, "period_max", c.period_max);
      take(j, "group_map", c.group_map_path);
      reject_leftovers(j, "gen-synthetic");
      // flags win over config
      if (!gen->count("--out-dir")) gc.out_dir = c.out_dir;
      if (!gen->count("--seed")) gc.seed = c.seed;
      if (!gen->count("--num-clips")) gc.num_clips = c.num_clips;
      if (!gen->count("--frames")) gc.frames = c.frames;
      if (!gen->count("--quiescent-tail")) gc.quiescent_tail = c.quiescent_tail;
      if (!gen->count("--dz")) gc.d_z = c.d_z;
      if (!gen->count("--rho-lo")) gc.rho_lo = c.rho_lo;
      if (!gen->count("--rho-hi")) gc.rho_hi = c.rho_hi;
      if (!gen->count("--pose-coupling")) gc.pose_coupling = c.pose_coupling;
      if (!gen->count("--noise-sigma")) gc.noise_sigma = c.noise_sigma;
      if (!gen->count("--joints")) gc.joints = c.joints;
      if (!gen->count("--period-min")) gc.period_min = c.period_min;
      if (!gen->count("--period-max")) gc.period_max = c.period_max;
      if (!gen->count("--group-map")) gc.group_map_path = c.group_map_path;
    }
    if (gc.out_dir.empty()) throw ConfigError("gen-synthetic: --out-dir is required");
    apply_env_seed(gc.seed);
    cmd::gen_synthetic(gc);
  });

  // ---- extract-features ----
  auto* ext = app.add_subcommand("extract-features", "pose descriptors from a motion file");
  std::string ext_config;
  cmd::ExtractFeaturesConfig ec;
  ext->add_option("--config", ext_config);
  ext->add_option("--motion", ec.motion_path);
  ext->add_option("--out", ec.out_path);
  ext->add_option("--group-map", ec.group_map_path);
  ext->add_option("--ref-frame", ec.ref_frame);
  ext->callback([&]() {
    if (!ext_config.empty()) {
      json j = load_config_file(ext_config);
      cmd::ExtractFeaturesConfig c;
      take(j, "motion", c.motion_path);
      take(j, "out", c.out_path);
      take(j, "group_map", c.group_map_path);
      take(j, "ref_frame", c.ref_frame);
      reject_leftovers(j, "extract-features");
      if (!ext->count("--motion")) ec.motion_path = c.motion_path;
      if (!ext->count("--out")) ec.out_path = c.out_path;
      if (!ext->count("--group-map")) ec.group_map_path = c.group_map_path;
      if (!ext->count("--ref-frame")) ec.ref_frame = c.ref_frame;
    }
    if (ec.motion_path.empty() || ec.out_path.empty())
      throw ConfigError("extract-features: --motion and --out are required");
    cmd::extract_features(ec);
  });

  // ---- fit-latent-space ----
  auto* fit = app.add_subcommand("fit-latent-space", "PCA + standardization from features");
  std::string fit_config;
  cmd::FitLatentSpaceConfig fc;
  fit->add_option("--config", fit_config);
  fit->add_option("--features", fc.features_path);
  fit->add_option("--out", fc.out_checkpoint);
  fit->add_option("--out-latents", fc.out_latents);
  fit->add_option("--dz", fc.d_z);
  fit->add_option("--eps", fc.eps);
  fit->add_option("--rest-frame", fc.rest_frame);
  fit->add_option("--seed", fc.seed);
  fit->add_option("--variant", fc.variant);
  fit->add_option("--hidden-width", fc.hidden_width);
  fit->add_option("--hidden-layers", fc.hidden_layers);
  fit->callback([&]() {
    if (!fit_config.empty()) {
      json j = load_config_file(fit_config);
      cmd::FitLatentSpaceConfig c;
      take(j, "features", c.features_path);
      take(j, "out", c.out_checkpoint);
      take(j, "out_latents", c.out_latents);
      take(j, "d_z", c.d_z);
      take(j, "eps", c.eps);
      take(j, "rest_frame", c.rest_frame);
      take(j, "seed", c.seed);
      take(j, "variant", c.variant);
      take(j, "hidden_width", c.hidden_width);
      take(j, "hidden_layers", c.hidden_layers);
      reject_leftovers(j, "fit-latent-space");
      if (!fit->count("--features")) fc.features_path = c.features_path;
      if (!fit->count("--out")) fc.out_checkpoint = c.out_checkpoint;
      if (!fit->count("--out-latents")) fc.out_latents = c.out_latents;
      if (!fit->count("--dz")) fc.d_z = c.d_z;
      if (!fit->count("--eps")) fc.eps = c.eps;
      if (!fit->count("--rest-frame")) fc.rest_frame = c.rest_frame;
      if (!fit->count("--seed")) fc.seed = c.seed;
      if (!fit->count("--variant")) fc.variant = c.variant;
      if (!fit->count("--hidden-width")) fc.hidden_width = c.hidden_width;
      if (!fit->count("--hidden-layers")) fc.hidden_layers = c.hidden_layers;
    }
    if (fc.features_path.empty() || fc.out_checkpoint.empty())
      throw ConfigError("fit-latent-space: --features and --out are required");
    apply_env_seed(fc.seed);
    cmd::fit_latent_space(fc);
  });

  // ---- train ----
  auto* tr = app.add_subcommand("train", "curriculum-train the dynamics model");
  std::string tr_config;
  cmd::TrainCommandConfig tc;
  tc.d_z = 0;  // 0 = infer from data
  tr->add_option("--config", tr_config);
  tr->add_option("--data-dir", tc.data_dir);
  tr->add_option("--out", tc.out_checkpoint);
  tr->add_option("--loss-csv", tc.out_loss_csv);
  tr->add_option("--init-checkpoint", tc.init_checkpoint);
  tr->add_option("--resume", tc.resume_checkpoint);
  tr->add_option("--seed", tc.seed);
  tr->add_option("--dz", tc.d_z);
  tr->add_option("--variant", tc.variant);
  tr->add_option("--hidden-width", tc.hidden_width);
  tr->add_option("--hidden-layers", tc.hidden_layers);
  tr->add_option("--epochs", tc.train.epochs);
  tr->add_option("--batch-size", tc.train.batch_size);
  tr->add_option("--batches-per-epoch", tc.train.batches_per_epoch);
  tr->add_option("--lr", tc.train.lr);
  tr->add_option("--grad-clip", tc.train.grad_clip);
  tr->add_option("--descriptor-jitter", tc.train.descriptor_jitter);
  tr->add_option("--window-budget", tc.train.window_budget,
                 "window-step budget per epoch (overrides --batches-per-epoch)");
  tr->add_option("--stop-after", tc.stop_after,
                 "stop after N epochs of the full schedule (resume later)");
  tr->callback([&]() {
    if (!tr_config.empty()) {
      json j = load_config_file(tr_config);
      cmd::TrainCommandConfig c;
      c.d_z = 0;
      take(j, "data_dir", c.data_dir);
      take(j, "out", c.out_checkpoint);
      take(j, "loss_csv", c.out_loss_csv);
      take(j, "init_checkpoint", c.init_checkpoint);
      take(j, "resume", c.resume_checkpoint);
      take(j, "seed", c.seed);
      take(j, "d_z", c.d_z);
      take(j, "variant", c.variant);
      take(j, "hidden_width", c.hidden_width);
      take(j, "hidden_layers", c.hidden_layers);
      take(j, "epochs", c.train.epochs);
      take(j, "batch_size", c.train.batch_size);
      take(j, "batches_per_epoch", c.train.batches_per_epoch);
      take(j, "lr", c.train.lr);
      take(j, "grad_clip", c.train.grad_clip);
      take(j, "descriptor_jitter", c.train.descriptor_jitter);
      take(j, "window_budget", c.train.window_budget);
      take(j, "stop_after", c.stop_after);
      take(j, "force_velocity_reset", c.train.force_velocity_reset);
      take(j, "horizon_start", c.curriculum.horizon_start);
      take(j, "horizon_end", c.curriculum.horizon_end);
      take(j, "tf_start", c.curriculum.tf_start);
      take(j, "tf_end", c.curriculum.tf_end);
      reject_leftovers(j, "train");
      if (!tr->count("--data-dir")) tc.data_dir = c.data_dir;
      if (!tr->count("--out")) tc.out_checkpoint = c.out_checkpoint;
      if (!tr->count("--loss-csv")) tc.out_loss_csv = c.out_loss_csv;
      if (!tr->count("--init-checkpoint")) tc.init_checkpoint = c.init_checkpoint;
      if (!tr->count("--resume")) tc.resume_checkpoint = c.resume_checkpoint;
      if (!tr->count("--seed")) tc.seed = c.seed;
      if (!tr->count("--dz")) tc.d_z = c.d_z;
      if (!tr->count("--variant")) tc.variant = c.variant;
      if (!tr->count("--hidden-width")) tc.hidden_width = c.hidden_width;
      if (!tr->count("--hidden-layers")) tc.hidden_layers = c.hidden_layers;
      if (!tr->count("--epochs")) tc.train.epochs = c.train.epochs;
      if (!tr->count("--batch-size")) tc.train.batch_size = c.train.batch_size;
      if (!tr->count("--batches-per-epoch"))
        tc.train.batches_per_epoch = c.train.batches_per_epoch;
      if (!tr->count("--lr")) tc.train.lr = c.train.lr;
      if (!tr->count("--grad-clip")) tc.train.grad_clip = c.train.grad_clip;
      if (!tr->count("--descriptor-jitter"))
        tc.train.descriptor_jitter = c.train.descriptor_jitter;
      if (!tr->count("--window-budget")) tc.train.window_budget = c.train.window_budget;
      if (!tr->count("--stop-after")) tc.stop_after = c.stop_after;
      tc.train.force_velocity_reset = c.train.force_velocity_reset;
      tc.curriculum = c.curriculum;
    }
    if (tc.data_dir.empty() || tc.out_checkpoint.empty())
      throw ConfigError("train: --data-dir and --out are required");
    apply_env_seed(tc.seed);
    tc.train.seed = tc.seed;
    tc.config_echo = json{{"command", "train"},
                          {"seed", tc.seed},
                          {"variant", tc.variant},
                          {"hidden_width", tc.hidden_width},
                          {"hidden_layers", tc.hidden_layers},
                          {"epochs", tc.train.epochs},
                          {"batch_size", tc.train.batch_size},
                          {"batches_per_epoch", tc.train.batches_per_epoch},
                          {"lr", tc.train.lr},
                          {"grad_clip", tc.train.grad_clip},
                          {"descriptor_jitter", tc.train.descriptor_jitter},
                          {"window_budget", tc.train.window_budget},
                          {"force_velocity_reset", tc.train.force_velocity_reset},
                          {"horizon_start", tc.curriculum.horizon_start},
                          {"horizon_end", tc.curriculum.horizon_end},
                          {"tf_start", tc.curriculum.tf_start},
                          {"tf_end", tc.curriculum.tf_end}}
                         .dump();
    cmd::train_command(tc);
  });

  // ---- rollout ----
  auto* ro = app.add_subcommand("rollout", "autoregressive latent rollout");
  std::string ro_config, ro_variant;
  cmd::RolloutConfig rc;
  ro->add_option("--config", ro_config);
  ro->add_option("--checkpoint", rc.checkpoint);
  ro->add_option("--motion", rc.motion_path);
  ro->add_option("--descriptors", rc.descriptors_path);
  ro->add_option("--group-map", rc.group_map_path);
  ro->add_option("--out", rc.out_path);
  ro->add_option("--init-latent", rc.init_latent_path);
  ro->add_option("--variant", ro_variant);
  ro->add_option("--pose-gain", rc.gains.pose);
  ro->add_option("--damp-gain", rc.gains.damp);
  ro->add_option("--spring-gain", rc.gains.spring);
  ro->add_option("--ref-frame", rc.ref_frame);
  ro->callback([&]() {
    if (!ro_config.empty()) {
      json j = load_config_file(ro_config);
      cmd::RolloutConfig c;
      std::string cv;
      take(j, "checkpoint", c.checkpoint);
      take(j, "motion", c.motion_path);
      take(j, "descriptors", c.descriptors_path);
      take(j, "group_map", c.group_map_path);
      take(j, "out", c.out_path);
      take(j, "init_latent", c.init_latent_path);
      take(j, "variant", cv);
      take(j, "pose_gain", c.gains.pose);
      take(j, "damp_gain", c.gains.damp);
      take(j, "spring_gain", c.gains.spring);
      take(j, "ref_frame", c.ref_frame);
      reject_leftovers(j, "rollout");
      if (!ro->count("--checkpoint")) rc.checkpoint = c.checkpoint;
      if (!ro->count("--motion")) rc.motion_path = c.motion_path;
      if (!ro->count("--descriptors")) rc.descriptors_path = c.descriptors_path;
      if (!ro->count("--group-map")) rc.group_map_path = c.group_map_path;
      if (!ro->count("--out")) rc.out_path = c.out_path;
      if (!ro->count("--init-latent")) rc.init_latent_path = c.init_latent_path;
      if (!ro->count("--variant")) ro_variant = cv;
      if (!ro->count("--pose-gain")) rc.gains.pose = c.gains.pose;
      if (!ro->count("--damp-gain")) rc.gains.damp = c.gains.damp;
      if (!ro->count("--spring-gain")) rc.gains.spring = c.gains.spring;
      if (!ro->count("--ref-frame")) rc.ref_frame = c.ref_frame;
    }
    if (rc.checkpoint.empty() || rc.out_path.empty())
      throw ConfigError("rollout: --checkpoint and --out are required");
    if (rc.gains.pose < 0.0 || rc.gains.damp < 0.0 || rc.gains.spring < 0.0)
      throw ConfigError("rollout: gains must be non-negative");
    if (!ro_variant.empty()) rc.variant_override = variant_from_string(ro_variant);
    cmd::rollout_command(rc);
  });

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "metrics report for a checkpoint on a dataset");
  std::string ev_config;
  cmd::EvalConfig evc;
  ev->add_option("--config", ev_config);
  ev->add_option("--checkpoint", evc.checkpoint);
  ev->add_option("--data-dir", evc.data_dir);
  ev->add_option("--out", evc.out_path);
  ev->add_option("--quiescent-tail", evc.quiescent_tail);
  ev->callback([&]() {
    if (!ev_config.empty()) {
      json j = load_config_file(ev_config);
      cmd::EvalConfig c;
      take(j, "checkpoint", c.checkpoint);
      take(j, "data_dir", c.data_dir);
      take(j, "out", c.out_path);
      take(j, "quiescent_tail", c.quiescent_tail);
      reject_leftovers(j, "eval");
      if (!ev->count("--checkpoint")) evc.checkpoint = c.checkpoint;
      if (!ev->count("--data-dir")) evc.data_dir = c.data_dir;
      if (!ev->count("--out")) evc.out_path = c.out_path;
      if (!ev->count("--quiescent-tail")) evc.quiescent_tail = c.quiescent_tail;
    }
    if (evc.checkpoint.empty() || evc.data_dir.empty() || evc.out_path.empty())
      throw ConfigError("eval: --checkpoint, --data-dir and --out are required");
    cmd::eval_command(evc);
  });

  CLI11_PARSE(app, argc, argv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const FitError& e) {
    std::cerr << "fit error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 4;
  } catch (const DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << "\n";
    return 3;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

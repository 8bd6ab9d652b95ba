#include "latdyn/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "latdyn/oracle.hpp"

namespace latdyn::cmd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "'");
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError("'" + path + "': invalid JSON: " + e.what());
  }
  return j;
}

void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

std::string clip_stem(std::size_t i) {
  std::ostringstream os;
  os << "clip_" << std::setw(3) << std::setfill('0') << i;
  return os.str();
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ConfigError("cannot open '" + path + "' for writing");
  f << j.dump(2) << '\n';
  if (!f) throw ConfigError("write failed for '" + path + "'");
}

std::vector<so3::Rotation> reference_frame(const so3::RotationSequence& seq,
                                           std::size_t ref_frame) {
  if (ref_frame >= seq.frames)
    throw ConfigError("reference frame index out of range");
  std::vector<so3::Rotation> ref(seq.joints);
  for (std::size_t j = 0; j < seq.joints; ++j) ref[j] = seq.at(ref_frame, j);
  return ref;
}

}  // namespace

JointGroupMap load_group_map(const std::string& path) {
  json j = parse_json_file(path);
  reject_unknown_keys(j, {"groups"}, "group map");
  if (!j.contains("groups")) throw ConfigError("group map: missing 'groups'");
  const json& groups = j["groups"];
  JointGroupMap map;
  const auto& names = JointGroupMap::group_names();
  for (auto it = groups.begin(); it != groups.end(); ++it) {
    if (std::find(names.begin(), names.end(), it.key()) == names.end())
      throw ConfigError("group map: unknown group '" + it.key() + "'");
  }
  for (std::size_t g = 0; g < JointGroupMap::kNumGroups; ++g) {
    if (!groups.contains(names[g]))
      throw ConfigError("group map: missing group '" + names[g] + "'");
    for (const json& v : groups[names[g]])
      map.groups[g].push_back(v.get<std::size_t>());
  }
  return map;
}

void save_group_map(const std::string& path, const JointGroupMap& map) {
  json groups = json::object();
  const auto& names = JointGroupMap::group_names();
  for (std::size_t g = 0; g < JointGroupMap::kNumGroups; ++g)
    groups[names[g]] = map.groups[g];
  write_json_file(path, json{{"groups", groups}});
}

void gen_synthetic(const GenSyntheticConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  JointGroupMap map = cfg.group_map_path.empty() ? JointGroupMap::default24()
                                                 : load_group_map(cfg.group_map_path);
  map.validate(cfg.joints);

  oracle::SyntheticSystem sys =
      oracle::make_system(cfg.d_z, cfg.seed, cfg.rho_lo, cfg.rho_hi, cfg.pose_coupling);
  sys.noise_sigma = cfg.noise_sigma;

  for (std::size_t i = 0; i < cfg.num_clips; ++i) {
    so3::RotationSequence seq =
        oracle::gen_pose_signal(cfg.seed + 1000 + i, cfg.frames, cfg.quiescent_tail,
                                cfg.joints, cfg.period_min, cfg.period_max);
    Matrix desc = pose_descriptors(seq, reference_frame(seq, 0), map);
    TrainingClip clip = oracle::simulate(sys, desc, cfg.seed + 2000 + i);

    std::string stem = (fs::path(cfg.out_dir) / clip_stem(i)).string();
    io::save_rotation_sequence(stem + ".quatseq", seq);
    io::save_matrix(stem + ".descriptors.featmat", clip.descriptors);
    io::save_matrix(stem + ".latents.featmat", clip.targets);
  }

  io::save_matrix((fs::path(cfg.out_dir) / "w_pose.featmat").string(), sys.w_pose);
  json manifest = {
      {"seed", cfg.seed},
      {"num_clips", cfg.num_clips},
      {"frames", cfg.frames},
      {"quiescent_tail", cfg.quiescent_tail},
      {"d_z", cfg.d_z},
      {"joints", cfg.joints},
      {"rho_lo", cfg.rho_lo},
      {"rho_hi", cfg.rho_hi},
      {"pose_coupling", cfg.pose_coupling},
      {"noise_sigma", cfg.noise_sigma},
      {"period_min", cfg.period_min},
      {"period_max", cfg.period_max},
      {"kappa", sys.kappa},
      {"c", sys.c},
      {"m", sys.m},
      {"z_ref", sys.z_ref},
      {"spectral_radii", sys.spectral_radii()},
  };
  write_json_file((fs::path(cfg.out_dir) / "manifest.json").string(), manifest);
}

void extract_features(const ExtractFeaturesConfig& cfg) {
  so3::RotationSequence seq = io::load_rotation_sequence(cfg.motion_path);
  JointGroupMap map = cfg.group_map_path.empty() ? JointGroupMap::default24()
                                                 : load_group_map(cfg.group_map_path);
  map.validate(seq.joints);
  Matrix desc = pose_descriptors(seq, reference_frame(seq, cfg.ref_frame), map);
  io::save_matrix(cfg.out_path, desc);
}

void fit_latent_space(const FitLatentSpaceConfig& cfg) {
  Matrix features = io::load_matrix(cfg.features_path);
  LatentSpaceModel ls = latdyn::fit_latent_space(features, cfg.d_z, cfg.eps, cfg.rest_frame);

  io::Checkpoint ck;
  ck.latent_space = ls;
  ck.model = make_dynamics_model(cfg.d_z, cfg.seed, variant_from_string(cfg.variant),
                                 cfg.hidden_width, cfg.hidden_layers);
  ck.model.z_ref = ls.z_ref;
  ck.config_echo = json{{"command", "fit-latent-space"},
                        {"d_z", cfg.d_z},
                        {"eps", cfg.eps},
                        {"rest_frame", cfg.rest_frame},
                        {"seed", cfg.seed},
                        {"variant", cfg.variant}}
                       .dump();
  io::save_checkpoint(cfg.out_checkpoint, ck);

  if (!cfg.out_latents.empty()) io::save_matrix(cfg.out_latents, encode_all(features, ls));
}

std::vector<TrainingClip> load_clips(const std::string& data_dir) {
  std::vector<std::string> stems;
  if (!fs::is_directory(data_dir))
    throw ConfigError("data directory '" + data_dir + "' does not exist");
  for (const auto& e : fs::directory_iterator(data_dir)) {
    std::string name = e.path().filename().string();
    const std::string suffix = ".latents.featmat";
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      stems.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(stems.begin(), stems.end());
  if (stems.empty())
    throw ConfigError("no *.latents.featmat files found in '" + data_dir + "'");

  std::vector<TrainingClip> clips;
  for (const std::string& s : stems) {
    TrainingClip c;
    c.targets = io::load_matrix((fs::path(data_dir) / (s + ".latents.featmat")).string());
    c.descriptors =
        io::load_matrix((fs::path(data_dir) / (s + ".descriptors.featmat")).string());
    c.validate();
    clips.push_back(std::move(c));
  }
  return clips;
}

void train_command(const TrainCommandConfig& cfg) {
  std::vector<TrainingClip> clips = load_clips(cfg.data_dir);
  std::size_t d_z = clips[0].targets.cols;
  if (cfg.d_z != 0 && cfg.d_z != d_z)
    throw ConfigError("train: configured d_z " + std::to_string(cfg.d_z) +
                      " does not match data (" + std::to_string(d_z) + ")");

  io::Checkpoint ck;
  nn::AdamState adam(cfg.train.lr);
  bool resumed = false;

  if (!cfg.resume_checkpoint.empty()) {
    ck = io::load_checkpoint(cfg.resume_checkpoint);
    if (ck.adam_m.empty())
      throw ConfigError("resume checkpoint carries no optimizer state");
    adam.first_moments() = ck.adam_m;
    adam.second_moments() = ck.adam_v;
    adam.set_step_count(ck.adam_steps);
    resumed = true;
  } else if (!cfg.init_checkpoint.empty()) {
    ck = io::load_checkpoint(cfg.init_checkpoint);
  } else {
    ck.model = make_dynamics_model(d_z, cfg.seed, variant_from_string(cfg.variant),
                                   cfg.hidden_width, cfg.hidden_layers);
    // Rest latent: the first frame of the first training clip.
    ck.model.z_ref.assign(clips[0].targets.row(0), clips[0].targets.row(0) + d_z);
  }
  if (ck.model.d_z != d_z)
    throw DimensionError("train: checkpoint d_z does not match the dataset");

  TrainConfig tc = cfg.train;
  CurriculumSchedule sched = cfg.curriculum;
  sched.total_epochs = tc.epochs;
  if (cfg.stop_after > 0 && cfg.stop_after < tc.epochs) tc.epochs = cfg.stop_after;

  TrainResult res = train(ck.model, clips, tc, sched, &adam);

  ck.config_echo = cfg.config_echo;
  ck.adam_m = adam.first_moments();
  ck.adam_v = adam.second_moments();
  ck.adam_steps = adam.step_count();
  ck.adam_lr = tc.lr;
  io::save_checkpoint(cfg.out_checkpoint, ck);

  if (!cfg.out_loss_csv.empty()) {
    std::vector<io::LossRow> rows;
    // On resume the CSV only covers the epochs this invocation ran.
    for (const LossRecord& r : res.history)
      rows.push_back({r.epoch, r.horizon, r.p_tf, r.loss});
    (void)resumed;
    io::save_loss_history(cfg.out_loss_csv, rows);
  }
}

void rollout_command(const RolloutConfig& cfg) {
  io::Checkpoint ck = io::load_checkpoint(cfg.checkpoint);
  DynamicsModel& model = ck.model;
  if (cfg.variant_override) model.variant = *cfg.variant_override;

  Matrix desc;
  if (!cfg.descriptors_path.empty()) {
    desc = io::load_matrix(cfg.descriptors_path);
  } else if (!cfg.motion_path.empty()) {
    so3::RotationSequence seq = io::load_rotation_sequence(cfg.motion_path);
    JointGroupMap map = cfg.group_map_path.empty() ? JointGroupMap::default24()
                                                   : load_group_map(cfg.group_map_path);
    map.validate(seq.joints);
    desc = pose_descriptors(seq, reference_frame(seq, cfg.ref_frame), map);
  } else {
    throw ConfigError("rollout: need --motion or --descriptors");
  }
  if (desc.cols != model.d_p)
    throw DimensionError("rollout: descriptor width " + std::to_string(desc.cols) +
                         " does not match model d_p " + std::to_string(model.d_p));

  LatentState init{model.z_ref, Vec(model.d_z, 0.0)};
  if (!cfg.init_latent_path.empty()) {
    Matrix z0 = io::load_matrix(cfg.init_latent_path);
    if (z0.rows != 1 || z0.cols != model.d_z)
      throw DimensionError("rollout: --init-latent must be a 1 x d_z matrix");
    init.z.assign(z0.row(0), z0.row(0) + z0.cols);
  }

  std::vector<LatentState> traj = rollout(model, desc, init, cfg.gains);
  Matrix out(traj.size(), model.d_z);
  for (std::size_t t = 0; t < traj.size(); ++t)
    std::copy(traj[t].z.begin(), traj[t].z.end(), out.row(t));
  io::save_matrix(cfg.out_path, out);
}

EvalMetrics eval_model(const DynamicsModel& model, const std::vector<TrainingClip>& clips,
                       std::size_t quiescent_tail) {
  if (clips.empty()) throw ConfigError("eval: no clips");
  EvalMetrics m;
  std::size_t d_z = model.d_z;
  ForceGains unit;

  // per-dim target variance over all clips
  double mean = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (const TrainingClip& c : clips) {
    for (double x : c.targets.data) {
      mean += x;
      sq += x * x;
      ++count;
    }
  }
  mean /= static_cast<double>(count);
  m.target_variance = sq / static_cast<double>(count) - mean * mean;

  // teacher-forced one-step MSE
  double tf_err = 0.0;
  std::size_t tf_n = 0;
  for (const TrainingClip& c : clips) {
    for (std::size_t t = 1; t < c.frames(); ++t) {
      LatentState st = window_init_state(c, t, model.dt);
      Vec fp(c.descriptors.row(t), c.descriptors.row(t) + c.descriptors.cols);
      ForceParams f = predict_forces(model, fp, state_feature(st.z, st.v));
      LatentState nx = step_variant(model.variant, st, f, unit, model.z_ref, model.dt);
      for (std::size_t i = 0; i < d_z; ++i) {
        double d = nx.z[i] - c.targets(t, i);
        tf_err += d * d;
        ++tf_n;
      }
    }
  }
  m.teacher_forced_mse = tf_err / static_cast<double>(tf_n);

  // free rollout from the clip start at several horizons
  auto rollout_mse = [&](std::size_t horizon) {
    double err = 0.0;
    std::size_t n = 0;
    for (const TrainingClip& c : clips) {
      std::size_t h = std::min<std::size_t>(horizon, c.frames() - 1);
      LatentState st{Vec(c.targets.row(0), c.targets.row(0) + d_z), Vec(d_z, 0.0)};
      for (std::size_t t = 1; t <= h; ++t) {
        Vec fp(c.descriptors.row(t), c.descriptors.row(t) + c.descriptors.cols);
        ForceParams f = predict_forces(model, fp, state_feature(st.z, st.v));
        st = step_variant(model.variant, st, f, unit, model.z_ref, model.dt);
        for (std::size_t i = 0; i < d_z; ++i) {
          double d = st.z[i] - c.targets(t, i);
          err += d * d;
          ++n;
        }
      }
    }
    return err / static_cast<double>(n);
  };
  m.rollout_mse_h10 = rollout_mse(10);
  m.rollout_mse_h50 = rollout_mse(50);
  m.rollout_mse_h200 = rollout_mse(200);

  // full-clip rollout: rest-return metric + step timing
  double cease = 0.0, terminal = 0.0;
  std::size_t steps = 0;
  auto t0 = std::chrono::steady_clock::now();
  for (const TrainingClip& c : clips) {
    LatentState st{model.z_ref, Vec(d_z, 0.0)};
    std::vector<double> dist(c.frames());
    for (std::size_t t = 0; t < c.frames(); ++t) {
      Vec fp(c.descriptors.row(t), c.descriptors.row(t) + c.descriptors.cols);
      ForceParams f = predict_forces(model, fp, state_feature(st.z, st.v));
      st = step_variant(model.variant, st, f, unit, model.z_ref, model.dt);
      double s = 0.0;
      for (std::size_t i = 0; i < d_z; ++i) {
        double d = st.z[i] - model.z_ref[i];
        s += d * d;
      }
      dist[t] = std::sqrt(s);
      ++steps;
    }
    if (quiescent_tail > 0 && quiescent_tail < c.frames()) {
      cease += dist[c.frames() - quiescent_tail];
      terminal += dist[c.frames() - 1];
    }
  }
  auto t1 = std::chrono::steady_clock::now();
  m.ms_per_step = std::chrono::duration<double, std::milli>(t1 - t0).count() /
                  static_cast<double>(steps);
  if (quiescent_tail > 0) {
    m.rest_return_terminal = terminal / static_cast<double>(clips.size());
    double c0 = cease / static_cast<double>(clips.size());
    m.rest_return_ratio = c0 > 0.0 ? m.rest_return_terminal / c0 : 0.0;
  }
  return m;
}

void eval_command(const EvalConfig& cfg) {
  io::Checkpoint ck = io::load_checkpoint(cfg.checkpoint);
  std::vector<TrainingClip> clips = load_clips(cfg.data_dir);
  EvalMetrics m = eval_model(ck.model, clips, cfg.quiescent_tail);

  json out = {
      {"teacher_forced_mse", m.teacher_forced_mse},
      {"rollout_mse", {{"h10", m.rollout_mse_h10}, {"h50", m.rollout_mse_h50},
                       {"h200", m.rollout_mse_h200}}},
      {"target_variance", m.target_variance},
      {"rest_return", {{"terminal", m.rest_return_terminal}, {"ratio", m.rest_return_ratio}}},
      // timing lives in its own section so deterministic fields can be
      // compared/checksummed without it
      {"timing", {{"ms_per_step", m.ms_per_step}}},
  };
  write_json_file(cfg.out_path, out);
}

}  // namespace latdyn::cmd

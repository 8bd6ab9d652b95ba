// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Tolerances are pinned here on purpose; do not loosen them to make
// a run green.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "latdyn/commands.hpp"
#include "latdyn/dynamics.hpp"
#include "latdyn/io.hpp"
#include "latdyn/latent_space.hpp"
#include "latdyn/oracle.hpp"
#include "latdyn/pose_features.hpp"
#include "latdyn/training.hpp"

using namespace latdyn;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%d] %-20s %s  %s\n", idx, name.c_str(), ok ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

TrainingClip oracle_clip(const oracle::SyntheticSystem& sys, std::uint64_t signal_seed,
                         std::size_t frames, std::size_t tail, std::uint64_t noise_seed) {
  auto seq = oracle::gen_pose_signal(signal_seed, frames, tail);
  std::vector<so3::Rotation> ref(seq.data.begin(), seq.data.begin() + seq.joints);
  Matrix desc = pose_descriptors(seq, ref, JointGroupMap::default24());
  return oracle::simulate(sys, desc, noise_seed);
}

std::vector<char> slurp(const std::string& p) {
  std::ifstream f(p, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(f), {});
}

// ---- 1: BPTT gradients vs central finite differences ----

void criterion_gradients() {
  auto t0 = std::chrono::steady_clock::now();
  // Dense random inputs keep every feature away from zero: with real pose
  // descriptors many first-layer gradients sit at ~1e-8, where the central
  // difference is pure roundoff noise and no honest tolerance applies.
  Rng rng(5);
  TrainingClip clip;
  clip.targets = Matrix(40, 4);
  clip.descriptors = Matrix(40, kPoseDescriptorDim);
  for (double& x : clip.targets.data) x = 0.3 * rng.normal();
  for (double& x : clip.descriptors.data) x = 0.3 * rng.normal();
  std::vector<TrainingClip> clips = {std::move(clip)};
  DynamicsModel model = make_dynamics_model(4, 7, Variant::full, 8, 2);
  for (double& z : model.z_ref) z = 0.3 * rng.normal();

  std::vector<WindowRef> batch = {{0, 2}, {0, 11}, {0, 23}};
  const std::size_t horizon = 5;
  const double p_tf = 0.5;

  auto loss_value = [&]() {
    nn::Tape tape;
    Rng rng(91);
    nn::VarId l = batch_rollout_loss(tape, model, clips, batch, horizon, p_tf, rng);
    return tape.value(l)(0, 0);
  };

  // analytic pass
  model.zero_grad();
  {
    nn::Tape tape;
    Rng rng(91);
    nn::VarId l = batch_rollout_loss(tape, model, clips, batch, horizon, p_tf, rng);
    tape.backward(l);
  }

  double max_rel = 0.0;
  // h balances truncation O(h^2) against roundoff eps*L/h: at h = 1e-5 the
  // roundoff floor is ~4e-12, well under 1e-5 of the smallest gradient here.
  const double h = 1e-5;
  for (nn::Param* p : model.params()) {
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      double saved = p->value.data[k];
      p->value.data[k] = saved + h;
      double lp = loss_value();
      p->value.data[k] = saved - h;
      double lm = loss_value();
      p->value.data[k] = saved;
      double num = (lp - lm) / (2.0 * h);
      double ana = p->grad.data[k];
      double denom = std::max({std::abs(num), std::abs(ana), 1e-8});
      max_rel = std::max(max_rel, std::abs(num - ana) / denom);
    }
  }
  double secs = seconds_since(t0);
  bool ok = max_rel < 1e-5 && secs < 60.0;
  char buf[128];
  std::snprintf(buf, sizeof buf, "(max rel err %.2e, %.1f s)", max_rel, secs);
  report(1, "gradient fidelity", ok, buf);
}

// ---- 2 and 3: oracle recovery + rest-state return ----

void criterion_recovery_and_rest() {
  oracle::SyntheticSystem sys = oracle::make_system(8, 11, 0.85, 0.97, 0.5);

  std::vector<TrainingClip> train_clips, held_out, quiescent;
  for (std::size_t i = 0; i < 20; ++i) {
    TrainingClip c = oracle_clip(sys, 1011 + i, 500, 120, 2011 + i);
    if (i < 15)
      train_clips.push_back(std::move(c));
    else
      held_out.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < 5; ++i)
    quiescent.push_back(oracle_clip(sys, 3011 + i, 500, 300, 4011 + i));

  DynamicsModel model = make_dynamics_model(8, 11, Variant::full, 64, 2);
  model.z_ref = sys.z_ref;
  calm_init(model);

  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.batch_size = 64;
  // Fixed per-epoch window-step budget: short-horizon epochs run many cheap
  // near-one-step batches, which is where the teacher-forced fit is earned;
  // a flat batch count spends most of the wall budget on long windows and
  // lands short of the one-step threshold.
  cfg.window_budget = 42000;
  cfg.lr = 5e-5;
  cfg.grad_clip = 1.0;
  // Without input jitter the trained forces are explosive in a small state
  // region that one quiescent clip's 500-step rollout happens to enter.
  cfg.descriptor_jitter = 0.007;
  cfg.seed = 11;
  CurriculumSchedule sched;
  sched.total_epochs = cfg.epochs;

  auto t0 = std::chrono::steady_clock::now();
  train(model, train_clips, cfg, sched);
  double train_secs = seconds_since(t0);

  cmd::EvalMetrics m = cmd::eval_model(model, held_out, 0);
  double tf_limit = 1e-3 * m.target_variance;
  double ro_limit = 0.05 * m.target_variance;
  bool ok2 = m.teacher_forced_mse < tf_limit && m.rollout_mse_h50 < ro_limit &&
             train_secs < 600.0;
  char buf[192];
  std::snprintf(buf, sizeof buf,
                "(tf mse %.2e < %.2e: %s; rollout50 %.2e < %.2e: %s; %.0f s)",
                m.teacher_forced_mse, tf_limit,
                m.teacher_forced_mse < tf_limit ? "yes" : "NO", m.rollout_mse_h50,
                ro_limit, m.rollout_mse_h50 < ro_limit ? "yes" : "NO", train_secs);
  report(2, "oracle recovery", ok2, buf);

  // rest-state return on quiescent-tail clips, full model vs the
  // no-spring-damper ablation with the same trained heads
  bool ok3 = true;
  double worst_ratio = 0.0;
  const std::size_t tail = 300;
  for (const TrainingClip& c : quiescent) {
    LatentState init{model.z_ref, Vec(model.d_z, 0.0)};
    auto traj = rollout(model, c.descriptors, init, ForceGains{});
    std::size_t cease = c.frames() - tail;
    auto dist = [&](const LatentState& s) {
      double acc = 0.0;
      for (std::size_t i = 0; i < s.z.size(); ++i) {
        double d = s.z[i] - model.z_ref[i];
        acc += d * d;
      }
      return std::sqrt(acc);
    };
    double at_cease = dist(traj[cease]);
    double terminal = dist(traj.back());
    double ratio = at_cease > 0.0 ? terminal / at_cease : 0.0;
    worst_ratio = std::max(worst_ratio, ratio);

    double ablated_terminal;
    DynamicsModel no_spring = model;
    no_spring.variant = Variant::accel_no_spring;
    try {
      auto traj3 = rollout(no_spring, c.descriptors, init, ForceGains{});
      ablated_terminal = dist(traj3.back());
    } catch (const DivergenceError&) {
      ablated_terminal = kDivergenceLimit;  // blew up: certainly no rest return
    }
    if (!(ratio < 0.10) || !(terminal < ablated_terminal)) ok3 = false;
  }
  std::snprintf(buf, sizeof buf, "(worst terminal/cessation ratio %.3f, limit 0.10)",
                worst_ratio);
  report(3, "rest-state return", ok3, buf);
}

// ---- 4: gain identity and exact linearity ----

void criterion_gains() {
  oracle::SyntheticSystem sys = oracle::make_system(6, 21, 0.85, 0.95, 0.4);
  auto seq = oracle::gen_pose_signal(22, 120, 0);
  std::vector<so3::Rotation> ref(seq.data.begin(), seq.data.begin() + seq.joints);
  Matrix desc = pose_descriptors(seq, ref, JointGroupMap::default24());

  DynamicsModel model = make_dynamics_model(6, 23, Variant::full, 32, 2);
  model.z_ref = sys.z_ref;
  LatentState init{model.z_ref, Vec(6, 0.0)};

  auto a = rollout(model, desc, init, ForceGains{});
  ForceGains ones;
  ones.pose = 1.0;
  ones.damp = 1.0;
  ones.spring = 1.0;
  auto b = rollout(model, desc, init, ones);
  bool byte_exact = a.size() == b.size();
  for (std::size_t t = 0; byte_exact && t < a.size(); ++t)
    byte_exact = a[t].z == b[t].z && a[t].v == b[t].v;

  // exact linear scaling of the spring and damping components
  Rng rng(77);
  bool linear = true;
  for (int trial = 0; trial < 200 && linear; ++trial) {
    std::size_t n = 5;
    LatentState st;
    ForceParams fp;
    Vec zr(n);
    for (std::size_t i = 0; i < n; ++i) {
      st.z.push_back(rng.normal());
      st.v.push_back(rng.normal());
      fp.g.push_back(rng.normal());
      fp.kappa.push_back(std::abs(rng.normal()) + 0.1);
      fp.c.push_back(std::abs(rng.normal()) + 0.1);
      fp.m.push_back(std::abs(rng.normal()) + 0.5);
      zr[i] = rng.normal();
    }
    ForceGains unit;
    ForceComponents one = force_components(st, fp, unit, zr);
    double s = rng.uniform(0.1, 5.0);
    ForceGains scaled;
    scaled.pose = s;
    scaled.damp = s;
    scaled.spring = s;
    ForceComponents got = force_components(st, fp, scaled, zr);
    for (std::size_t i = 0; i < n; ++i) {
      if (got.pose[i] != s * one.pose[i]) linear = false;
      if (got.damping[i] != s * one.damping[i]) linear = false;
      if (got.spring[i] != s * one.spring[i]) linear = false;
    }
  }
  report(4, "gain identity", byte_exact && linear,
         byte_exact ? (linear ? "(all-ones byte-exact; scaling exact)"
                              : "(scaling not exact)")
                    : "(all-ones rollout differs)");
}

// ---- 5: frozen-coefficient recurrence vs 2x2 matrix powers ----

void criterion_recurrence() {
  Rng rng(31);
  double worst = 0.0;
  bool classified = true;
  int sets = 0;
  while (sets < 64) {
    double k = rng.uniform(0.01, 4.0);
    double c = rng.uniform(0.01, 2.2);
    double m = rng.uniform(0.3, 3.0);
    double rho = oracle::spectral_radius(oracle::transition_matrix(k, c, m, 1.0));
    if (rho > 0.995) continue;  // stable sets only, away from the margin
    ++sets;

    auto M = oracle::transition_matrix(k, c, m, 1.0);
    double x = 1.0, v = 0.5;  // displacement from z_ref and velocity
    std::array<double, 4> P = {1, 0, 0, 1};
    LatentState s{{x}, {v}};
    ForceParams fp{{0.0}, {k}, {c}, {m}};
    double norm0 = std::sqrt(x * x + v * v), norm_end = norm0;
    for (int t = 0; t < 1000; ++t) {
      s = step(s, fp, ForceGains{}, {0.0}, 1.0);
      // P <- P * M, so after t+1 iterations P = M^(t+1)
      P = {P[0] * M[0] + P[1] * M[2], P[0] * M[1] + P[1] * M[3],
           P[2] * M[0] + P[3] * M[2], P[2] * M[1] + P[3] * M[3]};
      double zx = P[0] * x + P[1] * v;
      double zv = P[2] * x + P[3] * v;
      worst = std::max({worst, std::abs(s.z[0] - zx), std::abs(s.v[0] - zv)});
      norm_end = std::sqrt(s.z[0] * s.z[0] + s.v[0] * s.v[0]);
    }
    bool decayed = norm_end < norm0;
    if (decayed != (rho < 1.0)) classified = false;
  }
  bool ok = worst < 1e-12 && classified;
  char buf[96];
  std::snprintf(buf, sizeof buf, "(max |rollout - M^t x0| = %.2e)", worst);
  report(5, "recurrence oracle", ok, buf);
}

// ---- 6: descriptor contract ----

void criterion_descriptor() {
  bool width = (kPoseDescriptorDim == 96);
  auto map = JointGroupMap::default24();

  Rng rng(3);
  so3::RotationSequence seq(10, 24);
  for (std::size_t j = 0; j < 24; ++j) {
    so3::Rotation r = so3::exp_map({rng.normal(), rng.normal(), rng.normal()});
    for (std::size_t t = 0; t < 10; ++t) seq.at(t, j) = r;
  }
  std::vector<so3::Rotation> ref(seq.data.begin(), seq.data.begin() + 24);
  Matrix d = pose_descriptors(seq, ref, map);
  width = width && d.cols == 96;
  bool zero = true;
  for (double x : d.data) zero = zero && x == 0.0;

  // permutation of joints within the core group must be bit-exact
  auto moving = oracle::gen_pose_signal(9, 30, 0);
  std::vector<so3::Rotation> mref(moving.data.begin(), moving.data.begin() + 24);
  Matrix base = pose_descriptors(moving, mref, map);
  so3::RotationSequence perm = moving;
  std::vector<so3::Rotation> pref = mref;
  std::vector<std::size_t> core = {0, 3, 6, 9}, shuf = {6, 9, 0, 3};
  for (std::size_t t = 0; t < moving.frames; ++t)
    for (std::size_t k = 0; k < core.size(); ++k)
      perm.at(t, core[k]) = moving.at(t, shuf[k]);
  for (std::size_t k = 0; k < core.size(); ++k) pref[core[k]] = mref[shuf[k]];
  Matrix pd = pose_descriptors(perm, pref, map);
  bool invariant = pd.data == base.data;

  report(6, "descriptor contract", width && zero && invariant,
         width ? (zero ? (invariant ? "(width 96; static zero; permutation exact)"
                                    : "(permutation changed bits)")
                       : "(static descriptors nonzero)")
               : "(width mismatch)");
}

// ---- 7: latent-space contract ----

void criterion_latent_space() {
  auto seq = oracle::gen_pose_signal(17, 600, 0);
  std::vector<so3::Rotation> ref(seq.data.begin(), seq.data.begin() + 24);
  Matrix feats = pose_descriptors(seq, ref, JointGroupMap::default24());
  const std::size_t d_z = 12;
  LatentSpaceModel ls = fit_latent_space(feats, d_z);

  double ortho = 0.0;
  for (std::size_t i = 0; i < d_z; ++i)
    for (std::size_t j = 0; j < d_z; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < ls.w.cols; ++k) dot += ls.w(i, k) * ls.w(j, k);
      ortho = std::max(ortho, std::abs(dot - (i == j ? 1.0 : 0.0)));
    }

  Matrix z = encode_all(feats, ls);
  double worst_mean = 0.0, worst_std = 0.0;
  for (std::size_t j = 0; j < d_z; ++j) {
    double mu = 0.0;
    for (std::size_t r = 0; r < z.rows; ++r) mu += z(r, j);
    mu /= static_cast<double>(z.rows);
    double var = 0.0;
    for (std::size_t r = 0; r < z.rows; ++r) var += (z(r, j) - mu) * (z(r, j) - mu);
    var /= static_cast<double>(z.rows);
    double expected = ls.sigma_z[j] / (ls.sigma_z[j] + ls.eps);
    worst_mean = std::max(worst_mean, std::abs(mu));
    worst_std = std::max(worst_std, std::abs(std::sqrt(var) - expected));
  }
  bool ok = ortho < 1e-8 && worst_mean < 1e-10 && worst_std < 1e-6 && ls.eps == 1e-8;
  char buf[128];
  std::snprintf(buf, sizeof buf, "(|WW^T - I| %.1e, |mean| %.1e, |std err| %.1e)", ortho,
                worst_mean, worst_std);
  report(7, "latent-space contract", ok, buf);
}

// ---- 8: production-scale rollout throughput ----

void criterion_throughput() {
  auto seq = oracle::gen_pose_signal(29, 1000, 0);
  std::vector<so3::Rotation> ref(seq.data.begin(), seq.data.begin() + 24);
  Matrix desc = pose_descriptors(seq, ref, JointGroupMap::default24());

  DynamicsModel model = make_dynamics_model(128, 3, Variant::full, 256, 4);
  LatentState init{model.z_ref, Vec(128, 0.0)};
  auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  double steps_per_s = 0.0;
  try {
    auto traj = rollout(model, desc, init, ForceGains{});
    double secs = seconds_since(t0);
    steps_per_s = static_cast<double>(traj.size()) / secs;
    ok = steps_per_s >= 200.0;
  } catch (const DivergenceError&) {
    ok = false;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "(%.0f steps/s = %.3f ms/step single-threaded; reference 2.1 ms/step)",
                steps_per_s, steps_per_s > 0 ? 1000.0 / steps_per_s : 0.0);
  report(8, "rollout throughput", ok, buf);
}

// ---- 9: determinism of training and checkpoint round trips ----

void criterion_determinism() {
  fs::path dir = fs::temp_directory_path() / "latdyn_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  cmd::GenSyntheticConfig gc;
  gc.out_dir = (dir / "data").string();
  gc.num_clips = 2;
  gc.frames = 60;
  gc.d_z = 2;
  gc.seed = 4;
  cmd::gen_synthetic(gc);

  cmd::TrainCommandConfig tc;
  tc.data_dir = gc.out_dir;
  tc.d_z = 0;
  tc.seed = 3;
  tc.hidden_width = 8;
  tc.hidden_layers = 2;
  tc.train.epochs = 4;
  tc.train.batch_size = 4;
  tc.train.seed = 3;
  tc.curriculum.total_epochs = 4;
  tc.config_echo = "{\"acceptance\":true}";

  tc.out_checkpoint = (dir / "a.ldck").string();
  cmd::train_command(tc);
  tc.out_checkpoint = (dir / "b.ldck").string();
  cmd::train_command(tc);
  bool train_same = slurp((dir / "a.ldck").string()) == slurp((dir / "b.ldck").string());

  io::Checkpoint ck = io::load_checkpoint((dir / "a.ldck").string());
  io::save_checkpoint((dir / "c.ldck").string(), ck);
  bool roundtrip = slurp((dir / "a.ldck").string()) == slurp((dir / "c.ldck").string());

  fs::remove_all(dir);
  report(9, "determinism", train_same && roundtrip,
         train_same ? (roundtrip ? "(retrain and save/load/save byte-identical)"
                                 : "(round trip differs)")
                    : "(retrained checkpoint differs)");
}

}  // namespace

int main() {
  criterion_gradients();
  criterion_recovery_and_rest();
  criterion_gains();
  criterion_recurrence();
  criterion_descriptor();
  criterion_latent_space();
  criterion_throughput();
  criterion_determinism();
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}

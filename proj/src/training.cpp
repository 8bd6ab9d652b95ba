#include "latdyn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace latdyn {

void TrainingClip::validate() const {
  if (targets.rows != descriptors.rows)
    throw DimensionError("TrainingClip: targets and descriptors must be frame-aligned");
  if (targets.rows < 2) throw DimensionError("TrainingClip: need at least 2 frames");
  if (!all_finite(targets.data) || !all_finite(descriptors.data))
    throw DimensionError("TrainingClip: non-finite entries");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("TrainConfig: batch_size must be positive");
  if (batches_per_epoch == 0)
    throw ConfigError("TrainConfig: batches_per_epoch must be positive");
  if (lr <= 0.0) throw ConfigError("TrainConfig: learning rate must be positive");
  if (grad_clip < 0.0) throw ConfigError("TrainConfig: grad_clip must be non-negative");
  if (descriptor_jitter < 0.0)
    throw ConfigError("TrainConfig: descriptor_jitter must be non-negative");
}

ScheduleEntry schedule_at(const CurriculumSchedule& s, std::size_t epoch) {
  if (epoch >= s.total_epochs)
    throw ConfigError("schedule_at: epoch " + std::to_string(epoch) + " out of range");
  if (s.total_epochs == 1) return {s.horizon_end, s.tf_end};
  // endpoints returned verbatim; interpolation rounding must not perturb them
  if (epoch == 0) return {s.horizon_start, s.tf_start};
  if (epoch == s.total_epochs - 1) return {s.horizon_end, s.tf_end};
  double frac = static_cast<double>(epoch) / static_cast<double>(s.total_epochs - 1);
  double h = static_cast<double>(s.horizon_start) +
             frac * static_cast<double>(s.horizon_end - s.horizon_start);
  double p = s.tf_start + frac * (s.tf_end - s.tf_start);
  return {static_cast<std::size_t>(std::floor(h)), p};
}

std::vector<WindowRef> valid_windows(const std::vector<TrainingClip>& clips,
                                     std::size_t horizon) {
  std::vector<WindowRef> out;
  for (std::size_t c = 0; c < clips.size(); ++c) {
    std::size_t t = clips[c].frames();
    if (t < horizon + 1) continue;
    for (std::size_t s = 1; s + horizon <= t; ++s) out.push_back({c, s});
  }
  return out;
}

LatentState window_init_state(const TrainingClip& clip, std::size_t start, double dt) {
  if (start < 1 || start >= clip.frames())
    throw DimensionError("window_init_state: start index out of range");
  std::size_t d_z = clip.targets.cols;
  LatentState st;
  st.z.assign(clip.targets.row(start - 1), clip.targets.row(start - 1) + d_z);
  st.v.assign(d_z, 0.0);
  if (start >= 2) {
    const double* a = clip.targets.row(start - 1);
    const double* b = clip.targets.row(start - 2);
    for (std::size_t i = 0; i < d_z; ++i) st.v[i] = (a[i] - b[i]) / dt;
  }
  return st;
}

namespace {

// One recorded dynamics update on batched state; mirrors step_variant().
struct TapeStep {
  nn::VarId z, v;
};

TapeStep tape_step(nn::Tape& tape, DynamicsModel& model, nn::VarId z, nn::VarId v,
                   nn::VarId f_pose, nn::VarId z_ref) {
  nn::VarId x = tape.concat_cols({f_pose, z, v, tape.row_norm(v)});
  double dt = model.dt;
  switch (model.variant) {
    case Variant::full: {
      nn::VarId g = model.head_g.forward(tape, x);
      nn::VarId kappa = model.head_kappa.forward(tape, x);
      nn::VarId c = model.head_c.forward(tape, x);
      nn::VarId m = model.head_m.forward(tape, x);
      nn::VarId spring = tape.mul(kappa, tape.sub(z, z_ref));
      nn::VarId damp = tape.mul(c, v);
      nn::VarId a = tape.div(tape.sub(tape.sub(g, damp), spring), m);
      nn::VarId vn = tape.add(v, tape.scale(a, dt));
      nn::VarId zn = tape.add(z, tape.scale(vn, dt));
      return {zn, vn};
    }
    case Variant::direct_latent: {
      nn::VarId zn = model.head_g.forward(tape, x);
      nn::VarId vn = tape.sub(zn, z);
      return {zn, vn};
    }
    case Variant::velocity: {
      nn::VarId vn = model.head_g.forward(tape, x);
      nn::VarId zn = tape.add(z, tape.scale(vn, dt));
      return {zn, vn};
    }
    case Variant::accel_no_spring: {
      nn::VarId g = model.head_g.forward(tape, x);
      nn::VarId m = model.head_m.forward(tape, x);
      nn::VarId a = tape.div(g, m);
      nn::VarId vn = tape.add(v, tape.scale(a, dt));
      nn::VarId zn = tape.add(z, tape.scale(vn, dt));
      return {zn, vn};
    }
  }
  throw ConfigError("tape_step: unknown variant");
}

}  // namespace

nn::VarId batch_rollout_loss(nn::Tape& tape, DynamicsModel& model,
                             const std::vector<TrainingClip>& clips,
                             const std::vector<WindowRef>& batch, std::size_t horizon,
                             double p_tf, Rng& rng, bool force_velocity_reset) {
  if (batch.empty()) throw ConfigError("batch_rollout_loss: empty batch");
  const std::size_t b = batch.size();
  const std::size_t d_z = model.d_z;

  Matrix z0(b, d_z), v0(b, d_z);
  for (std::size_t i = 0; i < b; ++i) {
    const TrainingClip& clip = clips[batch[i].clip];
    if (batch[i].start + horizon > clip.frames())
      throw DimensionError("batch_rollout_loss: window overflows its clip");
    LatentState st = window_init_state(clip, batch[i].start, model.dt);
    std::copy(st.z.begin(), st.z.end(), z0.row(i));
    std::copy(st.v.begin(), st.v.end(), v0.row(i));
  }

  Matrix z_ref_rows(b, d_z);
  for (std::size_t i = 0; i < b; ++i)
    std::copy(model.z_ref.begin(), model.z_ref.end(), z_ref_rows.row(i));

  nn::VarId z = tape.constant(std::move(z0));
  nn::VarId v = tape.constant(std::move(v0));
  nn::VarId z_ref = tape.constant(std::move(z_ref_rows));

  nn::VarId loss_sum = -1;
  for (std::size_t k = 0; k < horizon; ++k) {
    Matrix fp(b, model.d_p), tgt(b, d_z), vtgt(b, d_z);
    for (std::size_t i = 0; i < b; ++i) {
      const TrainingClip& clip = clips[batch[i].clip];
      std::size_t t = batch[i].start + k;
      std::copy(clip.descriptors.row(t), clip.descriptors.row(t) + model.d_p, fp.row(i));
      std::copy(clip.targets.row(t), clip.targets.row(t) + d_z, tgt.row(i));
      for (std::size_t j = 0; j < d_z; ++j)
        vtgt(i, j) = (clip.targets(t, j) - clip.targets(t - 1, j)) / model.dt;
    }

    TapeStep next = tape_step(tape, model, z, v, tape.constant(std::move(fp)), z_ref);

    nn::VarId step_loss = tape.mean_sq_diff(next.z, tgt);
    loss_sum = (loss_sum < 0) ? step_loss : tape.add(loss_sum, step_loss);

    // Teacher forcing after the loss measurement; the replaced rows block
    // gradient flow into the next step.
    std::vector<std::uint8_t> mask(b, 0);
    for (std::size_t i = 0; i < b; ++i) mask[i] = rng.bernoulli(p_tf) ? 1 : 0;
    z = tape.replace_rows(next.z, tgt, mask);
    v = force_velocity_reset ? tape.replace_rows(next.v, vtgt, mask) : next.v;
  }

  return tape.scale(loss_sum, 1.0 / static_cast<double>(horizon));
}

double rollout_loss(DynamicsModel& model, const TrainingClip& clip, std::size_t start,
                    std::size_t horizon, double p_tf, Rng& rng,
                    bool force_velocity_reset) {
  nn::Tape tape;
  std::vector<TrainingClip> clips{clip};
  std::vector<WindowRef> batch{{0, start}};
  nn::VarId loss =
      batch_rollout_loss(tape, model, clips, batch, horizon, p_tf, rng, force_velocity_reset);
  return tape.value(loss)(0, 0);
}

namespace {

// Per-epoch stream so training can resume mid-run with identical draws.
std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  std::uint64_t x = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(epoch) + 1);
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

std::vector<WindowRef> sample_batch(const std::vector<WindowRef>& windows,
                                    std::size_t batch_size, Rng& rng) {
  std::vector<WindowRef> out;
  out.reserve(batch_size);
  if (windows.size() >= batch_size) {
    // partial Fisher-Yates: without replacement
    std::vector<std::size_t> idx(windows.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < batch_size; ++i) {
      std::size_t j = i + rng.uniform_index(idx.size() - i);
      std::swap(idx[i], idx[j]);
      out.push_back(windows[idx[i]]);
    }
  } else {
    for (std::size_t i = 0; i < batch_size; ++i)
      out.push_back(windows[rng.uniform_index(windows.size())]);
  }
  return out;
}

std::size_t batches_in_epoch(const TrainConfig& config, const ScheduleEntry& sched) {
  if (config.window_budget == 0) return config.batches_per_epoch;
  std::size_t per_batch = config.batch_size * sched.horizon;
  std::size_t nb = (config.window_budget + per_batch / 2) / per_batch;
  return nb > 0 ? nb : 1;
}

}  // namespace

TrainResult train(DynamicsModel& model, const std::vector<TrainingClip>& clips,
                  const TrainConfig& config, const CurriculumSchedule& schedule,
                  nn::AdamState* resume_optimizer) {
  config.validate();
  if (clips.empty()) throw ConfigError("train: no training clips");
  for (const TrainingClip& c : clips) c.validate();

  std::vector<nn::Param*> params = model.params();
  nn::AdamState local(config.lr);
  nn::AdamState& adam = resume_optimizer ? *resume_optimizer : local;

  TrainResult result;
  // Map the optimizer step count back to an epoch boundary; with a window
  // budget the per-epoch batch count varies, so walk the schedule.
  std::size_t start_epoch = 0;
  for (std::uint64_t done = adam.step_count();
       done > 0 && start_epoch < config.epochs; ++start_epoch)
    done -= std::min<std::uint64_t>(
        done, batches_in_epoch(config, schedule_at(schedule, start_epoch)));

  std::vector<TrainingClip> jittered;
  if (config.descriptor_jitter > 0.0) jittered = clips;

  for (std::size_t epoch = start_epoch; epoch < config.epochs; ++epoch) {
    ScheduleEntry sched = schedule_at(schedule, epoch);
    std::vector<WindowRef> windows = valid_windows(clips, sched.horizon);
    if (windows.empty())
      throw ConfigError("train: no clip admits a window of horizon " +
                        std::to_string(sched.horizon));

    const std::vector<TrainingClip>* data = &clips;
    if (config.descriptor_jitter > 0.0) {
      // epoch-keyed stream, distinct from the sampling stream, so resumed
      // runs redraw the identical noise
      Rng jr(epoch_seed(config.seed ^ 0xA076BC9B61B2E2ABull, epoch));
      for (std::size_t c = 0; c < clips.size(); ++c)
        for (std::size_t k = 0; k < clips[c].descriptors.data.size(); ++k)
          jittered[c].descriptors.data[k] =
              clips[c].descriptors.data[k] + config.descriptor_jitter * jr.normal();
      data = &jittered;
    }

    Rng rng(epoch_seed(config.seed, epoch));
    double loss_acc = 0.0;
    std::size_t n_batches = batches_in_epoch(config, sched);
    for (std::size_t bi = 0; bi < n_batches; ++bi) {
      std::vector<WindowRef> batch = sample_batch(windows, config.batch_size, rng);
      model.zero_grad();
      nn::Tape tape;
      nn::VarId loss = batch_rollout_loss(tape, model, *data, batch, sched.horizon,
                                          sched.p_tf, rng, config.force_velocity_reset);
      double loss_val = tape.value(loss)(0, 0);
      if (std::isfinite(loss_val)) {
        tape.backward(loss);
        if (config.grad_clip > 0.0) {
          double sq = 0.0;
          for (nn::Param* p : params)
            for (double g : p->grad.data) sq += g * g;
          double norm = std::sqrt(sq);
          if (norm > config.grad_clip) {
            double s = config.grad_clip / norm;
            for (nn::Param* p : params)
              for (double& g : p->grad.data) g *= s;
          }
        }
      }
      // On a non-finite loss (exploded free rollout) the gradients stay at
      // zero: backpropagating it would poison the Adam moments for the rest
      // of the run, but the step itself must still happen so the optimizer
      // step count keeps its one-to-one mapping to (epoch, batch) on resume.
      adam.step(params);
      loss_acc += loss_val;
    }
    result.history.push_back({epoch, sched.horizon, sched.p_tf,
                              loss_acc / static_cast<double>(n_batches)});
  }
  return result;
}

}  // namespace latdyn

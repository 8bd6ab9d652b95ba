#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latdyn/linalg.hpp"
#include "latdyn/rng.hpp"
#include "latdyn/tape.hpp"

namespace latdyn::nn {

enum class HeadKind : std::uint8_t { linear = 0, softplus = 1 };

// MLP with GELU hidden activations and a linear or softplus output head.
class DenseNet {
 public:
  DenseNet() = default;

  // widths = [in, h1, ..., out]
  DenseNet(const std::string& name, const std::vector<std::size_t>& widths, HeadKind head);

  // Kaiming-uniform fan-in weights, zero biases.
  void init(Rng& rng);

  std::size_t input_dim() const { return widths_.front(); }
  std::size_t output_dim() const { return widths_.back(); }
  HeadKind head() const { return head_; }
  const std::vector<std::size_t>& widths() const { return widths_; }

  // Plain inference forward, no tape.
  Vec forward(const Vec& x) const;

  // Recorded forward for training.
  VarId forward(Tape& tape, VarId x);

  std::vector<Param*> params();
  std::vector<const Param*> params() const;
  void zero_grad();

 private:
  std::string name_;
  std::vector<std::size_t> widths_;
  HeadKind head_ = HeadKind::linear;
  std::vector<Param> weights_;
  std::vector<Param> biases_;
};

// Standard Adam with bias correction. Moment buffers are keyed by position
// in the parameter list, which must stay stable across steps.
class AdamState {
 public:
  explicit AdamState(double lr, double beta1 = 0.9, double beta2 = 0.999,
                     double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Param*>& params);

  std::int64_t step_count() const { return step_count_; }
  double lr() const { return lr_; }

  // Raw buffers, exposed for checkpoint resume.
  std::vector<Vec>& first_moments() { return m_; }
  std::vector<Vec>& second_moments() { return v_; }
  void set_step_count(std::int64_t t) { step_count_ = t; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t step_count_ = 0;
  std::vector<Vec> m_, v_;
};

}  // namespace latdyn::nn

#include "latdyn/net.hpp"

#include <cmath>

namespace latdyn::nn {

DenseNet::DenseNet(const std::string& name, const std::vector<std::size_t>& widths,
                   HeadKind head)
    : name_(name), widths_(widths), head_(head) {
  if (widths.size() < 2) throw DimensionError("DenseNet: need at least one layer");
  for (std::size_t w : widths)
    if (w == 0) throw DimensionError("DenseNet: zero layer width");
  weights_.reserve(widths.size() - 1);
  biases_.reserve(widths.size() - 1);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    std::string tag = name + ".l" + std::to_string(l);
    weights_.emplace_back(tag + ".w", widths[l + 1], widths[l]);
    biases_.emplace_back(tag + ".b", 1, widths[l + 1]);
  }
}

void DenseNet::init(Rng& rng) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    double bound = std::sqrt(6.0 / static_cast<double>(widths_[l]));
    for (double& w : weights_[l].value.data) w = rng.uniform(-bound, bound);
    biases_[l].value.fill(0.0);
  }
}

Vec DenseNet::forward(const Vec& x) const {
  if (x.size() != input_dim())
    throw DimensionError("DenseNet::forward: input length " + std::to_string(x.size()) +
                         " does not match " + std::to_string(input_dim()));
  Vec cur = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const Matrix& w = weights_[l].value;
    const Vec& b = biases_[l].value.data;
    Vec next(w.rows);
    for (std::size_t r = 0; r < w.rows; ++r) {
      const double* wr = w.row(r);
      double s = b[r];
      for (std::size_t c = 0; c < w.cols; ++c) s += wr[c] * cur[c];
      next[r] = s;
    }
    bool last = (l + 1 == weights_.size());
    if (!last) {
      for (double& v : next) v = gelu_scalar(v);
    } else if (head_ == HeadKind::softplus) {
      for (double& v : next) v = softplus_scalar(v);
    }
    cur = std::move(next);
  }
  return cur;
}

VarId DenseNet::forward(Tape& tape, VarId x) {
  VarId cur = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    cur = tape.dense(cur, weights_[l], biases_[l]);
    bool last = (l + 1 == weights_.size());
    if (!last)
      cur = tape.gelu(cur);
    else if (head_ == HeadKind::softplus)
      cur = tape.softplus(cur);
  }
  return cur;
}

std::vector<Param*> DenseNet::params() {
  std::vector<Param*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

std::vector<const Param*> DenseNet::params() const {
  std::vector<const Param*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

void DenseNet::zero_grad() {
  for (auto& w : weights_) w.zero_grad();
  for (auto& b : biases_) b.zero_grad();
}

void AdamState::step(const std::vector<Param*>& params) {
  if (m_.empty()) {
    for (const Param* p : params) {
      m_.emplace_back(p->value.size(), 0.0);
      v_.emplace_back(p->value.size(), 0.0);
    }
  }
  if (m_.size() != params.size())
    throw DimensionError("AdamState: parameter list changed between steps");

  ++step_count_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));

  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (m_[i].size() != p.value.size())
      throw DimensionError("AdamState: shape mismatch for '" + p.name + "'");
    Vec& m = m_[i];
    Vec& v = v_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      double g = p.grad.data[k];
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
      double mhat = m[k] / bc1;
      double vhat = v[k] / bc2;
      p.value.data[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace latdyn::nn

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_set>
#include <vector>

#include "latdyn/linalg.hpp"

namespace latdyn::nn {

// A trainable tensor. Weights are out x in, biases 1 x out.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, std::size_t r, std::size_t c)
      : name(std::move(n)), value(r, c), grad(r, c) {}

  void zero_grad() { grad.fill(0.0); }
};

using VarId = std::int32_t;

// Dynamic reverse-mode tape over matrix-valued primitives. Rows are the
// batch dimension; inference uses the plain (tape-free) paths in net.hpp.
class Tape {
 public:
  VarId constant(Matrix v);
  VarId leaf(Param& p);

  // y = x * W^T + b, x: B x in, W: out x in, b: 1 x out
  VarId dense(VarId x, Param& w, Param& b);

  VarId gelu(VarId x);
  VarId softplus(VarId x);

  VarId add(VarId a, VarId b);
  VarId sub(VarId a, VarId b);
  VarId mul(VarId a, VarId b);   // elementwise
  VarId div(VarId a, VarId b);   // elementwise
  VarId scale(VarId a, double s);

  VarId concat_cols(const std::vector<VarId>& xs);

  // B x 1 Euclidean norm of each row
  VarId row_norm(VarId x);

  // Rows where mask[r] != 0 are overwritten with `values`; gradient is
  // blocked on replaced rows. Used for teacher forcing.
  VarId replace_rows(VarId x, const Matrix& values, const std::vector<std::uint8_t>& mask);

  // 1 x 1 mean over all entries of (x - target)^2
  VarId mean_sq_diff(VarId x, const Matrix& target);

  const Matrix& value(VarId id) const { return nodes_[id].value; }
  const Matrix& grad(VarId id) const { return nodes_[id].grad; }

  // Seeds d(loss)/d(loss) = 1 and propagates adjoints to every recorded
  // parameter's .grad (accumulating).
  void backward(VarId loss);

  // Throws if the parameter was never recorded on this tape.
  const Matrix& grad_of(const Param& p) const;

  void clear();

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void()> back;  // empty for leaves/constants
  };
  std::vector<Node> nodes_;
  std::unordered_set<const Param*> touched_;

  VarId push(Matrix value, std::function<void()> back = nullptr);
};

// GELU (tanh approximation) and numerically safe softplus, shared by the
// tape and the plain inference path.
double gelu_scalar(double x);
double gelu_grad_scalar(double x);
double softplus_scalar(double x);
double sigmoid_scalar(double x);

}  // namespace latdyn::nn

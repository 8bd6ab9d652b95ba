#include "latdyn/tape.hpp"

#include <cblas.h>

#include <cmath>

namespace latdyn::nn {

double gelu_scalar(double x) {
  const double k = 0.7978845608028654;  // sqrt(2/pi)
  double u = k * (x + 0.044715 * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_grad_scalar(double x) {
  const double k = 0.7978845608028654;
  double u = k * (x + 0.044715 * x * x * x);
  double th = std::tanh(u);
  double sech2 = 1.0 - th * th;
  return 0.5 * (1.0 + th) + 0.5 * x * sech2 * k * (1.0 + 3.0 * 0.044715 * x * x);
}

double softplus_scalar(double x) {
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

VarId Tape::push(Matrix value, std::function<void()> back) {
  nodes_.push_back(Node{std::move(value), Matrix(), std::move(back)});
  VarId id = static_cast<VarId>(nodes_.size() - 1);
  Node& n = nodes_[id];
  n.grad = Matrix(n.value.rows, n.value.cols);
  return id;
}

VarId Tape::constant(Matrix v) { return push(std::move(v)); }

VarId Tape::leaf(Param& p) {
  touched_.insert(&p);
  VarId id = push(p.value);
  Param* pp = &p;
  Tape* self = this;
  nodes_[id].back = [self, id, pp]() {
    const Matrix& g = self->nodes_[id].grad;
    for (std::size_t i = 0; i < g.size(); ++i) pp->grad.data[i] += g.data[i];
  };
  return id;
}

VarId Tape::dense(VarId x, Param& w, Param& b) {
  touched_.insert(&w);
  touched_.insert(&b);
  const Matrix& xv = nodes_[x].value;
  const std::size_t batch = xv.rows;
  const std::size_t in = w.value.cols;
  const std::size_t out = w.value.rows;
  if (xv.cols != in)
    throw DimensionError("dense: input width " + std::to_string(xv.cols) +
                         " does not match layer input " + std::to_string(in));
  if (b.value.cols != out) throw DimensionError("dense: bias width mismatch");

  Matrix y(batch, out);
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(batch),
              static_cast<int>(out), static_cast<int>(in), 1.0, xv.data.data(),
              static_cast<int>(in), w.value.data.data(), static_cast<int>(in), 0.0,
              y.data.data(), static_cast<int>(out));
  for (std::size_t r = 0; r < batch; ++r) {
    double* yr = y.row(r);
    for (std::size_t c = 0; c < out; ++c) yr[c] += b.value.data[c];
  }

  VarId id = push(std::move(y));
  Param* wp = &w;
  Param* bp = &b;
  Tape* self = this;
  nodes_[id].back = [self, id, x, wp, bp, batch, in, out]() {
    const Matrix& dy = self->nodes_[id].grad;
    const Matrix& xv2 = self->nodes_[x].value;
    // dW += dY^T X
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(out),
                static_cast<int>(in), static_cast<int>(batch), 1.0, dy.data.data(),
                static_cast<int>(out), xv2.data.data(), static_cast<int>(in), 1.0,
                wp->grad.data.data(), static_cast<int>(in));
    // db += column sums of dY
    for (std::size_t r = 0; r < batch; ++r) {
      const double* dr = dy.row(r);
      for (std::size_t c = 0; c < out; ++c) bp->grad.data[c] += dr[c];
    }
    // dX += dY W
    Matrix& dx = self->nodes_[x].grad;
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(batch),
                static_cast<int>(in), static_cast<int>(out), 1.0, dy.data.data(),
                static_cast<int>(out), wp->value.data.data(), static_cast<int>(in), 1.0,
                dx.data.data(), static_cast<int>(in));
  };
  return id;
}

VarId Tape::gelu(VarId x) {
  const Matrix& xv = nodes_[x].value;
  Matrix y(xv.rows, xv.cols);
  for (std::size_t i = 0; i < xv.size(); ++i) y.data[i] = gelu_scalar(xv.data[i]);
  VarId id = push(std::move(y));
  Tape* self = this;
  nodes_[id].back = [self, id, x]() {
    const Matrix& dy = self->nodes_[id].grad;
    const Matrix& xv2 = self->nodes_[x].value;
    Matrix& dx = self->nodes_[x].grad;
    for (std::size_t i = 0; i < dy.size(); ++i)
      dx.data[i] += dy.data[i] * gelu_grad_scalar(xv2.data[i]);
  };
  return id;
}

VarId Tape::softplus(VarId x) {
  const Matrix& xv = nodes_[x].value;
  Matrix y(xv.rows, xv.cols);
  for (std::size_t i = 0; i < xv.size(); ++i) y.data[i] = softplus_scalar(xv.data[i]);
  VarId id = push(std::move(y));
  Tape* self = this;
  nodes_[id].back = [self, id, x]() {
    const Matrix& dy = self->nodes_[id].grad;
    const Matrix& xv2 = self->nodes_[x].value;
    Matrix& dx = self->nodes_[x].grad;
    for (std::size_t i = 0; i < dy.size(); ++i)
      dx.data[i] += dy.data[i] * sigmoid_scalar(xv2.data[i]);
  };
  return id;
}

VarId Tape::add(VarId a, VarId b) {
  const Matrix& av = nodes_[a].value;
  const Matrix& bv = nodes_[b].value;
  check_same_shape(av, bv, "tape add");
  Matrix y(av.rows, av.cols);
  for (std::size_t i = 0; i < av.size(); ++i) y.data[i] = av.data[i] + bv.data[i];
  VarId id = push(std::move(y));
  Tape* self = this;
  nodes_[id].back = [self, id, a, b]() {
    const Matrix& dy = self->nodes_[id].grad;
    Matrix& da = self->nodes_[a].grad;
    Matrix& db = self->nodes_[b].grad;
    for (std::size_t i = 0; i < dy.size(); ++i) {
      da.data[i] += dy.data[i];
      db.data[i] += dy.data[i];
    }
  };
  return id;
}

VarId Tape::sub(VarId a, VarId b) {
  const Matrix& av = nodes_[a].value;
  const Matrix& bv = nodes_[b].value;
  check_same_shape(av, bv, "tape sub");
  Matrix y(av.rows, av.cols);
  for (std::size_t i = 0; i < av.size(); ++i) y.data[i] = av.data[i] - bv.data[i];
  VarId id = push(std::move(y));
  Tape* self = this;
  nodes_[id].back = [self, id, a, b]() {
    const Matrix& dy = self->nodes_[id].grad;
    Matrix& da = self->nodes_[a].grad;
    Matrix& db = self->nodes_[b].grad;
    for (std::size_t i = 0; i < dy.size(); ++i) {
      da.data[i] += dy.data[i];
      db.data[i] -= dy.data[i];
    }
  };
  return id;
}

VarId Tape::mul(VarId a, VarId b) {
  const Matrix& av = nodes_[a].value;
  const Matrix& bv = nodes_[b].value;
  check_same_shape(av, bv, "tape mul");
  Matrix y(av.rows, av.cols);
  for (std::size_t i = 0; i < av.size(); ++i) y.data[i] = av.data[i] * bv.data[i];
  VarId id = push(std::move(y));
  Tape* self = this;
  nodes_[id].back = [self, id, a, b]() {
    const Matrix& dy = self->nodes_[id].grad;
    const Matrix& av2 = self->nodes_[a].value;
    const Matrix& bv2 = self->nodes_[b].value;
    Matrix& da = self->nodes_[a].grad;
    Matrix& db = self->nodes_[b].grad;
    for (std::size_t i = 0; i < dy.size(); ++i) {
      da.data[i] += dy.data[i] * bv2.data[i];
      db.data[i] += dy.data[i] * av2.data[i];
    }
  };
  return id;
}

VarId Tape::div(VarId a, VarId b) {
  const Matrix& av = nodes_[a].value;
  const Matrix& bv = nodes_[b].value;
  check_same_shape(av, bv, "tape div");
  Matrix y(av.rows, av.cols);
  for (std::size_t i = 0; i < av.size(); ++i) y.data[i] = av.data[i] / bv.data[i];
  VarId id = push(std::move(y));
  Tape* self = this;
  nodes_[id].back = [self, id, a, b]() {
    const Matrix& dy = self->nodes_[id].grad;
    const Matrix& yv = self->nodes_[id].value;
    const Matrix& bv2 = self->nodes_[b].value;
    Matrix& da = self->nodes_[a].grad;
    Matrix& db = self->nodes_[b].grad;
    for (std::size_t i = 0; i < dy.size(); ++i) {
      da.data[i] += dy.data[i] / bv2.data[i];
      db.data[i] -= dy.data[i] * yv.data[i] / bv2.data[i];
    }
  };
  return id;
}

VarId Tape::scale(VarId a, double s) {
  const Matrix& av = nodes_[a].value;
  Matrix y(av.rows, av.cols);
  for (std::size_t i = 0; i < av.size(); ++i) y.data[i] = av.data[i] * s;
  VarId id = push(std::move(y));
  Tape* self = this;
  nodes_[id].back = [self, id, a, s]() {
    const Matrix& dy = self->nodes_[id].grad;
    Matrix& da = self->nodes_[a].grad;
    for (std::size_t i = 0; i < dy.size(); ++i) da.data[i] += dy.data[i] * s;
  };
  return id;
}

VarId Tape::concat_cols(const std::vector<VarId>& xs) {
  if (xs.empty()) throw DimensionError("concat_cols: no inputs");
  std::size_t rows = nodes_[xs[0]].value.rows;
  std::size_t total = 0;
  for (VarId x : xs) {
    if (nodes_[x].value.rows != rows)
      throw DimensionError("concat_cols: row count mismatch");
    total += nodes_[x].value.cols;
  }
  Matrix y(rows, total);
  std::size_t off = 0;
  for (VarId x : xs) {
    const Matrix& xv = nodes_[x].value;
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(xv.row(r), xv.row(r) + xv.cols, y.row(r) + off);
    off += xv.cols;
  }
  VarId id = push(std::move(y));
  Tape* self = this;
  std::vector<VarId> inputs = xs;
  nodes_[id].back = [self, id, inputs, rows]() {
    const Matrix& dy = self->nodes_[id].grad;
    std::size_t off2 = 0;
    for (VarId x : inputs) {
      Matrix& dx = self->nodes_[x].grad;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* src = dy.row(r) + off2;
        double* dst = dx.row(r);
        for (std::size_t c = 0; c < dx.cols; ++c) dst[c] += src[c];
      }
      off2 += dx.cols;
    }
  };
  return id;
}

VarId Tape::row_norm(VarId x) {
  const Matrix& xv = nodes_[x].value;
  Matrix y(xv.rows, 1);
  for (std::size_t r = 0; r < xv.rows; ++r) {
    double s = 0.0;
    const double* xr = xv.row(r);
    for (std::size_t c = 0; c < xv.cols; ++c) s += xr[c] * xr[c];
    y(r, 0) = std::sqrt(s);
  }
  VarId id = push(std::move(y));
  Tape* self = this;
  nodes_[id].back = [self, id, x]() {
    const Matrix& dy = self->nodes_[id].grad;
    const Matrix& yv = self->nodes_[id].value;
    const Matrix& xv2 = self->nodes_[x].value;
    Matrix& dx = self->nodes_[x].grad;
    for (std::size_t r = 0; r < xv2.rows; ++r) {
      double n = yv(r, 0);
      if (n == 0.0) continue;  // subgradient 0 at the origin
      double g = dy(r, 0) / n;
      const double* xr = xv2.row(r);
      double* dr = dx.row(r);
      for (std::size_t c = 0; c < xv2.cols; ++c) dr[c] += g * xr[c];
    }
  };
  return id;
}

VarId Tape::replace_rows(VarId x, const Matrix& values,
                         const std::vector<std::uint8_t>& mask) {
  const Matrix& xv = nodes_[x].value;
  check_same_shape(xv, values, "replace_rows");
  if (mask.size() != xv.rows) throw DimensionError("replace_rows: mask length mismatch");
  Matrix y = xv;
  for (std::size_t r = 0; r < xv.rows; ++r)
    if (mask[r]) std::copy(values.row(r), values.row(r) + values.cols, y.row(r));
  VarId id = push(std::move(y));
  Tape* self = this;
  std::vector<std::uint8_t> m = mask;
  nodes_[id].back = [self, id, x, m]() {
    const Matrix& dy = self->nodes_[id].grad;
    Matrix& dx = self->nodes_[x].grad;
    for (std::size_t r = 0; r < dy.rows; ++r) {
      if (m[r]) continue;
      const double* src = dy.row(r);
      double* dst = dx.row(r);
      for (std::size_t c = 0; c < dy.cols; ++c) dst[c] += src[c];
    }
  };
  return id;
}

VarId Tape::mean_sq_diff(VarId x, const Matrix& target) {
  const Matrix& xv = nodes_[x].value;
  check_same_shape(xv, target, "mean_sq_diff");
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    double d = xv.data[i] - target.data[i];
    s += d * d;
  }
  double inv_n = 1.0 / static_cast<double>(xv.size());
  Matrix y(1, 1);
  y(0, 0) = s * inv_n;
  VarId id = push(std::move(y));
  Tape* self = this;
  Matrix tgt = target;
  nodes_[id].back = [self, id, x, tgt, inv_n]() {
    double g = self->nodes_[id].grad(0, 0);
    const Matrix& xv2 = self->nodes_[x].value;
    Matrix& dx = self->nodes_[x].grad;
    for (std::size_t i = 0; i < xv2.size(); ++i)
      dx.data[i] += g * 2.0 * inv_n * (xv2.data[i] - tgt.data[i]);
  };
  return id;
}

void Tape::backward(VarId loss) {
  Node& ln = nodes_[loss];
  if (ln.value.rows != 1 || ln.value.cols != 1)
    throw DimensionError("backward: loss must be a 1x1 scalar");
  ln.grad(0, 0) = 1.0;
  for (std::int32_t i = loss; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back();
}

const Matrix& Tape::grad_of(const Param& p) const {
  if (!touched_.count(&p))
    throw DimensionError("grad_of: parameter '" + p.name + "' was not recorded on this tape");
  return p.grad;
}

void Tape::clear() {
  nodes_.clear();
  touched_.clear();
}

}  // namespace latdyn::nn

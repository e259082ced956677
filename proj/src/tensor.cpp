#include "capsnet/tensor.hpp"

#include <cmath>
#include <utility>

namespace capsnet {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

// Splits a shape around `axis` into (outer, len, inner) extents.
struct AxisStrides {
  Index outer = 1, len = 1, inner = 1;
};

AxisStrides axis_strides(const Shape& shape, int axis) {
  if (axis < 0 || axis >= static_cast<int>(shape.size()))
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  AxisStrides s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<std::size_t>(i)];
  s.len = shape[static_cast<std::size_t>(axis)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i)
    s.inner *= shape[i];
  return s;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->data.assign(static_cast<std::size_t>(shape_size(shape)), 0.0);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t = zeros(std::move(shape));
  t.array() = value;
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_size(shape) != static_cast<Index>(data.size()))
    throw DimensionError("from_data: shape " + shape_str(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item(): tensor has " + std::to_string(size()) + " elements");
  return impl_->data[0];
}

void Tensor::ensure_grad() {
  if (!has_grad()) impl_->grad.assign(impl_->data.size(), 0.0);
}

void Tensor::zero_grad() {
  if (has_grad())
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

bool Tensor::all_finite() const {
  for (double v : impl_->data)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tape::backward(Tensor loss) {
  if (loss.size() != 1) throw DimensionError("backward: loss must be scalar, got " + shape_str(loss.shape()));
  loss.ensure_grad();
  loss.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  out.mat(m, n).noalias() = a.mat(m, k) * b.mat(k, n);
  if (taped(tape, {a, b})) {
    out.set_requires_grad(true);
    Tensor ta = a, tb = b, to = out;
    tape.push([ta, tb, to, m, k, n]() mutable {
      if (!to.has_grad()) return;
      MatMap g = to.grad_mat(m, n);
      if (ta.requires_grad()) {
        ta.ensure_grad();
        ta.grad_mat(m, k).noalias() += g * tb.mat(k, n).transpose();
      }
      if (tb.requires_grad()) {
        tb.ensure_grad();
        tb.grad_mat(k, n).noalias() += ta.mat(m, k).transpose() * g;
      }
    });
  }
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  out.array() = a.array() + b.array();
  if (taped(tape, {a, b})) {
    out.set_requires_grad(true);
    Tensor ta = a, tb = b, to = out;
    tape.push([ta, tb, to]() mutable {
      if (!to.has_grad()) return;
      if (ta.requires_grad()) {
        ta.ensure_grad();
        ta.grad_array() += to.grad_array();
      }
      if (tb.requires_grad()) {
        tb.ensure_grad();
        tb.grad_array() += to.grad_array();
      }
    });
  }
  return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  out.array() = a.array() - b.array();
  if (taped(tape, {a, b})) {
    out.set_requires_grad(true);
    Tensor ta = a, tb = b, to = out;
    tape.push([ta, tb, to]() mutable {
      if (!to.has_grad()) return;
      if (ta.requires_grad()) {
        ta.ensure_grad();
        ta.grad_array() += to.grad_array();
      }
      if (tb.requires_grad()) {
        tb.ensure_grad();
        tb.grad_array() -= to.grad_array();
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  out.array() = a.array() * b.array();
  if (taped(tape, {a, b})) {
    out.set_requires_grad(true);
    Tensor ta = a, tb = b, to = out;
    tape.push([ta, tb, to]() mutable {
      if (!to.has_grad()) return;
      if (ta.requires_grad()) {
        ta.ensure_grad();
        ta.grad_array() += to.grad_array() * tb.array();
      }
      if (tb.requires_grad()) {
        tb.ensure_grad();
        tb.grad_array() += to.grad_array() * ta.array();
      }
    });
  }
  return out;
}

Tensor scalar_mul(Tape& tape, const Tensor& a, double c) { return affine(tape, a, c, 0.0); }

Tensor affine(Tape& tape, const Tensor& a, double scale, double shift) {
  Tensor out = Tensor::zeros(a.shape());
  out.array() = scale * a.array() + shift;
  if (taped(tape, {a})) {
    out.set_requires_grad(true);
    Tensor ta = a, to = out;
    tape.push([ta, to, scale]() mutable {
      if (!to.has_grad()) return;
      ta.ensure_grad();
      ta.grad_array() += scale * to.grad_array();
    });
  }
  return out;
}

Tensor relu(Tape& tape, const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  out.array() = a.array().max(0.0);
  if (taped(tape, {a})) {
    out.set_requires_grad(true);
    Tensor ta = a, to = out;
    tape.push([ta, to]() mutable {
      if (!to.has_grad()) return;
      ta.ensure_grad();
      ta.grad_array() += to.grad_array() * (ta.array() > 0.0).cast<double>();
    });
  }
  return out;
}

Tensor square(Tape& tape, const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  out.array() = a.array().square();
  if (taped(tape, {a})) {
    out.set_requires_grad(true);
    Tensor ta = a, to = out;
    tape.push([ta, to]() mutable {
      if (!to.has_grad()) return;
      ta.ensure_grad();
      ta.grad_array() += 2.0 * to.grad_array() * ta.array();
    });
  }
  return out;
}

Tensor reduce_sum(Tape& tape, const Tensor& a, int axis) {
  const AxisStrides s = axis_strides(a.shape(), axis);
  Shape out_shape;
  for (int i = 0; i < a.rank(); ++i)
    if (i != axis) out_shape.push_back(a.dim(i));
  if (out_shape.empty()) out_shape = {1};
  Tensor out = Tensor::zeros(out_shape);
  const double* src = a.data();
  double* dst = out.data();
  for (Index o = 0; o < s.outer; ++o)
    for (Index l = 0; l < s.len; ++l) {
      const double* row = src + (o * s.len + l) * s.inner;
      double* acc = dst + o * s.inner;
      for (Index i = 0; i < s.inner; ++i) acc[i] += row[i];
    }
  if (taped(tape, {a})) {
    out.set_requires_grad(true);
    Tensor ta = a, to = out;
    tape.push([ta, to, s]() mutable {
      if (!to.has_grad()) return;
      ta.ensure_grad();
      const double* g = to.grad();
      double* ag = ta.grad();
      for (Index o = 0; o < s.outer; ++o)
        for (Index l = 0; l < s.len; ++l) {
          double* row = ag + (o * s.len + l) * s.inner;
          const double* src_g = g + o * s.inner;
          for (Index i = 0; i < s.inner; ++i) row[i] += src_g[i];
        }
    });
  }
  return out;
}

Tensor sum_all(Tape& tape, const Tensor& a) {
  Tensor out = Tensor::scalar(a.vec().sum());
  if (taped(tape, {a})) {
    out.set_requires_grad(true);
    Tensor ta = a, to = out;
    tape.push([ta, to]() mutable {
      if (!to.has_grad()) return;
      ta.ensure_grad();
      ta.grad_array() += to.grad()[0];
    });
  }
  return out;
}

Tensor reshape(Tape& tape, const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size())
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  Tensor out = Tensor::from_data(std::move(shape), a.data_vec());
  if (taped(tape, {a})) {
    out.set_requires_grad(true);
    Tensor ta = a, to = out;
    tape.push([ta, to]() mutable {
      if (!to.has_grad()) return;
      ta.ensure_grad();
      ta.grad_array() += to.grad_array();
    });
  }
  return out;
}

Tensor concatenate(Tape& tape, const Tensor& a, const Tensor& b, int axis) {
  if (a.rank() != b.rank())
    throw DimensionError("concatenate: rank mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  for (int i = 0; i < a.rank(); ++i)
    if (i != axis && a.dim(i) != b.dim(i))
      throw DimensionError("concatenate: shapes " + shape_str(a.shape()) + " and " +
                           shape_str(b.shape()) + " differ off axis " + std::to_string(axis));
  const AxisStrides sa = axis_strides(a.shape(), axis);
  const AxisStrides sb = axis_strides(b.shape(), axis);
  Shape out_shape = a.shape();
  out_shape[static_cast<std::size_t>(axis)] = sa.len + sb.len;
  Tensor out = Tensor::zeros(out_shape);
  const Index block_a = sa.len * sa.inner, block_b = sb.len * sb.inner;
  for (Index o = 0; o < sa.outer; ++o) {
    double* dst = out.data() + o * (block_a + block_b);
    std::copy_n(a.data() + o * block_a, block_a, dst);
    std::copy_n(b.data() + o * block_b, block_b, dst + block_a);
  }
  if (taped(tape, {a, b})) {
    out.set_requires_grad(true);
    Tensor ta = a, tb = b, to = out;
    tape.push([ta, tb, to, sa, block_a, block_b]() mutable {
      if (!to.has_grad()) return;
      for (Index o = 0; o < sa.outer; ++o) {
        const double* g = to.grad() + o * (block_a + block_b);
        if (ta.requires_grad()) {
          ta.ensure_grad();
          VecMap(ta.grad() + o * block_a, block_a) += ConstVecMap(g, block_a);
        }
        if (tb.requires_grad()) {
          tb.ensure_grad();
          VecMap(tb.grad() + o * block_b, block_b) += ConstVecMap(g + block_a, block_b);
        }
      }
    });
  }
  return out;
}

Tensor softmax(Tape& tape, const Tensor& a, int axis) {
  const AxisStrides s = axis_strides(a.shape(), axis);
  Tensor out = Tensor::zeros(a.shape());
  const double* src = a.data();
  double* dst = out.data();
  for (Index o = 0; o < s.outer; ++o)
    for (Index i = 0; i < s.inner; ++i) {
      const Index base = o * s.len * s.inner + i;
      double mx = src[base];
      for (Index l = 1; l < s.len; ++l) mx = std::max(mx, src[base + l * s.inner]);
      double z = 0.0;
      for (Index l = 0; l < s.len; ++l) {
        const double e = std::exp(src[base + l * s.inner] - mx);
        dst[base + l * s.inner] = e;
        z += e;
      }
      for (Index l = 0; l < s.len; ++l) dst[base + l * s.inner] /= z;
    }
  if (taped(tape, {a})) {
    out.set_requires_grad(true);
    Tensor ta = a, to = out;
    tape.push([ta, to, s]() mutable {
      if (!to.has_grad()) return;
      ta.ensure_grad();
      const double* y = to.data();
      const double* g = to.grad();
      double* ag = ta.grad();
      for (Index o = 0; o < s.outer; ++o)
        for (Index i = 0; i < s.inner; ++i) {
          const Index base = o * s.len * s.inner + i;
          double dot = 0.0;
          for (Index l = 0; l < s.len; ++l) {
            const Index k = base + l * s.inner;
            dot += g[k] * y[k];
          }
          for (Index l = 0; l < s.len; ++l) {
            const Index k = base + l * s.inner;
            ag[k] += y[k] * (g[k] - dot);
          }
        }
    });
  }
  return out;
}

Tensor l2_norm(Tape& tape, const Tensor& v) {
  if (v.size() == 0) throw DimensionError("l2_norm: empty tensor");
  return rowwise_l2_norm(tape, v, v.size());
}

Tensor rowwise_l2_norm(Tape& tape, const Tensor& a, Index row_width) {
  if (row_width <= 0 || a.size() % row_width != 0)
    throw DimensionError("rowwise_l2_norm: row width " + std::to_string(row_width) +
                         " does not divide " + std::to_string(a.size()));
  const Index rows = a.size() / row_width;
  Tensor out = Tensor::zeros({rows});
  for (Index r = 0; r < rows; ++r)
    out.data()[r] = ConstVecMap(a.data() + r * row_width, row_width).norm();
  if (taped(tape, {a})) {
    out.set_requires_grad(true);
    Tensor ta = a, to = out;
    tape.push([ta, to, rows, row_width]() mutable {
      if (!to.has_grad()) return;
      ta.ensure_grad();
      for (Index r = 0; r < rows; ++r) {
        const double n = to.data()[r];
        if (n == 0.0) continue;  // subgradient at the zero vector
        VecMap(ta.grad() + r * row_width, row_width) +=
            (to.grad()[r] / n) * ConstVecMap(ta.data() + r * row_width, row_width);
      }
    });
  }
  return out;
}

Tensor gather_rows(Tape& tape, const Tensor& m, const std::vector<Index>& ids) {
  if (m.rank() != 2) throw DimensionError("gather_rows: expected matrix, got " + shape_str(m.shape()));
  const Index rows = m.dim(0), cols = m.dim(1);
  for (Index id : ids)
    if (id < 0 || id >= rows)
      throw DimensionError("gather_rows: id " + std::to_string(id) + " out of range [0," +
                           std::to_string(rows) + ")");
  Tensor out = Tensor::zeros({static_cast<Index>(ids.size()), cols});
  for (std::size_t r = 0; r < ids.size(); ++r)
    std::copy_n(m.data() + ids[r] * cols, cols, out.data() + static_cast<Index>(r) * cols);
  if (taped(tape, {m})) {
    out.set_requires_grad(true);
    Tensor tm = m, to = out;
    tape.push([tm, to, ids, cols]() mutable {
      if (!to.has_grad()) return;
      tm.ensure_grad();
      for (std::size_t r = 0; r < ids.size(); ++r)
        VecMap(tm.grad() + ids[r] * cols, cols) +=
            ConstVecMap(to.grad() + static_cast<Index>(r) * cols, cols);
    });
  }
  return out;
}

}  // namespace capsnet

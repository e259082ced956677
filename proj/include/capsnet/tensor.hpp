#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <vector>

#include "capsnet/common.hpp"

namespace capsnet {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using ArrMap = Eigen::Map<Eigen::ArrayXd>;
using ConstArrMap = Eigen::Map<const Eigen::ArrayXd>;

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
};

/// Dense row-major f64 tensor. Value-semantic handle sharing its storage;
/// data is immutable after construction except through the grad buffer.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  Index dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
  Index size() const { return static_cast<Index>(impl_->data.size()); }

  double* data() { return impl_->data.data(); }
  const double* data() const { return impl_->data.data(); }
  std::vector<double>& data_vec() { return impl_->data; }
  const std::vector<double>& data_vec() const { return impl_->data; }
  double item() const;
  double at(Index i) const { return impl_->data[static_cast<std::size_t>(i)]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }

  bool has_grad() const { return impl_->grad.size() == impl_->data.size(); }
  void ensure_grad();
  void zero_grad();
  double* grad() { return impl_->grad.data(); }
  const double* grad() const { return impl_->grad.data(); }
  std::vector<double>& grad_vec() { return impl_->grad; }

  bool all_finite() const;

  // Eigen views over the flat storage.
  MatMap mat(Index rows, Index cols) { return MatMap(data(), rows, cols); }
  ConstMatMap mat(Index rows, Index cols) const { return ConstMatMap(data(), rows, cols); }
  VecMap vec() { return VecMap(data(), size()); }
  ConstVecMap vec() const { return ConstVecMap(data(), size()); }
  ArrMap array() { return ArrMap(data(), size()); }
  ConstArrMap array() const { return ConstArrMap(data(), size()); }
  MatMap grad_mat(Index rows, Index cols) { return MatMap(grad(), rows, cols); }
  VecMap grad_vec_map() { return VecMap(grad(), size()); }
  ArrMap grad_array() { return ArrMap(grad(), size()); }

  std::shared_ptr<TensorImpl> impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Records primitive operations in execution order; replaying the recorded
/// backward rules in reverse propagates gradients to every requires_grad leaf.
class Tape {
 public:
  bool recording = true;

  void push(std::function<void()> backward_rule) { nodes_.push_back(std::move(backward_rule)); }
  std::size_t node_count() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse.
  /// Repeated calls accumulate into existing grad buffers.
  void backward(Tensor loss);

 private:
  std::vector<std::function<void()>> nodes_;
};

/// True when the op should be recorded: tape is live and some input needs grad.
inline bool taped(const Tape& tape, std::initializer_list<Tensor> inputs) {
  if (!tape.recording) return false;
  for (const Tensor& t : inputs)
    if (t.requires_grad()) return true;
  return false;
}

// -- primitives; every one carries a backward rule ---------------------------

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scalar_mul(Tape& tape, const Tensor& a, double c);
/// scale * a + shift, elementwise.
Tensor affine(Tape& tape, const Tensor& a, double scale, double shift);
Tensor relu(Tape& tape, const Tensor& a);
Tensor square(Tape& tape, const Tensor& a);
Tensor reduce_sum(Tape& tape, const Tensor& a, int axis);
Tensor sum_all(Tape& tape, const Tensor& a);
Tensor reshape(Tape& tape, const Tensor& a, Shape shape);
Tensor concatenate(Tape& tape, const Tensor& a, const Tensor& b, int axis);
Tensor softmax(Tape& tape, const Tensor& a, int axis);
/// Euclidean norm of the whole tensor viewed as one vector; shape {1}.
/// Gradient at the zero vector is the zero vector.
Tensor l2_norm(Tape& tape, const Tensor& v);
/// Norms of consecutive rows of length row_width; shape {size/row_width}.
Tensor rowwise_l2_norm(Tape& tape, const Tensor& a, Index row_width);
Tensor gather_rows(Tape& tape, const Tensor& m, const std::vector<Index>& ids);

}  // namespace capsnet

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sld/kernels.hpp"

namespace sld {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorData;

struct GradFn {
  std::vector<std::shared_ptr<TensorData>> parents;
  std::function<void(TensorData&)> backward;
};

struct TensorData {
  Shape shape;
  std::vector<Real> v;
  std::vector<Real> g;  // empty until backward touches this tensor
  bool requires_grad = false;
  std::shared_ptr<GradFn> fn;
};

// Value-like handle to a shared buffer. Ops on tensors record a backward
// graph when gradients are enabled and some input requires them.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = 0);
  Tensor(Shape shape, std::vector<Real> values);
  static Tensor scalar(Real value);

  bool defined() const { return d_ != nullptr; }
  const Shape& shape() const { return d_->shape; }
  int rows() const { return d_->shape.at(0); }
  int cols() const { return d_->shape.at(1); }
  int64_t size() const { return (int64_t)d_->v.size(); }

  Real* data() { return d_->v.data(); }
  const Real* data() const { return d_->v.data(); }
  std::vector<Real>& values() { return d_->v; }
  const std::vector<Real>& values() const { return d_->v; }
  Real item() const;
  Real& at(int i, int j) { return d_->v[(int64_t)i * cols() + j]; }
  Real at(int i, int j) const { return d_->v[(int64_t)i * cols() + j]; }

  bool requires_grad() const { return d_->requires_grad; }
  Tensor& set_requires_grad(bool b) {
    d_->requires_grad = b;
    return *this;
  }

  // Gradient buffer, allocated (zeroed) on first access.
  std::vector<Real>& grad();
  bool grad_is_zero() const;  // true when absent or all exactly zero
  void zero_grad();

  // Copy of the values with no graph attached.
  Tensor detach(bool track_grad = false) const;

  std::shared_ptr<TensorData> ptr() const { return d_; }
  TensorData& ref() { return *d_; }
  const TensorData& ref() const { return *d_; }

 private:
  std::shared_ptr<TensorData> d_;
};

// Reverse-mode sweep from a scalar loss. Seeds d(loss)/d(loss) = 1 and walks
// the recorded graph once in reverse topological order.
void backward(const Tensor& loss);

bool grad_enabled();
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  bool prev;
};

bool all_finite(const Tensor& t);

}  // namespace sld

#include "sld/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "sld/error.hpp"

namespace sld {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape, Real fill) : d_(std::make_shared<TensorData>()) {
  for (int d : shape) {
    if (d <= 0) throw ValidationError("tensor dimension must be positive, got " + shape_str(shape));
  }
  d_->shape = std::move(shape);
  d_->v.assign(shape_numel(d_->shape), fill);
}

Tensor::Tensor(Shape shape, std::vector<Real> values) : d_(std::make_shared<TensorData>()) {
  if ((int64_t)values.size() != shape_numel(shape)) {
    throw ValidationError("tensor value count " + std::to_string(values.size()) +
                          " does not match shape " + shape_str(shape));
  }
  d_->shape = std::move(shape);
  d_->v = std::move(values);
}

Tensor Tensor::scalar(Real value) { return Tensor({1}, std::vector<Real>{value}); }

Real Tensor::item() const {
  if (d_->v.size() != 1) {
    throw RuntimeFailure("item() on non-scalar tensor " + shape_str(d_->shape));
  }
  return d_->v[0];
}

std::vector<Real>& Tensor::grad() {
  if (d_->g.size() != d_->v.size()) d_->g.assign(d_->v.size(), 0);
  return d_->g;
}

bool Tensor::grad_is_zero() const {
  for (Real x : d_->g) {
    if (x != 0) return false;
  }
  return true;
}

void Tensor::zero_grad() {
  std::fill(d_->g.begin(), d_->g.end(), Real(0));
}

Tensor Tensor::detach(bool track_grad) const {
  Tensor out(d_->shape, d_->v);
  out.set_requires_grad(track_grad);
  return out;
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev; }

void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw RuntimeFailure("backward() requires a scalar loss, got " + shape_str(loss.shape()));
  }
  if (!std::isfinite((double)loss.item())) {
    throw RuntimeFailure("backward() on non-finite loss");
  }

  // Iterative post-order DFS over producer nodes.
  std::vector<TensorData*> order;
  std::unordered_set<TensorData*> seen;
  struct Frame {
    TensorData* t;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  TensorData* root = loss.ptr().get();
  if (!root->fn) {
    return;  // leaf loss, nothing to do
  }
  stack.push_back({root, 0});
  seen.insert(root);
  while (!stack.empty()) {
    Frame& f = stack.back();
    auto& parents = f.t->fn->parents;
    bool descended = false;
    while (f.next_parent < parents.size()) {
      TensorData* p = parents[f.next_parent++].get();
      if (p->fn && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
        descended = true;
        break;
      }
    }
    if (!descended && f.next_parent >= parents.size()) {
      order.push_back(f.t);
      stack.pop_back();
    }
  }

  root->g.assign(root->v.size(), 0);
  root->g[0] = 1;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorData* t = *it;
    if (t->g.empty()) continue;  // no gradient ever reached this node
    t->fn->backward(*t);
  }
}

bool all_finite(const Tensor& t) {
  for (Real x : t.values()) {
    if (!std::isfinite((double)x)) return false;
  }
  return true;
}

}  // namespace sld

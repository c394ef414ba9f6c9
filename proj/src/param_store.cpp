#include "sld/param_store.hpp"

#include <cstring>

#include "sld/error.hpp"

namespace sld {

Tensor ParamStore::create(const std::string& path, Shape shape) {
  if (index_.count(path)) throw ValidationError("duplicate parameter path: " + path);
  Tensor t(std::move(shape));
  t.set_requires_grad(true);
  index_[path] = (int)order_.size();
  order_.push_back(path);
  params_.push_back(t);
  frozen_.push_back(0);
  return t;
}

Tensor ParamStore::create_normal(const std::string& path, Shape shape, const Rng& base,
                                 double stddev) {
  Tensor t = create(path, std::move(shape));
  Rng r = base.fork(path);
  for (Real& x : t.values()) x = (Real)(r.normal() * stddev);
  return t;
}

Tensor ParamStore::create_const(const std::string& path, Shape shape, Real fill) {
  Tensor t = create(path, std::move(shape));
  for (Real& x : t.values()) x = fill;
  return t;
}

bool ParamStore::has(const std::string& path) const { return index_.count(path) != 0; }

int ParamStore::index_of(const std::string& path) const {
  auto it = index_.find(path);
  if (it == index_.end()) throw ValidationError("unknown parameter path: " + path);
  return it->second;
}

Tensor ParamStore::get(const std::string& path) const { return params_[index_of(path)]; }

void ParamStore::set_frozen(const std::string& path, bool frozen) {
  const int i = index_of(path);
  frozen_[i] = frozen ? 1 : 0;
  Tensor t = params_[i];
  t.set_requires_grad(!frozen);
}

void ParamStore::set_frozen_prefix(const std::string& prefix, bool frozen) {
  bool any = false;
  for (size_t i = 0; i < order_.size(); ++i) {
    if (order_[i].rfind(prefix, 0) == 0) {
      frozen_[i] = frozen ? 1 : 0;
      params_[i].set_requires_grad(!frozen);
      any = true;
    }
  }
  if (!any) throw ValidationError("no parameters under prefix: " + prefix);
}

void ParamStore::freeze_all(bool frozen) {
  for (size_t i = 0; i < order_.size(); ++i) {
    frozen_[i] = frozen ? 1 : 0;
    params_[i].set_requires_grad(!frozen);
  }
}

void ParamStore::zero_grad() {
  for (size_t i = 0; i < params_.size(); ++i) {
    if (!frozen_[i]) params_[i].grad();  // ensure the buffer exists
    params_[i].zero_grad();
  }
}

bool ParamStore::grads_zero_under(const std::string& prefix) const {
  for (size_t i = 0; i < order_.size(); ++i) {
    if (order_[i].rfind(prefix, 0) != 0) continue;
    if (!params_[i].grad_is_zero()) return false;
  }
  return true;
}

uint64_t ParamStore::values_hash() const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const Tensor& t : params_) {
    const unsigned char* p = (const unsigned char*)t.data();
    const size_t bytes = t.values().size() * sizeof(Real);
    for (size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

int64_t ParamStore::total_elements() const {
  int64_t n = 0;
  for (const Tensor& t : params_) n += t.size();
  return n;
}

}  // namespace sld

#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "sld/rng.hpp"
#include "sld/tensor.hpp"

namespace sld {

// Named parameter tensors with per-parameter freeze flags. Iteration order is
// registration order, which keeps optimizer sweeps and checkpoints
// reproducible.
class ParamStore {
 public:
  // Registers a zero tensor under a unique dot-separated path.
  Tensor create(const std::string& path, Shape shape);
  // Registers with N(0, std) init drawn from a path-derived stream of rng.
  Tensor create_normal(const std::string& path, Shape shape, const Rng& base, double stddev);
  Tensor create_const(const std::string& path, Shape shape, Real fill);

  bool has(const std::string& path) const;
  Tensor get(const std::string& path) const;

  size_t size() const { return params_.size(); }
  const std::string& path(size_t i) const { return order_[i]; }
  Tensor param(size_t i) const { return params_[i]; }
  bool frozen(size_t i) const { return frozen_[i] != 0; }

  // Freezing clears requires_grad so backward never writes the buffer.
  void set_frozen(const std::string& path, bool frozen);
  void set_frozen_prefix(const std::string& prefix, bool frozen);
  void freeze_all(bool frozen);

  void zero_grad();
  // True when every gradient buffer under the prefix is absent or all-zero.
  bool grads_zero_under(const std::string& prefix) const;

  // FNV over raw parameter bytes, for cheap change detection in tests.
  uint64_t values_hash() const;
  int64_t total_elements() const;

 private:
  int index_of(const std::string& path) const;

  std::vector<std::string> order_;
  std::vector<Tensor> params_;
  std::vector<uint8_t> frozen_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace sld

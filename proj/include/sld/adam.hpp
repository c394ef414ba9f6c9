#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "sld/param_store.hpp"

namespace sld {

// Bias-corrected adaptive-moment optimizer state. Moment buffers are created
// on first use, keyed by parameter path.
struct AdamState {
  Real lr = (Real)1e-3;
  Real beta1 = (Real)0.9;
  Real beta2 = (Real)0.999;
  Real eps = (Real)1e-8;
  Real clip_norm = 0;        // global gradient-norm clip, 0 disables
  int64_t warmup_steps = 0;  // linear learning-rate warmup, 0 disables
  int64_t decay_steps = 0;   // cosine decay horizon after warmup, 0 disables
  int64_t step = 0;
  std::unordered_map<std::string, std::vector<Real>> m;
  std::unordered_map<std::string, std::vector<Real>> v;
};

// One optimizer step over every unfrozen parameter, reading the gradient
// buffers accumulated by backward(). Frozen parameters are untouched; a
// missing gradient on an unfrozen parameter is an error naming its path.
void adam_update(ParamStore& params, AdamState& state);

}  // namespace sld

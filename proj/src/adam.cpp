#include "sld/adam.hpp"

#include <cmath>

#include "sld/error.hpp"

namespace sld {

void adam_update(ParamStore& params, AdamState& state) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow((double)state.beta1, (double)state.step);
  const double bc2 = 1.0 - std::pow((double)state.beta2, (double)state.step);
  double lr = (double)state.lr;
  if (state.warmup_steps > 0 && state.step < state.warmup_steps) {
    lr *= (double)state.step / (double)state.warmup_steps;
  } else if (state.decay_steps > 0) {
    const double frac =
        std::min(1.0, (double)(state.step - state.warmup_steps) / (double)state.decay_steps);
    lr *= 0.05 + 0.95 * 0.5 * (1.0 + std::cos(3.14159265358979323846 * frac));
  }
  double gscale = 1.0;
  if (state.clip_norm > 0) {
    double gsq = 0;
    for (size_t i = 0; i < params.size(); ++i) {
      if (params.frozen(i)) continue;
      for (Real g : params.param(i).ref().g) gsq += (double)g * g;
    }
    const double gnorm = std::sqrt(gsq);
    if (gnorm > (double)state.clip_norm) gscale = (double)state.clip_norm / gnorm;
  }
  for (size_t i = 0; i < params.size(); ++i) {
    if (params.frozen(i)) continue;
    Tensor p = params.param(i);
    const std::string& path = params.path(i);
    if (p.ref().g.size() != p.values().size()) {
      throw RuntimeFailure("adam_update: missing gradient for parameter " + path);
    }
    auto& m = state.m[path];
    auto& v = state.v[path];
    if (m.size() != p.values().size()) m.assign(p.values().size(), 0);
    if (v.size() != p.values().size()) v.assign(p.values().size(), 0);
    const Real b1 = state.beta1, b2 = state.beta2;
    const int64_t n = p.size();
    Real* pv = p.data();
    const Real* g = p.ref().g.data();
    for (int64_t j = 0; j < n; ++j) {
      const Real gj = (Real)(gscale * g[j]);
      m[j] = b1 * m[j] + (1 - b1) * gj;
      v[j] = b2 * v[j] + (1 - b2) * gj * gj;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      pv[j] -= (Real)(lr * mhat / (std::sqrt(vhat) + (double)state.eps));
    }
  }
}

}  // namespace sld

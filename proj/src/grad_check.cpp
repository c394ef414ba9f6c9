#include "sld/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "sld/error.hpp"

namespace sld {

GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                           double tol, double h, int max_coords, Rng rng) {
  for (Tensor& t : leaves) t.set_requires_grad(true);
  for (Tensor& t : leaves) t.zero_grad();

  Tensor loss = f();
  if (!std::isfinite((double)loss.item())) {
    throw RuntimeFailure("grad_check: non-finite loss at the evaluation point");
  }
  backward(loss);

  std::vector<std::vector<Real>> analytic;
  analytic.reserve(leaves.size());
  for (Tensor& t : leaves) analytic.push_back(t.grad());

  GradCheckReport rep;
  NoGradGuard ng;
  for (size_t li = 0; li < leaves.size(); ++li) {
    Tensor& t = leaves[li];
    const int64_t n = t.size();
    std::vector<int64_t> coords;
    if (max_coords > 0 && n > max_coords) {
      for (int c = 0; c < max_coords; ++c) coords.push_back((int64_t)rng.below((uint64_t)n));
      std::sort(coords.begin(), coords.end());
      coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    } else {
      coords.resize((size_t)n);
      for (int64_t i = 0; i < n; ++i) coords[(size_t)i] = i;
    }
    for (int64_t c : coords) {
      const Real saved = t.data()[c];
      t.data()[c] = (Real)((double)saved + h);
      const double fp = (double)f().item();
      t.data()[c] = (Real)((double)saved - h);
      const double fm = (double)f().item();
      t.data()[c] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw RuntimeFailure("grad_check: non-finite loss at a perturbed point");
      }
      const double fd = (fp - fm) / (2.0 * h);
      const double ad = (double)analytic[li][c];
      const double rel = std::abs(fd - ad) / std::max({std::abs(fd), std::abs(ad), 1e-3});
      ++rep.checked;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst = "input#" + std::to_string(li) + "[" + std::to_string(c) + "]";
      }
    }
  }
  rep.pass = rep.max_rel_err < tol;
  return rep;
}

}  // namespace sld

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sld/rng.hpp"
#include "sld/tensor.hpp"

namespace sld {

struct GradCheckReport {
  double max_rel_err = 0;
  int checked = 0;
  bool pass = false;
  std::string worst;  // "input#i[coord]" of the worst coordinate
};

// Compares reverse-mode gradients of the scalar f() against central finite
// differences at step h, coordinate by coordinate over the given leaves. f is
// re-evaluated with perturbed leaf values, so it must read them afresh on
// every call. When max_coords > 0, a random subset of coordinates per leaf is
// checked instead of all of them.
GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                           double tol, double h = 1e-4, int max_coords = -1,
                           Rng rng = Rng(0, "grad_check"));

}  // namespace sld

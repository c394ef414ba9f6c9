// Acceptance criterion 1: central finite-difference checks of every
// differentiable op (100 random small inputs each) and of every composed
// training loss, at relative tolerance 1e-4 in 64-bit, on one CPU core in
// under two minutes.

#include <chrono>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "grad_suite.hpp"

int main() {
  static_assert(sizeof(sld::Real) == 8, "criterion 1 runs in 64-bit");
#ifdef _OPENMP
  omp_set_num_threads(1);
#endif
  const auto t0 = std::chrono::steady_clock::now();

  bool all_pass = true;
  int total_checked = 0;
  double worst = 0;
  std::string worst_name;

  auto consume = [&](const std::vector<gradsuite::Result>& results) {
    for (const auto& r : results) {
      total_checked += r.checked;
      if (r.max_rel_err > worst) {
        worst = r.max_rel_err;
        worst_name = r.name;
      }
      if (!r.pass) {
        all_pass = false;
        std::printf("    FAILING: %s max_rel_err=%.3e\n", r.name.c_str(), r.max_rel_err);
      }
    }
  };

  consume(gradsuite::run_op_sweeps(100));
  consume(gradsuite::run_loss_checks());

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_budget = secs < 120.0;
  const bool pass = all_pass && in_budget;
  std::printf("[%s] criterion 1: gradient suite, %d coordinates checked, worst %.3e (%s), "
              "tol 1e-4, %.1fs (< 120s %s)\n",
              pass ? "PASS" : "FAIL", total_checked, worst, worst_name.c_str(), secs,
              in_budget ? "ok" : "exceeded");
  return pass ? 0 : 1;
}

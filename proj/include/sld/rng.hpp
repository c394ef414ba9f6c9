#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sld {

uint64_t fnv1a64(std::string_view s);
uint64_t mix64(uint64_t x);

// Counter-based random stream. A stream is identified by (seed, name); every
// draw is a pure function of (seed, name, call index), so independent named
// streams never interleave and forking is cheap.
class Rng {
 public:
  Rng() : Rng(0, "root") {}
  Rng(uint64_t seed, std::string_view stream);

  // Derives an independent stream from this one's identity.
  Rng fork(std::string_view name) const;
  Rng fork(uint64_t salt) const;

  uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  // Integer uniform in [0, n), n > 0.
  uint64_t below(uint64_t n);
  // Standard normal via Box-Muller; consumes two uniforms per call.
  double normal();

  std::vector<double> normal_vec(size_t n);

  uint64_t key() const { return key_; }
  uint64_t counter() const { return counter_; }

 private:
  uint64_t key_ = 0;
  uint64_t counter_ = 0;
};

}  // namespace sld

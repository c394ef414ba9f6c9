#include "sld/rng.hpp"

#include <cmath>

namespace sld {

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t mix64(uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

Rng::Rng(uint64_t seed, std::string_view stream) {
  key_ = mix64(mix64(seed) ^ fnv1a64(stream));
}

Rng Rng::fork(std::string_view name) const {
  Rng r;
  r.key_ = mix64(key_ ^ fnv1a64(name));
  r.counter_ = 0;
  return r;
}

Rng Rng::fork(uint64_t salt) const {
  Rng r;
  r.key_ = mix64(key_ ^ mix64(salt));
  r.counter_ = 0;
  return r;
}

uint64_t Rng::next_u64() { return mix64(key_ + 0x9e3779b97f4a7c15ull * ++counter_); }

double Rng::uniform() {
  return (double)(next_u64() >> 11) * 0x1.0p-53;
}

uint64_t Rng::below(uint64_t n) {
  // modulo bias is negligible for the small ranges used here
  return next_u64() % n;
}

double Rng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
  return r * std::cos(6.283185307179586477 * u2);
}

std::vector<double> Rng::normal_vec(size_t n) {
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = normal();
  return out;
}

}  // namespace sld

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pemr {

// Domain failures surface as Error (or a subclass); the CLI maps them to
// exit code 1. Usage problems (bad flags) are handled by the arg parser.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class NoPathError : public Error {
 public:
  explicit NoPathError(const std::string& what) : Error(what) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(what) {}
};

// Deterministic splitmix64 generator. The standard <random> distributions are
// implementation-defined, and byte-identical reruns are part of the contract
// here, so all sampling goes through this.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi], inclusive.
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw Error("Rng::uniform_int: empty range");
    uint64_t n = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(bounded(n));
  }

  // Uniform index in [0, n).
  size_t index(size_t n) {
    if (n == 0) throw Error("Rng::index: empty range");
    return static_cast<size_t>(bounded(n));
  }

  // Uniform in [lo, hi).
  double uniform_real(double lo, double hi) { return lo + (hi - lo) * next_real(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t bounded(uint64_t n) {
    // Lemire's multiply-shift; bias is negligible for the ranges used here
    // and the result is platform-independent.
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  uint64_t state_;
};

// Stable derivation of stream seeds so independent consumers (per-house,
// per-episode, ...) never share a sequence.
inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
  uint64_t s = base ^ (0x9E3779B97F4A7C15ull * (stream + 1));
  Rng r(s);
  return r.next_u64();
}

inline void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(std::string(what) + ": non-finite value");
  }
}

}  // namespace pemr

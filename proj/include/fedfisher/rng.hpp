#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedfisher {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Hash an ordered tuple of keys (experiment seed, cell, replication, center, ...)
/// into one 64-bit stream seed. Different key tuples give unrelated streams.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> keys) noexcept;

/// Random stream with portable variate transforms.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The standard library distributions are not portable across
/// implementations, so the transforms below are written out here; the same
/// seed produces the same variates on every toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal, Marsaglia polar method.
  double normal();

  /// Exponential with unit rate.
  double exponential();

  bool bernoulli(double p) { return uniform() < p; }

  /// Poisson with mean mu >= 0. Product-of-uniforms for small means,
  /// Hoermann's transformed rejection (PTRS) for mu >= 10.
  std::uint64_t poisson(double mu);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fedfisher

#pragma once

#include <cstdint>
#include <random>

namespace ergolab {

// splitmix64 finalizer; full-avalanche 64-bit mix.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent noise streams per trajectory. Coupled pairs reuse the streams of
// their path index, which is what makes the shared-noise coupling exact.
enum class StreamTag : std::uint64_t {
  Gauss = 0x47d4f1c3a5b96e21ULL,
  BranchJump = 0x8c6f3b52e9ad0174ULL,
  ImmigrationJump = 0x25e1a9c4d7f8b063ULL,
  Environment = 0xb3907e5f2c4d61a8ULL,
  Reference = 0x6a58d20b9e37c4f5ULL,
};

inline std::uint64_t child_seed(std::uint64_t master, std::uint64_t path_index, StreamTag tag) {
  return mix64(mix64(master ^ mix64(path_index + 0x51ed270b7a4fc12eULL)) ^ static_cast<std::uint64_t>(tag));
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : eng_(seed) {}

  // uniform on (0, 1]
  double uniform() {
    return 1.0 - unif_(eng_);
  }

  double normal() { return norm_(eng_); }

  double exponential() { return -std::log(uniform()); }

  long poisson(double mean) {
    if (mean <= 0.0) return 0;
    return pois_(eng_, std::poisson_distribution<long>::param_type(mean));
  }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
  std::poisson_distribution<long> pois_;
};

}  // namespace ergolab

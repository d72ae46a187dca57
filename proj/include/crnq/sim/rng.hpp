#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace crnq::sim {

// SplitMix64 finalizer, used only to spread seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seed of stream `stream` in replication `replication`. Each stochastic
// process owns a stream, so adding a process leaves the others' draws intact.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replication,
                                 std::uint64_t stream) {
  return splitmix64(splitmix64(splitmix64(master) ^ replication) ^ (stream * 0xD1B54A32D192ED03ULL));
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  // Uniform in (0, 1], 53 random bits.
  double uniform_open_low() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  // Inverse-transform draw; rate must be positive.
  double exponential(double rate) { return -std::log(uniform_open_low()) / rate; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace crnq::sim

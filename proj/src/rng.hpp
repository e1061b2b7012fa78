#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ctmsm {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Mixes a base seed with an ordered list of keys (replication, subject, ...).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) noexcept;

// Independent random stream identified by (seed, stream_id). Identical
// identifiers reproduce identical draws on one build.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  double uniform();  // [0, 1)
  double normal();   // standard normal
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t below(std::uint64_t n);  // uniform integer in [0, n)

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace ctmsm

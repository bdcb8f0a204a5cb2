#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace xbar {

// =============================================================================
// Seeded random streams
// =============================================================================
// Every stochastic quantity in the simulator is drawn from an explicitly
// passed RngStream. Streams are derived from one master seed by name, so
// e.g. changing the reference-programming noise never perturbs the device
// samples or the input data.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class RngStream {
public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  /// Standard normal draw.
  double gauss() { return normal_(engine_); }

  /// Uniform draw in [0, 1).
  double uniform() { return uniform_(engine_); }

  std::uint64_t raw() { return engine_(); }

private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Derives independent named sub-streams from a master seed.
class SeedSplitter {
public:
  explicit SeedSplitter(std::uint64_t master_seed) : master_(master_seed) {}

  std::uint64_t seed_for(std::string_view name) const {
    return splitmix64(master_ ^ fnv1a64(name));
  }

  RngStream stream(std::string_view name) const { return RngStream(seed_for(name)); }

  /// Sub-stream indexed by an integer (e.g. per-repeat pulse streams).
  RngStream stream(std::string_view name, std::uint64_t index) const {
    return RngStream(splitmix64(seed_for(name) + index));
  }

  std::uint64_t master() const { return master_; }

private:
  std::uint64_t master_;
};

} // namespace xbar

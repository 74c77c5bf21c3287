#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace hjm {

// Counter-based normal generator: every draw is a pure function of
// (seed, stream, path, step, factor), so paths can be generated in any
// order and on any number of workers with identical results.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  double uniform(std::uint64_t stream, std::uint64_t path, std::uint64_t step,
                 std::uint64_t factor, std::uint64_t lane = 0) const {
    const std::uint64_t bits = key(stream, path, step, factor, lane);
    // 53 random bits mapped into (0, 1).
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  // Box-Muller on two independent lanes of the same counter.
  double normal(std::uint64_t stream, std::uint64_t path, std::uint64_t step,
                std::uint64_t factor) const {
    const double u1 = uniform(stream, path, step, factor, 0);
    const double u2 = uniform(stream, path, step, factor, 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key(std::uint64_t stream, std::uint64_t path, std::uint64_t step,
                    std::uint64_t factor, std::uint64_t lane) const {
    std::uint64_t h = mix(seed_ ^ 0x5851f42d4c957f2dULL);
    h = mix(h ^ stream);
    h = mix(h ^ path);
    h = mix(h ^ step);
    h = mix(h ^ factor);
    return mix(h ^ lane);
  }

  std::uint64_t seed_;
};

// Streams keep the experiments' draws disjoint under a shared seed.
enum class Stream : std::uint64_t {
  Forward = 1,
  Counterexample = 2,
  Control = 3,
};

// Standard normals Z(step, factor) of one path. A refinement r > 1 aggregates
// r consecutive fine draws into one coarse draw, which couples paths simulated
// on grids whose step counts differ by the factor r.
class PathNormals {
 public:
  PathNormals(const CounterRng& rng, std::uint64_t path, Stream stream = Stream::Forward,
              int refinement = 1)
      : rng_(&rng), path_(path), stream_(static_cast<std::uint64_t>(stream)), refinement_(refinement) {}

  double operator()(int step, int factor) const {
    if (refinement_ == 1) return rng_->normal(stream_, path_, step, factor);
    double sum = 0.0;
    for (int j = 0; j < refinement_; ++j) {
      sum += rng_->normal(stream_, path_, static_cast<std::uint64_t>(step) * refinement_ + j, factor);
    }
    return sum / std::sqrt(static_cast<double>(refinement_));
  }

  std::uint64_t path() const { return path_; }
  int refinement() const { return refinement_; }

 private:
  const CounterRng* rng_;
  std::uint64_t path_;
  std::uint64_t stream_;
  int refinement_;
};

}  // namespace hjm

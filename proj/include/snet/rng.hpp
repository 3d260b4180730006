#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace snet {

// Seedable, splittable random source. split(label) derives an independent
// stream from the current state and a label, so subsystems can be reseeded
// deterministically without sharing a sequence.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed), seed_(seed) {}

  Rng split(const std::string& label) const {
    uint64_t h = seed_;
    for (unsigned char c : label) {
      h ^= c;
      h *= 0x100000001b3ull;  // FNV-1a
    }
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    return Rng(h);
  }

  float uniform(float lo, float hi) {
    std::uniform_real_distribution<float> d(lo, hi);
    return d(engine_);
  }

  // in [0, n)
  size_t index(size_t n) {
    std::uniform_int_distribution<size_t> d(0, n - 1);
    return d(engine_);
  }

  bool bernoulli(double p) {
    std::bernoulli_distribution d(p);
    return d(engine_);
  }

  template <typename It>
  void shuffle(It first, It last) {
    std::shuffle(first, last, engine_);
  }

  uint64_t seed() const { return seed_; }

 private:
  std::mt19937_64 engine_;
  uint64_t seed_;
};

}  // namespace snet

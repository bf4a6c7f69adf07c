#pragma once

// Reproducible randomness.
//
// Every random decision in dshift is drawn from `Rng`, which is MT19937-64
// (the exact generator std::mt19937_64, whose output sequence is fixed by the
// C++ standard) seeded with a single 64-bit value. The std distributions are
// implementation-defined, so bounded integers, reals and normals are derived
// here from the raw 64-bit words:
//
//   below(n)   rejection sampling: draw w until w < 2^64 - (2^64 mod n),
//              return w mod n
//   uniform()  (w >> 11) * 2^-53, in [0, 1)
//   normal()   Box-Muller on two uniform() draws, no caching
//
// Per-(stage, class) streams come from derive_seed():
//
//   derive_seed(root, stage, cls) = splitmix64(root XOR fnv1a64(stage + "/" + cls))
//
// This is generator version 1 ("mt19937_64/v1"), recorded in manifests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace dshift {

inline constexpr std::string_view kRngName = "mt19937_64/v1";

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view stage,
                                 std::string_view cls) {
  std::string key;
  key.reserve(stage.size() + cls.size() + 1);
  key.append(stage).push_back('/');
  key.append(cls);
  return splitmix64(root ^ fnv1a64(key));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t rem = (0 - n) % n;  // 2^64 mod n
    const std::uint64_t limit = 0 - rem;    // 0 means every word is accepted
    std::uint64_t w = next();
    if (limit != 0) {
      while (w >= limit) w = next();
    }
    return w % n;
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 engine_;
};

// Fisher-Yates shuffle driven by Rng::below.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

// Uniform random k-subset of {0..n-1}, returned in ascending order.
// Partial Fisher-Yates: position i is swapped with a uniform pick from [i, n).
inline std::vector<std::size_t> choose_subset(std::size_t n, std::size_t k,
                                              Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace dshift

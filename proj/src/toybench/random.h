#ifndef EDA_TOYBENCH_RANDOM_H_
#define EDA_TOYBENCH_RANDOM_H_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

#include "eda/toybench.h"

// Distribution helpers with a fixed algorithm, so corpora and checkpoints are
// identical across standard libraries (std:: distributions are not).
namespace eda::toybench::rnd {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

inline double uniform(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform(rng); }

// Integer in [lo, hi], by rejection.
inline int uniform_int(Rng& rng, int lo, int hi) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return lo + static_cast<int>(x % span);
}

inline double normal(Rng& rng) {
  double u1 = uniform(rng);
  while (u1 <= 0) u1 = uniform(rng);
  const double u2 = uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
    std::swap(v[i], v[uniform_int(rng, 0, i)]);
  }
}

template <class T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[uniform_int(rng, 0, static_cast<int>(v.size()) - 1)];
}

}  // namespace eda::toybench::rnd

#endif  // EDA_TOYBENCH_RANDOM_H_

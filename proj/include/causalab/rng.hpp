#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace causalab {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline constexpr std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ b);
}

// Identifies one reproducible random stream. The same (seed, stream_id) pair
// always reproduces the same draws; distinct stream_ids are independent.
// Sub-streams are derived by label so that consumers (e.g. SCM nodes) do not
// perturb each other's draws.
struct RngHandle {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  RngHandle sub(std::string_view label) const { return {mix_key(seed, fnv1a64(label)), stream_id}; }
  RngHandle sub(std::uint64_t salt) const { return {mix_key(seed, salt), stream_id}; }
};

// Fold several integer parts into a stream seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t s = splitmix64(base);
  for (std::uint64_t p : parts) s = mix_key(s, p);
  return s;
}

// Deterministic uniform/gaussian source. mt19937_64 output is pinned by the
// standard and the gaussian polar transform below is ours, so a given handle
// yields the same reals on every platform for one build of this library.
class RandomStream {
 public:
  explicit RandomStream(const RngHandle& h) : engine_(mix_key(h.seed, splitmix64(h.stream_id))) {}

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Standard normal via the Marsaglia polar method.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  double gaussian(double mean, double sd) { return mean + sd * gaussian(); }
  bool bernoulli(double q) { return uniform() < q; }
  double rademacher() { return uniform() < 0.5 ? -1.0 : 1.0; }

  // Uniform integer in [0, n).
  std::size_t index_below(std::size_t n) {
    std::size_t i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index_below(i)]);
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace causalab

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace hdmt {

/// SplitMix64 finalizer; the basis for deterministic stream keys.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Folds a tuple of identifiers into one stream key.  Streams keyed by
/// (seed, cell, replicate, sample) are independent by construction, so
/// workers can draw from them in any order without affecting results.
inline std::uint64_t stream_key(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x8824a3d7b6ac11c5ULL;
  for (std::uint64_t v : parts) h = splitmix64(h ^ v);
  return h;
}

/// Deterministic random stream.  The uniform/normal/gamma transforms are
/// spelled out here rather than taken from <random> distributions so the
/// byte-for-byte output contract does not depend on library internals.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : eng_(key) {}

  /// Uniform on (0, 1].
  double uniform() {
    return (static_cast<double>(eng_() >> 11) + 1.0) * 0x1p-53;
  }

  /// Standard normal via Box-Muller (pairs cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /// Standardized Gamma(shape 4, scale 1/2): mean 2, unit variance,
  /// shifted to mean zero.  Built from four exponentials.
  double gamma4_standardized() {
    double g = 0.0;
    for (int i = 0; i < 4; ++i) g += -0.5 * std::log(uniform());
    return g - 2.0;
  }

  /// Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t lim = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
      r = eng_();
    } while (r >= lim);
    return r % n;
  }

  /// m distinct indices from {0,...,n-1} via partial Fisher-Yates, sorted.
  std::vector<int> sample_without_replacement(int n, int m) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < m; ++i) {
      const int j = i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    return idx;
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hdmt

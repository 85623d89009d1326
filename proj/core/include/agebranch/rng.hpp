#pragma once

#include <cmath>
#include <cstdint>

namespace agebranch {

// splitmix64: one 64-bit state stepped by the golden-ratio increment and
// pushed through the mix13 finalizer. Streams are derived by re-finalizing
// (master, domain, a, b), which places each stream at an effectively random
// point of the single period-2^64 orbit; overlap over desk-scale draw
// budgets is negligible.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t state) : s_(state) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static RngStream derive(std::uint64_t master, std::uint64_t domain,
                          std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t s = mix(master ^ kGamma);
    s = mix(s + kGamma * (domain + 1));
    s = mix(s + kGamma * (a + 1));
    s = mix(s + kGamma * (b + 1));
    return RngStream(s);
  }

  std::uint64_t next() {
    s_ += kGamma;
    return mix(s_);
  }

  // uniform on (0, 1]; never 0, so logarithms stay finite
  double u01() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

  double exp1() { return -std::log(u01()); }

  // Marsaglia polar method; consumes a variable number of draws
  double normal() {
    double u, v, r2;
    do {
      u = 2.0 * u01() - 1.0;
      v = 2.0 * u01() - 1.0;
      r2 = u * u + v * v;
    } while (r2 >= 1.0 || r2 == 0.0);
    return u * std::sqrt(-2.0 * std::log(r2) / r2);
  }

  std::uint64_t state() const { return s_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;
  std::uint64_t s_ = 0;
};

}  // namespace agebranch

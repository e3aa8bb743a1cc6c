#pragma once

// Shared numeric plumbing: compensated accumulation, deterministic
// chunked reductions, exact small-integer helpers, CRT, and a portable
// seed-stable RNG wrapper.

#include <atomic>
#include <cstdint>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace gpylab {

using i64 = std::int64_t;
using u64 = std::uint64_t;
using i128 = __int128_t;

// Kahan-Babuska (Neumaier) compensated sum.  All long accumulations in the
// library go through this so that results are independent of chunk size
// once merge order is fixed.
class Kahan {
  double sum_ = 0.0;
  double comp_ = 0.0;

public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  void add(const Kahan& other) {
    add(other.sum_);
    add(other.comp_);
  }
  double value() const { return sum_ + comp_; }
  void reset() { sum_ = comp_ = 0.0; }
};

struct ResourceError : std::runtime_error {
  explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Deterministic parallel reduction over [lo, hi): the range is cut into
// fixed-size chunks independent of the thread count, each chunk produces a
// Kahan partial, and partials are merged in chunk order.  Results are
// bit-identical for any `jobs`.
template <class Fn>
inline double parallel_sum(i64 lo, i64 hi, int jobs, i64 chunk, Fn&& per_chunk) {
  if (hi <= lo) return 0.0;
  if (chunk <= 0) chunk = 1 << 20;
  const i64 nchunks = (hi - lo + chunk - 1) / chunk;
  std::vector<Kahan> partial(static_cast<size_t>(nchunks));
  if (jobs <= 1 || nchunks == 1) {
    for (i64 c = 0; c < nchunks; ++c) {
      i64 a = lo + c * chunk;
      i64 b = std::min(hi, a + chunk);
      per_chunk(a, b, partial[static_cast<size_t>(c)]);
    }
  } else {
    std::vector<std::thread> pool;
    std::atomic<i64> next{0};
    int nt = std::min<i64>(jobs, nchunks);
    for (int t = 0; t < nt; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          i64 c = next.fetch_add(1);
          if (c >= nchunks) break;
          i64 a = lo + c * chunk;
          i64 b = std::min(hi, a + chunk);
          per_chunk(a, b, partial[static_cast<size_t>(c)]);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  Kahan total;
  for (auto& p : partial) total.add(p);
  return total.value();
}

inline double factorial_d(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

inline double binomial_d(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline double pow_int(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

inline i64 mul_mod(i64 a, i64 b, i64 m) {
  return static_cast<i64>((static_cast<i128>(a) * b) % m);
}

// Extended gcd based modular inverse; m need not be prime.
inline i64 inv_mod(i64 a, i64 m) {
  i64 g = m, x = 0, x1 = 1, a1 = a % m;
  if (a1 < 0) a1 += m;
  while (a1) {
    i64 q = g / a1;
    g -= q * a1;
    std::swap(g, a1);
    x -= q * x1;
    std::swap(x, x1);
  }
  if (g != 1) throw std::invalid_argument("inv_mod: not coprime");
  return x < 0 ? x + m : x;
}

// CRT for coprime moduli: r = r1 (mod m1), r = r2 (mod m2), 0 <= r < m1*m2.
inline i64 crt_pair(i64 r1, i64 m1, i64 r2, i64 m2) {
  i64 d = r2 - r1;
  d %= m2;
  if (d < 0) d += m2;
  i64 t = mul_mod(d, inv_mod(m1 % m2, m2), m2);
  return r1 + m1 * t;
}

// mt19937_64 with a fixed bit-to-double mapping, so streams are identical
// across standard library implementations (std distributions are not).
class Rng {
  std::mt19937_64 eng_;

public:
  explicit Rng(u64 seed) : eng_(seed) {}
  u64 next() { return eng_(); }
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  i64 below(i64 n) { return static_cast<i64>(eng_() % static_cast<u64>(n)); }
};

}  // namespace gpylab

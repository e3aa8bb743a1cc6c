#pragma once

// Prime and multiplicative-function utilities shared by every module:
// a plain sieve of Eratosthenes for tables, a segmented sieve streaming
// blocks for ranges up to ~1e9, Mobius / smallest-prime-factor tables,
// and single-value helpers (primality, factorization, Euler phi).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "gpylab/numeric.hpp"

namespace gpylab {

// Flags for [0, limit]; flags[i] != 0 iff i prime.
inline std::vector<std::uint8_t> prime_flags(i64 limit) {
  if (limit < 0) limit = 0;
  std::vector<std::uint8_t> f(static_cast<size_t>(limit) + 1, 1);
  if (limit >= 0) f[0] = 0;
  if (limit >= 1) f[1] = 0;
  for (i64 p = 2; p * p <= limit; ++p)
    if (f[static_cast<size_t>(p)])
      for (i64 m = p * p; m <= limit; m += p) f[static_cast<size_t>(m)] = 0;
  return f;
}

inline std::vector<i64> primes_up_to(i64 limit, i64 memory_cap = i64(1) << 31) {
  if (limit < 2) throw ConfigError("primes_up_to: limit must be >= 2");
  if (limit + 1 > memory_cap)
    throw ResourceError("primes_up_to: limit exceeds memory budget; use segmented_primes");
  auto f = prime_flags(limit);
  std::vector<i64> out;
  for (i64 i = 2; i <= limit; ++i)
    if (f[static_cast<size_t>(i)]) out.push_back(i);
  return out;
}

// Streams primes in (lo, hi] in increasing order through `fn(p)`.
// Block size keeps the working set small for hi up to ~1e9.
template <class Fn>
inline void segmented_primes(i64 lo, i64 hi, Fn&& fn, i64 block = i64(1) << 20) {
  if (hi <= lo) return;
  if (lo < 1) lo = 1;
  i64 root = static_cast<i64>(std::sqrt(static_cast<double>(hi)));
  while ((root + 1) * (root + 1) <= hi) ++root;
  auto base = primes_up_to(std::max<i64>(root, 2));
  std::vector<std::uint8_t> seg;
  for (i64 start = lo + 1; start <= hi; start += block) {
    i64 end = std::min(hi, start + block - 1);
    seg.assign(static_cast<size_t>(end - start + 1), 1);
    for (i64 p : base) {
      if (p * p > end) break;
      i64 first = std::max(p * p, ((start + p - 1) / p) * p);
      for (i64 m = first; m <= end; m += p) seg[static_cast<size_t>(m - start)] = 0;
    }
    for (i64 n = start; n <= end; ++n)
      if (n >= 2 && seg[static_cast<size_t>(n - start)]) fn(n);
  }
}

// Smallest prime factor for every i in [0, limit].
inline std::vector<i64> spf_table(i64 limit) {
  std::vector<i64> spf(static_cast<size_t>(limit) + 1, 0);
  for (i64 i = 2; i <= limit; ++i) {
    if (spf[static_cast<size_t>(i)] == 0) {
      for (i64 m = i; m <= limit; m += i)
        if (spf[static_cast<size_t>(m)] == 0) spf[static_cast<size_t>(m)] = i;
    }
  }
  return spf;
}

// mobius[i] in {-1,0,1} for i in [0, limit].
inline std::vector<std::int8_t> mobius_table(i64 limit) {
  std::vector<std::int8_t> mu(static_cast<size_t>(limit) + 1, 1);
  std::vector<i64> spf(static_cast<size_t>(limit) + 1, 0);
  mu[0] = 0;
  for (i64 i = 2; i <= limit; ++i) {
    if (spf[static_cast<size_t>(i)] == 0) {
      for (i64 m = i; m <= limit; m += i)
        if (spf[static_cast<size_t>(m)] == 0) spf[static_cast<size_t>(m)] = i;
    }
  }
  for (i64 i = 2; i <= limit; ++i) {
    i64 p = spf[static_cast<size_t>(i)];
    i64 q = i / p;
    mu[static_cast<size_t>(i)] = (q % p == 0) ? 0 : static_cast<std::int8_t>(-mu[static_cast<size_t>(q)]);
  }
  return mu;
}

inline bool is_prime_i64(i64 n) {
  if (n < 2) return false;
  for (i64 d : {2, 3, 5}) {
    if (n == d) return true;
    if (n % d == 0) return false;
  }
  for (i64 d = 7; d * d <= n; d += 2)
    if (n % d == 0) return false;
  return true;
}

// Distinct prime factors by trial division; fine for the desk-scale moduli
// this laboratory touches (< ~1e12).
inline std::vector<i64> factorize_distinct(i64 n) {
  std::vector<i64> ps;
  for (i64 p = 2; p * p <= n; p += (p == 2 ? 1 : 2)) {
    if (n % p == 0) {
      ps.push_back(p);
      while (n % p == 0) n /= p;
    }
  }
  if (n > 1) ps.push_back(n);
  return ps;
}

inline bool is_squarefree_i64(i64 n) {
  if (n <= 0) return false;
  for (i64 p = 2; p * p <= n; p += (p == 2 ? 1 : 2)) {
    if (n % p == 0) {
      n /= p;
      if (n % p == 0) return false;
    }
  }
  return true;
}

inline i64 euler_phi(i64 n) {
  i64 r = n;
  for (i64 p : factorize_distinct(n)) r -= r / p;
  return r;
}

// phi of a squarefree modulus with known distinct prime factors.
inline i64 euler_phi_squarefree(i64 n, const std::vector<i64>& distinct_primes) {
  i64 r = n;
  for (i64 p : distinct_primes) r -= r / p;
  return r;
}

}  // namespace gpylab

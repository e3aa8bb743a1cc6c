#pragma once

// Admissible-tuple machinery.
//
// A tuple H = {h_1 < ... < h_k} of integer offsets defines, for each prime
// p, the residue set Omega(p) = {-h mod p : h in H} of size nu(p).  H is
// admissible when nu(p) < p for every p; the singular series
//
//   S(H) = prod_p (1 - nu(p)/p) (1 - 1/p)^{-k}
//
// is the tuple's density constant, and the finite products
//   W(R0) = prod_{p <= R0} (1 - nu(p)/p),   V(R0) = prod_{p <= R0} (1 - 1/p)
// normalize the smoothed-sieve main terms.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "gpylab/numeric.hpp"
#include "gpylab/primes.hpp"

namespace gpylab {

struct ResidueSystem {
  i64 prime = 0;
  std::vector<i64> residues;  // sorted, subset of {0,...,p-1}
  int size = 0;               // nu(p) = |Omega(p)|
};

// prod_{p <= cutoff} of an Euler factor, with the truncation tail estimated
// from the regime p > 2H where every factor is 1 + O(k^2/p^2).
struct EulerProductValue {
  double value = 0.0;
  i64 cutoff = 0;      // largest prime included
  double tail_bound = 0.0;
};

class AdmissibleTuple {
public:
  AdmissibleTuple(std::vector<i64> elements, i64 bound_H = 0)
      : elements_(std::move(elements)) {
    if (elements_.empty()) throw ConfigError("tuple: needs at least one offset");
    if (!std::is_sorted(elements_.begin(), elements_.end()) ||
        std::adjacent_find(elements_.begin(), elements_.end()) != elements_.end())
      throw ConfigError("tuple: offsets must be strictly increasing");
    i64 maxabs = 0;
    for (i64 h : elements_) maxabs = std::max(maxabs, h < 0 ? -h : h);
    bound_H_ = bound_H > 0 ? bound_H : std::max<i64>(1, maxabs);
    if (maxabs > bound_H_) throw ConfigError("tuple: |h| exceeds bound_H");
    // nu(p) is cached for every prime up to 2*bound_H; beyond that the
    // offsets are pairwise distinct mod p, so nu(p) = k.
    for (i64 p : primes_up_to(std::max<i64>(2, 2 * bound_H_)))
      nu_cache_[p] = count_residues(p);
  }

  const std::vector<i64>& elements() const { return elements_; }
  int k() const { return static_cast<int>(elements_.size()); }
  i64 bound_H() const { return bound_H_; }

  int nu(i64 p) const {
    if (p > 2 * bound_H_) return k();
    auto it = nu_cache_.find(p);
    return it != nu_cache_.end() ? it->second : count_residues(p);
  }

  ResidueSystem residue_system(i64 p) const {
    ResidueSystem rs;
    rs.prime = p;
    std::set<i64> s;
    for (i64 h : elements_) {
      i64 r = (-h) % p;
      if (r < 0) r += p;
      s.insert(r);
    }
    rs.residues.assign(s.begin(), s.end());
    rs.size = static_cast<int>(rs.residues.size());
    return rs;
  }

private:
  int count_residues(i64 p) const {
    std::set<i64> s;
    for (i64 h : elements_) {
      i64 r = (-h) % p;
      if (r < 0) r += p;
      s.insert(r);
    }
    return static_cast<int>(s.size());
  }

  std::vector<i64> elements_;
  i64 bound_H_ = 1;
  std::map<i64, int> nu_cache_;
};

inline int omega_size(const AdmissibleTuple& tuple, i64 p) { return tuple.nu(p); }

// nu(p) <= k, so any obstruction nu(p) = p must occur at p <= k.
inline bool is_admissible(const AdmissibleTuple& tuple) {
  for (i64 p = 2; p <= tuple.k(); ++p)
    if (is_prime_i64(p) && tuple.nu(p) >= p) return false;
  return true;
}

// n in Omega(d)  <=>  (n+h_1)...(n+h_k) = 0 (mod d), for squarefree d.
inline bool omega_membership(i64 n, i64 d, const AdmissibleTuple& tuple) {
  if (d < 1) throw ConfigError("omega_membership: d must be >= 1");
  if (d == 1) return true;
  if (!is_squarefree_i64(d)) throw ConfigError("omega_membership: d must be squarefree");
  i128 prod = 1;
  for (i64 h : tuple.elements()) {
    i64 r = (n + h) % d;
    if (r < 0) r += d;
    prod = (prod * r) % d;
    if (prod == 0) return true;
  }
  return prod == 0;
}

// Euler products are accumulated as compensated sums of logarithms and
// exponentiated once, so 1e6+ factors do not drift.
inline EulerProductValue singular_series(const AdmissibleTuple& tuple, i64 cutoff) {
  EulerProductValue out;
  const int k = tuple.k();
  if (!is_admissible(tuple)) {
    out.value = 0.0;
    out.tail_bound = 0.0;
    out.cutoff = cutoff;
    return out;
  }
  if (cutoff < 2 * tuple.bound_H())
    throw ConfigError("singular_series: cutoff must be >= 2*bound_H");
  Kahan logsum;
  i64 largest = 0;
  segmented_primes(1, cutoff, [&](i64 p) {
    double x = static_cast<double>(tuple.nu(p)) / static_cast<double>(p);
    logsum.add(std::log1p(-x) - k * std::log1p(-1.0 / static_cast<double>(p)));
    largest = p;
  });
  out.value = std::exp(logsum.value());
  out.cutoff = largest;
  // For p > cutoff >= 2H the factor is (1-k/p)(1-1/p)^{-k} = 1 + O(k^2/p^2);
  // sum_{n > cutoff} 1/n^2 < 1/cutoff gives the reported bound.
  out.tail_bound = static_cast<double>(k) * k / static_cast<double>(cutoff);
  return out;
}

inline EulerProductValue w_product(const AdmissibleTuple& tuple, double R0) {
  EulerProductValue out;
  Kahan logsum;
  i64 largest = 0;
  if (R0 >= 2) {
    segmented_primes(1, static_cast<i64>(R0), [&](i64 p) {
      logsum.add(std::log1p(-static_cast<double>(tuple.nu(p)) / static_cast<double>(p)));
      largest = p;
    });
  }
  out.value = std::exp(logsum.value());
  out.cutoff = largest;
  out.tail_bound = 0.0;  // exact finite product
  return out;
}

inline EulerProductValue v_product(double R0) {
  EulerProductValue out;
  Kahan logsum;
  i64 largest = 0;
  if (R0 >= 2) {
    segmented_primes(1, static_cast<i64>(R0), [&](i64 p) {
      logsum.add(std::log1p(-1.0 / static_cast<double>(p)));
      largest = p;
    });
  }
  out.value = std::exp(logsum.value());
  out.cutoff = largest;
  out.tail_bound = 0.0;
  return out;
}

}  // namespace gpylab

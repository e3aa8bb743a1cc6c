#pragma once

// The interval semigroup behind the smoothed sieve.
//
// The half-line (R0, oo) is partitioned into intervals P_j =
// (R0*R1^{j-1}, R0*R1^j]; |P_j| denotes the right endpoint.  Y(z) is the
// commutative semigroup generated by the intervals with |P| <= z.  A
// squarefree element D = P_{j_1}...P_{j_r} is stored as its strictly
// increasing index list; d in D means d = p_1...p_r with p_i in P_{j_i}.
// The modulus 1 belongs to the empty product only.
//
// On top of the scheme sit the multiplicative functionals
//   Delta(D) = prod_{P|D} sum_{p in P} nu(p)/p
//   Phi(D)   = Delta(D)^{-2} prod_{P|D} sum_{p in P} (nu(p)/p)(1 - nu(p)/p)
//   Psi(P)   = 1/(1 + Phi(P))
// and their starred variants with nu(p)-1 over p-1, which drive the
// prime-twisted main terms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gpylab/numeric.hpp"
#include "gpylab/primes.hpp"
#include "gpylab/tuples.hpp"

namespace gpylab {

struct SemiElement {
  std::vector<int> indices;  // strictly increasing, 1-based interval indices

  bool empty() const { return indices.empty(); }
  int order() const { return static_cast<int>(indices.size()); }
  int mobius() const { return (order() % 2 == 0) ? 1 : -1; }
  bool contains(int j) const {
    return std::binary_search(indices.begin(), indices.end(), j);
  }
  bool disjoint(const SemiElement& other) const {
    size_t i = 0, j = 0;
    while (i < indices.size() && j < other.indices.size()) {
      if (indices[i] == other.indices[j]) return false;
      (indices[i] < other.indices[j]) ? ++i : ++j;
    }
    return true;
  }
  // Union of disjoint index sets (the semigroup product for squarefree results).
  SemiElement merged(const SemiElement& other) const {
    SemiElement out;
    std::merge(indices.begin(), indices.end(), other.indices.begin(),
               other.indices.end(), std::back_inserter(out.indices));
    return out;
  }
  bool divides(const SemiElement& other) const {
    return std::includes(other.indices.begin(), other.indices.end(),
                         indices.begin(), indices.end());
  }
  u64 mask() const {
    u64 m = 0;
    for (int j : indices) {
      if (j < 1 || j > 63) throw ResourceError("SemiElement: index out of mask range");
      m |= u64(1) << (j - 1);
    }
    return m;
  }
  static SemiElement from_mask(u64 m) {
    SemiElement e;
    for (int j = 1; m; ++j, m >>= 1)
      if (m & 1) e.indices.push_back(j);
    return e;
  }
  bool operator==(const SemiElement& o) const { return indices == o.indices; }
  bool operator<(const SemiElement& o) const { return indices < o.indices; }
  std::string str() const {
    if (indices.empty()) return "[]";
    std::string s = "[";
    for (size_t i = 0; i < indices.size(); ++i)
      s += (i ? "," : "") + std::to_string(indices[i]);
    return s + "]";
  }
};

class IntervalScheme {
public:
  IntervalScheme(double R0, double R1, double z) : R0_(R0), R1_(R1), z_(z) {
    if (!(R0 > 1.0) || !(R1 > 1.0)) throw ConfigError("scheme: need R0 > 1 and R1 > 1");
    if (!(R0 * R1 <= z)) throw ConfigError("scheme: need R0*R1 <= z");
    endpoints_.push_back(static_cast<long double>(R0));
  }

  double R0() const { return R0_; }
  double R1() const { return R1_; }
  double z() const { return z_; }

  // Right endpoint |P_j| = R0*R1^j; j = 0 gives R0.  Cached once per index
  // in extended precision so membership tests are stable.
  long double endpoint(int j) const {
    while (static_cast<int>(endpoints_.size()) <= j)
      endpoints_.push_back(endpoints_.back() * static_cast<long double>(R1_));
    return endpoints_[static_cast<size_t>(j)];
  }

  double log_endpoint(int j) const {
    return std::log(R0_) + j * std::log(R1_);
  }

  // Unique j with R0*R1^{j-1} < p <= R0*R1^j, or 0 when p <= R0.
  int interval_of(i64 p) const {
    long double lp = static_cast<long double>(p);
    if (lp <= endpoint(0)) return 0;
    int j = 1;
    double guess = (std::log(static_cast<double>(p)) - std::log(R0_)) / std::log(R1_);
    if (guess > 1.0) j = static_cast<int>(guess);
    while (endpoint(j) < lp) ++j;
    while (j > 1 && endpoint(j - 1) >= lp) --j;
    return j;
  }

  // Number of generators of Y(cap): largest j with |P_j| <= cap.
  int generator_count(double cap) const {
    int j = 0;
    while (endpoint(j + 1) <= static_cast<long double>(cap)) ++j;
    return j;
  }

  long double size_of(const SemiElement& D) const {
    long double s = 1.0L;
    for (int j : D.indices) s *= endpoint(j);
    return s;
  }

  double log_size_of(const SemiElement& D) const {
    Kahan s;
    for (int j : D.indices) s.add(log_endpoint(j));
    return s.value();
  }

private:
  double R0_, R1_, z_;
  mutable std::vector<long double> endpoints_;
};

// The asymptotic default parameters in log form, so they are meaningful
// even when exp(log R0) overflows a double.
struct DefaultSchemeParams {
  double log_R0 = 0.0;
  double log_R1 = 0.0;
};

inline DefaultSchemeParams default_scheme_params(double log_R) {
  if (!(log_R > 0) || !(std::log(log_R) >= 1.0))
    throw ConfigError(
        "default_scheme: R too small for the asymptotic profile "
        "(needs log log R >= 1); pass explicit R0/R1 overrides");
  double ll = std::log(log_R);
  DefaultSchemeParams p;
  p.log_R0 = log_R / std::pow(ll, 0.2);
  p.log_R1 = log_R / std::pow(ll, 0.9);
  return p;
}

inline IntervalScheme default_scheme(double R, double z) {
  auto p = default_scheme_params(std::log(R));
  if (p.log_R0 > 300.0)
    throw ConfigError("default_scheme: R0 overflows double; pass explicit overrides");
  if (p.log_R0 + p.log_R1 > std::log(z))
    throw ConfigError(
        "default_scheme: the asymptotic profile gives R0*R1 > z at this R; "
        "pass explicit R0/R1 overrides");
  return IntervalScheme(std::exp(p.log_R0), std::exp(p.log_R1), z);
}

inline int interval_of(i64 p, const IntervalScheme& scheme) { return scheme.interval_of(p); }

// Primes of each generator interval together with the cached moments the
// functionals need.  Built once per (scheme, tuple, cap) and then read-only.
class PrimeBuckets {
public:
  struct Bucket {
    std::vector<i64> primes;
    double sum_inv = 0.0;       // sum 1/p
    double delta = 0.0;         // sum nu(p)/p
    double phi_num = 0.0;       // sum (nu(p)/p)(1 - nu(p)/p)
    double delta_star = 0.0;    // sum (nu(p)-1)/(p-1)
    double phi_star_num = 0.0;  // sum ((nu(p)-1)/(p-1))(1 - (nu(p)-1)/(p-1))
    int min_nu = 0;
    double phi() const { return phi_num / (delta * delta); }
    double phi_star() const { return phi_star_num / (delta_star * delta_star); }
  };

  PrimeBuckets(const IntervalScheme& scheme, const AdmissibleTuple& tuple, double cap)
      : scheme_(&scheme), tuple_(&tuple) {
    count_ = scheme.generator_count(cap);
    buckets_.resize(static_cast<size_t>(count_) + 1);
    i64 top = static_cast<i64>(scheme.endpoint(count_));
    segmented_primes(1, top, [&](i64 p) {
      int j = scheme.interval_of(p);
      if (j < 1 || j > count_) return;
      Bucket& b = buckets_[static_cast<size_t>(j)];
      double nu = static_cast<double>(tuple.nu(p));
      double x = nu / static_cast<double>(p);
      double xs = (nu - 1.0) / static_cast<double>(p - 1);
      b.primes.push_back(p);
      b.sum_inv += 1.0 / static_cast<double>(p);
      b.delta += x;
      b.phi_num += x * (1.0 - x);
      b.delta_star += xs;
      b.phi_star_num += xs * (1.0 - xs);
      b.min_nu = b.min_nu == 0 ? tuple.nu(p) : std::min(b.min_nu, tuple.nu(p));
    });
  }

  const IntervalScheme& scheme() const { return *scheme_; }
  const AdmissibleTuple& tuple() const { return *tuple_; }
  int count() const { return count_; }

  const Bucket& at(int j) const {
    if (j < 1 || j > count_)
      throw ConfigError("buckets: interval index " + std::to_string(j) + " not covered");
    return buckets_[static_cast<size_t>(j)];
  }

  const Bucket& nonempty_at(int j) const {
    const Bucket& b = at(j);
    if (b.primes.empty())
      throw ConfigError("buckets: interval " + std::to_string(j) +
                        " holds no primes (scheme/bucket mismatch)");
    return b;
  }

  const Bucket& starred_at(int j) const {
    const Bucket& b = nonempty_at(j);
    if (b.min_nu <= 1)
      throw ConfigError("buckets: interval " + std::to_string(j) +
                        " has a prime with nu*(p) = 0; raise R0 above 2*bound_H");
    return b;
  }

private:
  const IntervalScheme* scheme_;
  const AdmissibleTuple* tuple_;
  int count_ = 0;
  std::vector<Bucket> buckets_;
};

// Every squarefree D in Y(cap) with |D| <= size_bound, exactly once,
// lexicographic depth-first over indices; includes the empty element.
inline std::vector<SemiElement> enumerate_elements(const IntervalScheme& scheme,
                                                   double cap, double size_bound,
                                                   i64 count_cap = 200000) {
  int J = scheme.generator_count(cap);
  std::vector<SemiElement> out;
  SemiElement cur;
  std::function<void(int, long double)> dfs = [&](int from, long double size) {
    out.push_back(cur);
    if (static_cast<i64>(out.size()) > count_cap)
      throw ResourceError("enumerate_elements: element count exceeds cap");
    for (int j = from; j <= J; ++j) {
      long double ns = size * scheme.endpoint(j);
      if (ns > static_cast<long double>(size_bound)) continue;
      cur.indices.push_back(j);
      dfs(j + 1, ns);
      cur.indices.pop_back();
    }
  };
  dfs(1, 1.0L);
  return out;
}

// Streams the members d = p_1...p_r of D with their prime vectors.
// 1 belongs to the empty product only.
template <class Fn>
inline void for_each_member(const SemiElement& D, const PrimeBuckets& buckets, Fn&& fn) {
  std::vector<i64> primes(D.indices.size());
  std::function<void(size_t, i64)> dfs = [&](size_t i, i64 prod) {
    if (i == D.indices.size()) {
      fn(prod, primes);
      return;
    }
    for (i64 p : buckets.nonempty_at(D.indices[i]).primes) {
      primes[i] = p;
      dfs(i + 1, prod * p);
    }
  };
  dfs(0, 1);
}

inline std::vector<i64> members(const SemiElement& D, const PrimeBuckets& buckets) {
  std::vector<i64> out;
  for_each_member(D, buckets, [&](i64 d, const std::vector<i64>&) { out.push_back(d); });
  return out;
}

inline double delta(const SemiElement& D, const PrimeBuckets& buckets) {
  double r = 1.0;
  for (int j : D.indices) r *= buckets.at(j).delta;
  return r;
}

inline double phi(const SemiElement& D, const PrimeBuckets& buckets) {
  double r = 1.0;
  for (int j : D.indices) r *= buckets.nonempty_at(j).phi();
  return r;
}

inline double psi(int generator_index, const PrimeBuckets& buckets) {
  return 1.0 / (1.0 + buckets.nonempty_at(generator_index).phi());
}

inline double delta_star(const SemiElement& D, const PrimeBuckets& buckets) {
  double r = 1.0;
  for (int j : D.indices) r *= buckets.starred_at(j).delta_star;
  return r;
}

inline double phi_star(const SemiElement& D, const PrimeBuckets& buckets) {
  double r = 1.0;
  for (int j : D.indices) r *= buckets.starred_at(j).phi_star();
  return r;
}

}  // namespace gpylab

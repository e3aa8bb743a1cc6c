#pragma once

// Selberg diagonalization over the interval semigroup.
//
// For a weight table xi supported on squarefree D in Y(z) with |D| <= R,
// the quadratic form
//
//   J = sum_{D1,D2} xi(D1) xi(D2) sum_{d1 in D1, d2 in D2} nu([d1,d2])/[d1,d2]
//
// diagonalizes as J = sum_K Phi(K) Xi(K)^2 with Xi(K) = sum_{K|D} Delta(D) xi(D).
// The transform inverts by lattice Mobius inversion, the minimizing choice at
// fixed xi(empty) is
//
//   xi(D) = xi(empty)/G(R,z) * mu(D)/(Delta(D)Phi(D))
//           * sum_{|K| <= R/|D|, (K,D)=1} mu(K)^2/Phi(K),
//
// and the minimum value is xi(empty)^2 / G(R,z), where G(y,z;Q) is the
// coprime-restricted sum of mu^2/Phi.  This header also carries the
// G-function recursions (T, T1, Buchstab-style residuals) and the
// asymptotic comparison G(z;Q) ~ W(R0)/(k! S(H)) (log z)^k.

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "gpylab/numeric.hpp"
#include "gpylab/report.hpp"
#include "gpylab/semigroup.hpp"
#include "gpylab/tuples.hpp"

namespace gpylab {

struct WeightTable {
  std::map<u64, double> entries;  // mask -> xi(D) or Xi(K)
  double level = 0.0;             // R: entries vanish beyond |D| > R
  int gen_count = 0;              // generators of the ambient Y(z)

  double at(u64 mask) const {
    auto it = entries.find(mask);
    return it != entries.end() ? it->second : 0.0;
  }
  double xi_empty() const { return at(0); }
  void set(u64 mask, double v) { entries[mask] = v; }
};

struct GValue {
  double y = 0.0;
  double z = 0.0;
  SemiElement Q;
  double value = 0.0;
};

namespace detail {

// DFS over squarefree elements of Y(cap) with |K| <= size_bound and index
// set disjoint from exclude_mask; fn(mask, size) sees each exactly once,
// the empty element first.
template <class Fn>
inline void for_each_element(const IntervalScheme& scheme, double cap,
                             double size_bound, u64 exclude_mask, Fn&& fn) {
  if (size_bound < 1.0) return;  // even the empty element has size 1
  int J = scheme.generator_count(cap);
  if (J > 63) throw ResourceError("semigroup: more than 63 generators");
  std::function<void(int, u64, long double)> dfs = [&](int from, u64 mask, long double size) {
    fn(mask, size);
    for (int j = from; j <= J; ++j) {
      if (exclude_mask >> (j - 1) & 1) continue;
      long double ns = size * scheme.endpoint(j);
      if (ns > static_cast<long double>(size_bound)) continue;
      dfs(j + 1, mask | (u64(1) << (j - 1)), ns);
    }
  };
  dfs(1, 0, 1.0L);
}

inline double inv_phi_of_mask(u64 mask, const PrimeBuckets& buckets) {
  double r = 1.0;
  for (int j = 1; mask; ++j, mask >>= 1)
    if (mask & 1) r /= buckets.nonempty_at(j).phi();
  return r;
}

inline double phi_of_mask(u64 mask, const PrimeBuckets& buckets) {
  double r = 1.0;
  for (int j = 1; mask; ++j, mask >>= 1)
    if (mask & 1) r *= buckets.nonempty_at(j).phi();
  return r;
}

inline double delta_of_mask(u64 mask, const PrimeBuckets& buckets) {
  double r = 1.0;
  for (int j = 1; mask; ++j, mask >>= 1)
    if (mask & 1) r *= buckets.at(j).delta;
  return r;
}

inline int dense_bits(const WeightTable& t) {
  if (t.gen_count > 22) throw ResourceError("weight table: dense lattice beyond 2^22");
  return t.gen_count;
}

}  // namespace detail

// sum over squarefree pairs (d1, d2) with d_i in D_i of nu(lcm)/lcm,
// evaluated prime-by-prime.  This is the oracle-grade evaluator; cost is
// the product of member counts.
inline double pair_member_sum(const SemiElement& D1, const SemiElement& D2,
                              const PrimeBuckets& buckets) {
  const AdmissibleTuple& tuple = buckets.tuple();
  Kahan acc;
  for_each_member(D1, buckets, [&](i64, const std::vector<i64>& ps1) {
    for_each_member(D2, buckets, [&](i64, const std::vector<i64>& ps2) {
      double term = 1.0;
      size_t i = 0, j = 0;
      while (i < ps1.size() || j < ps2.size()) {
        i64 p;
        if (j >= ps2.size() || (i < ps1.size() && ps1[i] < ps2[j])) {
          p = ps1[i++];
        } else if (i >= ps1.size() || ps2[j] < ps1[i]) {
          p = ps2[j++];
        } else {
          p = ps1[i++];
          ++j;
        }
        term *= static_cast<double>(tuple.nu(p)) / static_cast<double>(p);
      }
      acc.add(term);
    });
  });
  return acc.value();
}

// J by brute-force pair enumeration.
inline double quad_form_direct(const WeightTable& xi, const PrimeBuckets& buckets,
                               i64 work_cap = i64(100000000)) {
  std::vector<std::pair<u64, double>> support;
  double total_members = 0.0;
  for (const auto& [mask, v] : xi.entries) {
    if (v == 0.0) continue;
    double m = 1.0;
    for (u64 b = mask; b;) {
      int j = std::countr_zero(b) + 1;
      b &= b - 1;
      m *= static_cast<double>(buckets.nonempty_at(j).primes.size());
    }
    total_members += m;
    support.emplace_back(mask, v);
  }
  if (total_members * total_members > static_cast<double>(work_cap))
    throw ResourceError("quad_form_direct: member pair count exceeds work cap");
  Kahan acc;
  for (const auto& [m1, v1] : support)
    for (const auto& [m2, v2] : support)
      acc.add(v1 * v2 *
              pair_member_sum(SemiElement::from_mask(m1), SemiElement::from_mask(m2), buckets));
  return acc.value();
}

// Xi(K) = sum_{K|D} Delta(D) xi(D): dense superset-sum on the index lattice.
inline WeightTable xi_cap(const WeightTable& xi, const PrimeBuckets& buckets) {
  int J = detail::dense_bits(xi);
  size_t n = size_t(1) << J;
  std::vector<double> f(n, 0.0);
  for (const auto& [mask, v] : xi.entries)
    f[mask] += detail::delta_of_mask(mask, buckets) * v;
  for (int b = 0; b < J; ++b)
    for (size_t m = 0; m < n; ++m)
      if (!(m >> b & 1)) f[m] += f[m | (size_t(1) << b)];
  WeightTable out;
  out.level = xi.level;
  out.gen_count = xi.gen_count;
  for (size_t m = 0; m < n; ++m) out.set(m, f[m]);
  return out;
}

// xi(D) = Delta(D)^{-1} sum_K mu(K) Xi(KD): the inverse lattice transform.
inline WeightTable xi_from_cap(const WeightTable& Xi, const PrimeBuckets& buckets) {
  int J = detail::dense_bits(Xi);
  size_t n = size_t(1) << J;
  std::vector<double> f(n, 0.0);
  for (const auto& [mask, v] : Xi.entries) f[mask] += v;
  for (int b = 0; b < J; ++b)
    for (size_t m = 0; m < n; ++m)
      if (!(m >> b & 1)) f[m] -= f[m | (size_t(1) << b)];
  WeightTable out;
  out.level = Xi.level;
  out.gen_count = Xi.gen_count;
  for (size_t m = 0; m < n; ++m)
    out.set(m, f[m] / detail::delta_of_mask(m, buckets));
  return out;
}

// J = sum_K Phi(K) Xi(K)^2 over squarefree K with |K| <= R.
inline double quad_form_diagonal(const WeightTable& xi, const IntervalScheme& scheme,
                                 const PrimeBuckets& buckets) {
  WeightTable Xi = xi_cap(xi, buckets);
  Kahan acc;
  for (const auto& [mask, v] : Xi.entries) {
    if (v == 0.0) continue;
    if (scheme.size_of(SemiElement::from_mask(mask)) > static_cast<long double>(xi.level))
      continue;
    acc.add(detail::phi_of_mask(mask, buckets) * v * v);
  }
  return acc.value();
}

// G(y, z; Q) = sum of mu(K)^2 / Phi(K) over K in Y(z), |K| <= y, (K,Q)=1.
inline GValue g_sum(double y, double z, const SemiElement& Q,
                    const IntervalScheme& scheme, const PrimeBuckets& buckets) {
  GValue out;
  out.y = y;
  out.z = z;
  out.Q = Q;
  Kahan acc;
  detail::for_each_element(scheme, z, y, Q.mask(), [&](u64 mask, long double) {
    acc.add(detail::inv_phi_of_mask(mask, buckets));
  });
  out.value = acc.value();
  return out;
}

// Optimal table at fixed xi(empty).
inline WeightTable optimal_xi(double xi_empty, double R, double z,
                              const IntervalScheme& scheme, const PrimeBuckets& buckets) {
  if (xi_empty == 0.0) throw ConfigError("optimal_xi: xi(empty) must be nonzero");
  double G = g_sum(R, z, SemiElement{}, scheme, buckets).value;
  WeightTable out;
  out.level = R;
  out.gen_count = scheme.generator_count(z);
  detail::for_each_element(scheme, z, R, 0, [&](u64 mask, long double size) {
    SemiElement D = SemiElement::from_mask(mask);
    double inner = g_sum(R / static_cast<double>(size), z, D, scheme, buckets).value;
    double dD = detail::delta_of_mask(mask, buckets);
    double pD = detail::phi_of_mask(mask, buckets);
    double mu = (std::popcount(mask) % 2 == 0) ? 1.0 : -1.0;
    out.set(mask, xi_empty / G * mu / (dD * pD) * inner);
  });
  return out;
}

// T(y,z;Q) = int_1^y G(t,z;Q) dt/t, evaluated exactly from the step
// structure of G: the integral is a finite sum of G * dlog t between
// consecutive element sizes.
inline double t_integral(double y, double z, const SemiElement& Q,
                         const IntervalScheme& scheme, const PrimeBuckets& buckets) {
  if (y < 1.0) return 0.0;
  std::vector<std::pair<long double, double>> steps;  // (size, weight)
  detail::for_each_element(scheme, z, y, Q.mask(), [&](u64 mask, long double size) {
    steps.emplace_back(size, detail::inv_phi_of_mask(mask, buckets));
  });
  std::sort(steps.begin(), steps.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  Kahan T;
  double G = 0.0;
  double prev_log = 0.0;  // log 1
  for (const auto& [size, w] : steps) {
    double ls = std::log(static_cast<double>(size));
    if (ls > prev_log) {
      T.add(G * (ls - prev_log));
      prev_log = ls;
    }
    G += w;
  }
  T.add(G * (std::log(y) - prev_log));
  return T.value();
}

// T1(y,z;Q) = sum mu^2/Phi(K) log|K| over the same support.
inline double t1_sum(double y, double z, const SemiElement& Q,
                     const IntervalScheme& scheme, const PrimeBuckets& buckets) {
  Kahan acc;
  detail::for_each_element(scheme, z, y, Q.mask(), [&](u64 mask, long double) {
    if (mask == 0) return;  // log|K| = 0
    acc.add(detail::inv_phi_of_mask(mask, buckets) *
            scheme.log_size_of(SemiElement::from_mask(mask)));
  });
  return acc.value();
}

// Residual of G(y,z;Q) = G(y,z;PQ) + Phi(P)^{-1} G(y/|P|, z; PQ).
inline double g_recursion_check(double y, double z, const SemiElement& Q, int gen_index,
                                const IntervalScheme& scheme, const PrimeBuckets& buckets) {
  if (Q.contains(gen_index))
    throw ConfigError("g_recursion_check: generator divides Q");
  if (scheme.endpoint(gen_index) > static_cast<long double>(z))
    throw ConfigError("g_recursion_check: generator outside Y(z)");
  SemiElement PQ = Q.merged(SemiElement{{gen_index}});
  double lhs = g_sum(y, z, Q, scheme, buckets).value;
  double r1 = g_sum(y, z, PQ, scheme, buckets).value;
  double size = static_cast<double>(scheme.endpoint(gen_index));
  double r2 = g_sum(y / size, z, PQ, scheme, buckets).value /
              buckets.nonempty_at(gen_index).phi();
  return lhs - r1 - r2;
}

// Empirical G(z;Q) against W(R0)/(k! S(H)) (log z)^k.
inline RangeReport g_asymptotic_report(double z, const SemiElement& Q,
                                       const AdmissibleTuple& tuple,
                                       const IntervalScheme& scheme,
                                       const PrimeBuckets& buckets,
                                       i64 series_cutoff = 1000000) {
  RangeReport rep;
  rep.empirical = g_sum(z, z, Q, scheme, buckets).value;
  double S = singular_series(tuple, series_cutoff).value;
  double W = w_product(tuple, scheme.R0()).value;
  if (S <= 0.0) {
    rep.flagged = true;
    rep.notes.push_back("non-admissible tuple: singular series vanishes");
    rep.finish();
    return rep;
  }
  rep.main_term = W / (factorial_d(tuple.k()) * S) * pow_int(std::log(z), tuple.k());
  rep.diagnostics["error_scale_logR0_over_logz"] = std::log(scheme.R0()) / std::log(z);
  rep.diagnostics["log_size_Q"] = scheme.log_size_of(Q);
  rep.finish();
  return rep;
}

// The T1 rewrite residual: U = T1 - k*S1 + k*S2 with both comparison sums
// taken over the same coprime support, reported against G log R0.
struct UResidual {
  double U = 0.0;
  double G = 0.0;
  double bound_scale = 0.0;  // G * log R0
  double ratio = 0.0;        // U / bound_scale
};

inline UResidual u_residual(double y, double z, const SemiElement& Q,
                            const AdmissibleTuple& tuple, const IntervalScheme& scheme,
                            const PrimeBuckets& buckets) {
  const int k = tuple.k();
  auto weighted_log = [&](double bound) {
    Kahan acc;
    if (bound >= 1.0) {
      detail::for_each_element(scheme, z, bound, Q.mask(), [&](u64 mask, long double size) {
        acc.add(detail::inv_phi_of_mask(mask, buckets) *
                (std::log(bound) - std::log(static_cast<double>(size))));
      });
    }
    return acc.value();
  };
  UResidual out;
  double T1 = t1_sum(y, z, Q, scheme, buckets);
  out.U = T1 - k * weighted_log(y) + k * weighted_log(y / z);
  out.G = g_sum(y, z, Q, scheme, buckets).value;
  out.bound_scale = out.G * std::log(scheme.R0());
  out.ratio = out.U / out.bound_scale;
  return out;
}

}  // namespace gpylab

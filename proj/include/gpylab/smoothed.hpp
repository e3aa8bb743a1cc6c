#pragma once

// The smoothed GPY weights and their prime-twisted main terms.
//
// Moduli above R0 are drawn from the interval semigroup Y(w), w = R^omega,
// through
//
//   lt(D; l) = S(H)/(l! W(R0)) * mu(D)/(Phi(D)Delta(D))
//              * sum_{|K| <= R/|D|, (K,D)=1} mu(K)^2/Phi(K) (log((R/|D|)/|K|))^l
//
// with LambdaT(n) = sum_D lt(D) #{d in D : n in Omega(d)}.  The interval
// [1, R0] is handled by a fundamental-lemma preweight: Brun's even
// truncation rho(d) = mu(d) on squarefree R0-smooth d < R0^tau with at
// most 2m prime factors (m = max(1, floor(tau/2))), which makes
// gamma(n) = sum_{n in Omega(d)} rho(d) >= 0 a Bonferroni consequence
// whenever the depth cut is the binding one.
//
// The prime-twisted forms replace nu(p)/p by (nu(p)-1)/(p-1):
//   T* = sum_{|D| <= R} Phi*(D) (sum_{D|K} Delta*(K) lt(K))^2,
//   T** = the restriction to R/w <= |D| <= R,
// with a closed expansion of T** via the factor prod_{P|K}(1 - Delta*/Delta).

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gpylab/diagonal.hpp"
#include "gpylab/numeric.hpp"
#include "gpylab/primes.hpp"
#include "gpylab/report.hpp"
#include "gpylab/semigroup.hpp"
#include "gpylab/sieve_classic.hpp"
#include "gpylab/tuples.hpp"

namespace gpylab {

struct SmoothParams {
  double omega = 0.0;       // w = R^omega when no explicit override
  double w_override = 0.0;  // explicit smoothness cap
  double tau = 2.0;

  double w(double R) const {
    if (w_override > 0.0) return w_override;
    if (omega <= 0.0) throw ConfigError("smooth: set omega or an explicit w");
    return std::pow(R, omega);
  }

  double effective_omega(double R) const { return std::log(w(R)) / std::log(R); }

  // The window 3 log k <= k*omega <= k/2 is unsatisfiable for small k;
  // desk mode reports, strict mode refuses.
  std::vector<std::string> validate(int k, double R, Mode mode) const {
    std::vector<std::string> warnings;
    double om = effective_omega(R);
    double lo = 3.0 * std::log(static_cast<double>(k)), hi = 0.5 * k;
    if (k * om < lo || k * om > hi) {
      std::string msg = "smooth: k*omega = " + std::to_string(k * om) +
                        " outside [3 log k, k/2] = [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "]";
      if (mode == Mode::strict) throw ConfigError(msg);
      warnings.push_back(msg);
    }
    if (tau <= 0.0) throw ConfigError("smooth: tau must be positive");
    return warnings;
  }
};

// Brun even-truncation preweight.
struct RhoWeights {
  struct Entry {
    i64 d = 1;
    int rho = 1;  // mu(d), in {-1, +1} on the support
    std::vector<i64> factors;
  };
  std::vector<Entry> support;  // sorted by d; contains d = 1
  int truncation_depth = 2;    // 2m
  double R0 = 0.0;
  double tau = 0.0;
  double size_cut = 0.0;  // R0^tau
  bool size_cut_binding = false;  // positivity is a theorem only when false

  int rho_of(i64 d) const {
    auto it = std::lower_bound(support.begin(), support.end(), d,
                               [](const Entry& e, i64 v) { return e.d < v; });
    return (it != support.end() && it->d == d) ? it->rho : 0;
  }
};

inline RhoWeights build_rho(double R0, double tau) {
  if (R0 < 3.0) throw ConfigError("build_rho: R0 must be >= 3");
  if (tau <= 0.0) throw ConfigError("build_rho: tau must be positive");
  RhoWeights out;
  out.R0 = R0;
  out.tau = tau;
  out.size_cut = std::pow(R0, tau);
  int m = std::max(1, static_cast<int>(std::floor(tau / 2.0)));
  out.truncation_depth = 2 * m;
  // depth 2m with factors < R0 keeps d < R0^{2m}; the size cut can bind
  // only when 2m > tau
  out.size_cut_binding = 2.0 * m > tau;
  std::vector<i64> ps;
  for (i64 p : primes_up_to(std::max<i64>(2, static_cast<i64>(std::ceil(R0)) - 1)))
    if (static_cast<double>(p) < R0) ps.push_back(p);
  std::vector<i64> cur;
  std::function<void(size_t, double, i64)> dfs = [&](size_t from, double prod, i64 d) {
    RhoWeights::Entry e;
    e.d = d;
    e.rho = (cur.size() % 2 == 0) ? 1 : -1;
    e.factors = cur;
    out.support.push_back(std::move(e));
    if (static_cast<int>(cur.size()) >= out.truncation_depth) return;
    for (size_t i = from; i < ps.size(); ++i) {
      double np = prod * static_cast<double>(ps[i]);
      if (np >= out.size_cut) continue;
      cur.push_back(ps[i]);
      dfs(i + 1, np, d * ps[i]);
      cur.pop_back();
    }
  };
  dfs(0, 1.0, 1);
  std::sort(out.support.begin(), out.support.end(),
            [](const auto& a, const auto& b) { return a.d < b.d; });
  return out;
}

inline double gamma_weight(i64 n, const AdmissibleTuple& tuple, const RhoWeights& rho) {
  double g = 0.0;
  for (const auto& e : rho.support) {
    bool in = true;
    for (i64 p : e.factors) {
      bool hit = false;
      for (i64 h : tuple.elements()) {
        i64 r = (n + h) % p;
        if (r < 0) r += p;
        if (r == 0) {
          hit = true;
          break;
        }
      }
      if (!hit) {
        in = false;
        break;
      }
    }
    if (in) g += e.rho;
  }
  return g;
}

// gamma over (N, 2N] by residue-class marking; index i holds gamma(N+1+i).
inline std::vector<double> gamma_range(i64 N, const AdmissibleTuple& tuple,
                                       const RhoWeights& rho,
                                       i64 memory_cap = i64(1) << 30) {
  if (8 * N > memory_cap) throw ResourceError("gamma_range: range exceeds memory budget");
  std::vector<double> g(static_cast<size_t>(N), 0.0);
  for (const auto& e : rho.support) {
    if (e.d == 1) {
      for (auto& x : g) x += e.rho;
      continue;
    }
    for (i64 r : omega_residues(e.d, e.factors, tuple)) {
      i64 first = N + 1 + ((r - (N + 1)) % e.d + e.d) % e.d;
      for (i64 n = first; n <= 2 * N; n += e.d) g[static_cast<size_t>(n - N - 1)] += e.rho;
    }
  }
  return g;
}

// sum_d rho(d) nu(d)/d against W(R0); the fundamental-lemma mean.
struct FlMeanReport {
  double sum = 0.0;
  double target = 0.0;  // W(R0)
  double relative_gap = 0.0;
};

inline FlMeanReport fl_mean_report(const RhoWeights& rho, const AdmissibleTuple& tuple) {
  FlMeanReport rep;
  Kahan acc;
  for (const auto& e : rho.support) {
    double term = e.rho;
    for (i64 p : e.factors)
      term *= static_cast<double>(tuple.nu(p)) / static_cast<double>(p);
    acc.add(term);
  }
  rep.sum = acc.value();
  rep.target = w_product(tuple, rho.R0).value;
  rep.relative_gap = std::abs(rep.sum - rep.target) / rep.target;
  return rep;
}

// sum_d rho(d) |Omega*(d)|/phi(d) against W(R0)/V(R0).
inline FlMeanReport fl_mean_star_report(const RhoWeights& rho, const AdmissibleTuple& tuple) {
  FlMeanReport rep;
  Kahan acc;
  for (const auto& e : rho.support) {
    double term = e.rho;
    for (i64 p : e.factors)
      term *= static_cast<double>(tuple.nu(p) - 1) / static_cast<double>(p - 1);
    acc.add(term);
  }
  rep.sum = acc.value();
  rep.target = w_product(tuple, rho.R0).value / v_product(rho.R0).value;
  rep.relative_gap = std::abs(rep.sum - rep.target) / rep.target;
  return rep;
}

namespace detail {

inline double delta_star_of_mask(u64 mask, const PrimeBuckets& buckets) {
  double r = 1.0;
  for (int j = 1; mask; ++j, mask >>= 1)
    if (mask & 1) r *= buckets.starred_at(j).delta_star;
  return r;
}

inline double phi_star_of_mask(u64 mask, const PrimeBuckets& buckets) {
  double r = 1.0;
  for (int j = 1; mask; ++j, mask >>= 1)
    if (mask & 1) r *= buckets.starred_at(j).phi_star();
  return r;
}

}  // namespace detail

// sum over K in Y(cap), |K| <= y, (K,Q)=1 of
//   mu^2/Phi(K) * prod_{P|K} gen_factor(P) * (log(y/|K|))^ell.
inline double weighted_k_sum(double y, double cap, u64 qmask, int ell,
                             const IntervalScheme& scheme, const PrimeBuckets& buckets,
                             const std::vector<double>* gen_factor = nullptr) {
  if (y < 1.0) return 0.0;
  Kahan acc;
  detail::for_each_element(scheme, cap, y, qmask, [&](u64 mask, long double size) {
    double t = detail::inv_phi_of_mask(mask, buckets);
    if (gen_factor) {
      for (u64 b = mask; b;) {
        int j = std::countr_zero(b) + 1;
        b &= b - 1;
        t *= (*gen_factor)[static_cast<size_t>(j)];
      }
    }
    acc.add(t * pow_int(std::log(y) - std::log(static_cast<double>(size)), ell));
  });
  return acc.value();
}

// The smoothed weight table with its normalization context.
struct SmoothedWeights {
  WeightTable table;   // mask -> lt(D; ell)
  double R = 0.0;
  double w = 0.0;      // smoothness cap of the ambient Y(w)
  double norm = 0.0;   // S(H) / (ell! W(R0))
  int ell = 1;
};

inline double lambda_tilde(const SemiElement& D, double R, double w, double norm, int ell,
                           const IntervalScheme& scheme, const PrimeBuckets& buckets) {
  long double size = scheme.size_of(D);
  if (size > static_cast<long double>(R)) return 0.0;
  double y = R / static_cast<double>(size);
  double ksum = weighted_k_sum(y, w, D.mask(), ell, scheme, buckets);
  return norm * D.mobius() / (phi(D, buckets) * delta(D, buckets)) * ksum;
}

inline SmoothedWeights build_lambda_tilde(const AdmissibleTuple& tuple,
                                          const SieveParams& params,
                                          const SmoothParams& smooth,
                                          const IntervalScheme& scheme,
                                          const PrimeBuckets& buckets) {
  SmoothedWeights out;
  out.R = params.level();
  out.w = smooth.w(out.R);
  out.ell = params.l;
  double S = singular_series(tuple, params.series_cutoff).value;
  double W = w_product(tuple, scheme.R0()).value;
  out.norm = S / (factorial_d(params.l) * W);
  out.table.level = out.R;
  out.table.gen_count = scheme.generator_count(out.w);
  detail::for_each_element(scheme, out.w, out.R, 0, [&](u64 mask, long double) {
    out.table.set(mask, lambda_tilde(SemiElement::from_mask(mask), out.R, out.w, out.norm,
                                     out.ell, scheme, buckets));
  });
  return out;
}

// LambdaT over (N, 2N] by marking the residue classes of every member of
// every supported D; index i holds LambdaT(N+1+i).  The membership tuple
// may differ from the one the table was built with (the prime-twisted
// identities compare full-tuple and reduced-tuple memberships under the
// same table).
inline std::vector<double> big_lambda_tilde_range(i64 N, const SmoothedWeights& weights,
                                                  const AdmissibleTuple& membership_tuple,
                                                  const PrimeBuckets& buckets,
                                                  i64 memory_cap = i64(1) << 30) {
  if (8 * N > memory_cap)
    throw ResourceError("big_lambda_tilde_range: range exceeds memory budget");
  std::vector<double> w(static_cast<size_t>(N), 0.0);
  for (const auto& [mask, lt] : weights.table.entries) {
    if (lt == 0.0) continue;
    if (mask == 0) {
      for (auto& x : w) x += lt;
      continue;
    }
    for_each_member(SemiElement::from_mask(mask), buckets,
                    [&](i64 d, const std::vector<i64>& ps) {
                      for (i64 r : omega_residues(d, ps, membership_tuple)) {
                        i64 first = N + 1 + ((r - (N + 1)) % d + d) % d;
                        for (i64 n = first; n <= 2 * N; n += d)
                          w[static_cast<size_t>(n - N - 1)] += lt;
                      }
                    });
  }
  return w;
}

// Pointwise LambdaT(n); brute-force companion of the range marker.
inline double big_lambda_tilde_at(i64 n, const SmoothedWeights& weights,
                                  const AdmissibleTuple& membership_tuple,
                                  const PrimeBuckets& buckets) {
  Kahan acc;
  for (const auto& [mask, lt] : weights.table.entries) {
    if (lt == 0.0) continue;
    if (mask == 0) {
      acc.add(lt);
      continue;
    }
    for_each_member(SemiElement::from_mask(mask), buckets,
                    [&](i64 d, const std::vector<i64>&) {
                      if (omega_membership(n, d, membership_tuple)) acc.add(lt);
                    });
  }
  return acc.value();
}

struct StarredForm {
  enum class Variant { t_tilde, t_star, t_double_star };
  Variant tag = Variant::t_tilde;
  double value = 0.0;
};

// T-tilde, transform route: sum_{|D| <= R} Phi(D) (sum_{D|K} Delta(K) lt(K))^2.
inline StarredForm t_tilde_transform(const SmoothedWeights& weights,
                                     const IntervalScheme& scheme,
                                     const PrimeBuckets& buckets) {
  StarredForm out;
  out.tag = StarredForm::Variant::t_tilde;
  out.value = quad_form_diagonal(weights.table, scheme, buckets);
  return out;
}

// T-tilde, closed route: norm^2 sum_{|K| <= R} mu^2/Phi(K) (log R/|K|)^{2 ell}.
inline StarredForm t_tilde_closed(const SmoothedWeights& weights,
                                  const IntervalScheme& scheme,
                                  const PrimeBuckets& buckets) {
  StarredForm out;
  out.tag = StarredForm::Variant::t_tilde;
  out.value = weights.norm * weights.norm *
              weighted_k_sum(weights.R, weights.w, 0, 2 * weights.ell, scheme, buckets);
  return out;
}

namespace detail {

// Xi*(D) = sum_{D|K} Delta*(K) lt(K) for every mask, dense superset-sum.
inline std::vector<double> starred_transform(const SmoothedWeights& weights,
                                             const PrimeBuckets& buckets) {
  if (buckets.tuple().k() < 2)
    throw ConfigError("starred forms need k >= 2 (Omega* is empty at k = 1)");
  int J = dense_bits(weights.table);
  size_t n = size_t(1) << J;
  std::vector<double> f(n, 0.0);
  for (const auto& [mask, v] : weights.table.entries)
    f[mask] += delta_star_of_mask(mask, buckets) * v;
  for (int b = 0; b < J; ++b)
    for (size_t m = 0; m < n; ++m)
      if (!(m >> b & 1)) f[m] += f[m | (size_t(1) << b)];
  return f;
}

}  // namespace detail

// T* = sum_{|D| <= R} Phi*(D) Xi*(D)^2; T** restricts to R/w <= |D| <= R.
inline StarredForm t_star(const SmoothedWeights& weights, const IntervalScheme& scheme,
                          const PrimeBuckets& buckets, bool double_star = false) {
  auto Xi = detail::starred_transform(weights, buckets);
  double lo = double_star ? weights.R / weights.w : 0.0;
  Kahan acc;
  for (size_t m = 0; m < Xi.size(); ++m) {
    if (Xi[m] == 0.0) continue;
    long double size = scheme.size_of(SemiElement::from_mask(m));
    if (size > static_cast<long double>(weights.R)) continue;
    if (double_star && size < static_cast<long double>(lo)) continue;
    acc.add(detail::phi_star_of_mask(m, buckets) * Xi[m] * Xi[m]);
  }
  StarredForm out;
  out.tag = double_star ? StarredForm::Variant::t_double_star : StarredForm::Variant::t_star;
  out.value = acc.value();
  return out;
}

inline StarredForm t_double_star(const SmoothedWeights& weights, const IntervalScheme& scheme,
                                 const PrimeBuckets& buckets) {
  return t_star(weights, scheme, buckets, true);
}

// Member-level route for T*: sum_{D1,D2} lt lt sum_{d1,d2} |Omega*(lcm)|/phi(lcm).
inline double t_star_pair_route(const SmoothedWeights& weights, const PrimeBuckets& buckets,
                                i64 work_cap = i64(100000000)) {
  if (buckets.tuple().k() < 2)
    throw ConfigError("starred forms need k >= 2 (Omega* is empty at k = 1)");
  const AdmissibleTuple& tuple = buckets.tuple();
  std::vector<std::pair<u64, double>> support;
  double total_members = 0.0;
  for (const auto& [mask, v] : weights.table.entries) {
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
    throw ResourceError("t_star_pair_route: member pair count exceeds work cap");
  Kahan acc;
  for (const auto& [m1, v1] : support)
    for (const auto& [m2, v2] : support) {
      Kahan inner;
      for_each_member(SemiElement::from_mask(m1), buckets,
                      [&](i64, const std::vector<i64>& ps1) {
        for_each_member(SemiElement::from_mask(m2), buckets,
                        [&](i64, const std::vector<i64>& ps2) {
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
            term *= static_cast<double>(tuple.nu(p) - 1) / static_cast<double>(p - 1);
          }
          inner.add(term);
        });
      });
      acc.add(v1 * v2 * inner.value());
    }
  return acc.value();
}

// Closed expansion of T**:
//   norm^2 sum_{R/w <= |D| <= R} (Delta*(D)/Delta(D))^2 Phi*(D)/Phi(D)^2
//     * ( sum_{|K| <= R/|D|, (K,D)=1} mu^2/Phi(K)
//           prod_{P|K}(1 - Delta*(P)/Delta(P)) (log((R/|D|)/|K|))^ell )^2.
// Inside the restricted range R/|D| <= w, so the Y(w) condition on K is
// automatic and the K-sum may run in Y(R/|D|) directly.
inline StarredForm t_double_star_expansion(const SmoothedWeights& weights,
                                           const IntervalScheme& scheme,
                                           const PrimeBuckets& buckets) {
  if (buckets.tuple().k() < 2)
    throw ConfigError("starred forms need k >= 2 (Omega* is empty at k = 1)");
  int J = scheme.generator_count(weights.w);
  std::vector<double> gen_factor(static_cast<size_t>(J) + 1, 1.0);
  for (int j = 1; j <= J; ++j)
    gen_factor[static_cast<size_t>(j)] =
        1.0 - buckets.starred_at(j).delta_star / buckets.at(j).delta;
  Kahan acc;
  detail::for_each_element(scheme, weights.w, weights.R, 0, [&](u64 mask, long double size) {
    if (size < static_cast<long double>(weights.R / weights.w)) return;
    double y = weights.R / static_cast<double>(size);
    double ks = weighted_k_sum(y, std::min(weights.w, y), mask, weights.ell, scheme, buckets,
                               &gen_factor);
    double dr = detail::delta_star_of_mask(mask, buckets) / detail::delta_of_mask(mask, buckets);
    double ph = detail::phi_of_mask(mask, buckets);
    acc.add(dr * dr * detail::phi_star_of_mask(mask, buckets) / (ph * ph) * ks * ks);
  });
  StarredForm out;
  out.tag = StarredForm::Variant::t_double_star;
  out.value = weights.norm * weights.norm * acc.value();
  return out;
}

// sum_{N < n <= 2N} gamma(n) LambdaT(n)^2 against
// S(H)/(k+2l)! C(2l,l) N (log R)^{k+2l}, with the T-tilde cross-check.
inline RangeReport lemma3_report(const AdmissibleTuple& tuple, const SieveParams& params,
                                 const SmoothParams& smooth, const IntervalScheme& scheme,
                                 const PrimeBuckets& buckets, const RhoWeights& rho) {
  RangeReport rep;
  rep.n_lo = params.N;
  rep.n_hi = 2 * params.N;
  auto weights = build_lambda_tilde(tuple, params, smooth, scheme, buckets);
  auto lam = big_lambda_tilde_range(params.N, weights, tuple, buckets, params.memory_cap);
  auto gam = gamma_range(params.N, tuple, rho, params.memory_cap);
  rep.empirical = parallel_sum(0, params.N, params.jobs, i64(1) << 20,
                               [&](i64 a, i64 b, Kahan& acc) {
                                 for (i64 i = a; i < b; ++i) {
                                   double v = lam[static_cast<size_t>(i)];
                                   acc.add(gam[static_cast<size_t>(i)] * v * v);
                                 }
                               });
  if (!is_admissible(tuple)) {
    rep.flagged = true;
    rep.notes.push_back("non-admissible tuple: main term vanishes");
    rep.finish();
    return rep;
  }
  double S = singular_series(tuple, params.series_cutoff).value;
  int k = params.k, l = params.l;
  rep.main_term = S / factorial_d(k + 2 * l) * binomial_d(2 * l, l) * params.N *
                  pow_int(std::log(params.level()), k + 2 * l);
  double tt1 = t_tilde_transform(weights, scheme, buckets).value;
  double tt2 = t_tilde_closed(weights, scheme, buckets).value;
  double W = w_product(tuple, scheme.R0()).value;
  rep.diagnostics["t_tilde_transform"] = tt1;
  rep.diagnostics["t_tilde_closed"] = tt2;
  rep.diagnostics["predicted_NW_t_tilde"] = params.N * W * tt2;
  rep.diagnostics["ratio_empirical_to_NW_t_tilde"] =
      rep.empirical / (params.N * W * tt2);
  rep.finish();
  return rep;
}

// sum_{N < n <= 2N} varpi(n+h) gamma(n) LambdaT(n)^2 against
// S(H)/(k+2l+1)! C(2l+2,l+1) N (log R)^{k+2l+1}, with the V/W-normalized
// T** route and the V(R0) log y leading-coefficient sweep.
inline RangeReport lemma4_main_report(const AdmissibleTuple& tuple, const SieveParams& params,
                                      const SmoothParams& smooth, const IntervalScheme& scheme,
                                      const PrimeBuckets& buckets, const RhoWeights& rho,
                                      i64 h) {
  const auto& els = tuple.elements();
  if (std::find(els.begin(), els.end(), h) == els.end())
    throw ConfigError("lemma4_main_report: h must be an element of the tuple");
  if (tuple.k() < 2) throw ConfigError("lemma4_main_report: needs k >= 2");
  RangeReport rep;
  rep.n_lo = params.N;
  rep.n_hi = 2 * params.N;
  auto weights = build_lambda_tilde(tuple, params, smooth, scheme, buckets);
  auto lam = big_lambda_tilde_range(params.N, weights, tuple, buckets, params.memory_cap);
  auto gam = gamma_range(params.N, tuple, rho, params.memory_cap);
  auto flags = detail::prime_flags_window(params.N + 1 + h, 2 * params.N + h);
  rep.empirical = parallel_sum(
      0, params.N, params.jobs, i64(1) << 20, [&](i64 a, i64 b, Kahan& acc) {
        for (i64 i = a; i < b; ++i) {
          if (!flags[static_cast<size_t>(i)]) continue;
          double v = lam[static_cast<size_t>(i)];
          acc.add(std::log(static_cast<double>(params.N + 1 + i + h)) *
                  gam[static_cast<size_t>(i)] * v * v);
        }
      });
  double S = singular_series(tuple, params.series_cutoff).value;
  if (S <= 0.0) {
    rep.flagged = true;
    rep.notes.push_back("non-admissible tuple: main term vanishes");
    rep.finish();
    return rep;
  }
  int k = params.k, l = params.l;
  rep.main_term = S / factorial_d(k + 2 * l + 1) * binomial_d(2 * l + 2, l + 1) * params.N *
                  pow_int(std::log(params.level()), k + 2 * l + 1);
  double W = w_product(tuple, scheme.R0()).value;
  double V = v_product(scheme.R0()).value;
  double ts = t_star(weights, scheme, buckets).value;
  double tss = t_double_star(weights, scheme, buckets).value;
  rep.diagnostics["t_star"] = ts;
  rep.diagnostics["t_double_star"] = tss;
  rep.diagnostics["predicted_N_WV_t_star"] = params.N * (W / V) * ts;
  rep.diagnostics["predicted_N_WV_t_double_star"] = params.N * (W / V) * tss;
  rep.diagnostics["ratio_empirical_to_t_star_route"] =
      rep.empirical / (params.N * (W / V) * ts);
  // leading coefficient of the twisted K-sum: should approach V(R0) log y
  int J = scheme.generator_count(weights.w);
  std::vector<double> gen_factor(static_cast<size_t>(J) + 1, 1.0);
  for (int j = 1; j <= J; ++j)
    gen_factor[static_cast<size_t>(j)] =
        1.0 - buckets.starred_at(j).delta_star / buckets.at(j).delta;
  for (double y : {weights.w, weights.R}) {
    double s = weighted_k_sum(y, std::min(y, weights.w), 0, 0, scheme, buckets, &gen_factor);
    rep.diagnostics["twisted_ksum_ratio_y=" + std::to_string(static_cast<i64>(y))] =
        s / (V * std::log(y));
  }
  rep.finish();
  return rep;
}

}  // namespace gpylab

#pragma once

// Bilinear structure of the smoothed remainder term.
//
// The remainder of the prime-twisted smoothed sum is
//
//   E = sum_{D1,D2} lt(D1) lt(D2) sum_d rho(d) sum_{d1 in D1, d2 in D2}
//         sum_{r in Omega*(d [d1,d2])} E*(N; r, d [d1,d2]),
//
// where Omega*(p) drops the class of the twisted offset h; operationally
// the residues are r = h - h_i (mod p), r != 0, which are automatically
// coprime to the modulus.  Every modulus q = d [d1,d2] factors as a * b:
// the intervals of D1 D2 / F (F = the gcd pattern of (d1, d2)) are sorted
// by size, u is the longest prefix whose endpoint product stays <= A, a is
// the product of the lcm primes in that prefix, and b = d * (the rest).
// Regrouping by (a, b) cells reproduces E exactly (same terms, reordered)
// in the shape sum_{a <= A, b <= B} alpha_a beta_b sum_r E*(N; r, ab) with
// alpha_a in {0,1} and beta_b = rho(smooth part of b); the budget is
// A * B = R0^{2 tau} R^{2 + omega}.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "gpylab/numeric.hpp"
#include "gpylab/primes.hpp"
#include "gpylab/semigroup.hpp"
#include "gpylab/sieve_classic.hpp"
#include "gpylab/smoothed.hpp"

namespace gpylab {

// Primes in (N, 2N] plus memoized class-restricted error sums.
class EStarWindow {
public:
  EStarWindow(i64 N, const AdmissibleTuple& tuple, i64 h) : N_(N), tuple_(&tuple), h_(h) {
    const auto& els = tuple.elements();
    if (std::find(els.begin(), els.end(), h) == els.end())
      throw ConfigError("EStarWindow: h must be an element of the tuple");
    segmented_primes(N, 2 * N, [&](i64 p) {
      primes_.push_back(p);
      logp_.push_back(std::log(static_cast<double>(p)));
    });
  }

  i64 N() const { return N_; }

  // Twisted residue classes mod p: {h - h_i (mod p)} minus the zero class.
  std::vector<i64> prime_classes(i64 p) const {
    auto it = class_cache_.find(p);
    if (it != class_cache_.end()) return it->second;
    std::vector<i64> cls;
    for (i64 hi : tuple_->elements()) {
      i64 r = (h_ - hi) % p;
      if (r < 0) r += p;
      if (r != 0) cls.push_back(r);
    }
    std::sort(cls.begin(), cls.end());
    cls.erase(std::unique(cls.begin(), cls.end()), cls.end());
    class_cache_[p] = cls;
    return cls;
  }

  // CRT product of the per-prime class sets for squarefree q.
  std::vector<i64> classes(i64 q, const std::vector<i64>& factors) const {
    i64 check = 1;
    for (i64 p : factors) check *= p;
    if (check != q) throw ConfigError("classes: factors do not multiply to q");
    std::vector<i64> res{0};
    i64 m = 1;
    for (i64 p : factors) {
      auto cls = prime_classes(p);
      if (cls.empty()) return {};
      std::vector<i64> next;
      next.reserve(res.size() * cls.size());
      for (i64 r : res)
        for (i64 s : cls) next.push_back(crt_pair(r, m, s, p));
      res = std::move(next);
      m *= p;
    }
    std::sort(res.begin(), res.end());
    return res;
  }

  // sum over r in Omega*(q) of E*(N; r, q); memoized per modulus.
  double class_e_sum(i64 q, const std::vector<i64>& factors) {
    auto it = memo_.find(q);
    if (it != memo_.end()) return it->second;
    auto cls = classes(q, factors);
    double out = 0.0;
    if (!cls.empty()) {
      Kahan theta;
      for (size_t i = 0; i < primes_.size(); ++i) {
        i64 r = primes_[i] % q;
        if (std::binary_search(cls.begin(), cls.end(), r)) theta.add(logp_[i]);
      }
      double phi_q = static_cast<double>(euler_phi_squarefree(q, factors));
      out = theta.value() -
            static_cast<double>(cls.size()) * static_cast<double>(N_) / phi_q;
    }
    memo_[q] = out;
    return out;
  }

private:
  i64 N_;
  const AdmissibleTuple* tuple_;
  i64 h_;
  std::vector<i64> primes_;
  std::vector<double> logp_;
  mutable std::map<i64, std::vector<i64>> class_cache_;
  std::map<i64, double> memo_;
};

struct ModulusSplit {
  i64 a = 1;
  i64 b = 1;
  int u = 0;                // number of prefix slots absorbed into a
  bool no_prefix = false;   // already |P_1| > A: the degenerate a = 1 split
  std::vector<int> slots;   // interval indices of D1 D2 / F, ascending
};

// Factor the modulus d * [d1, d2] as a * b along the sorted interval slots.
inline ModulusSplit split_modulus(const SemiElement& D1, const SemiElement& D2,
                                  const SemiElement& F, const std::vector<i64>& d1_primes,
                                  const std::vector<i64>& d2_primes, i64 d, double A,
                                  double B, const IntervalScheme& scheme) {
  if (A < 1.0) throw ConfigError("split_modulus: A must be >= 1");
  ModulusSplit out;
  // slots = indices of D1 D2 / F (multiset difference; repeats where both
  // tuples use an interval outside F)
  std::vector<int> multi;
  multi.reserve(D1.indices.size() + D2.indices.size());
  multi.insert(multi.end(), D1.indices.begin(), D1.indices.end());
  multi.insert(multi.end(), D2.indices.begin(), D2.indices.end());
  std::sort(multi.begin(), multi.end());
  for (int j : F.indices) {
    auto it = std::find(multi.begin(), multi.end(), j);
    if (it == multi.end()) throw ConfigError("split_modulus: F does not divide D1*D2");
    multi.erase(it);
  }
  out.slots = multi;

  // lcm primes grouped into the slots: within a repeated interval the two
  // distinct primes fill its two slots in ascending order.
  std::vector<i64> lcm_primes;
  lcm_primes.reserve(d1_primes.size() + d2_primes.size());
  lcm_primes.insert(lcm_primes.end(), d1_primes.begin(), d1_primes.end());
  lcm_primes.insert(lcm_primes.end(), d2_primes.begin(), d2_primes.end());
  std::sort(lcm_primes.begin(), lcm_primes.end());
  // shared primes appear twice: keep one copy (they are the F part)
  std::vector<i64> slot_primes;
  for (size_t i = 0; i < lcm_primes.size(); ++i) {
    if (i + 1 < lcm_primes.size() && lcm_primes[i] == lcm_primes[i + 1]) {
      slot_primes.push_back(lcm_primes[i]);
      ++i;
    } else {
      slot_primes.push_back(lcm_primes[i]);
    }
  }
  // D1 D2 / F keeps one copy of each F interval, holding the shared prime,
  // so the deduplicated prime list must line up with the slots exactly
  if (slot_primes.size() != out.slots.size())
    throw ConfigError("split_modulus: prime/slot mismatch (gcd pattern is not F)");

  int s = static_cast<int>(out.slots.size());
  long double acc = 1.0L;
  int u = 0;
  while (u < s) {
    long double next = acc * scheme.endpoint(out.slots[static_cast<size_t>(u)]);
    if (next > static_cast<long double>(A)) break;
    acc = next;
    ++u;
  }
  out.u = u;
  out.no_prefix = (s > 0 && u == 0);
  i64 a = 1, bprod = d;
  for (int i = 0; i < s; ++i) {
    if (i < u)
      a *= slot_primes[static_cast<size_t>(i)];
    else
      bprod *= slot_primes[static_cast<size_t>(i)];
  }
  out.a = a;
  out.b = bprod;
  if (static_cast<double>(out.a) > A)
    throw ConfigError("split_modulus: a exceeds A (endpoint bound violated)");
  if (u < s) {
    // maximality and the prefix lower bound a > A |P_{u+1}|^{-1} R1^{-u}
    long double up = acc * scheme.endpoint(out.slots[static_cast<size_t>(u)]);
    if (!(up > static_cast<long double>(A)))
      throw ConfigError("split_modulus: u is not maximal");
    long double lower = static_cast<long double>(A) /
                        scheme.endpoint(out.slots[static_cast<size_t>(u)]);
    for (int i = 0; i < u; ++i) lower /= static_cast<long double>(scheme.R1());
    if (!(static_cast<long double>(out.a) > lower))
      throw ConfigError("split_modulus: prefix lower-bound chain violated");
  }
  if (static_cast<double>(out.b) > B)
    throw ConfigError("split_modulus: b = " + std::to_string(out.b) + " exceeds B = " +
                      std::to_string(B) + " (size chain violated; slots=" +
                      std::to_string(s) + ", u=" + std::to_string(u) + ")");
  return out;
}

struct BilinearRow {
  i64 a = 1;
  i64 b = 1;
  double alpha = 1.0;      // always 1 for realized cells
  double beta = 0.0;       // rho(smooth part of b)
  double lambda_weight = 0.0;  // sum of lt(D1) lt(D2) over sources
  double e_sum = 0.0;          // sum over r in Omega*(ab) of E*(N;r,ab)
  double contribution = 0.0;   // lambda_weight * beta * e_sum
  i64 source_terms = 0;
  int u = 0;
  bool no_prefix = false;
};

struct BilinearLedger {
  double A = 1.0;
  double B = 1.0;
  double budget = 1.0;  // A*B = R0^{2 tau} R^{2+omega}
  std::vector<BilinearRow> rows;  // sorted by (a, b)
  double value = 0.0;
};

namespace detail {

// Walks every remainder term: fn(D1, D2, w12, rho_entry, d1_primes, d2_primes,
// lcm, lcm_factors, F_pattern).
template <class Fn>
inline void for_each_error_term(const SmoothedWeights& weights, const RhoWeights& rho,
                                const PrimeBuckets& buckets, i64 work_cap, Fn&& fn) {
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
  double work = total_members * total_members * static_cast<double>(rho.support.size());
  if (work > static_cast<double>(work_cap))
    throw ResourceError("error sum: term count " + std::to_string(work) +
                        " exceeds work cap");
  for (const auto& [m1, v1] : support) {
    SemiElement D1 = SemiElement::from_mask(m1);
    for (const auto& [m2, v2] : support) {
      SemiElement D2 = SemiElement::from_mask(m2);
      double w12 = v1 * v2;
      for_each_member(D1, buckets, [&](i64, const std::vector<i64>& ps1) {
        for_each_member(D2, buckets, [&](i64, const std::vector<i64>& ps2) {
          // merge: lcm primes and the gcd interval pattern
          std::vector<i64> lcm_factors;
          SemiElement F;
          size_t i = 0, j = 0;
          i64 lcm = 1;
          while (i < ps1.size() || j < ps2.size()) {
            i64 p;
            if (j >= ps2.size() || (i < ps1.size() && ps1[i] < ps2[j])) {
              p = ps1[i];
              ++i;
            } else if (i >= ps1.size() || ps2[j] < ps1[i]) {
              p = ps2[j];
              ++j;
            } else {
              p = ps1[i];
              F.indices.push_back(D1.indices[i]);
              ++i;
              ++j;
            }
            lcm_factors.push_back(p);
            lcm *= p;
          }
          for (const auto& re : rho.support)
            fn(D1, D2, w12, re, ps1, ps2, lcm, lcm_factors, F);
        });
      });
    }
  }
}

}  // namespace detail

// E by the literal quadruple loop, memoizing only the per-modulus class sums.
inline double error_sum_direct(const SmoothedWeights& weights, const RhoWeights& rho,
                               [[maybe_unused]] const IntervalScheme& scheme,
                               const PrimeBuckets& buckets, EStarWindow& estar,
                               i64 work_cap = i64(20000000)) {
  Kahan acc;
  detail::for_each_error_term(
      weights, rho, buckets, work_cap,
      [&](const SemiElement&, const SemiElement&, double w12, const RhoWeights::Entry& re,
          const std::vector<i64>&, const std::vector<i64>&, i64 lcm,
          const std::vector<i64>& lcm_factors, const SemiElement&) {
        i64 q = re.d * lcm;
        std::vector<i64> factors = re.factors;
        factors.insert(factors.end(), lcm_factors.begin(), lcm_factors.end());
        std::sort(factors.begin(), factors.end());
        acc.add(w12 * re.rho * estar.class_e_sum(q, factors));
      });
  return acc.value();
}

// E regrouped through the (a, b) cells; equals error_sum_direct exactly up
// to floating reordering, and returns the ledger.
inline BilinearLedger error_sum_bilinear(const SmoothedWeights& weights,
                                         const RhoWeights& rho, const SmoothParams& smooth,
                                         const IntervalScheme& scheme,
                                         const PrimeBuckets& buckets, EStarWindow& estar,
                                         double A, i64 work_cap = i64(20000000)) {
  BilinearLedger ledger;
  double omega = smooth.effective_omega(weights.R);
  ledger.budget = std::pow(scheme.R0(), 2.0 * rho.tau) * std::pow(weights.R, 2.0 + omega);
  if (A < 1.0) throw ConfigError("error_sum_bilinear: A must be >= 1");
  ledger.A = A;
  ledger.B = ledger.budget / A;
  if (ledger.B < 1.0) throw ConfigError("error_sum_bilinear: B = budget/A is below 1");

  struct Cell {
    Kahan lambda_weight;
    double beta = 0.0;
    std::vector<i64> factors;
    i64 q = 0;
    i64 source_terms = 0;
    int u = 0;
    bool no_prefix = false;
  };
  std::map<std::pair<i64, i64>, Cell> cells;
  detail::for_each_error_term(
      weights, rho, buckets, work_cap,
      [&](const SemiElement& D1, const SemiElement& D2, double w12,
          const RhoWeights::Entry& re, const std::vector<i64>& ps1,
          const std::vector<i64>& ps2, i64 lcm, const std::vector<i64>& lcm_factors,
          const SemiElement& F) {
        ModulusSplit sp =
            split_modulus(D1, D2, F, ps1, ps2, re.d, ledger.A, ledger.B, scheme);
        if (sp.a * sp.b != re.d * lcm)
          throw ConfigError("error_sum_bilinear: split does not factor the modulus");
        Cell& c = cells[{sp.a, sp.b}];
        if (c.q == 0) {
          c.q = re.d * lcm;
          c.beta = re.rho;
          c.factors = re.factors;
          c.factors.insert(c.factors.end(), lcm_factors.begin(), lcm_factors.end());
          std::sort(c.factors.begin(), c.factors.end());
          c.u = sp.u;
          c.no_prefix = sp.no_prefix;
        }
        c.lambda_weight.add(w12);
        c.source_terms += 1;
      });

  Kahan total;
  ledger.rows.reserve(cells.size());
  for (auto& [ab, c] : cells) {
    BilinearRow row;
    row.a = ab.first;
    row.b = ab.second;
    row.alpha = 1.0;
    row.beta = c.beta;
    row.lambda_weight = c.lambda_weight.value();
    row.e_sum = estar.class_e_sum(c.q, c.factors);
    row.contribution = row.lambda_weight * row.beta * row.e_sum;
    row.source_terms = c.source_terms;
    row.u = c.u;
    row.no_prefix = c.no_prefix;
    total.add(row.contribution);
    ledger.rows.push_back(std::move(row));
  }
  ledger.value = total.value();
  return ledger;
}

struct Hypothesis63Row {
  std::string tuple_str;
  i64 h = 0;
  double error_sum = 0.0;
  double scaled = 0.0;  // E_h * (log N)^{C1} / N
  double c1 = 0.0;      // 2(k + l + 1)
  double triple_count = 0.0;
  double triple_bound = 0.0;  // exp((log log R)^{9/10} log 3)
};

// Purely observational: the remainder against the decay the hypothesis
// would demand, one row per (tuple, h).
inline std::vector<Hypothesis63Row> hypothesis_63_diagnostic(
    const std::vector<std::pair<AdmissibleTuple, i64>>& tuples, const SieveParams& params,
    const SmoothParams& smooth, const IntervalScheme& scheme, i64 work_cap = i64(20000000)) {
  std::vector<Hypothesis63Row> rows;
  for (const auto& [tuple, h] : tuples) {
    PrimeBuckets buckets(scheme, tuple, smooth.w(params.level()));
    auto weights = build_lambda_tilde(tuple, params, smooth, scheme, buckets);
    auto rho = build_rho(scheme.R0(), smooth.tau);
    EStarWindow estar(params.N, tuple, h);
    Hypothesis63Row row;
    std::string ts = "{";
    for (size_t i = 0; i < tuple.elements().size(); ++i)
      ts += (i ? "," : "") + std::to_string(tuple.elements()[i]);
    row.tuple_str = ts + "}";
    row.h = h;
    row.error_sum = error_sum_direct(weights, rho, scheme, buckets, estar, work_cap);
    row.c1 = 2.0 * (params.k + params.l + 1);
    row.scaled = row.error_sum *
                 std::pow(std::log(static_cast<double>(params.N)), row.c1) /
                 static_cast<double>(params.N);
    double tc = 0.0;
    for (const auto& [m1, v1] : weights.table.entries) {
      if (v1 == 0.0) continue;
      for (const auto& [m2, v2] : weights.table.entries) {
        if (v2 == 0.0) continue;
        tc += std::pow(2.0, std::popcount(m1 & m2));
      }
    }
    row.triple_count = tc;
    double llR = std::log(std::log(params.level()));
    row.triple_bound = std::exp(std::pow(llR, 0.9) * std::log(3.0));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace gpylab

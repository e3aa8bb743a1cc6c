#pragma once

// The unsmoothed GPY apparatus.
//
//   lambda_R(d; l) = mu(d) (log R/d)^{k+l} / (k+l)!   for squarefree d <= R
//   Lambda_R(n)    = sum_{d : n in Omega(d)} lambda_R(d; l)
//
// together with the prime indicator varpi, the progression error terms
// E*(y;a,q) = theta*(y;a,q) - y/phi(q), the Bombieri-Vinogradov style
// moduli sum, empirical second-moment experiments against their
// asymptotic main terms, and the positivity factor
//
//   k/(k+2l+1) * 2(2l+1)/(l+1) * theta/2 - 1
//
// whose sign decides whether the weighted tuple carries two primes.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "gpylab/numeric.hpp"
#include "gpylab/primes.hpp"
#include "gpylab/report.hpp"
#include "gpylab/tuples.hpp"

namespace gpylab {

using Rational = boost::rational<long long>;

enum class Mode { desk, strict };

struct SieveParams {
  i64 N = 100000;      // range (N, 2N]
  double R = 0.0;      // level; defaults to N^{1/4} when unset
  int k = 2;
  int l = 1;
  double theta = 0.5;  // level of distribution, reporting only
  double C = 0.0;      // diagnostic exponents, never applied
  double C0 = 0.0;
  int jobs = 1;
  i64 series_cutoff = 1000000;
  i64 memory_cap = i64(1) << 30;

  double level() const { return R > 0.0 ? R : std::pow(static_cast<double>(N), 0.25); }

  std::vector<std::string> validate(Mode mode) const {
    std::vector<std::string> warnings;
    if (N < 4) throw ConfigError("params: N must be >= 4");
    if (l < 1 || l > k) throw ConfigError("params: need 1 <= l <= k");
    if (level() < 1.0) throw ConfigError("params: R must be >= 1");
    if (level() > static_cast<double>(N)) throw ConfigError("params: R must not exceed N");
    if (theta <= 0.0 || theta > 1.0) {
      if (mode == Mode::strict) throw ConfigError("params: theta must lie in (0,1]");
      warnings.push_back("theta outside (0,1]");
    }
    return warnings;
  }
};

inline int mobius_of(i64 d) {
  if (d == 1) return 1;
  int r = 0;
  for (i64 p = 2; p * p <= d; p += (p == 2 ? 1 : 2)) {
    if (d % p == 0) {
      d /= p;
      if (d % p == 0) return 0;
      ++r;
    }
  }
  if (d > 1) ++r;
  return (r % 2 == 0) ? 1 : -1;
}

inline double lambda_r(i64 d, const SieveParams& params) {
  double R = params.level();
  if (d < 1 || static_cast<double>(d) > R) return 0.0;
  int mu = mobius_of(d);
  if (mu == 0) return 0.0;
  int e = params.k + params.l;
  return mu * pow_int(std::log(R / static_cast<double>(d)), e) / factorial_d(e);
}

// Lambda_R(n) by explicit divisor-lattice walk: collect the primes p <= R
// dividing prod(n + h_i), then sum lambda over squarefree subset products <= R.
inline double big_lambda_r(i64 n, const AdmissibleTuple& tuple, const SieveParams& params) {
  double R = params.level();
  std::vector<i64> ps;
  for (i64 h : tuple.elements()) {
    i64 m = n + h;
    if (m < 0) m = -m;
    if (m == 0) {  // zero factor: every modulus divides the product
      ps = primes_up_to(std::max<i64>(2, static_cast<i64>(R)));
      break;
    }
    for (i64 p = 2; static_cast<double>(p) <= R && p * p <= m; ++p)
      if (m % p == 0) {
        ps.push_back(p);
        while (m % p == 0) m /= p;
      }
    if (m > 1 && static_cast<double>(m) <= R) ps.push_back(m);
  }
  std::sort(ps.begin(), ps.end());
  ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
  int e = params.k + params.l;
  Kahan acc;
  std::function<void(size_t, double, int)> dfs = [&](size_t i, double d, int sign) {
    acc.add(sign * pow_int(std::log(R / d), e));
    for (size_t j = i; j < ps.size(); ++j) {
      double nd = d * static_cast<double>(ps[j]);
      if (nd > R) continue;
      dfs(j + 1, nd, -sign);
    }
  };
  if (R >= 1.0) dfs(0, 1.0, 1);
  return acc.value() / factorial_d(e);
}

// Residue classes of Omega(d) for squarefree d with known prime factors.
inline std::vector<i64> omega_residues(i64 d, const std::vector<i64>& factors,
                                       const AdmissibleTuple& tuple) {
  i64 check = 1;
  for (i64 p : factors) check *= p;
  if (check != d) throw ConfigError("omega_residues: factors do not multiply to d");
  std::vector<i64> res{0};
  i64 m = 1;
  for (i64 p : factors) {
    auto rs = tuple.residue_system(p);
    std::vector<i64> next;
    next.reserve(res.size() * rs.residues.size());
    for (i64 r : res)
      for (i64 s : rs.residues) next.push_back(crt_pair(r, m, s, p));
    res = std::move(next);
    m *= p;
  }
  std::sort(res.begin(), res.end());
  return res;
}

// Lambda_R over (N, 2N] by marking residue classes of every squarefree
// d <= R.  index i holds Lambda_R(N + 1 + i).
inline std::vector<double> range_weights(const AdmissibleTuple& tuple,
                                         const SieveParams& params) {
  const i64 N = params.N;
  const double R = params.level();
  if (8 * N > params.memory_cap)
    throw ResourceError("range_weights: range exceeds memory budget");
  std::vector<double> w(static_cast<size_t>(N), 0.0);
  if (N == 0) return w;
  const i64 Ri = static_cast<i64>(R);
  auto mu = mobius_table(std::max<i64>(Ri, 1));
  auto spf = spf_table(std::max<i64>(Ri, 1));
  const int e = params.k + params.l;
  const double fact = factorial_d(e);
  for (i64 d = 1; d <= Ri; ++d) {
    if (mu[static_cast<size_t>(d)] == 0) continue;
    double lam = mu[static_cast<size_t>(d)] *
                 pow_int(std::log(R / static_cast<double>(d)), e) / fact;
    if (lam == 0.0) continue;
    if (d == 1) {
      for (auto& x : w) x += lam;
      continue;
    }
    std::vector<i64> factors;
    for (i64 m = d; m > 1;) {
      i64 p = spf[static_cast<size_t>(m)];
      factors.push_back(p);
      m /= p;
    }
    for (i64 r : omega_residues(d, factors, tuple)) {
      i64 first = N + 1 + ((r - (N + 1)) % d + d) % d;
      for (i64 n = first; n <= 2 * N; n += d) w[static_cast<size_t>(n - N - 1)] += lam;
    }
  }
  return w;
}

inline double varpi(i64 n) { return is_prime_i64(n) ? std::log(static_cast<double>(n)) : 0.0; }

// theta*(y;a,q) = sum of varpi(n) over y < n <= 2y, n = a (mod q).
inline double theta_star(double y, i64 a, i64 q) {
  if (q < 1) throw ConfigError("theta_star: q must be >= 1");
  i64 lo = static_cast<i64>(std::floor(y));
  i64 hi = static_cast<i64>(std::floor(2 * y));
  Kahan acc;
  segmented_primes(std::max<i64>(lo, 1), hi, [&](i64 p) {
    if (static_cast<double>(p) > y && p % q == a % q)
      acc.add(std::log(static_cast<double>(p)));
  });
  return acc.value();
}

inline double e_star(double y, i64 a, i64 q, bool* main_term_applicable = nullptr) {
  bool ok = std::gcd(a, q) == 1 || q == 1;
  if (main_term_applicable) *main_term_applicable = ok;
  return theta_star(y, a, q) - y / static_cast<double>(euler_phi(q));
}

struct BvOptions {
  bool exact = false;   // evaluate every breakpoint; otherwise a log grid
  int grid_cells = 512;
};

struct BvReport {
  double value = 0.0;
  i64 q_max = 0;
  double normalized = 0.0;  // value / (x / log x)
};

// sum_{q <= x^theta} max_{(a,q)=1} max_{y <= x} |E*(y;a,q)|.  theta*(y) is
// a step function of y, jumping only where y or 2y crosses a class prime,
// so the inner maximum is scanned over those breakpoints (all of them in
// exact mode, one per logarithmic grid cell otherwise), evaluating both
// one-sided values at each.
inline BvReport bv_sum(double x, double theta, const BvOptions& opt = {}) {
  if (x < 100.0) throw ConfigError("bv_sum: x must be >= 100");
  BvReport rep;
  rep.q_max = static_cast<i64>(std::pow(x, theta));
  if (rep.q_max < 1) rep.q_max = 1;
  if (rep.q_max > 100000) throw ResourceError("bv_sum: x^theta exceeds modulus budget");
  std::vector<i64> primes = primes_up_to(static_cast<i64>(2 * x) + 1);
  std::vector<double> logp(primes.size());
  for (size_t i = 0; i < primes.size(); ++i)
    logp[i] = std::log(static_cast<double>(primes[i]));

  Kahan total;
  std::vector<std::vector<std::pair<double, double>>> classes;  // (p, prefix log sum)
  for (i64 q = 1; q <= rep.q_max; ++q) {
    classes.assign(static_cast<size_t>(q), {});
    std::vector<double> runsum(static_cast<size_t>(q), 0.0);
    for (size_t i = 0; i < primes.size(); ++i) {
      size_t cls = static_cast<size_t>(primes[i] % q);
      runsum[cls] += logp[i];
      classes[cls].emplace_back(static_cast<double>(primes[i]), runsum[cls]);
    }
    double phi_q = static_cast<double>(euler_phi(q));
    double best_for_q = 0.0;
    for (i64 a = 0; a < q; ++a) {
      if (q > 1 && std::gcd(a, q) != 1) continue;
      const auto& cl = classes[static_cast<size_t>(a)];
      // prefix sums: F(t) = sum of log p over class primes <= t
      auto F = [&](double t, bool strict) {
        auto it = strict ? std::lower_bound(cl.begin(), cl.end(), t,
                                            [](const auto& e, double v) { return e.first < v; })
                         : std::upper_bound(cl.begin(), cl.end(), t,
                                            [](double v, const auto& e) { return v < e.first; });
        return it == cl.begin() ? 0.0 : std::prev(it)->second;
      };
      auto eval = [&](double y) {
        double right = F(2 * y, false) - F(y, false) - y / phi_q;
        double left = F(2 * y, true) - F(y, true) - y / phi_q;
        return std::max(std::abs(right), std::abs(left));
      };
      std::vector<double> bps;
      bps.reserve(2 * cl.size() + 2);
      for (const auto& e : cl) {
        if (e.first <= x) bps.push_back(e.first);
        if (e.first / 2 >= 1.0 && e.first / 2 <= x) bps.push_back(e.first / 2);
      }
      bps.push_back(1.0);
      bps.push_back(x);
      std::sort(bps.begin(), bps.end());
      double best = 0.0;
      if (opt.exact || static_cast<int>(bps.size()) <= opt.grid_cells) {
        for (double y : bps) best = std::max(best, eval(y));
      } else {
        double step = std::log(x) / opt.grid_cells;
        int last_cell = -1;
        for (double y : bps) {
          int cell = static_cast<int>(std::log(std::max(y, 1.0)) / step);
          if (cell == last_cell) continue;
          last_cell = cell;
          best = std::max(best, eval(y));
        }
        best = std::max(best, eval(x));
      }
      best_for_q = std::max(best_for_q, best);
    }
    total.add(best_for_q);
  }
  rep.value = total.value();
  rep.normalized = rep.value / (x / std::log(x));
  return rep;
}

namespace detail {

// Deterministic chunked sum of fn(n) * w[n - N - 1] over (N, 2N].
template <class Fn>
inline double range_sum(const std::vector<double>& w, i64 N, int jobs, Fn&& fn) {
  return parallel_sum(0, static_cast<i64>(w.size()), jobs, i64(1) << 20,
                      [&](i64 a, i64 b, Kahan& acc) {
                        for (i64 i = a; i < b; ++i)
                          acc.add(fn(N + 1 + i, w[static_cast<size_t>(i)]));
                      });
}

inline std::vector<std::uint8_t> prime_flags_window(i64 lo, i64 hi) {
  std::vector<std::uint8_t> f(static_cast<size_t>(hi - lo + 1), 0);
  segmented_primes(lo - 1, hi, [&](i64 p) {
    if (p >= lo) f[static_cast<size_t>(p - lo)] = 1;
  });
  return f;
}

}  // namespace detail

// sum_{N < n <= 2N} Lambda_R(n)^2 against
// S(H)/(k+2l)! C(2l,l) N (log R)^{k+2l}.
inline RangeReport lemma1_report(const AdmissibleTuple& tuple, const SieveParams& params) {
  RangeReport rep;
  rep.n_lo = params.N;
  rep.n_hi = 2 * params.N;
  auto w = range_weights(tuple, params);
  rep.empirical = detail::range_sum(w, params.N, params.jobs,
                                    [](i64, double v) { return v * v; });
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
  rep.diagnostics["log_R"] = std::log(params.level());
  rep.finish();
  return rep;
}

// sum_{N < n <= 2N} varpi(n+h) Lambda_R(n)^2 against
// S(H)/(k+2l+1)! C(2l+2,l+1) N (log R)^{k+2l+1}.
inline RangeReport lemma2_report(const AdmissibleTuple& tuple, const SieveParams& params,
                                 i64 h) {
  const auto& els = tuple.elements();
  if (std::find(els.begin(), els.end(), h) == els.end())
    throw ConfigError("lemma2_report: h must be an element of the tuple");
  RangeReport rep;
  rep.n_lo = params.N;
  rep.n_hi = 2 * params.N;
  auto w = range_weights(tuple, params);
  auto flags = detail::prime_flags_window(params.N + 1 + h, 2 * params.N + h);
  const i64 base = params.N + 1 + h;
  rep.empirical = detail::range_sum(w, params.N, params.jobs, [&](i64 n, double v) {
    return flags[static_cast<size_t>(n + h - base)]
               ? std::log(static_cast<double>(n + h)) * v * v
               : 0.0;
  });
  if (!is_admissible(tuple)) {
    rep.flagged = true;
    rep.notes.push_back("non-admissible tuple: main term vanishes");
    rep.finish();
    return rep;
  }
  double S = singular_series(tuple, params.series_cutoff).value;
  int k = params.k, l = params.l;
  rep.main_term = S / factorial_d(k + 2 * l + 1) * binomial_d(2 * l + 2, l + 1) * params.N *
                  pow_int(std::log(params.level()), k + 2 * l + 1);
  rep.finish();
  return rep;
}

// k/(k+2l+1) * 2(2l+1)/(l+1) * theta/2 - 1, exactly.
inline Rational gpy_factor(int k, int l, const Rational& theta) {
  if (l < 1 || l > k) throw ConfigError("gpy_factor: need 1 <= l <= k");
  Rational r(k, k + 2 * l + 1);
  r *= Rational(2 * (2 * l + 1), l + 1);
  r *= theta / 2;
  return r - 1;
}

inline double gpy_factor_d(int k, int l, double theta) {
  return static_cast<double>(k) / (k + 2 * l + 1) * 2.0 * (2 * l + 1) / (l + 1) * theta / 2.0 -
         1.0;
}

struct OptimizeResult {
  int k = 0;
  int l = 0;
  Rational factor{0};
  bool positive = false;
};

// argmax of the positivity factor over 1 <= l <= k <= k_max; ties resolved
// to the smallest k, then the smallest l.  A double prefilter skips cells
// that are exactly-comparably worse by a wide margin.
inline OptimizeResult optimize_kl(const Rational& theta, int k_max) {
  if (k_max < 1) throw ConfigError("optimize_kl: k_max must be >= 1");
  const i64 tn = theta.numerator(), td = theta.denominator();
  auto num = [&](i64 k, i64 l) { return k * 2 * (2 * l + 1) * tn; };
  auto den = [&](i64 k, i64 l) { return (k + 2 * l + 1) * (l + 1) * 2 * td; };
  // factor = num/den - 1; compare via cross multiplication in 128 bits
  auto better = [&](i64 n1, i64 d1, i64 n2, i64 d2) {
    return static_cast<i128>(n1) * d2 > static_cast<i128>(n2) * d1;
  };
  const double th = static_cast<double>(tn) / static_cast<double>(td);
  OptimizeResult best;
  i64 bn = 0, bd = 1;  // factor + 1 of the best cell; start below everything
  double bd_double = -1e300;
  for (int k = 1; k <= k_max; ++k)
    for (int l = 1; l <= k; ++l) {
      double fd = gpy_factor_d(k, l, th);
      if (fd < bd_double - 1e-9) continue;
      i64 n = num(k, l), d = den(k, l);
      if (best.k == 0 || better(n, d, bn, bd)) {
        best.k = k;
        best.l = l;
        bn = n;
        bd = d;
        bd_double = fd;
      }
    }
  best.factor = Rational(bn, bd) - 1;
  best.positive = best.factor > 0;
  return best;
}

}  // namespace gpylab

#include <catch2/catch_amalgamated.hpp>

#include "gpylab/diagonal.hpp"
#include "test_support.hpp"

using namespace gpylab;

namespace {

struct Fixture {
  AdmissibleTuple tuple{{0, 2}};
  IntervalScheme scheme{20, 2, 320};
  PrimeBuckets buckets{scheme, tuple, 320};
  double R = 10000.0;
  double z = 320.0;
};

WeightTable random_table(const Fixture& f, Rng& rng) {
  WeightTable t;
  t.level = f.R;
  t.gen_count = f.scheme.generator_count(f.z);
  detail::for_each_element(f.scheme, f.z, f.R, 0,
                           [&](u64 mask, long double) { t.set(mask, rng.uniform(-1.0, 1.0)); });
  return t;
}

}  // namespace

TEST_CASE("quadratic form on the empty-support table") {
  Fixture f;
  WeightTable xi;
  xi.level = f.R;
  xi.gen_count = f.scheme.generator_count(f.z);
  xi.set(0, 1.0);
  CHECK(quad_form_direct(xi, f.buckets) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(quad_form_diagonal(xi, f.scheme, f.buckets) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("single generator support reproduces the pair sum") {
  Fixture f;
  WeightTable xi;
  xi.level = f.R;
  xi.gen_count = f.scheme.generator_count(f.z);
  xi.set(SemiElement{{1}}.mask(), 1.0);
  // direct pair oracle over the four primes of (20, 40]
  double expect = 0.0;
  std::vector<i64> ps{23, 29, 31, 37};
  for (i64 p : ps)
    for (i64 q : ps) {
      if (p == q)
        expect += 2.0 / static_cast<double>(p);
      else
        expect += 4.0 / static_cast<double>(p * q);
    }
  CHECK(quad_form_direct(xi, f.buckets) == Catch::Approx(expect).epsilon(1e-12));
  CHECK(quad_form_diagonal(xi, f.scheme, f.buckets) == Catch::Approx(expect).epsilon(1e-9));
}

TEST_CASE("direct and diagonal evaluators agree on random tables") {
  Fixture f;
  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    auto xi = random_table(f, rng);
    double a = quad_form_direct(xi, f.buckets);
    double b = quad_form_diagonal(xi, f.scheme, f.buckets);
    CHECK(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)));
  }
}

TEST_CASE("scaling the table scales the form quadratically") {
  Fixture f;
  Rng rng(3);
  auto xi = random_table(f, rng);
  double j1 = quad_form_diagonal(xi, f.scheme, f.buckets);
  for (auto& [m, v] : xi.entries) v *= 3.0;
  CHECK(quad_form_diagonal(xi, f.scheme, f.buckets) == Catch::Approx(9.0 * j1).epsilon(1e-12));
}

TEST_CASE("xi_cap on empty support and hand expansion") {
  Fixture f;
  WeightTable xi;
  xi.level = f.R;
  xi.gen_count = f.scheme.generator_count(f.z);
  xi.set(0, 2.5);
  auto Xi = xi_cap(xi, f.buckets);
  CHECK(Xi.at(0) == 2.5);
  CHECK(Xi.at(SemiElement{{1}}.mask()) == 0.0);

  // two-element support {empty, {1}}: Xi(empty) = xi0 + Delta({1}) xi1,
  // Xi({1}) = Delta({1}) xi1
  WeightTable xi2 = xi;
  xi2.set(SemiElement{{1}}.mask(), -0.75);
  double d1 = delta(SemiElement{{1}}, f.buckets);
  auto Xi2 = xi_cap(xi2, f.buckets);
  CHECK(Xi2.at(0) == Catch::Approx(2.5 - 0.75 * d1).epsilon(1e-12));
  CHECK(Xi2.at(SemiElement{{1}}.mask()) == Catch::Approx(-0.75 * d1).epsilon(1e-12));
}

TEST_CASE("mobius inversion round trip") {
  Fixture f;
  Rng rng(11);
  auto xi = random_table(f, rng);
  auto back = xi_from_cap(xi_cap(xi, f.buckets), f.buckets);
  for (const auto& [mask, v] : xi.entries)
    CHECK(back.at(mask) == Catch::Approx(v).margin(1e-12));
  auto forth = xi_cap(xi_from_cap(xi, f.buckets), f.buckets);
  for (const auto& [mask, v] : xi.entries)
    CHECK(forth.at(mask) == Catch::Approx(v).margin(1e-12));
}

TEST_CASE("mobius sign convention in the inverse transform") {
  Fixture f;
  // Xi supported on {1,2} only: xi(empty) = sum_K mu(K) Xi(K) picks sign +1
  WeightTable Xi;
  Xi.level = f.R;
  Xi.gen_count = f.scheme.generator_count(f.z);
  Xi.set(SemiElement{{1, 2}}.mask(), 1.0);
  auto xi = xi_from_cap(Xi, f.buckets);
  CHECK(xi.at(0) == Catch::Approx(1.0).epsilon(1e-12));  // (-1)^2 = +1
  double d1 = delta(SemiElement{{1}}, f.buckets);
  CHECK(xi.at(SemiElement{{1}}.mask()) == Catch::Approx(-1.0 / d1).epsilon(1e-12));
}

TEST_CASE("g_sum") {
  Fixture f;
  CHECK(g_sum(30.0, f.z, {}, f.scheme, f.buckets).value == 1.0);  // y < R0*R1
  // Q covering every generator leaves only the empty element
  SemiElement full{{1, 2, 3, 4}};
  CHECK(g_sum(f.R, f.z, full, f.scheme, f.buckets).value == 1.0);
  // subset-enumeration oracle
  double expect = 0.0;
  std::vector<int> gens{1, 2, 3, 4};
  for (int m = 0; m < 16; ++m) {
    long double size = 1.0L;
    double w = 1.0;
    for (int j = 0; j < 4; ++j)
      if (m >> j & 1) {
        size *= f.scheme.endpoint(j + 1);
        w /= f.buckets.at(j + 1).phi();
      }
    if (size <= 10000.0L) expect += w;
  }
  CHECK(g_sum(f.R, f.z, {}, f.scheme, f.buckets).value ==
        Catch::Approx(expect).epsilon(1e-12));
}

TEST_CASE("g_sum monotonicity") {
  Fixture f;
  double prev = 0.0;
  for (double y : {10.0, 50.0, 100.0, 1000.0, 10000.0}) {
    double g = g_sum(y, f.z, {}, f.scheme, f.buckets).value;
    CHECK(g >= prev);
    prev = g;
  }
  double unrestricted = g_sum(f.R, f.z, {}, f.scheme, f.buckets).value;
  CHECK(g_sum(f.R, f.z, SemiElement{{1}}, f.scheme, f.buckets).value <= unrestricted);
}

TEST_CASE("optimal_xi self-consistency and bound") {
  Fixture f;
  auto xi = optimal_xi(2.0, f.R, f.z, f.scheme, f.buckets);
  CHECK(xi.xi_empty() == Catch::Approx(2.0).epsilon(1e-12));
  for (const auto& [mask, v] : xi.entries)
    CHECK(std::abs(v) <= std::abs(xi.xi_empty()) * (1 + 1e-12));
  double G = g_sum(f.R, f.z, {}, f.scheme, f.buckets).value;
  CHECK(quad_form_direct(xi, f.buckets) == Catch::Approx(4.0 / G).epsilon(1e-9));
  CHECK_THROWS_AS(optimal_xi(0.0, f.R, f.z, f.scheme, f.buckets), ConfigError);
}

TEST_CASE("completed square: optimal xi minimizes at fixed xi(empty)") {
  Fixture f;
  Rng rng(5);
  auto xi = optimal_xi(1.0, f.R, f.z, f.scheme, f.buckets);
  double j0 = quad_form_diagonal(xi, f.scheme, f.buckets);
  for (int t = 0; t < 50; ++t) {
    auto pert = xi;
    for (auto& [mask, v] : pert.entries)
      if (mask != 0) v += rng.uniform(-0.5, 0.5);
    CHECK(quad_form_diagonal(pert, f.scheme, f.buckets) >= j0 * (1 - 1e-9));
  }
}

TEST_CASE("G(R,z) dominates the per-element product bound") {
  // G(R,z) >= (Delta(D)Phi(D))^{-1} sum_{|K| <= R/|D|, (K,D)=1} mu^2/Phi(K)
  Fixture f;
  double G = g_sum(f.R, f.z, {}, f.scheme, f.buckets).value;
  detail::for_each_element(f.scheme, f.z, f.R, 0, [&](u64 mask, long double size) {
    SemiElement D = SemiElement::from_mask(mask);
    double inner =
        g_sum(f.R / static_cast<double>(size), f.z, D, f.scheme, f.buckets).value;
    double bound = inner / (delta(D, f.buckets) * phi(D, f.buckets));
    CHECK(G >= bound * (1 - 1e-12));
  });
}

TEST_CASE("T, T1, and the step-function identity") {
  Fixture f;
  // y below the first generator
  CHECK(t_integral(30.0, f.z, {}, f.scheme, f.buckets) ==
        Catch::Approx(std::log(30.0)).epsilon(1e-12));
  CHECK(t1_sum(30.0, f.z, {}, f.scheme, f.buckets) == 0.0);

  Rng rng(13);
  int J = f.scheme.generator_count(f.z);
  for (int t = 0; t < 100; ++t) {
    double y = std::exp(rng.uniform(0.0, std::log(f.R)));
    SemiElement Q;
    for (int j = 1; j <= J; ++j)
      if (rng.uniform() < 0.3) Q.indices.push_back(j);
    double g = g_sum(y, f.z, Q, f.scheme, f.buckets).value;
    double lhs = g * std::log(y);
    double rhs = t_integral(y, f.z, Q, f.scheme, f.buckets) +
                 t1_sum(y, f.z, Q, f.scheme, f.buckets);
    CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(std::abs(lhs), 1.0));
  }
}

TEST_CASE("T1 decomposes over generators") {
  // T1(y,z;Q) = sum_{|P| <= z, P not | Q} log|P|/Phi(P) G(y/|P|, z; PQ)
  Fixture f;
  int J = f.scheme.generator_count(f.z);
  for (double y : {100.0, 1000.0, 10000.0}) {
    for (const SemiElement& Q : {SemiElement{}, SemiElement{{2}}}) {
      double lhs = t1_sum(y, f.z, Q, f.scheme, f.buckets);
      Kahan rhs;
      for (int j = 1; j <= J; ++j) {
        if (Q.contains(j)) continue;
        double size = static_cast<double>(f.scheme.endpoint(j));
        SemiElement PQ = Q.merged(SemiElement{{j}});
        rhs.add(std::log(size) / f.buckets.at(j).phi() *
                g_sum(y / size, f.z, PQ, f.scheme, f.buckets).value);
      }
      CHECK(lhs == Catch::Approx(rhs.value()).margin(1e-9 * std::max(1.0, lhs)));
    }
  }
}

TEST_CASE("one-generator recursion residual vanishes") {
  Fixture f;
  Rng rng(17);
  int J = f.scheme.generator_count(f.z);
  for (int t = 0; t < 100; ++t) {
    double y = std::exp(rng.uniform(0.0, std::log(f.R)));
    SemiElement Q;
    for (int j = 1; j <= J; ++j)
      if (rng.uniform() < 0.25) Q.indices.push_back(j);
    std::vector<int> avail;
    for (int j = 1; j <= J; ++j)
      if (!Q.contains(j)) avail.push_back(j);
    if (avail.empty()) continue;
    int P = avail[static_cast<size_t>(rng.below(static_cast<i64>(avail.size())))];
    double res = g_recursion_check(y, f.z, Q, P, f.scheme, f.buckets);
    double g = g_sum(y, f.z, Q, f.scheme, f.buckets).value;
    CHECK(std::abs(res) <= 1e-9 * std::max(g, 1.0));
  }
  CHECK_THROWS_AS(g_recursion_check(100.0, f.z, SemiElement{{1}}, 1, f.scheme, f.buckets),
                  ConfigError);
}

TEST_CASE("asymptotic report") {
  Fixture f;
  auto rep = g_asymptotic_report(f.z, {}, f.tuple, f.scheme, f.buckets);
  CHECK(rep.ratio > 0.0);
  CHECK(std::isfinite(rep.ratio));
  // spread over several Q stays within a factor of the base ratio
  for (const SemiElement& Q : {SemiElement{{1}}, SemiElement{{2}}, SemiElement{{1, 3}}}) {
    auto r = g_asymptotic_report(f.z, Q, f.tuple, f.scheme, f.buckets);
    CHECK(r.ratio > 0.0);
    CHECK(std::abs(std::log(r.ratio / rep.ratio)) < 1.0);
  }
  // trend: scaling z up 4x moves the ratio toward 1
  IntervalScheme wide(20, 2, 4 * f.z);
  PrimeBuckets wb(wide, f.tuple, 4 * f.z);
  auto rep4 = g_asymptotic_report(4 * f.z, {}, f.tuple, wide, wb);
  CHECK(std::abs(rep4.ratio - 1.0) < std::abs(rep.ratio - 1.0));
}

TEST_CASE("evaluator equivalence holds for a k = 3 tuple") {
  AdmissibleTuple tuple({0, 4, 6});
  IntervalScheme scheme(20, 2, 320);
  PrimeBuckets buckets(scheme, tuple, 320);
  Rng rng(41);
  for (int t = 0; t < 5; ++t) {
    WeightTable xi;
    xi.level = 10000.0;
    xi.gen_count = scheme.generator_count(320.0);
    detail::for_each_element(scheme, 320.0, 10000.0, 0, [&](u64 mask, long double) {
      xi.set(mask, rng.uniform(-1.0, 1.0));
    });
    double a = quad_form_direct(xi, buckets);
    double b = quad_form_diagonal(xi, scheme, buckets);
    CHECK(std::abs(a - b) <= 1e-9 * std::max(std::abs(a), 1.0));
  }
  auto opt = optimal_xi(1.0, 10000.0, 320.0, scheme, buckets);
  double G = g_sum(10000.0, 320.0, {}, scheme, buckets).value;
  CHECK(quad_form_direct(opt, buckets) == Catch::Approx(1.0 / G).epsilon(1e-9));
}

TEST_CASE("u residual diagnostic is reported against G log R0") {
  Fixture f;
  auto u = u_residual(f.z, f.z, {}, f.tuple, f.scheme, f.buckets);
  CHECK(u.G > 0.0);
  CHECK(u.bound_scale == Catch::Approx(u.G * std::log(20.0)).epsilon(1e-12));
  CHECK(std::isfinite(u.ratio));
}

#include "darwin/stats.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "darwin/errors.hpp"
#include "doctest.h"

using namespace darwin;

namespace {

// Independent brute-force Mann-Whitney p by enumerating every labeling of
// the pooled sample. Only valid without ties.
struct BruteMw {
  double u;
  double p_less;
  double p_greater;
};

BruteMw brute_force_mw(std::vector<double> a, std::vector<double> b) {
  const int n = static_cast<int>(a.size());
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::sort(pooled.begin(), pooled.end());

  auto u_of = [&](const std::vector<int>& a_positions) {
    // U = #(a_i > b_j) over pairs, computed from sorted positions
    double u = 0;
    for (int pos : a_positions) {
      int below = 0;
      for (int q = 0; q < pos; ++q) {
        bool q_in_a = std::find(a_positions.begin(), a_positions.end(), q) !=
                      a_positions.end();
        if (!q_in_a) ++below;
      }
      u += below;
    }
    return u;
  };

  // observed U
  std::vector<int> observed;
  for (double v : a) {
    observed.push_back(static_cast<int>(
        std::lower_bound(pooled.begin(), pooled.end(), v) - pooled.begin()));
  }
  std::sort(observed.begin(), observed.end());
  const double u_obs = u_of(observed);

  const int total = static_cast<int>(pooled.size());
  std::vector<int> mask(total, 0);
  std::fill(mask.begin(), mask.begin() + n, 1);
  std::sort(mask.begin(), mask.end());
  long count_le = 0;
  long count_ge = 0;
  long count_all = 0;
  do {
    std::vector<int> positions;
    for (int i = 0; i < total; ++i) {
      if (mask[i]) positions.push_back(i);
    }
    const double u = u_of(positions);
    ++count_all;
    if (u <= u_obs) ++count_le;
    if (u >= u_obs) ++count_ge;
  } while (std::next_permutation(mask.begin(), mask.end()));

  return {u_obs, static_cast<double>(count_le) / count_all,
          static_cast<double>(count_ge) / count_all};
}

}  // namespace

TEST_CASE("median") {
  CHECK(median(std::vector<double>{1, 2, 3, 4, 5, 6, 7}) == 4);
  CHECK(median(std::vector<double>{1, 2, 3, 4}) == 2.5);
  CHECK(median(std::vector<double>{5}) == 5);
  CHECK(median(std::vector<double>{3, 1, 2}) == 2);  // order-free
  CHECK_THROWS_AS(median(std::vector<double>{}), EmptySamples);
}

TEST_CASE("median_ci picks the narrowest covering rank pair") {
  // n = 6 at 95%: only the extreme pair covers; coverage 1 - 2/64
  std::vector<double> six{10, 20, 30, 40, 50, 60};
  const auto ci = median_ci(six, 0.95);
  CHECK(ci.lo == 10);
  CHECK(ci.hi == 60);
  CHECK(ci.median == 35);
  CHECK(ci.confidence == doctest::Approx(0.96875).epsilon(1e-12));

  // constant samples collapse
  std::vector<double> constant(10, 3.0);
  const auto flat = median_ci(constant, 0.95);
  CHECK(flat.lo == 3);
  CHECK(flat.median == 3);
  CHECK(flat.hi == 3);
}

TEST_CASE("median_ci at n=30 uses the (10th, 21st) order statistics") {
  std::vector<double> samples;
  for (int i = 1; i <= 30; ++i) samples.push_back(i);
  const auto ci = median_ci(samples, 0.95);
  CHECK(ci.lo == 10);
  CHECK(ci.hi == 21);

  // independent check: coverage(k) = 1 - 2 P(Bin(30,1/2) <= k-1) from an
  // explicitly summed Pascal row; k=10 must be the largest covering rank
  std::vector<long double> pmf(31);
  pmf[0] = std::pow(0.5L, 30);
  for (int i = 1; i <= 30; ++i) pmf[i] = pmf[i - 1] * (31 - i) / i;
  auto coverage = [&](int k) {
    long double tail = 0;
    for (int i = 0; i <= k - 1; ++i) tail += pmf[i];
    return 1.0L - 2.0L * tail;
  };
  CHECK(coverage(10) >= 0.95L);
  CHECK(coverage(11) < 0.95L);
}

TEST_CASE("median_ci sample-size guards") {
  CHECK_THROWS_AS(median_ci(std::vector<double>{1, 2, 3, 4}, 0.95), TooFewSamples);
  // n=5 cannot reach 95% even with the extreme pair (coverage 0.9375)
  CHECK_THROWS_AS(median_ci(std::vector<double>{1, 2, 3, 4, 5}, 0.95), TooFewSamples);
  CHECK_NOTHROW(median_ci(std::vector<double>{1, 2, 3, 4, 5}, 0.90));
}

TEST_CASE("bootstrap interval brackets the median") {
  std::mt19937_64 rng(3);
  std::vector<double> samples;
  for (int i = 0; i < 40; ++i) samples.push_back(5.0 + (rng() % 1000) / 1000.0);
  const auto ci = bootstrap_median_ci(samples, 0.95, 2000, 11);
  CHECK(ci.lo <= ci.median);
  CHECK(ci.median <= ci.hi);
  CHECK(ci.lo >= 5.0);
  CHECK(ci.hi <= 6.0);
}

TEST_CASE("mann-whitney on fully separated samples") {
  std::vector<double> a{1, 2, 3};
  std::vector<double> b{4, 5, 6};
  const auto r = mann_whitney_u(a, b, Alternative::Less);
  CHECK(r.exact);
  CHECK(r.u == 0);
  CHECK(r.p == doctest::Approx(0.05).epsilon(1e-12));  // 1 of C(6,3)=20 labelings

  std::vector<double> a4{1, 2, 3, 4};
  std::vector<double> b4{5, 6, 7, 8};
  const auto r4 = mann_whitney_u(a4, b4, Alternative::Less);
  CHECK(r4.u == 0);
  CHECK(r4.p == doctest::Approx(1.0 / 70).epsilon(1e-12));  // C(8,4)=70
}

TEST_CASE("mann-whitney on identical samples is insignificant") {
  std::vector<double> a{1, 2, 3};
  const auto r = mann_whitney_u(a, a, Alternative::TwoSided);
  CHECK(r.p == 1.0);
}

TEST_CASE("mann-whitney guards sample sizes") {
  std::vector<double> two{1, 2};
  std::vector<double> three{1, 2, 3};
  CHECK_THROWS_AS(mann_whitney_u(two, three, Alternative::Less), TooFewSamples);
  CHECK_THROWS_AS(mann_whitney_u(three, two, Alternative::Less), TooFewSamples);
}

TEST_CASE("mann-whitney exact path matches brute-force enumeration") {
  std::mt19937_64 rng(17);
  for (const auto [n, m] : {std::pair{3, 3}, {4, 3}, {4, 4}, {5, 4}}) {
    std::vector<double> a, b;
    std::set<long> used;
    auto fresh = [&] {
      long v;
      do {
        v = static_cast<long>(rng() % 100000);
      } while (!used.insert(v).second);
      return static_cast<double>(v);
    };
    for (int i = 0; i < n; ++i) a.push_back(fresh());
    for (int i = 0; i < m; ++i) b.push_back(fresh());

    const auto brute = brute_force_mw(a, b);
    const auto less = mann_whitney_u(a, b, Alternative::Less);
    const auto greater = mann_whitney_u(a, b, Alternative::Greater);
    CHECK(less.exact);
    CHECK(less.u == doctest::Approx(brute.u).epsilon(1e-12));
    CHECK(less.p == doctest::Approx(brute.p_less).epsilon(1e-12));
    CHECK(greater.p == doctest::Approx(brute.p_greater).epsilon(1e-12));
  }
}

TEST_CASE("mann-whitney symmetry") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> a, b;
    std::set<long> used;
    auto fresh = [&] {
      long v;
      do {
        v = static_cast<long>(rng() % 1000000);
      } while (!used.insert(v).second);
      return static_cast<double>(v);
    };
    for (int i = 0; i < 6; ++i) a.push_back(fresh());
    for (int i = 0; i < 5; ++i) b.push_back(fresh());

    const auto ab = mann_whitney_u(a, b, Alternative::Less);
    const auto ba = mann_whitney_u(b, a, Alternative::Greater);
    CHECK(ab.u + ba.u == doctest::Approx(30.0));  // U_a + U_b = n*m, untied
    CHECK(ab.p == doctest::Approx(ba.p).epsilon(1e-12));
  }
}

TEST_CASE("exact and approximate p-values agree on 8+8 untied data") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a, b;
    std::set<long> used;
    auto fresh = [&] {
      long v;
      do {
        v = static_cast<long>(rng() % 1000000);
      } while (!used.insert(v).second);
      return static_cast<double>(v);
    };
    for (int i = 0; i < 8; ++i) a.push_back(fresh());
    for (int i = 0; i < 8; ++i) b.push_back(fresh());

    const auto exact = mann_whitney_u(a, b, Alternative::Less);
    REQUIRE(exact.exact);

    // reference normal approximation with continuity correction
    const int n = 8, m = 8;
    double rank_sum = 0;
    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::sort(pooled.begin(), pooled.end());
    for (double v : a) {
      rank_sum += static_cast<double>(std::lower_bound(pooled.begin(), pooled.end(), v) -
                                      pooled.begin()) +
                  1;
    }
    const double u = rank_sum - n * (n + 1) / 2.0;
    const double mu = n * m / 2.0;
    const double sigma = std::sqrt(n * m * (n + m + 1) / 12.0);
    const double approx = 0.5 * std::erfc(-((u + 0.5 - mu) / sigma) / std::sqrt(2.0));
    CHECK(std::fabs(exact.p - approx) < 0.02);
  }
}

TEST_CASE("percent of baseline") {
  CHECK(percent_of_baseline(70, 100) == doctest::Approx(70.0));
  CHECK(percent_of_baseline(3.5, 3.5) == doctest::Approx(100.0));
  CHECK(percent_of_baseline(120.2, 100) == doctest::Approx(120.2));
  CHECK_THROWS_AS(percent_of_baseline(1.0, 0.0), ZeroBaseline);
  CHECK_THROWS_AS(percent_of_baseline(1.0, -2.0), ZeroBaseline);
}

#include "darwin/stats.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "darwin/errors.hpp"

namespace darwin {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double median_sorted(const std::vector<double>& s) {
  const std::size_t n = s.size();
  return n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

// P(Bin(n, 1/2) <= k), exact in long double.
long double binom_cdf_half(int k, int n) {
  long double pmf = std::pow(0.5L, n);  // P(X = 0)
  long double cdf = 0;
  for (int i = 0; i <= k; ++i) {
    cdf += pmf;
    pmf = pmf * (n - i) / (i + 1);
  }
  return cdf;
}

}  // namespace

double median(std::span<const double> samples) {
  if (samples.empty()) throw EmptySamples("median of zero samples");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  return median_sorted(s);
}

CiEstimate median_ci(std::span<const double> samples, double confidence) {
  const int n = static_cast<int>(samples.size());
  if (n < 5) throw TooFewSamples("median_ci needs at least 5 samples");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());

  // Coverage of the rank pair (k, n+1-k), 1-based: 1 - 2 P(X <= k-1).
  int best_k = 0;
  long double best_cov = 0;
  for (int k = 1; 2 * k <= n + 1 && k <= n - k + 1; ++k) {
    if (k == n - k + 1) break;  // degenerate single-point interval
    long double cov = 1.0L - 2.0L * binom_cdf_half(k - 1, n);
    if (cov >= confidence) {
      best_k = k;  // larger k is narrower; keep the last that still covers
      best_cov = cov;
    }
  }
  if (best_k == 0) {
    throw TooFewSamples("median_ci: " + std::to_string(n) +
                        " samples cannot reach the requested confidence");
  }
  CiEstimate ci;
  ci.median = median_sorted(s);
  ci.lo = s[best_k - 1];
  ci.hi = s[n - best_k];
  ci.confidence = static_cast<double>(best_cov);
  return ci;
}

CiEstimate bootstrap_median_ci(std::span<const double> samples, double confidence,
                               int resamples, std::uint64_t seed) {
  const std::size_t n = samples.size();
  if (n < 5) throw TooFewSamples("bootstrap_median_ci needs at least 5 samples");
  std::mt19937_64 rng(seed);
  std::vector<double> boot(resamples);
  std::vector<double> draw(n);
  for (int r = 0; r < resamples; ++r) {
    for (std::size_t i = 0; i < n; ++i) draw[i] = samples[rng() % n];
    std::sort(draw.begin(), draw.end());
    boot[r] = median_sorted(draw);
  }
  std::sort(boot.begin(), boot.end());
  const double alpha = 1.0 - confidence;
  auto quantile = [&](double q) {
    double idx = q * (resamples - 1);
    std::size_t lo = static_cast<std::size_t>(idx);
    std::size_t hi = std::min<std::size_t>(lo + 1, resamples - 1);
    double frac = idx - lo;
    return boot[lo] * (1 - frac) + boot[hi] * frac;
  };
  CiEstimate ci;
  ci.median = median(samples);
  ci.lo = quantile(alpha / 2);
  ci.hi = quantile(1 - alpha / 2);
  ci.confidence = confidence;
  return ci;
}

namespace {

// Null distribution of U as subset counts: ways(n, m, u) counts rank subsets
// of the first sample yielding statistic u.
double exact_count(int n, int m, int u, std::vector<double>& memo, int m_orig,
                   int u_max) {
  if (u < 0) return 0;
  if (n == 0 || m == 0) return u == 0 ? 1 : 0;
  std::size_t key = (static_cast<std::size_t>(n) * (m_orig + 1) + m) * u_max + u;
  if (memo[key] >= 0) return memo[key];
  double r = exact_count(n - 1, m, u - m, memo, m_orig, u_max) +
             exact_count(n, m - 1, u, memo, m_orig, u_max);
  memo[key] = r;
  return r;
}

double binom(int n, int k) {
  double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                                 Alternative alternative) {
  const int n = static_cast<int>(a.size());
  const int m = static_cast<int>(b.size());
  if (n < 3 || m < 3) throw TooFewSamples("mann_whitney_u needs 3 samples per side");
  const int total = n + m;

  struct Tagged {
    double value;
    bool from_a;
  };
  std::vector<Tagged> pooled;
  pooled.reserve(total);
  for (double v : a) pooled.push_back({v, true});
  for (double v : b) pooled.push_back({v, false});
  std::sort(pooled.begin(), pooled.end(),
            [](const Tagged& x, const Tagged& y) { return x.value < y.value; });

  // midranks and tie group sizes
  double rank_sum_a = 0;
  bool ties = false;
  double tie_term = 0;  // sum of t^3 - t over tie groups
  for (int i = 0; i < total;) {
    int j = i;
    while (j < total && pooled[j].value == pooled[i].value) ++j;
    const int t = j - i;
    const double midrank = (i + 1 + j) / 2.0;
    for (int k = i; k < j; ++k) {
      if (pooled[k].from_a) rank_sum_a += midrank;
    }
    if (t > 1) {
      ties = true;
      tie_term += static_cast<double>(t) * t * t - t;
    }
    i = j;
  }
  const double u_a = rank_sum_a - n * (n + 1) / 2.0;

  MannWhitneyResult result;
  result.u = u_a;

  if (!ties && total <= 16) {
    result.exact = true;
    const int u_max = n * m + 1;
    std::vector<double> memo(static_cast<std::size_t>(n + 1) * (m + 1) * u_max, -1);
    const double denom = binom(total, n);
    const int u_obs = static_cast<int>(std::llround(u_a));
    double below = 0;
    for (int u = 0; u <= u_obs; ++u) below += exact_count(n, m, u, memo, m, u_max);
    double above = 0;
    for (int u = u_obs; u <= n * m; ++u) above += exact_count(n, m, u, memo, m, u_max);
    const double p_less = below / denom;
    const double p_greater = above / denom;
    switch (alternative) {
      case Alternative::Less: result.p = p_less; break;
      case Alternative::Greater: result.p = p_greater; break;
      case Alternative::TwoSided:
        result.p = std::min(1.0, 2.0 * std::min(p_less, p_greater));
        break;
    }
    return result;
  }

  const double mu = n * static_cast<double>(m) / 2.0;
  const double var = (n * static_cast<double>(m) / 12.0) *
                     ((total + 1) - tie_term / (static_cast<double>(total) * (total - 1)));
  if (var <= 0) {
    result.p = 1.0;
    return result;
  }
  const double sigma = std::sqrt(var);
  const double p_less = normal_cdf((u_a + 0.5 - mu) / sigma);
  const double p_greater = normal_cdf((mu - u_a + 0.5) / sigma);
  switch (alternative) {
    case Alternative::Less: result.p = p_less; break;
    case Alternative::Greater: result.p = p_greater; break;
    case Alternative::TwoSided:
      result.p = std::min(1.0, 2.0 * std::min(p_less, p_greater));
      break;
  }
  return result;
}

double percent_of_baseline(double variant_median, double baseline_median) {
  if (baseline_median <= 0) {
    throw ZeroBaseline("baseline median must be positive, got " +
                       std::to_string(baseline_median));
  }
  return 100.0 * variant_median / baseline_median;
}

}  // namespace darwin

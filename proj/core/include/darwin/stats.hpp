#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace darwin {

struct CiEstimate {
  double median = 0;
  double lo = 0;
  double hi = 0;
  double confidence = 0;  // achieved coverage, >= the requested level
};

double median(std::span<const double> samples);  // EmptySamples

// Distribution-free order-statistic interval for the median: the narrowest
// rank-symmetric pair (k-th, (n+1-k)-th) whose binomial(n, 1/2) coverage
// meets the requested confidence. Requires n >= 5.
CiEstimate median_ci(std::span<const double> samples, double confidence);

// Percentile-bootstrap alternative to the order-statistic interval.
CiEstimate bootstrap_median_ci(std::span<const double> samples, double confidence,
                               int resamples, std::uint64_t seed);

enum class Alternative { Less, Greater, TwoSided };

struct MannWhitneyResult {
  double u = 0;  // U statistic of the first sample
  double p = 1;
  bool exact = false;
};

// Rank-sum U with midranks for ties. The p-value is exact (count
// distribution over all labelings) when n+m <= 16 and the pooled sample has
// no ties, otherwise a normal approximation with tie and continuity
// corrections. Requires |a| >= 3 and |b| >= 3.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                                 Alternative alternative);

// 100 * variant / baseline; below 100 is an improvement.
double percent_of_baseline(double variant_median, double baseline_median);

}  // namespace darwin

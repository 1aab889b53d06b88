#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace loopcycle {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return lo <= x && x <= hi; }
};

// Streaming mean and unbiased variance (Welford).
class RunningStats {
 public:
  void add(double x);
  std::int64_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double sem() const;

 private:
  std::int64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

double normal_quantile(double p);
double normal_two_sided_p(double z);
double chi_square_sf(double statistic, double dof);

Interval wilson_interval(std::int64_t successes, std::int64_t n, double confidence = 0.95);

// Variance over mean of a count sample.
double dispersion_index(std::span<const double> counts);
// Two-sided interval for the dispersion index under a Poisson null,
// from the chi-square law of (n-1)·D.
Interval dispersion_null_interval(std::int64_t n, double confidence = 0.95);

struct TestResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

// Chi-square test of homogeneity for two integer samples, with
// adjacent-value pooling so every pooled bin has expected count >= min_expected.
TestResult chi_square_two_sample(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                                 double min_expected = 5.0);
// Goodness of fit of integer counts to Poisson(mean), pooled the same way.
TestResult poisson_goodness_of_fit(std::span<const std::int64_t> counts, double mean,
                                   double min_expected = 5.0);
// Two-proportion z-test.
TestResult two_proportion_test(std::int64_t k1, std::int64_t n1, std::int64_t k2, std::int64_t n2);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};
// Weighted least squares y = a + b x with weights 1/sigma^2 (sigma may be empty).
LinearFit linear_fit(std::span<const double> x, std::span<const double> y,
                     std::span<const double> sigma = {});

struct RatioEstimate {
  double ratio = 0.0;
  double se = 0.0;
};
// Ratio of means with delta-method standard error from paired samples.
RatioEstimate ratio_of_means(std::span<const double> num, std::span<const double> den);

}  // namespace loopcycle

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace gfflab {

/// Streaming mean / central moments up to order four. Merging two
/// accumulators is exact (Pebay's pairwise formulas), so partial sums from
/// independent replica blocks can be combined in a fixed order.
class RunningStats {
public:
  void push(double x);
  void merge(const RunningStats &other);

  std::uint64_t count() const { return n_; }
  double mean() const { return mean_; }
  /// Unbiased sample variance.
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  /// Standard error of the mean.
  double stderr_mean() const { return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }
  /// Fourth central moment (biased).
  double central_m4() const { return n_ > 0 ? m4_ / static_cast<double>(n_) : 0.0; }
  /// Large-sample standard error of the sample variance.
  double stderr_variance() const;

private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0, m2_ = 0.0, m3_ = 0.0, m4_ = 0.0;
};

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_sf(double lambda);

/// One-sample KS test of `sample` against a continuous CDF. The sample is
/// copied and sorted.
KsResult ks_test(std::vector<double> sample, const std::function<double(double)> &cdf);

/// Two-sample KS test.
KsResult ks_test_two_sample(std::vector<double> a, std::vector<double> b);

/// CDF of Gamma(shape 1/2, scale theta): erf(sqrt(x / theta)).
inline double gamma_half_cdf(double x, double theta) { return x <= 0.0 ? 0.0 : std::erf(std::sqrt(x / theta)); }

}  // namespace gfflab

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace klab {

/// Sample mean with its standard error.
struct McEstimate {
    double value = 0.0;
    double se = 0.0;
    std::size_t n = 0;

    double band(double k = 3.0) const { return k * se; }
};

McEstimate mc_estimate(const std::vector<double>& samples);

double mean(const std::vector<double>& v);
double variance(const std::vector<double>& v);  // unbiased
double median(std::vector<double> v);

/// Median of per-block means over `blocks` contiguous blocks; the
/// variance-robust estimator used for negative moments.
double median_of_means(const std::vector<double>& v, int blocks);

/// log(mean(exp(x))) computed stably.
double log_mean_exp(const std::vector<double>& logs);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
};

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

/// Two-sided Kolmogorov-Smirnov test of `samples` against a cdf.
/// Returns the KS statistic; pass criterion uses the asymptotic critical
/// value c(alpha)/sqrt(n) with c(0.01) = 1.628.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);
bool ks_pass(double ks_stat, std::size_t n, double alpha = 0.01);

double normal_cdf(double x, double mean, double sd);

/// Chunked deterministic parallel loop; thread count honors KLAB_THREADS.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);
int worker_count();

}  // namespace klab

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace gibbs {

/// A Monte Carlo (or quadrature) estimate with its standard error.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::int64_t n_samples = 0;
  std::string method;
};

double mean(std::span<const double> xs);
/// Unbiased sample variance; 0 for fewer than two values.
double variance(std::span<const double> xs);

/// Effective sample size by Geyer's initial monotone sequence estimator.
/// Never exceeds xs.size(); equals it for a constant trace.
double effective_sample_size(std::span<const double> xs);

/// Split potential scale reduction factor over one or more chains. Each
/// chain is cut in half; returns 1 for constant traces.
double split_rhat(const std::vector<std::vector<double>>& chains);

/// Mean of pooled chains with standard error sqrt(var / sum of per-chain ESS).
Estimate chain_mean(const std::vector<std::vector<double>>& chains, std::string method);

/// Standard error of the mean by non-overlapping batch means.
double batch_means_se(std::span<const double> xs, int n_batches = 20);

/// Runs f(0..n-1) on up to `jobs` threads; results must be written to
/// per-index slots by the caller. Rethrows the first exception.
void parallel_for(int n, int jobs, const std::function<void(int)>& f);

}  // namespace gibbs

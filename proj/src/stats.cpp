#include "gibbs/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace gibbs {

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

double effective_sample_size(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 4) return static_cast<double>(n);
  const double m = mean(xs);
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (xs[i] - m) * (xs[i + lag] - m);
    return s / static_cast<double>(n);
  };
  const double g0 = autocov(0);
  if (!(g0 > 0.0)) return static_cast<double>(n);
  // Sum of paired autocorrelations, truncated at the first non-positive
  // pair and forced monotone.
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = (autocov(2 * k) + autocov(2 * k + 1)) / g0;
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    prev = pair;
    sum += pair;
  }
  const double tau = std::max(1.0, 2.0 * sum - 1.0);
  return std::min(static_cast<double>(n), static_cast<double>(n) / tau);
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::span<const double>> halves;
  std::size_t len = std::numeric_limits<std::size_t>::max();
  for (const auto& c : chains) len = std::min(len, c.size() / 2);
  if (chains.empty() || len < 2) return std::numeric_limits<double>::quiet_NaN();
  for (const auto& c : chains) {
    halves.emplace_back(c.data(), len);
    halves.emplace_back(c.data() + c.size() - len, len);
  }
  std::vector<double> means, vars;
  for (const auto& h : halves) {
    means.push_back(mean(h));
    vars.push_back(variance(h));
  }
  const double w = mean(vars);
  const double b_over_n = variance(means);
  if (!(w > 0.0)) return b_over_n > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  const double n = static_cast<double>(len);
  const double var_plus = (n - 1.0) / n * w + b_over_n;
  return std::sqrt(var_plus / w);
}

Estimate chain_mean(const std::vector<std::vector<double>>& chains, std::string method) {
  std::vector<double> pooled;
  double ess = 0.0;
  for (const auto& c : chains) {
    pooled.insert(pooled.end(), c.begin(), c.end());
    ess += effective_sample_size(c);
  }
  Estimate e;
  e.method = std::move(method);
  e.n_samples = static_cast<std::int64_t>(pooled.size());
  e.value = mean(pooled);
  // Between-chain spread is part of the variance when chain means differ.
  e.std_error = ess > 0.0 ? std::sqrt(variance(pooled) / ess) : 0.0;
  return e;
}

double batch_means_se(std::span<const double> xs, int n_batches) {
  const std::size_t n = xs.size();
  const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(std::max(n_batches, 2)), n);
  if (b < 2) return 0.0;
  const std::size_t len = n / b;
  std::vector<double> means;
  for (std::size_t k = 0; k < b; ++k) means.push_back(mean(xs.subspan(k * len, len)));
  return std::sqrt(variance(means) / static_cast<double>(b));
}

void parallel_for(int n, int jobs, const std::function<void(int)>& f) {
  if (n <= 0) return;
  const int workers = std::max(1, std::min(jobs, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace gibbs

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace airylab {

// One Monte Carlo answer. For zero-success binomial estimates the value is 0,
// std_error holds a one-sided 95% upper bound and zero_success is set; the
// all-success case gets the mirrored bound so the error is never claimed zero.
struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    bool zero_success = false;
    bool censored = false;
};

McEstimate binomial_estimate(std::size_t hits, std::size_t n, std::uint64_t seed);

// Pool binomial shards by total counts. With a common success probability this
// coincides with inverse-variance weighting of the shard estimates.
McEstimate merge_binomial(const std::vector<std::size_t>& hits,
                          const std::vector<std::size_t>& draws, std::uint64_t seed);

// Sample mean with standard error sd/sqrt(n).
McEstimate mean_estimate(const std::vector<double>& values, std::uint64_t seed);

// Ratio estimator sum(num)/sum(den) with linearized (delta-method) SE.
McEstimate ratio_estimate(const std::vector<double>& num, const std::vector<double>& den,
                          std::uint64_t seed);

// Kish effective sample size (sum w)^2 / sum w^2.
double effective_sample_size(const std::vector<double>& weights);

// Run fn(shard_index) on `shards` tasks across up to `threads` workers.
// Shard indices are the determinism boundary: results must depend only on them.
void parallel_shards(std::size_t shards, std::size_t threads,
                     const std::function<void(std::size_t)>& fn);

} // namespace airylab

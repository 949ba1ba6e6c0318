#include "airylab/mc.hpp"

#include <cmath>
#include <thread>

#include "airylab/errors.hpp"

namespace airylab {

McEstimate binomial_estimate(std::size_t hits, std::size_t n, std::uint64_t seed) {
    if (n == 0)
        throw InvalidInput("binomial_estimate: need at least one draw");
    McEstimate e;
    e.samples = n;
    e.seed = seed;
    const double nn = static_cast<double>(n);
    if (hits == 0) {
        // One-sided 95% upper bound from (1-p)^n = 0.05.
        e.value = 0.0;
        e.std_error = 1.0 - std::pow(0.05, 1.0 / nn);
        e.zero_success = true;
        return e;
    }
    if (hits == n) {
        // Mirrored one-sided bound; a zero error would poison weighted fits.
        e.value = 1.0;
        e.std_error = 1.0 - std::pow(0.05, 1.0 / nn);
        return e;
    }
    const double p = static_cast<double>(hits) / nn;
    e.value = p;
    e.std_error = std::sqrt(p * (1.0 - p) / nn);
    return e;
}

McEstimate merge_binomial(const std::vector<std::size_t>& hits,
                          const std::vector<std::size_t>& draws, std::uint64_t seed) {
    if (hits.size() != draws.size() || hits.empty())
        throw InvalidInput("merge_binomial: need matching nonempty shard vectors");
    std::size_t h = 0, n = 0;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        h += hits[i];
        n += draws[i];
    }
    return binomial_estimate(h, n, seed);
}

McEstimate mean_estimate(const std::vector<double>& values, std::uint64_t seed) {
    if (values.empty())
        throw InvalidInput("mean_estimate: need at least one value");
    McEstimate e;
    e.samples = values.size();
    e.seed = seed;
    const double n = static_cast<double>(values.size());
    double s = 0;
    for (double v : values) s += v;
    e.value = s / n;
    double rss = 0;
    for (double v : values) rss += (v - e.value) * (v - e.value);
    e.std_error = values.size() > 1 ? std::sqrt(rss / (n - 1.0) / n) : 0.0;
    return e;
}

McEstimate ratio_estimate(const std::vector<double>& num, const std::vector<double>& den,
                          std::uint64_t seed) {
    if (num.size() != den.size() || num.empty())
        throw InvalidInput("ratio_estimate: need matching nonempty vectors");
    double sn = 0, sd = 0;
    for (std::size_t i = 0; i < num.size(); ++i) { sn += num[i]; sd += den[i]; }
    if (sd == 0.0)
        throw NumericFailure("ratio_estimate: zero denominator mass");
    McEstimate e;
    e.samples = num.size();
    e.seed = seed;
    e.value = sn / sd;
    // Linearized variance of sum(num)/sum(den).
    double rss = 0;
    for (std::size_t i = 0; i < num.size(); ++i) {
        const double r = num[i] - e.value * den[i];
        rss += r * r;
    }
    e.std_error = std::sqrt(rss) / std::abs(sd);
    return e;
}

double effective_sample_size(const std::vector<double>& weights) {
    double s = 0, s2 = 0;
    for (double w : weights) { s += w; s2 += w * w; }
    return s2 > 0.0 ? s * s / s2 : 0.0;
}

void parallel_shards(std::size_t shards, std::size_t threads,
                     const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || shards <= 1) {
        for (std::size_t i = 0; i < shards; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min(threads, shards);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < shards; i += workers) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace airylab

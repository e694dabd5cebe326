#pragma once

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "pathint/errors.hpp"

namespace pathint {

/// Monte Carlo estimate with its sampling pedigree.
struct EstimatorResult {
    double mean = 0.0;
    double std_error = 0.0;
    double ess = 0.0;
    long long samples = 0;
    long long rejected = 0;
    std::uint64_t seed = 0;
    bool low_ess = false;
};

/// Worker count: PATHINT_WORKERS env var, else hardware concurrency.
inline int worker_count() {
    if (const char* env = std::getenv("PATHINT_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1 && v <= 256) return static_cast<int>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(std::min(hw, 8u));
}

/// Run fn(i) for i in [0, n) across workers. Each index writes only its own
/// output slots, so results are identical for any worker count.
template <class Fn>
void parallel_for_samples(long long n, Fn&& fn, int workers = -1) {
    if (workers < 1) workers = worker_count();
    if (workers == 1 || n < 64) {
        for (long long i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<long long> next{0};
    const long long chunk = 16;
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            try {
                for (;;) {
                    const long long start = next.fetch_add(chunk);
                    if (start >= n || failed.load(std::memory_order_relaxed)) return;
                    const long long stop = std::min(n, start + chunk);
                    for (long long i = start; i < stop; ++i) fn(i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!failed.exchange(true)) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failed) std::rethrow_exception(error);
}

/// Deterministic pairwise sum (fixed reduction tree, independent of workers).
inline double pairwise_sum(const double* data, size_t n) {
    if (n <= 16) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += data[i];
        return s;
    }
    const size_t half = n / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

/// Mean with jackknife standard error. For the plain mean the leave-one-out
/// estimate collapses to sqrt(sum (x_i - xbar)^2 / (S (S-1))), evaluated with
/// the same deterministic reduction.
struct SampleSummary {
    double mean = 0.0, std_error = 0.0;
};

inline SampleSummary summarize_mean(const std::vector<double>& xs) {
    const size_t s = xs.size();
    if (s == 0) return {};
    SampleSummary out;
    out.mean = pairwise_sum(xs) / static_cast<double>(s);
    if (s == 1) return out;
    std::vector<double> sq(s);
    for (size_t i = 0; i < s; ++i) sq[i] = (xs[i] - out.mean) * (xs[i] - out.mean);
    out.std_error =
        std::sqrt(pairwise_sum(sq) / (static_cast<double>(s) * (static_cast<double>(s) - 1.0)));
    return out;
}

/// Effective sample size of an importance-weight vector: (sum w)^2 / sum w^2.
inline double effective_sample_size(const std::vector<double>& w) {
    std::vector<double> sq(w.size());
    for (size_t i = 0; i < w.size(); ++i) sq[i] = w[i] * w[i];
    const double s1 = pairwise_sum(w);
    const double s2 = pairwise_sum(sq);
    return s2 > 0 ? s1 * s1 / s2 : 0.0;
}

}  // namespace pathint

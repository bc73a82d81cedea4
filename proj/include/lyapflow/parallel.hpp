#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace lyapflow {

/// Worker count for a `threads` request; 0 means all hardware threads.
inline int resolve_threads(int threads) {
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index writes
/// only its own result slot, so the outcome does not depend on scheduling.
/// If several indices throw, the exception of the lowest index is rethrown.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    const auto workers = static_cast<std::size_t>(std::min<std::size_t>(
        static_cast<std::size_t>(resolve_threads(threads)), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t failed_index = n;
    std::exception_ptr failure;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (i < failed_index) {
                    failed_index = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Fixed-shape pairwise summation.
inline double pairwise_sum(std::span<const double> v) {
    if (v.empty()) return 0.0;
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

/// One-sided 99% standard normal quantile.
inline constexpr double kZ99 = 2.3263478740408408;

struct MeanSe {
    double mean = 0.0;
    double standard_error = 0.0;
    double sd = 0.0;
};

/// Sample mean and sd/√n (sd with n−1 denominator; zero for n = 1).
inline MeanSe mean_and_se(std::span<const double> v) {
    MeanSe out;
    if (v.empty()) return out;
    const double n = static_cast<double>(v.size());
    out.mean = pairwise_sum(v) / n;
    if (v.size() > 1) {
        std::vector<double> sq(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - out.mean) * (v[i] - out.mean);
        out.sd = std::sqrt(pairwise_sum(sq) / (n - 1.0));
        out.standard_error = out.sd / std::sqrt(n);
    }
    return out;
}

}  // namespace lyapflow

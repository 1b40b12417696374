#ifndef LFI_UTIL_HPP
#define LFI_UTIL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

#include "lfi/errors.hpp"

namespace lfi {

inline double mean(std::span<const double> v) {
    if (v.empty()) throw DomainError("mean of empty sample");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Unbiased sample variance.
inline double variance(std::span<const double> v) {
    if (v.size() < 2) throw DomainError("variance needs at least 2 points");
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

inline double stddev(std::span<const double> v) { return std::sqrt(variance(v)); }

// Linear-interpolation quantile of an unsorted sample (R type 7).
inline double quantile(std::span<const double> sample, double p) {
    if (sample.empty()) throw DomainError("quantile of empty sample");
    if (p < 0.0 || p > 1.0) throw DomainError("quantile level outside [0,1]");
    std::vector<double> s(sample.begin(), sample.end());
    std::sort(s.begin(), s.end());
    const double pos = p * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return s[lo] + frac * (s[hi] - s[lo]);
}

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("euclidean_distance: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Static-partition parallel loop.  Each index owns its output slot, so the
// result is identical to the sequential order for any thread count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                         std::size_t threads = 0) {
    if (n == 0) return;
    std::size_t t = threads == 0 ? std::thread::hardware_concurrency() : threads;
    t = std::max<std::size_t>(1, std::min(t, n));
    if (t == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(t);
    const std::size_t chunk = (n + t - 1) / t;
    std::exception_ptr err;
    std::mutex err_mu;
    for (std::size_t w = 0; w < t; ++w) {
        pool.emplace_back([&, w] {
            const std::size_t lo = w * chunk;
            const std::size_t hi = std::min(n, lo + chunk);
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> g(err_mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

} // namespace lfi

#endif

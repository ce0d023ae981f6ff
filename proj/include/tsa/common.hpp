#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace tsa {

/// Invalid user input: bad dimensions, malformed configuration, violated preconditions.
class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite states, singular systems, degenerate denominators.
class numerical_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Corrupted data structures: dangling node ids, missing values, shape mismatches.
class structural_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Resource caps exceeded (node budget, enumeration budget, memory guard).
class resource_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void check_config(bool ok, const std::string& msg) {
    if (!ok) throw config_error(msg);
}

inline bool all_finite(std::span<const double> xs) {
    for (double x : xs)
        if (!std::isfinite(x)) return false;
    return true;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double euclidean_norm(std::span<const double> a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
}

/// Pairwise (cascade) summation: deterministic and more accurate than a naive
/// left-to-right loop. Used by every error-metric reduction.
inline double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 32) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

/// Splits [0, n) into contiguous chunks, one worker thread per chunk. Callers
/// must only write to disjoint outputs indexed by the loop variable, which keeps
/// results identical for every thread count. threads <= 1 runs inline. The
/// first exception (in chunk order) is rethrown on the calling thread.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (threads <= 1 || n < 2048) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, &errors, w, begin, end] {
            try {
                fn(begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace tsa

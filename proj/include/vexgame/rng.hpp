#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace vexgame {

/// Counter-based pseudo random stream (SplitMix64 finalizer over a keyed
/// counter).  Every draw is a pure function of (key, counter), so path j of a
/// simulation can own stream key = seed ^ j and produce the same numbers no
/// matter how work is scheduled.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0)
        : key_(key), ctr_(counter) {}

    static CounterRng for_path(std::uint64_t seed, std::uint64_t path_index) {
        return CounterRng(seed ^ path_index);
    }

    std::uint64_t next_u64() {
        std::uint64_t z = key_ + (++ctr_) * 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform draw in [0, 1) with 53 random bits.
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    /// Index in [0, n) sampled from `weights` (need not be normalized).
    /// Returns the last positive-weight index if rounding pushes u past the
    /// cumulative total.
    int next_weighted(const double* weights, int n) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += weights[i];
        if (!(total > 0.0))
            throw std::invalid_argument("CounterRng: weights must have positive total");
        double u = next_double() * total;
        double acc = 0.0;
        int last_positive = 0;
        for (int i = 0; i < n; ++i) {
            if (weights[i] > 0.0) last_positive = i;
            acc += weights[i];
            if (u < acc) return i;
        }
        return last_positive;
    }

private:
    std::uint64_t key_;
    std::uint64_t ctr_;
};

/// Deterministic pairwise reduction.  The result depends only on the array
/// contents, never on chunking or thread count.
inline double pairwise_sum(const double* x, std::size_t n) {
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = x[0];
        for (std::size_t i = 1; i < n; ++i) s += x[i];
        return s;
    }
    std::size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& x) {
    return pairwise_sum(x.data(), x.size());
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

/// Sample mean and its standard error via pairwise sums.
inline MeanSe mean_se(const std::vector<double>& x) {
    MeanSe r;
    r.n = x.size();
    if (r.n == 0) return r;
    r.mean = pairwise_sum(x) / double(r.n);
    if (r.n < 2) return r;
    std::vector<double> sq(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = x[i] - r.mean;
        sq[i] = d * d;
    }
    double var = pairwise_sum(sq) / double(r.n - 1);
    r.se = std::sqrt(var / double(r.n));
    return r;
}

/// Worker count: VEXGAME_THREADS if set, else the hardware count.  Thread
/// count never changes results; it only splits index ranges.
inline unsigned worker_count() {
    if (const char* env = std::getenv("VEXGAME_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return unsigned(v);
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

/// Runs fn(i) for i in [0, n).  fn must write only to slots owned by i.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    unsigned workers = worker_count();
    if (workers <= 1 || n < 2 * workers) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        std::size_t lo = std::size_t(w) * chunk;
        std::size_t hi = lo + chunk < n ? lo + chunk : n;
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace vexgame

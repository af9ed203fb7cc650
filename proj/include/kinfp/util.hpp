#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

namespace kinfp {

// Fixed-shape summation tree: result depends only on the value sequence,
// never on chunking or thread count.
inline double pairwise_sum(const double* p, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += p[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(p, h) + pairwise_sum(p + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_sum(v.data(), v.size());
}

inline int& thread_cap_ref() {
    static int cap = 0;  // 0 = use hardware concurrency
    return cap;
}

inline void set_thread_cap(int n) { thread_cap_ref() = n; }

inline int effective_threads(std::int64_t work) {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    int cap = thread_cap_ref();
    int n = (cap > 0 && cap < hw) ? cap : hw;
    if (n > 8) n = 8;
    if (static_cast<std::int64_t>(n) > work) n = static_cast<int>(work);
    return n < 1 ? 1 : n;
}

// Each index writes only its own outputs, so the partitioning cannot
// change results.
template <class F>
void parallel_for(std::int64_t n, F&& f) {
    if (n <= 0) return;
    const int nw = effective_threads(n);
    if (nw == 1) {
        for (std::int64_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nw));
    const std::int64_t chunk = (n + nw - 1) / nw;
    for (int w = 0; w < nw; ++w) {
        const std::int64_t b = w * chunk;
        const std::int64_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&f, b, e] {
            for (std::int64_t i = b; i < e; ++i) f(i);
        });
    }
    for (auto& th : pool) th.join();
}

// Shortest round-trip decimal form; keeps reports byte-stable.
inline std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

struct GaussRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;  // sum to 2
};

// Newton on the Legendre recurrence; cached per order.
inline const GaussRule& gauss_legendre(int n) {
    static std::map<int, GaussRule> cache;
    static std::mutex m;
    std::lock_guard<std::mutex> lock(m);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    GaussRule r;
    r.nodes.resize(static_cast<std::size_t>(n));
    r.weights.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        double x = std::cos(std::numbers::pi * (k + 0.75) / (n + 0.5));
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int j = 2; j <= n; ++j) {
                double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            double dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        double p0 = 1.0, p1 = x;
        for (int j = 2; j <= n; ++j) {
            double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
            p0 = p1;
            p1 = p2;
        }
        double dp = n * (x * p1 - p0) / (x * x - 1.0);
        r.nodes[static_cast<std::size_t>(n - 1 - k)] = x;
        r.weights[static_cast<std::size_t>(n - 1 - k)] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return cache.emplace(n, std::move(r)).first->second;
}

}  // namespace kinfp

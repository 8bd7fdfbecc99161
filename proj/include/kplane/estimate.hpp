#pragma once

#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

namespace kplane {

/// A Monte Carlo result: sample mean, standard error of the mean, sample
/// count and the seed that produced it.  Deterministic quadrature also uses
/// this shape, with std_err holding a refinement-difference proxy.
struct Estimate {
    double value = 0.0;
    double std_err = 0.0;
    std::uint64_t samples = 0;
    std::uint64_t seed = 0;
};

/// Welford accumulator with deterministic pairwise merge.
class Accumulator {
public:
    void add(double x) {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }

    std::uint64_t count() const { return n_; }
    double mean() const { return mean_; }

    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }

    double std_err_of_mean() const {
        return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }

    void merge(const Accumulator& o) {
        if (o.n_ == 0) return;
        if (n_ == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
        const double delta = o.mean_ - mean_;
        const double total = na + nb;
        mean_ += delta * nb / total;
        m2_ += o.m2_ + delta * delta * na * nb / total;
        n_ += o.n_;
    }

    Estimate estimate(std::uint64_t seed) const {
        return Estimate{mean(), std_err_of_mean(), n_, seed};
    }

private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// e^a with delta-method error propagation.
inline Estimate pow_of(const Estimate& e, double a) {
    Estimate r = e;
    r.value = std::pow(e.value, a);
    r.std_err = e.value > 0.0 ? std::fabs(a * std::pow(e.value, a - 1.0)) * e.std_err : 0.0;
    return r;
}

/// num/den for independent estimates.
inline Estimate ratio_of(const Estimate& num, const Estimate& den) {
    Estimate r;
    r.value = num.value / den.value;
    const double rn = num.value != 0.0 ? num.std_err / num.value : 0.0;
    const double rd = den.value != 0.0 ? den.std_err / den.value : 0.0;
    r.std_err = std::fabs(r.value) * std::sqrt(rn * rn + rd * rd);
    r.samples = num.samples;
    r.seed = num.seed;
    return r;
}

/// Split `total` samples into per-worker chunks, run `body(chunk_index,
/// chunk_count, acc)` on each, and merge in chunk order.  Results depend on
/// (seed, workers) only, never on scheduling.
template <class Body>
Accumulator run_chunks(std::uint64_t total, int workers, const Body& body) {
    if (workers < 1) workers = 1;
    if (static_cast<std::uint64_t>(workers) > total) workers = total > 0 ? static_cast<int>(total) : 1;
    std::vector<Accumulator> partial(workers);
    if (workers == 1) {
        body(0, total, partial[0]);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        const std::uint64_t base = total / workers, extra = total % workers;
        for (int w = 0; w < workers; ++w) {
            const std::uint64_t count = base + (static_cast<std::uint64_t>(w) < extra ? 1 : 0);
            pool.emplace_back([&, w, count] { body(static_cast<std::uint64_t>(w), count, partial[w]); });
        }
        for (auto& t : pool) t.join();
    }
    Accumulator out;
    for (const auto& p : partial) out.merge(p);
    return out;
}

} // namespace kplane

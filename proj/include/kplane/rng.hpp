#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace kplane {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl64(std::uint64_t x, int s) {
    return (x << s) | (x >> (64 - s));
}

} // namespace detail

/// Deterministic random stream (xoshiro256**) with independent substreams.
/// All distributions are built from raw bits, so a (seed, stream) pair gives
/// identical output on every platform and standard library.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed) {
        std::uint64_t s = seed ^ detail::rotl64(0x9e3779b97f4a7c15ull * (stream + 1), 17);
        for (auto& word : state_) word = detail::splitmix64(s);
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    }

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next() {
        const std::uint64_t result = detail::rotl64(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl64(state_[3], 45);
        return result;
    }

    /// Uniform in the open interval (0,1).
    double u01() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1p-53; }

    double uniform(double a, double b) { return a + (b - a) * u01(); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(u01()));
        const double phi = 2.0 * 3.141592653589793238462643383279502884 * u01();
        spare_ = r * std::sin(phi);
        have_spare_ = true;
        return r * std::cos(phi);
    }

    void normal_fill(std::span<double> out) {
        for (auto& x : out) x = normal();
    }

    /// Uniform on the unit sphere S^{m-1} in R^m.
    std::vector<double> unit_vector(int m) {
        std::vector<double> v(m);
        double n2 = 0.0;
        do {
            normal_fill(v);
            n2 = 0.0;
            for (double x : v) n2 += x * x;
        } while (n2 < 1e-300);
        const double inv = 1.0 / std::sqrt(n2);
        for (auto& x : v) x *= inv;
        return v;
    }

    /// Uniform in the ball of given radius in R^m.
    std::vector<double> ball_point(int m, double radius) {
        std::vector<double> v = unit_vector(m);
        const double r = radius * std::pow(u01(), 1.0 / m);
        for (auto& x : v) x *= r;
        return v;
    }

    /// Point in R^m from the heavy-tailed density
    ///   g(x) = m * (1+|x|)^{-(m+1)} / area(S^{m-1}),
    /// which covers all of space with algebraic tails.  Radius law: with
    /// t = U^{1/m}, r = t/(1-t).
    std::vector<double> heavy_point(int m) {
        std::vector<double> v = unit_vector(m);
        const double t = std::pow(u01(), 1.0 / m);
        const double r = t / (1.0 - t);
        for (auto& x : v) x *= r;
        return v;
    }

    /// Derive an independent stream; deterministic in (seed, index).
    RandomStream substream(std::uint64_t index) const {
        return RandomStream(seed_, index + 0x100);
    }

private:
    std::uint64_t state_[4];
    std::uint64_t seed_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace kplane

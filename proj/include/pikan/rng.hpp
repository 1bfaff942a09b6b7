#pragma once
#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "pikan/common.hpp"

namespace pikan {

// splitmix64 -- used to derive independent streams from (seed, label) so the
// order in which layers draw their weights doesn't matter.
inline uint64_t splitmix64(uint64_t& s) {
    uint64_t z = (s += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// mt19937_64 engine with hand-rolled transforms. std::*_distribution output is
// implementation-defined, which would break bit-exact reproducibility across
// standard libraries, so we only take raw 64-bit words from the engine.
class Rng {
  public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    static Rng derived(uint64_t master, const std::string& label) {
        uint64_t s = master ^ fnv1a(label);
        // two rounds of splitmix decorrelate nearby seeds/labels
        uint64_t a = splitmix64(s);
        uint64_t b = splitmix64(s);
        return Rng(a ^ (b << 1 | b >> 63));
    }
    static Rng derived(uint64_t master, uint64_t idx) {
        uint64_t s = master + 0x632be59bd9b4e019ull * (idx + 1);
        uint64_t a = splitmix64(s);
        uint64_t b = splitmix64(s);
        return Rng(a ^ (b << 1 | b >> 63));
    }

    uint64_t bits() { return eng_(); }

    // uniform in [0,1): 53 mantissa bits
    double uniform01() { return double(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // Box-Muller, no caching (two words per normal keeps draw accounting simple)
    double normal() {
        double u1 = uniform01(), u2 = uniform01();
        while (u1 == 0.0) u1 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }
    double normal(double mean, double std) { return mean + std * normal(); }

    // bounded int in [0, n) via Lemire-style rejection (unbiased)
    uint64_t below(uint64_t n) {
        if (n == 0) throw DomainError("rng: below(0)");
        uint64_t x = eng_();
        __uint128_t m = __uint128_t(x) * n;
        uint64_t l = uint64_t(m);
        if (l < n) {
            uint64_t t = (-n) % n;
            while (l < t) {
                x = eng_();
                m = __uint128_t(x) * n;
                l = uint64_t(m);
            }
        }
        return uint64_t(m >> 64);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

    std::vector<double> normals(size_t n) {
        std::vector<double> v(n);
        for (auto& x : v) x = normal();
        return v;
    }

  private:
    std::mt19937_64 eng_;
};

// Weighted sampling WITHOUT replacement (Efraimidis-Spirakis): keep the k
// largest keys u_i^(1/w_i), equivalently the k smallest -log(u_i)/w_i. For
// k=1 the marginal is the exact categorical distribution w_i / sum(w).
inline std::vector<int> weighted_sample_without_replacement(Rng& rng, const std::vector<double>& w,
                                                            int k) {
    const int n = int(w.size());
    if (k > n) throw ConfigError("weighted sample: k exceeds population");
    if (k <= 0) return {};
    std::vector<std::pair<double, int>> keys(n);
    for (int i = 0; i < n; ++i) {
        if (!(w[i] >= 0.0)) throw DomainError("weighted sample: negative or NaN weight");
        double u = rng.uniform01();
        while (u == 0.0) u = rng.uniform01();
        double key = w[i] > 0.0 ? -std::log(u) / w[i] : std::numeric_limits<double>::infinity();
        keys[i] = {key, i};
    }
    std::nth_element(keys.begin(), keys.begin() + (k - 1), keys.end());
    std::vector<int> out(k);
    for (int i = 0; i < k; ++i) out[i] = keys[i].second;
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace pikan

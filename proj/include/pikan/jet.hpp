#pragma once
#include <array>

#include "pikan/common.hpp"

namespace pikan {

// Truncated Taylor jet: c[k] = f^(k)(x0)/k!, k = 0..K. The batch engine in
// tape.cpp runs the same recurrences over (direction, order) planes; this
// scalar form is the readable reference and what jet_propagate exposes.
struct Jet {
    Vec c;  // size K+1

    Jet() : c(1, 0.0) {}
    explicit Jet(int K, double v = 0.0) : c(K + 1, 0.0) { c[0] = v; }
    static Jet variable(int K, double v) {
        Jet j(K, v);
        if (K >= 1) j.c[1] = 1.0;
        return j;
    }
    int order() const { return int(c.size()) - 1; }
    double deriv(int k) const {  // k-th derivative = k! * c_k
        double f = 1.0;
        for (int i = 2; i <= k; ++i) f *= i;
        return f * c[k];
    }
};

inline Jet operator+(const Jet& a, const Jet& b) {
    Jet y(a.order());
    for (int k = 0; k <= a.order(); ++k) y.c[k] = a.c[k] + b.c[k];
    return y;
}
inline Jet operator-(const Jet& a, const Jet& b) {
    Jet y(a.order());
    for (int k = 0; k <= a.order(); ++k) y.c[k] = a.c[k] - b.c[k];
    return y;
}
inline Jet operator*(double s, const Jet& a) {
    Jet y(a.order());
    for (int k = 0; k <= a.order(); ++k) y.c[k] = s * a.c[k];
    return y;
}
inline Jet operator+(const Jet& a, double s) {
    Jet y = a;
    y.c[0] += s;
    return y;
}

// Cauchy product truncated at K
inline Jet operator*(const Jet& a, const Jet& b) {
    const int K = a.order();
    Jet y(K);
    for (int k = 0; k <= K; ++k) {
        double s = 0.0;
        for (int j = 0; j <= k; ++j) s += a.c[j] * b.c[k - j];
        y.c[k] = s;
    }
    return y;
}

inline Jet jet_div(const Jet& a, const Jet& b) {
    const int K = a.order();
    if (b.c[0] == 0.0) throw DomainError("jet division by zero constant term");
    Jet y(K);
    for (int k = 0; k <= K; ++k) {
        double s = a.c[k];
        for (int j = 1; j <= k; ++j) s -= b.c[j] * y.c[k - j];
        y.c[k] = s / b.c[0];
    }
    return y;
}

inline Jet jet_powi(const Jet& a, int p) {
    if (p < 0) throw DomainError("jet_powi: negative exponent");
    Jet y(a.order(), 1.0);
    for (int i = 0; i < p; ++i) y = y * a;
    return y;
}

// tanh via t' = 1 - t^2:  k t_k = sum_{j=1..k} j u_j p_{k-j},  p = 1 - t*t
inline Jet jet_tanh(const Jet& u) {
    const int K = u.order();
    Jet t(K), p(K);
    t.c[0] = std::tanh(u.c[0]);
    p.c[0] = 1.0 - t.c[0] * t.c[0];
    for (int k = 1; k <= K; ++k) {
        double s = 0.0;
        for (int j = 1; j <= k; ++j) s += double(j) * u.c[j] * p.c[k - j];
        t.c[k] = s / double(k);
        double q = 0.0;
        for (int j = 0; j <= k; ++j) q += t.c[j] * t.c[k - j];
        p.c[k] = -q;
    }
    return t;
}

// joint sine/cosine:  k s_k = sum j u_j c_{k-j};  k c_k = -sum j u_j s_{k-j}
inline void jet_sincos(const Jet& u, Jet& s, Jet& c) {
    const int K = u.order();
    s = Jet(K);
    c = Jet(K);
    s.c[0] = std::sin(u.c[0]);
    c.c[0] = std::cos(u.c[0]);
    for (int k = 1; k <= K; ++k) {
        double as = 0.0, ac = 0.0;
        for (int j = 1; j <= k; ++j) {
            as += double(j) * u.c[j] * c.c[k - j];
            ac += double(j) * u.c[j] * s.c[k - j];
        }
        s.c[k] = as / double(k);
        c.c[k] = -ac / double(k);
    }
}
inline Jet jet_sin(const Jet& u) {
    Jet s, c;
    jet_sincos(u, s, c);
    return s;
}
inline Jet jet_cos(const Jet& u) {
    Jet s, c;
    jet_sincos(u, s, c);
    return c;
}

inline Jet jet_exp(const Jet& u) {
    const int K = u.order();
    Jet e(K);
    e.c[0] = std::exp(u.c[0]);
    for (int k = 1; k <= K; ++k) {
        double s = 0.0;
        for (int j = 1; j <= k; ++j) s += double(j) * u.c[j] * e.c[k - j];
        e.c[k] = s / double(k);
    }
    return e;
}

}  // namespace pikan

#pragma once
#include "pikan/common.hpp"

namespace pikan {

// ---------------------------------------------------------------------------
// Chebyshev basis on a tanh warp: B_m(x) = T_m(tanh x), m = 1..D.
// T_0 is deliberately excluded; layer biases span the constants.
// ---------------------------------------------------------------------------

// values B_1..B_D at x; out has size D
void cheby_eval(int D, double x, double* out);

// values and d/dx
void cheby_eval_deriv(int D, double x, double* val, double* der);

// T_1..T_D at tau (no warp). Shared by the scalar path and the order-0 plane
// of the batch engine; the operation order here is the contract for both.
inline void cheby_T(int D, double tau, double* T) {
    double Tm2 = 1.0, Tm1 = tau;
    for (int m = 1; m <= D; ++m) {
        if (m == 1) {
            T[0] = tau;
            continue;
        }
        double c = tau * Tm1;
        double Tm = 2.0 * c - Tm2;
        T[m - 1] = Tm;
        Tm2 = Tm1;
        Tm1 = Tm;
    }
}

// ---------------------------------------------------------------------------
// Normalized sine basis: B_m(x) = (sin(w_m x + p_m) - mu_m) / sigma_m with
// mu, sigma the exact N(0,1)-input mean/std of sin(w x + p).
// ---------------------------------------------------------------------------

struct SineParams {
    Vec omega;  // trainable frequencies
    Vec phase;  // trainable phases
    int size() const { return int(omega.size()); }
};

// sigma below this is a degenerate basis function (w ~ 0: sin(p) is constant)
inline constexpr double kSineSigmaFloor = 1e-8;

struct SineMoments {
    double mu, sigma;
    // partials for backprop through the normalization
    double dmu_dw, dmu_dp, dsigma_dw, dsigma_dp;
};

// throws DomainError when sigma <= kSineSigmaFloor
SineMoments sine_mu_sigma(double w, double p);

// values B_1..B_D at x; out has size params.size()
void sine_eval(const SineParams& params, double x, double* out);

// ---------------------------------------------------------------------------
// Gauss-Hermite quadrature (physicists' convention):
//   integral e^{-t^2} f(t) dt ~= sum_i w_i f(t_i)
// Nodes/weights via Golub-Welsch on the Jacobi matrix (works for any n; the
// classical Newton-on-recurrence route overflows around n = 512).
// ---------------------------------------------------------------------------
struct Quadrature {
    Vec nodes, weights;
};
Quadrature gauss_hermite(int n);

// E[f(z)], z ~ N(0,1), from a physicists' GH rule
template <class F>
double gauss_hermite_expect(const Quadrature& q, F&& f) {
    const double inv_sqrt_pi = 0.5641895835477562869480794515608;
    double s = 0.0;
    const int n = int(q.nodes.size());
    for (int i = 0; i < n; ++i) s += q.weights[i] * f(1.4142135623730950488016887242097 * q.nodes[i]);
    return inv_sqrt_pi * s;
}

// ---------------------------------------------------------------------------
// Basis second moments under z ~ N(0,1):
//   mu0_m = E[B_m(z)^2],  mu1_m = E[B_m'(z)^2]
// ---------------------------------------------------------------------------
struct BasisMoments {
    Vec mu0, mu1;
};

// Chebyshev family via quadrature; results cached per (D, n_nodes)
const BasisMoments& cheby_moments(int D, int gh_nodes = 128);

// Sine family in closed form: mu0_m = 1 exactly (the basis is normalized),
// mu1_m = w^2 (1/2 + 1/2 e^{-2w^2} cos 2p) / sigma^2.
BasisMoments sine_moments(const SineParams& params);

}  // namespace pikan

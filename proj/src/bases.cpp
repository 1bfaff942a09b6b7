#include "pikan/bases.hpp"

#include <Eigen/Dense>
#include <map>

namespace pikan {

void cheby_eval(int D, double x, double* out) {
    if (D < 1) throw ConfigError("cheby_eval: D must be >= 1");
    cheby_T(D, std::tanh(x), out);
}

void cheby_eval_deriv(int D, double x, double* val, double* der) {
    if (D < 1) throw ConfigError("cheby_eval_deriv: D must be >= 1");
    const double tau = std::tanh(x);
    const double dtau = 1.0 - tau * tau;  // d tanh/dx
    cheby_T(D, tau, val);
    // dT_m/dtau by differentiating the recurrence
    double Tm2 = 1.0, Tm1 = tau, Pm2 = 0.0, Pm1 = 1.0;
    for (int m = 1; m <= D; ++m) {
        if (m == 1) {
            der[0] = 1.0 * dtau;
            continue;
        }
        double c = tau * Tm1;
        double Tm = 2.0 * c - Tm2;
        double Pm = 2.0 * Tm1 + 2.0 * tau * Pm1 - Pm2;
        der[m - 1] = Pm * dtau;
        Tm2 = Tm1;
        Tm1 = Tm;
        Pm2 = Pm1;
        Pm1 = Pm;
    }
}

SineMoments sine_mu_sigma(double w, double p) {
    SineMoments m;
    const double E1 = std::exp(-0.5 * w * w);   // e^{-w^2/2}
    const double E2 = std::exp(-2.0 * w * w);   // e^{-2w^2}
    const double sp = std::sin(p), cp = std::cos(p);
    const double s2p = std::sin(2.0 * p), c2p = std::cos(2.0 * p);
    m.mu = E1 * sp;
    const double var = 0.5 - 0.5 * E2 * c2p - m.mu * m.mu;
    if (!(var > kSineSigmaFloor * kSineSigmaFloor))
        throw DomainError("sine basis: degenerate (sigma ~ 0); frequency too close to zero");
    m.sigma = std::sqrt(var);
    m.dmu_dw = -w * E1 * sp;
    m.dmu_dp = E1 * cp;
    const double dvar_dw = 2.0 * w * E2 * c2p - 2.0 * m.mu * m.dmu_dw;
    const double dvar_dp = E2 * s2p - 2.0 * m.mu * m.dmu_dp;
    m.dsigma_dw = dvar_dw / (2.0 * m.sigma);
    m.dsigma_dp = dvar_dp / (2.0 * m.sigma);
    return m;
}

void sine_eval(const SineParams& params, double x, double* out) {
    const int D = params.size();
    for (int m = 0; m < D; ++m) {
        SineMoments sm = sine_mu_sigma(params.omega[m], params.phase[m]);
        out[m] = (std::sin(params.omega[m] * x + params.phase[m]) - sm.mu) / sm.sigma;
    }
}

Quadrature gauss_hermite(int n) {
    if (n < 1) throw ConfigError("gauss_hermite: n must be >= 1");
    // Jacobi matrix for (physicists') Hermite: diag 0, offdiag sqrt(k/2)
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        double b = std::sqrt(double(k) / 2.0);
        J(k - 1, k) = b;
        J(k, k - 1) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    if (es.info() != Eigen::Success) throw NumericError("gauss_hermite: eigensolve failed");
    Quadrature q;
    q.nodes.resize(n);
    q.weights.resize(n);
    const double sqrt_pi = 1.7724538509055160272981674833411;
    for (int i = 0; i < n; ++i) {
        q.nodes[i] = es.eigenvalues()(i);
        double v0 = es.eigenvectors()(0, i);
        q.weights[i] = sqrt_pi * v0 * v0;
    }
    return q;
}

const BasisMoments& cheby_moments(int D, int gh_nodes) {
    static std::map<std::pair<int, int>, BasisMoments> cache;
    auto key = std::make_pair(D, gh_nodes);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    Quadrature q = gauss_hermite(gh_nodes);
    BasisMoments bm;
    bm.mu0.assign(D, 0.0);
    bm.mu1.assign(D, 0.0);
    std::vector<double> val(D), der(D);
    const double inv_sqrt_pi = 0.5641895835477562869480794515608;
    const double sqrt2 = 1.4142135623730950488016887242097;
    for (size_t i = 0; i < q.nodes.size(); ++i) {
        const double z = sqrt2 * q.nodes[i];
        const double w = q.weights[i] * inv_sqrt_pi;
        cheby_eval_deriv(D, z, val.data(), der.data());
        for (int m = 0; m < D; ++m) {
            bm.mu0[m] += w * val[m] * val[m];
            bm.mu1[m] += w * der[m] * der[m];
        }
    }
    return cache.emplace(key, std::move(bm)).first->second;
}

BasisMoments sine_moments(const SineParams& params) {
    const int D = params.size();
    BasisMoments bm;
    bm.mu0.assign(D, 1.0);  // exact: the basis is normalized to unit variance
    bm.mu1.assign(D, 0.0);
    for (int m = 0; m < D; ++m) {
        SineMoments sm = sine_mu_sigma(params.omega[m], params.phase[m]);
        const double w = params.omega[m];
        const double E2 = std::exp(-2.0 * w * w);
        // E[cos^2(wz+p)] = 1/2 + 1/2 e^{-2w^2} cos 2p
        bm.mu1[m] = w * w * (0.5 + 0.5 * E2 * std::cos(2.0 * params.phase[m])) / (sm.sigma * sm.sigma);
    }
    return bm;
}

}  // namespace pikan

#include "pikan/initsch.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace pikan {

Vec glorot_like_sigmas(const BasisMoments& mom, int d_in, int d_out, int D,
                       double gain) {
    if (d_in < 1 || d_out < 1 || D < 1) throw ConfigError("glorot_like_sigmas: bad fans");
    if (int(mom.mu0.size()) < D || int(mom.mu1.size()) < D)
        throw ConfigError("glorot_like_sigmas: moment table shorter than D");
    Vec s(D);
    for (int m = 0; m < D; ++m) {
        const double den = d_in * mom.mu0[m] + d_out * mom.mu1[m];
        if (den == 0.0)
            throw DomainError("glorot_like_sigmas: degenerate moments at term " +
                              std::to_string(m + 1));
        // written exactly like this so D=1, mu=1 reduces to sqrt(2/(din+dout))
        s[m] = gain * std::sqrt(2.0 / (D * den));
    }
    return s;
}

double default_cheby_sigma(int d_in, int D) {
    if (d_in < 1 || D < 1) throw ConfigError("default_cheby_sigma: bad shape");
    return 1.0 / std::sqrt(double(d_in) * (D + 1));
}

void init_coefficients(Rng& rng, double* w, int d_out, int d_in, int D,
                       const Vec& sigmas) {
    if (int(sigmas.size()) != D) throw ConfigError("init_coefficients: sigma count != D");
    for (int j = 0; j < d_out; ++j)
        for (int i = 0; i < d_in; ++i)
            for (int m = 0; m < D; ++m) w[(size_t(j) * d_in + i) * D + m] = rng.normal() * sigmas[m];
}

void InitPlan::zero(const std::string& name) { rules[name] = SliceInit{}; }

void InitPlan::constant(const std::string& name, double v) {
    SliceInit r;
    r.kind = SliceInit::Kind::Constant;
    r.c0 = v;
    rules[name] = r;
}

void InitPlan::normal(const std::string& name, double mean, double std) {
    SliceInit r;
    r.kind = SliceInit::Kind::Normal;
    r.c0 = mean;
    r.c1 = std;
    rules[name] = r;
}

void InitPlan::per_term(const std::string& name, Vec sigmas) {
    SliceInit r;
    r.kind = SliceInit::Kind::PerTerm;
    r.sigmas = std::move(sigmas);
    rules[name] = r;
}

void InitPlan::sine_glorot(const std::string& name, const std::string& omega,
                           const std::string& phase, int fan_in, int fan_out,
                           double gain) {
    SliceInit r;
    r.kind = SliceInit::Kind::SineGlorot;
    r.dep = omega;
    r.dep2 = phase;
    r.fan_in = fan_in;
    r.fan_out = fan_out;
    r.gain = gain;
    rules[name] = r;
}

void InitPlan::rwf_vector(const std::string& name, const std::string& s_slice,
                          double w_sigma) {
    SliceInit r;
    r.kind = SliceInit::Kind::RwfVector;
    r.dep = s_slice;
    r.c1 = w_sigma;
    rules[name] = r;
}

static void fill_per_term(Rng& rng, double* w, const ParamSlice& sl, const Vec& sig) {
    const int D = int(sig.size());
    if (D < 1 || sl.cols % D != 0)
        throw ConfigError("init: slice " + sl.name + " not a multiple of D columns");
    init_coefficients(rng, w, sl.rows, sl.cols / D, D, sig);
}

Vec init_params(const ParamLayout& layout, const InitPlan& plan, uint64_t seed) {
    Vec th(layout.total, 0.0);
    // two passes: rules that read another slice (sine sigmas from drawn
    // frequencies, RWF vectors from drawn log-scales) run second
    for (int pass = 0; pass < 2; ++pass) {
        for (const ParamSlice& sl : layout.slices) {
            auto it = plan.rules.find(sl.name);
            if (it == plan.rules.end())
                throw ConfigError("init: no rule for slice " + sl.name);
            const SliceInit& r = it->second;
            const bool dependent = r.kind == SliceInit::Kind::SineGlorot ||
                                   r.kind == SliceInit::Kind::RwfVector;
            if (dependent != (pass == 1)) continue;
            Rng rng = Rng::derived(seed, sl.name);
            double* w = th.data() + sl.offset;
            const int n = sl.size();
            switch (r.kind) {
                case SliceInit::Kind::Zero:
                    break;
                case SliceInit::Kind::Constant:
                    for (int i = 0; i < n; ++i) w[i] = r.c0;
                    break;
                case SliceInit::Kind::Normal:
                    for (int i = 0; i < n; ++i) w[i] = rng.normal(r.c0, r.c1);
                    break;
                case SliceInit::Kind::PerTerm:
                    fill_per_term(rng, w, sl, r.sigmas);
                    break;
                case SliceInit::Kind::SineGlorot: {
                    const ParamSlice& so = layout.at(layout.find(r.dep));
                    const ParamSlice& sp = layout.at(layout.find(r.dep2));
                    if (so.size() != sp.size())
                        throw ConfigError("init: omega/phase size mismatch for " + sl.name);
                    SineParams params;
                    params.omega.assign(th.begin() + so.offset, th.begin() + so.offset + so.size());
                    params.phase.assign(th.begin() + sp.offset, th.begin() + sp.offset + sp.size());
                    const BasisMoments mom = sine_moments(params);
                    fill_per_term(rng, w, sl,
                                  glorot_like_sigmas(mom, r.fan_in, r.fan_out,
                                                     params.size(), r.gain));
                    break;
                }
                case SliceInit::Kind::RwfVector: {
                    const ParamSlice& ss = layout.at(layout.find(r.dep));
                    if (ss.size() != sl.rows)
                        throw ConfigError("init: log-scale size != rows for " + sl.name);
                    const double* s = th.data() + ss.offset;
                    for (int j = 0; j < sl.rows; ++j) {
                        const double f = std::exp(-s[j]);
                        for (int i = 0; i < sl.cols; ++i)
                            w[size_t(j) * sl.cols + i] = rng.normal() * r.c1 * f;
                    }
                    break;
                }
            }
        }
    }
    return th;
}

LsSolution solve_least_squares(const double* A, int n, int p, const double* y,
                               double ridge) {
    if (n < 1 || p < 1) throw ConfigError("least squares: empty system");
    if (ridge < 0.0) throw ConfigError("least squares: negative ridge");
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMat> Am(A, n, p);
    Eigen::Map<const Eigen::VectorXd> ym(y, n);
    LsSolution out;
    Eigen::VectorXd b;
    if (ridge > 0.0) {
        Eigen::MatrixXd aug(n + p, p);
        aug.topRows(n) = Am;
        aug.bottomRows(p) = std::sqrt(ridge) * Eigen::MatrixXd::Identity(p, p);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + p);
        rhs.head(n) = ym;
        b = aug.householderQr().solve(rhs);
    } else {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Am);
        if (qr.rank() < p) {
            out.min_norm = true;
            b = Eigen::MatrixXd(Am).completeOrthogonalDecomposition().solve(ym);
        } else {
            b = qr.solve(ym);
        }
    }
    out.residual = (Am * b - ym).norm();
    out.coeff.assign(b.data(), b.data() + p);
    return out;
}

}  // namespace pikan

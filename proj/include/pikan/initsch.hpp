#pragma once

#include <map>
#include <string>

#include "pikan/bases.hpp"
#include "pikan/common.hpp"
#include "pikan/rng.hpp"
#include "pikan/tape.hpp"

namespace pikan {

// ---------------------------------------------------------------------------
// Weight initialization.
//
// The basis-aware rule sizes per-term standard deviations from the second
// moments of the basis family so that a layer preserves signal variance in
// both the forward and backward pass:
//
//   sigma_m = gain * sqrt( (1/D) * 2 / (d_in*mu0_m + d_out*mu1_m) )
//
// With D = 1 and mu0 = mu1 = 1 this is standard Glorot, bit for bit.
// ---------------------------------------------------------------------------

// throws DomainError when d_in*mu0_m + d_out*mu1_m == 0 for some m
Vec glorot_like_sigmas(const BasisMoments& mom, int d_in, int d_out, int D,
                       double gain);

// the plain scheme: one sigma for the whole layer, 1/sqrt(d_in*(D+1))
double default_cheby_sigma(int d_in, int D);

// Fill a row-major (d_out x d_in*D) coefficient block; entry (j, i*D + m)
// is drawn N(0, sigmas[m]^2). Draw order is row-major, part of the
// determinism contract.
void init_coefficients(Rng& rng, double* w, int d_out, int d_in, int D,
                       const Vec& sigmas);

// ---------------------------------------------------------------------------
// Per-slice init rules. Model builders attach one rule per parameter slice;
// init_params materializes the whole flat vector. Each slice draws from its
// own stream keyed by slice name, so layout order never changes values.
// ---------------------------------------------------------------------------

struct SliceInit {
    enum class Kind {
        Zero,
        Constant,    // every entry = c0
        Normal,      // N(c0, c1^2)
        PerTerm,     // column c of a basis contraction ~ N(0, sigmas[c % D]^2)
        SineGlorot,  // like PerTerm but sigmas depend on the drawn frequencies
        RwfVector,   // v = W * exp(-s) row-wise, W ~ N(0, c1^2)
    };
    Kind kind = Kind::Zero;
    double c0 = 0.0;
    double c1 = 0.0;
    Vec sigmas;
    // SineGlorot: dep/dep2 name the omega/phase slices, fans give the rule's
    // d_in/d_out. RwfVector: dep names the log-scale slice s.
    std::string dep, dep2;
    int fan_in = 0, fan_out = 0;
    double gain = 1.0;
};

struct InitPlan {
    std::map<std::string, SliceInit> rules;

    void zero(const std::string& name);
    void constant(const std::string& name, double v);
    void normal(const std::string& name, double mean, double std);
    void per_term(const std::string& name, Vec sigmas);
    void sine_glorot(const std::string& name, const std::string& omega,
                     const std::string& phase, int fan_in, int fan_out,
                     double gain);
    void rwf_vector(const std::string& name, const std::string& s_slice,
                    double w_sigma);
};

// throws ConfigError when a layout slice has no rule
Vec init_params(const ParamLayout& layout, const InitPlan& plan, uint64_t seed);

// ---------------------------------------------------------------------------
// Least squares, used by the physics-informed output init.
// ---------------------------------------------------------------------------

struct LsSolution {
    Vec coeff;
    double residual;  // ||A b - y||, data part only
    bool min_norm = false;
};

// argmin_b ||A b - y||^2 + ridge ||b||^2 via orthogonal factorization of the
// augmented system. A is row-major n x p. With ridge = 0 and rank-deficient A
// falls back to the minimum-norm solution and flags it.
LsSolution solve_least_squares(const double* A, int n, int p, const double* y,
                               double ridge);

}  // namespace pikan

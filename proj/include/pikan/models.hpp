#pragma once

#include <memory>
#include <string>
#include <vector>

#include "pikan/initsch.hpp"
#include "pikan/tape.hpp"

namespace pikan {

// ---------------------------------------------------------------------------
// Network architectures. Builders emit the forward graph into a Program and
// register one init rule per parameter slice; the same spec can be emitted
// into several programs (residual / initial-condition / plain evaluation)
// that share one ParamLayout.
// ---------------------------------------------------------------------------

enum class Arch { Cpikan, RgaKan, PirateNet };

struct PeriodicCoord {
    int coord = 0;
    double length = 0.0;  // period L; embedding frequency is 2*pi/L
};

struct DirichletCoord {
    int coord = 0;
    double lo = 0.0, hi = 0.0;
};

struct ModelSpec {
    Arch arch = Arch::Cpikan;
    int d_in = 1, d_out = 1;
    int width = 16;       // hidden width
    int depth = 2;        // Cpikan: hidden layer count; RgaKan/PirateNet: block count
    int degree = 5;       // Chebyshev terms per edge
    int sine_degree = 5;  // sine terms of the RgaKan input layer
    std::vector<PeriodicCoord> periodic;
    std::vector<DirichletCoord> dirichlet;
    std::string scheme = "glorot_like";  // or "default"
    double gain = 1.0;
    double first_layer_gain = 1.0;  // e.g. sqrt(3) compensates U(-1,1) inputs
    double alpha_init = 0.0;        // block mix at init, 0 or 1
    double beta_init = 0.0;         // RgaKan inner mix at init, 0 or 1
};

struct ModelNodes {
    int u = -1;         // network output
    int u_raw = -1;     // before Dirichlet shaping (== u when unshaped)
    int out_feat = -1;  // node feeding the output contraction
    std::string out_w;  // output weight slice
    std::string out_b;  // empty when the output carries no bias
    int embed_width = 0;
};

ModelNodes emit_model(Program& prog, const ModelSpec& spec, InitPlan& plan);

// closed-form trainable-parameter count; always equals the layout total
long long count_params(const ModelSpec& spec);

struct Model {
    ModelSpec spec;
    ParamLayout layout;
    Program prog{&layout};
    ModelNodes nodes;
    InitPlan plan;
};

std::unique_ptr<Model> build_model(const ModelSpec& spec);
Vec init_model_params(const Model& m, uint64_t seed);

// batched plain evaluation; output column-major: entry (j, i) at [j*n + i]
Vec model_eval(const Model& m, const Vec& theta, const double* pts, int n);

// ---------------------------------------------------------------------------
// Scalar reference semantics of the layer ops (the batch engine is tested
// against these).
// ---------------------------------------------------------------------------

// y_j = sum_{i,m} w[j, i*D+m] B_m(x_i) + b_j; pass b = nullptr for no bias
void cheby_layer_forward(const double* w, const double* b, int d_out, int d_in,
                         int D, const double* x, double* y);

// same contraction over the normalized sine basis
void sine_layer_forward(const double* w, const double* c, int d_out, int d_in,
                        const SineParams& sp, const double* x, double* y);

void rga_gates_forward(const double* wu, const double* cu, const double* wv,
                       const double* cv, int d, int D, const double* s,
                       double* U, double* V);

// f -> gate mix -> beta mix -> second layer -> gate mix -> alpha mix
void rga_block_forward(const double* w1, const double* c1, const double* w2,
                       const double* c2, double alpha, double beta, int d,
                       int D, const double* x, const double* U,
                       const double* V, double* out);

// periodic coordinates map to (cos, sin) pairs in coordinate order;
// the result mirrors the tape's embedding column layout
Vec bc_embed(const ModelSpec& spec, const double* pt);

// product of normalized parabolas over the Dirichlet coordinates; 1 at the
// midpoint, 0 on the boundary (same arithmetic as the tape's shaping node)
double dirichlet_phi(const ModelSpec& spec, const double* pt);

// first-order behaviour of a Chebyshev layer around 0:
// wt_ji = sum over odd m of m * (-1)^((m-1)/2) * w[j, i*D+m]
Vec effective_weight_matrix(const double* w, int d_out, int d_in, int D);

// ---------------------------------------------------------------------------
// Physics-informed output initialization: least-squares fit of the output
// layer (coefficients and bias when present) to targets at given points,
// holding all upstream parameters fixed. Shaped models fit targets through
// the shaping factor.
// ---------------------------------------------------------------------------

struct PiInitResult {
    double misfit = 0.0;  // ||u - targets|| over the fit points after init
    bool min_norm = false;
};

PiInitResult physics_informed_output_init(const Model& m, Vec& theta,
                                          const double* pts, int n,
                                          const double* targets,
                                          double ridge = 1e-8,
                                          int min_points = 8);

}  // namespace pikan

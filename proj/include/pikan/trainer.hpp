#pragma once
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "pikan/common.hpp"
#include "pikan/models.hpp"
#include "pikan/problems.hpp"
#include "pikan/rng.hpp"

namespace pikan {

// ---------------------------------------------------------------------------
// loss weighting and the four adaptive techniques
// ---------------------------------------------------------------------------

struct LossWeights {
    double pde = 1.0;
    double ic = 1.0;
};

struct RadConfig {
    bool enabled = false;
    double delta = 1.0;
    double C = 1.0;
    long long period = 2000;  // iterations between pool resamples
    int n_pde = 4096;         // active set size (also used when rad is off)
};

struct RbaConfig {
    bool enabled = false;
    double gamma = 0.999;
    double eta = 0.01;
};

struct CausalConfig {
    bool enabled = false;
    int segments = 32;
    double eps = 1.0;
};

struct AnnealConfig {
    bool enabled = false;
    double a = 0.9;
    long long period = 1000;
    double eps_grad = 1e-12;
};

// w_i = exp(-eps * sum_{j<i} L_j); w_0 = 1 by the empty sum
Vec causal_weights(const Vec& seg_losses, double eps);

// alpha[idx[k]] <- gamma*alpha[idx[k]] + eta*absres[k]/max(absres); when idx
// is null, absres[k] pairs with alpha[k]. All-zero residuals decay only.
void rba_update(Vec& alpha, const std::vector<int>* idx, const Vec& absres,
                double gamma, double eta);

// categorical draw of n indices without replacement, p_i proportional to
// (w_i^delta / mean_j w_j^delta) + C over the weighted residuals w
std::vector<int> rad_resample(const Vec& weighted_res, int n, double delta, double C,
                              Rng& rng);

// lambda_hat = (sum norms)/(norm + guard); lambda <- a*lambda + (1-a)*lambda_hat
void anneal_update(const Vec& grad_norms, Vec& lambdas, double a, double eps_grad);

// ---------------------------------------------------------------------------
// composite loss arithmetic, shared between the training loop and the tests
// ---------------------------------------------------------------------------

struct LossOut {
    double total = 0, pde = 0, ic = 0;  // pde/ic are the lambda-free terms
    Vec seg_loss;                       // per-segment weighted mean squares
    Vec causal_w;                       // per-segment weights (1 when off)
    Vec dres, dic;                      // lambda-free seeds dL/dres, dL/dic
};

// res: signed pde residuals over the active points; rba: matching weights or
// null; ic_err/ic_rba: stacked initial-condition rows; seg_of: per-point
// causal segment id (null when causal is off)
LossOut composite_loss_core(const Vec& res, const Vec* rba, const Vec* ic_err,
                            const Vec* ic_rba, const std::vector<int>* seg_of,
                            const CausalConfig& causal, const LossWeights& w,
                            bool want_grads);

// tape-driven wrapper used by tests and one-off evaluations; the training
// loop keeps persistent tapes but runs the identical core. grad, when given,
// receives the lambda-scaled total gradient.
LossOut composite_loss(Model& m, const Vec& theta, const PdeProblem& p,
                       const CollocationPool& pool, const LossWeights& w,
                       const CausalConfig& causal, bool use_rba, Vec* grad = nullptr);

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

struct Schedule {
    double peak = 1e-3;
    long long warmup = 1000;
    double decay = 0.9;
    long long decay_period = 2000;
};

// t is 1-based: linear ramp to peak over the warmup, then staircase decay
double lr_schedule(long long t, const Schedule& s);

struct AdamState {
    Vec m, v;
    long long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    void init(size_t n);
};

void adam_step(AdamState& opt, Vec& params, const Vec& grad, double lr);

// ---------------------------------------------------------------------------
// run orchestration
// ---------------------------------------------------------------------------

enum class RunKind { Pde, Fit };

struct RunConfig {
    RunKind kind = RunKind::Pde;
    std::string problem = "poisson";  // pde name, or f1..f5 for fitting runs
    double helm_a1 = 1, helm_a2 = 4;
    double poisson_omega = 1;
    bool sg_literal = false;

    std::string arch = "rga_kan";  // rga_kan | cpikan | piratenet
    int width = 16, depth = 2, degree = 5, sine_degree = 5;
    std::string init_scheme = "glorot_like";  // or "default"
    double gain = 1.0;
    double first_layer_gain = 0.0;  // 0 = scheme default
    double alpha_init = 0.0, beta_init = 0.0;
    bool pi_init = true;  // least-squares output fit to the IC when one exists

    RadConfig rad;
    RbaConfig rba;
    CausalConfig causal;
    AnnealConfig anneal;
    Schedule schedule;

    long long iterations = 20000;
    std::vector<uint64_t> seeds = {0};
    std::vector<int> pool_res = {128, 128};
    int n_ic = 256;
    long long diag_period = 100;
    long long checkpoint_period = 0;  // 0 = final checkpoint only
    int fit_samples = 4000;
    std::string out_dir = "out";
};

// throws ConfigError naming the offending field
void validate_config(const RunConfig& cfg);

struct HistoryRow {
    long long iter = 0;
    double lr = 0, lam_pde = 1, lam_ic = 1;
    double loss_pde = 0, loss_ic = 0, total = 0;
    double rel_l2 = 0, snr = 0, complexity = 0;  // nan outside the diag period
};

struct RunHistory {
    std::vector<HistoryRow> rows;
    bool diverged = false;
    long long diverged_at = -1;
};

struct TrainResult {
    std::shared_ptr<Model> model;
    Vec theta;
    RunHistory history;
    double final_rel_l2 = std::numeric_limits<double>::quiet_NaN();
    double ms_per_iter = 0.0;  // wall clock averaged over post-warmup iterations
};

// divergence carries the partial artifacts so sweeps can persist them
struct TrainDivergence : DivergenceError {
    RunHistory history;
    Vec theta;
    TrainDivergence(const std::string& msg, RunHistory h, Vec th)
        : DivergenceError(msg), history(std::move(h)), theta(std::move(th)) {}
};

// the model spec a config resolves to (problem boundary handling applied);
// the parameter count of a run is count_params(model_spec_for(cfg))
ModelSpec model_spec_for(const RunConfig& cfg);

TrainResult train(const RunConfig& cfg, uint64_t seed);

}  // namespace pikan

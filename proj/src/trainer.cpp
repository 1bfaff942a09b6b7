#include "pikan/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <memory>
#include <numeric>

#include "pikan/config.hpp"
#include "pikan/diag.hpp"
#include "pikan/tape.hpp"

namespace pikan {

namespace {
const double NAN_ = std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// adaptive-technique arithmetic
// ---------------------------------------------------------------------------

Vec causal_weights(const Vec& seg_losses, double eps) {
    const int M = int(seg_losses.size());
    if (M < 1) throw ConfigError("causal weights: need at least one segment");
    Vec w(M);
    double cum = 0.0;
    for (int i = 0; i < M; ++i) {
        w[i] = std::exp(-eps * cum);  // empty prefix -> w[0] = 1
        cum += seg_losses[i];
    }
    return w;
}

void rba_update(Vec& alpha, const std::vector<int>* idx, const Vec& absres,
                double gamma, double eta) {
    const size_t n = absres.size();
    if (idx && idx->size() != n)
        throw ConfigError("rba update: index/residual size mismatch");
    double mx = 0.0;
    for (double r : absres) mx = std::max(mx, r);
    for (size_t k = 0; k < n; ++k) {
        double& a = alpha[idx ? size_t((*idx)[k]) : k];
        // all-zero residuals only decay; guard the division
        a = gamma * a + (mx > 0.0 ? eta * absres[k] / mx : 0.0);
    }
}

std::vector<int> rad_resample(const Vec& weighted_res, int n, double delta, double C,
                              Rng& rng) {
    const int N = int(weighted_res.size());
    if (n > N) throw ConfigError("rad resample: more draws than pool points");
    if (n < 1) throw ConfigError("rad resample: need at least one draw");
    Vec p(N);
    double mean = 0.0;
    for (int i = 0; i < N; ++i) {
        p[i] = std::pow(std::abs(weighted_res[i]), delta);
        mean += p[i];
    }
    mean /= N;
    bool any = false;
    for (int i = 0; i < N; ++i) {
        p[i] = (mean > 0.0 ? p[i] / mean : 0.0) + C;
        any = any || p[i] > 0.0;
    }
    if (!any) p.assign(N, 1.0);  // degenerate: uniform

    // exponential-key reservoir: smallest -log(u)/p_i win; one uniform per
    // pool point keeps the draw order independent of the probabilities
    std::vector<std::pair<double, int>> keys(N);
    for (int i = 0; i < N; ++i) {
        double u = rng.uniform01();
        while (u == 0.0) u = rng.uniform01();
        keys[i] = {p[i] > 0.0 ? -std::log(u) / p[i]
                              : std::numeric_limits<double>::infinity(),
                   i};
    }
    std::nth_element(keys.begin(), keys.begin() + n, keys.end());
    std::vector<int> out(n);
    for (int k = 0; k < n; ++k) out[k] = keys[k].second;
    std::sort(out.begin(), out.end());
    return out;
}

void anneal_update(const Vec& grad_norms, Vec& lambdas, double a, double eps_grad) {
    if (grad_norms.size() != lambdas.size())
        throw ConfigError("anneal update: norm/weight count mismatch");
    const double total = std::accumulate(grad_norms.begin(), grad_norms.end(), 0.0);
    for (size_t i = 0; i < lambdas.size(); ++i) {
        const double hat = total / (grad_norms[i] + eps_grad);
        lambdas[i] = a * lambdas[i] + (1.0 - a) * hat;
    }
}

// ---------------------------------------------------------------------------
// composite loss
// ---------------------------------------------------------------------------

LossOut composite_loss_core(const Vec& res, const Vec* rba, const Vec* ic_err,
                            const Vec* ic_rba, const std::vector<int>* seg_of,
                            const CausalConfig& causal, const LossWeights& w,
                            bool want_grads) {
    LossOut out;
    const int N = int(res.size());
    for (int i = 0; i < N; ++i)
        if (!std::isfinite(res[i]))
            throw NumericError("non-finite pde residual at point " + std::to_string(i));

    auto alpha = [&](int i) { return rba ? (*rba)[i] : 1.0; };

    if (N > 0) {
        if (causal.enabled) {
            if (!seg_of || int(seg_of->size()) != N)
                throw ConfigError("composite loss: causal segmentation missing");
            const int M = causal.segments;
            Vec seg_sum(M, 0.0);
            std::vector<int> seg_n(M, 0);
            for (int i = 0; i < N; ++i) {
                const int s = (*seg_of)[i];
                seg_sum[s] += sq(alpha(i) * res[i]);
                ++seg_n[s];
            }
            out.seg_loss.assign(M, 0.0);
            int live = 0;
            for (int s = 0; s < M; ++s)
                if (seg_n[s] > 0) {
                    out.seg_loss[s] = seg_sum[s] / seg_n[s];
                    ++live;
                }
            out.causal_w = causal_weights(out.seg_loss, causal.eps);
            if (live > 0) {
                for (int s = 0; s < M; ++s)
                    if (seg_n[s] > 0) out.pde += out.causal_w[s] * out.seg_loss[s];
                out.pde /= live;
            }
            if (want_grads) {
                out.dres.resize(N);
                for (int i = 0; i < N; ++i) {
                    const int s = (*seg_of)[i];
                    out.dres[i] = 2.0 * sq(alpha(i)) * res[i] * out.causal_w[s] /
                                  (double(live) * seg_n[s]);
                }
            }
        } else {
            for (int i = 0; i < N; ++i) out.pde += sq(alpha(i) * res[i]);
            out.pde /= N;
            out.seg_loss = {out.pde};
            out.causal_w = {1.0};
            if (want_grads) {
                out.dres.resize(N);
                for (int i = 0; i < N; ++i)
                    out.dres[i] = 2.0 * sq(alpha(i)) * res[i] / N;
            }
        }
    }

    if (ic_err && !ic_err->empty()) {
        const int K = int(ic_err->size());
        for (int k = 0; k < K; ++k)
            if (!std::isfinite((*ic_err)[k]))
                throw NumericError("non-finite ic residual at point " + std::to_string(k));
        auto ica = [&](int k) { return ic_rba ? (*ic_rba)[k] : 1.0; };
        for (int k = 0; k < K; ++k) out.ic += sq(ica(k) * (*ic_err)[k]);
        out.ic /= K;
        if (want_grads) {
            out.dic.resize(K);
            for (int k = 0; k < K; ++k)
                out.dic[k] = 2.0 * sq(ica(k)) * (*ic_err)[k] / K;
        }
    }

    out.total = w.pde * out.pde + w.ic * out.ic;
    return out;
}

namespace {

// time-segment id per active point (uniform split of the temporal range)
std::vector<int> segment_ids(const PdeProblem& p, const Vec& pts, int n, int M) {
    std::vector<int> seg(n);
    const double t0 = p.domain[0].lo, len = p.domain[0].len();
    for (int i = 0; i < n; ++i) {
        int s = int((pts[size_t(i) * p.dim()] - t0) / len * M);
        seg[i] = std::clamp(s, 0, M - 1);
    }
    return seg;
}

Vec gather_points(const CollocationPool& pool, const std::vector<int>& idx) {
    Vec out(idx.size() * size_t(pool.d));
    for (size_t k = 0; k < idx.size(); ++k)
        for (int a = 0; a < pool.d; ++a)
            out[k * pool.d + a] = pool.pts[size_t(idx[k]) * pool.d + a];
    return out;
}

Vec gather_weights(const Vec& w, const std::vector<int>& idx) {
    Vec out(idx.size());
    for (size_t k = 0; k < idx.size(); ++k) out[k] = w[idx[k]];
    return out;
}

double norm2(const Vec& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

LossOut composite_loss(Model& m, const Vec& theta, const PdeProblem& p,
                       const CollocationPool& pool, const LossWeights& w,
                       const CausalConfig& causal, bool use_rba, Vec* grad) {
    const int n = int(pool.active.size());
    if (n == 0) throw ConfigError("composite loss: empty active set");
    ResidualGraph rg = build_residual_graph(m, p);
    Vec pts = gather_points(pool, pool.active);
    Tape tape(rg.prog, rg.shape.dirs, rg.shape.K, n, rg.shape.dir_coord);
    tape.bind_points(pts.data(), n);
    tape.forward(theta.data());
    Vec res(tape.plain(rg.res), tape.plain(rg.res) + n);

    Vec alpha;
    if (use_rba) alpha = gather_weights(pool.rba, pool.active);

    Vec ic_err;
    std::unique_ptr<IcGraph> icg;
    std::unique_ptr<Tape> ict;
    if (p.has_ic && pool.n_ic > 0) {
        icg = std::make_unique<IcGraph>(build_ic_graph(m, p));
        ict = std::make_unique<Tape>(icg->prog, icg->shape.dirs, icg->shape.K,
                                     pool.n_ic, icg->shape.dir_coord);
        ict->bind_points(pool.ic_pts.data(), pool.n_ic);
        ict->forward(theta.data());
        Vec tg = ic_targets(p, pool);
        ic_err.resize(tg.size());
        for (size_t r = 0; r < icg->rows.size(); ++r) {
            const double* row = ict->plain(icg->rows[r]);
            for (int i = 0; i < pool.n_ic; ++i)
                ic_err[r * pool.n_ic + i] = row[i] - tg[r * pool.n_ic + i];
        }
    }

    std::vector<int> seg;
    if (causal.enabled) seg = segment_ids(p, pts, n, causal.segments);

    LossOut out = composite_loss_core(res, use_rba ? &alpha : nullptr,
                                      ic_err.empty() ? nullptr : &ic_err,
                                      use_rba && !ic_err.empty() ? &pool.ic_rba : nullptr,
                                      causal.enabled ? &seg : nullptr, causal, w,
                                      grad != nullptr);
    if (grad) {
        grad->assign(m.layout.total, 0.0);
        tape.zero_adjoints();
        double* ar = tape.adj(rg.res);
        for (int i = 0; i < n; ++i) ar[i] = w.pde * out.dres[i];
        tape.backward(theta.data(), grad->data());
        if (ict) {
            ict->zero_adjoints();
            for (size_t r = 0; r < icg->rows.size(); ++r) {
                double* a = ict->adj(icg->rows[r]);
                for (int i = 0; i < pool.n_ic; ++i)
                    a[i] = w.ic * out.dic[r * pool.n_ic + i];
            }
            ict->backward(theta.data(), grad->data());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

double lr_schedule(long long t, const Schedule& s) {
    if (t < 1) return 0.0;
    if (s.warmup > 0 && t <= s.warmup) return s.peak * double(t) / double(s.warmup);
    const long long k = (t - s.warmup) / std::max<long long>(1, s.decay_period);
    return s.peak * std::pow(s.decay, double(k));
}

void AdamState::init(size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    step = 0;
}

void adam_step(AdamState& opt, Vec& params, const Vec& grad, double lr) {
    const size_t n = params.size();
    if (opt.m.size() != n || grad.size() != n)
        throw ConfigError("adam step: shape mismatch");
    if (!all_finite(grad.data(), n)) throw NumericError("adam step: non-finite gradient");
    ++opt.step;
    const double bc1 = 1.0 - std::pow(opt.beta1, double(opt.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, double(opt.step));
    for (size_t i = 0; i < n; ++i) {
        opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * grad[i];
        opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
        params[i] -= lr * (opt.m[i] / bc1) / (std::sqrt(opt.v[i] / bc2) + opt.eps);
    }
}

// ---------------------------------------------------------------------------
// config validation
// ---------------------------------------------------------------------------

void validate_config(const RunConfig& cfg) {
    auto bad = [](const std::string& f, const std::string& why) {
        throw ConfigError("config field '" + f + "': " + why);
    };
    if (cfg.arch != "rga_kan" && cfg.arch != "cpikan" && cfg.arch != "piratenet")
        bad("arch", "unknown architecture '" + cfg.arch + "'");
    if (cfg.init_scheme != "glorot_like" && cfg.init_scheme != "default")
        bad("init_scheme", "unknown scheme '" + cfg.init_scheme + "'");
    if (cfg.width < 1) bad("width", "must be positive");
    if (cfg.depth < 0) bad("depth", "must be non-negative");
    if (cfg.degree < 1) bad("degree", "must be positive");
    if (cfg.sine_degree < 1) bad("sine_degree", "must be positive");
    if (cfg.iterations < 0) bad("iterations", "must be non-negative");
    if (cfg.seeds.empty()) bad("seeds", "need at least one seed");
    if (cfg.rad.period < 1) bad("rad.period", "must be >= 1");
    if (cfg.rad.n_pde < 1) bad("rad.n_pde", "must be positive");
    if (cfg.rad.delta < 0) bad("rad.delta", "must be >= 0");
    if (cfg.rad.C < 0) bad("rad.C", "must be >= 0");
    if (cfg.rba.gamma < 0) bad("rba.gamma", "must be >= 0");
    if (cfg.rba.eta < 0) bad("rba.eta", "must be >= 0");
    if (cfg.causal.segments < 1) bad("causal.segments", "must be >= 1");
    if (cfg.causal.eps < 0) bad("causal.eps", "must be >= 0");
    if (cfg.anneal.a < 0 || cfg.anneal.a > 1) bad("anneal.a", "must be in [0,1]");
    if (cfg.anneal.period < 1) bad("anneal.period", "must be >= 1");
    if (cfg.schedule.peak <= 0) bad("schedule.peak", "must be positive");
    if (cfg.schedule.warmup < 0) bad("schedule.warmup", "must be >= 0");
    if (cfg.schedule.decay <= 0 || cfg.schedule.decay > 1)
        bad("schedule.decay", "must be in (0,1]");
    if (cfg.schedule.decay_period < 1) bad("schedule.decay_period", "must be >= 1");
    if (cfg.diag_period < 1) bad("diag_period", "must be >= 1");
    if (cfg.kind == RunKind::Fit) {
        if (cfg.fit_samples < 2) bad("fit_samples", "need at least two samples");
        target_from_name(cfg.problem);  // throws with the field value
    } else {
        pde_id_from_name(cfg.problem);
        if (cfg.pool_res.size() != 2) bad("pool_res", "expect two grid sizes");
        for (int r : cfg.pool_res)
            if (r < 2) bad("pool_res", "each grid size must be >= 2");
        if (cfg.n_ic < 0) bad("n_ic", "must be >= 0");
    }
}

namespace {

PdeProblem problem_from_config(const RunConfig& cfg) {
    const PdeId id = pde_id_from_name(cfg.problem);
    switch (id) {
        case PdeId::Helmholtz: return make_helmholtz(cfg.helm_a1, cfg.helm_a2);
        case PdeId::Poisson: return make_poisson(cfg.poisson_omega);
        case PdeId::SineGordon: return make_sine_gordon(cfg.sg_literal);
        default: return make_problem(id);
    }
}

ModelSpec spec_from_config(const RunConfig& cfg, int d_in) {
    ModelSpec ms;
    ms.arch = cfg.arch == "rga_kan"    ? Arch::RgaKan
              : cfg.arch == "cpikan"   ? Arch::Cpikan
                                       : Arch::PirateNet;
    ms.d_in = d_in;
    ms.d_out = 1;
    ms.width = cfg.width;
    ms.depth = cfg.depth;
    ms.degree = cfg.degree;
    ms.sine_degree = cfg.sine_degree;
    ms.scheme = cfg.init_scheme;
    ms.gain = cfg.gain;
    if (cfg.first_layer_gain > 0) ms.first_layer_gain = cfg.first_layer_gain;
    ms.alpha_init = cfg.alpha_init;
    ms.beta_init = cfg.beta_init;
    return ms;
}

struct LoopDiag {
    long long period;
    bool enabled = true;
};

// the pde training loop, shared state bundled together
struct PdeRun {
    const RunConfig& cfg;
    uint64_t seed;
    PdeProblem prob;
    std::shared_ptr<Model> model;
    Vec theta;
    CollocationPool pool;
    std::unique_ptr<ResidualGraph> rg;
    std::unique_ptr<IcGraph> icg;
    std::unique_ptr<Tape> tape, ict;
    ReferenceField ref;
    CausalConfig causal;
    bool has_ic = false;
    int n_act = 0;
    Vec act_pts;
    std::vector<int> seg;
    Vec ic_tg;

    explicit PdeRun(const RunConfig& c, uint64_t s) : cfg(c), seed(s) {
        prob = problem_from_config(cfg);
        if (cfg.causal.enabled && !prob.has_time)
            throw ConfigError("config field 'causal': requires a temporal coordinate");
        ModelSpec ms = spec_from_config(cfg, prob.dim());
        apply_problem_bcs(ms, prob);
        model = build_model(ms);
        theta = init_model_params(*model, seed);

        Rng pool_rng = Rng::derived(seed, "pool");
        n_act = cfg.rad.n_pde;
        pool = make_pool(prob, {cfg.pool_res[0], cfg.pool_res[1]}, pool_rng, n_act,
                         prob.has_ic ? cfg.n_ic : 0);
        has_ic = prob.has_ic && pool.n_ic > 0;

        if (has_ic && cfg.pi_init) {
            Vec g(pool.n_ic);
            for (int i = 0; i < pool.n_ic; ++i)
                g[i] = initial_condition(prob, pool.ic_pts[2 * i + 1]);
            physics_informed_output_init(*model, theta, pool.ic_pts.data(),
                                         pool.n_ic, g.data());
        }

        rg = std::make_unique<ResidualGraph>(build_residual_graph(*model, prob));
        tape = std::make_unique<Tape>(rg->prog, rg->shape.dirs, rg->shape.K, n_act,
                                      rg->shape.dir_coord);
        if (has_ic) {
            icg = std::make_unique<IcGraph>(build_ic_graph(*model, prob));
            ict = std::make_unique<Tape>(icg->prog, icg->shape.dirs, icg->shape.K,
                                         pool.n_ic, icg->shape.dir_coord);
            ict->bind_points(pool.ic_pts.data(), pool.n_ic);
            ic_tg = ic_targets(prob, pool);
        }

        causal = cfg.causal;
        if (!prob.has_time) causal.enabled = false;

        ref = make_reference(prob);
        rebind_active();
    }

    void rebind_active() {
        act_pts = gather_points(pool, pool.active);
        tape->bind_points(act_pts.data(), n_act);
        if (causal.enabled) seg = segment_ids(prob, act_pts, n_act, causal.segments);
    }

    // |r| * rba over the whole pool, chunked to bound tape memory
    Vec pool_weighted_residuals() {
        const int CHUNK = 2048;
        Vec out(pool.n_pool);
        Tape chunk_tape(rg->prog, rg->shape.dirs, rg->shape.K, CHUNK,
                        rg->shape.dir_coord);
        Vec buf(size_t(CHUNK) * pool.d);
        for (int base = 0; base < pool.n_pool; base += CHUNK) {
            const int m = std::min(CHUNK, pool.n_pool - base);
            std::memcpy(buf.data(), &pool.pts[size_t(base) * pool.d],
                        size_t(m) * pool.d * sizeof(double));
            for (int i = m; i < CHUNK; ++i)  // pad with the last row
                std::memcpy(&buf[size_t(i) * pool.d],
                            &buf[size_t(m - 1) * pool.d], pool.d * sizeof(double));
            chunk_tape.bind_points(buf.data(), CHUNK);
            chunk_tape.forward(theta.data());
            const double* r = chunk_tape.plain(rg->res);
            for (int i = 0; i < m; ++i)
                out[base + i] = std::abs(r[i]) * pool.rba[base + i];
        }
        return out;
    }
};

void write_periodic_checkpoint(const RunConfig& cfg, uint64_t seed, long long iter,
                               const Model& m, const Vec& theta) {
    if (cfg.checkpoint_period <= 0 || cfg.out_dir.empty()) return;
    if (iter % cfg.checkpoint_period != 0) return;
    std::filesystem::create_directories(cfg.out_dir);
    save_checkpoint(cfg.out_dir + "/ckpt_seed" + std::to_string(seed) + "_it" +
                        std::to_string(iter) + ".ckpt",
                    m.spec, theta, iter);
}

TrainResult train_pde(const RunConfig& cfg, uint64_t seed) {
    PdeRun run(cfg, seed);
    RunHistory hist;
    hist.rows.reserve(size_t(cfg.iterations));

    AdamState opt;
    opt.init(run.theta.size());
    Rng train_rng = Rng::derived(seed, "trainer");
    const uint64_t snr_master = seed ^ fnv1a("snr");
    Vec lam = {1.0, 1.0};  // pde, ic
    Vec g_pde(run.theta.size()), g_ic, grad(run.theta.size());
    if (run.has_ic) g_ic.resize(run.theta.size());
    int consec_bad = 0;

    auto diverged_row = [&](long long t, double lr) {
        HistoryRow row;
        row.iter = t;
        row.lr = lr;
        row.lam_pde = lam[0];
        row.lam_ic = lam[1];
        row.loss_pde = row.loss_ic = row.total = NAN_;
        row.rel_l2 = row.snr = row.complexity = NAN_;
        hist.rows.push_back(row);
        if (++consec_bad >= 10) {
            hist.diverged = true;
            hist.diverged_at = t;
            throw TrainDivergence(
                "loss non-finite for 10 consecutive iterations (iteration " +
                    std::to_string(t) + ")",
                hist, run.theta);
        }
    };

    auto clk = std::chrono::steady_clock::now();
    long long timed_from = 1;
    for (long long t = 1; t <= cfg.iterations; ++t) {
        if (t == cfg.schedule.warmup + 1) {  // per-iteration cost excludes warmup
            clk = std::chrono::steady_clock::now();
            timed_from = t;
        }
        const double lr = lr_schedule(t, cfg.schedule);

        Vec res, ic_err;
        try {
            if (cfg.rad.enabled && t > 1 && (t - 1) % cfg.rad.period == 0) {
                Vec wres = run.pool_weighted_residuals();
                run.pool.active =
                    rad_resample(wres, run.n_act, cfg.rad.delta, cfg.rad.C, train_rng);
                run.rebind_active();
            }

            run.tape->forward(run.theta.data());
            const double* rv = run.tape->plain(run.rg->res);
            res.assign(rv, rv + run.n_act);

            if (run.has_ic) {
                run.ict->forward(run.theta.data());
                ic_err.resize(run.ic_tg.size());
                for (size_t r = 0; r < run.icg->rows.size(); ++r) {
                    const double* row = run.ict->plain(run.icg->rows[r]);
                    for (int i = 0; i < run.pool.n_ic; ++i)
                        ic_err[r * run.pool.n_ic + i] =
                            row[i] - run.ic_tg[r * run.pool.n_ic + i];
                }
            }
        } catch (const NumericError&) {
            // exploded parameters can trip basis-domain guards before any
            // residual comes out; that is divergence, not a usage error
            diverged_row(t, lr);
            continue;
        } catch (const DomainError&) {
            diverged_row(t, lr);
            continue;
        }

        if (!all_finite(res.data(), res.size()) ||
            !all_finite(ic_err.data(), ic_err.size())) {
            diverged_row(t, lr);
            continue;
        }

        if (cfg.rba.enabled) {
            Vec ares(run.n_act);
            for (int i = 0; i < run.n_act; ++i) ares[i] = std::abs(res[i]);
            rba_update(run.pool.rba, &run.pool.active, ares, cfg.rba.gamma, cfg.rba.eta);
            if (run.has_ic) {
                Vec aic(ic_err.size());
                for (size_t k = 0; k < ic_err.size(); ++k) aic[k] = std::abs(ic_err[k]);
                rba_update(run.pool.ic_rba, nullptr, aic, cfg.rba.gamma, cfg.rba.eta);
            }
        }

        Vec alpha = gather_weights(run.pool.rba, run.pool.active);
        LossWeights lw{lam[0], lam[1]};
        LossOut lo = composite_loss_core(
            res, &alpha, ic_err.empty() ? nullptr : &ic_err,
            ic_err.empty() ? nullptr : &run.pool.ic_rba,
            run.causal.enabled ? &run.seg : nullptr, run.causal, lw, true);

        if (!std::isfinite(lo.total)) {
            diverged_row(t, lr);
            continue;
        }

        // one lambda-free backward per term; the total gradient is the
        // lambda-weighted sum and the anneal norms come for free
        std::fill(g_pde.begin(), g_pde.end(), 0.0);
        run.tape->zero_adjoints();
        double* ar = run.tape->adj(run.rg->res);
        std::memcpy(ar, lo.dres.data(), size_t(run.n_act) * sizeof(double));
        run.tape->backward(run.theta.data(), g_pde.data());

        if (run.has_ic) {
            std::fill(g_ic.begin(), g_ic.end(), 0.0);
            run.ict->zero_adjoints();
            for (size_t r = 0; r < run.icg->rows.size(); ++r) {
                double* a = run.ict->adj(run.icg->rows[r]);
                for (int i = 0; i < run.pool.n_ic; ++i)
                    a[i] = lo.dic[r * run.pool.n_ic + i];
            }
            run.ict->backward(run.theta.data(), g_ic.data());
        }

        if (!all_finite(g_pde.data(), g_pde.size()) ||
            !all_finite(g_ic.data(), g_ic.size())) {
            diverged_row(t, lr);
            continue;
        }

        if (cfg.anneal.enabled && run.has_ic && t % cfg.anneal.period == 0) {
            Vec norms = {norm2(g_pde), norm2(g_ic)};
            anneal_update(norms, lam, cfg.anneal.a, cfg.anneal.eps_grad);
        }

        for (size_t i = 0; i < grad.size(); ++i)
            grad[i] = lam[0] * g_pde[i] + (run.has_ic ? lam[1] * g_ic[i] : 0.0);

        adam_step(opt, run.theta, grad, lr);
        consec_bad = 0;

        HistoryRow row;
        row.iter = t;
        row.lr = lr;
        row.lam_pde = lw.pde;
        row.lam_ic = lw.ic;
        row.loss_pde = lo.pde;
        row.loss_ic = lo.ic;
        row.total = lo.total;
        row.rel_l2 = row.snr = row.complexity = NAN_;
        if (t % cfg.diag_period == 0 || t == cfg.iterations) {
            row.rel_l2 = model_rel_l2(*run.model, run.theta, run.ref);
            if (run.n_act >= 32) {
                Rng snr_rng = Rng::derived(snr_master, uint64_t(t));
                row.snr = batch_snr(*run.model, run.theta, *run.rg, run.act_pts,
                                    alpha, 16, snr_rng);
            }
            Vec dpts = run.act_pts;
            dpts.insert(dpts.end(), run.pool.ic_pts.begin(), run.pool.ic_pts.end());
            row.complexity = geometric_complexity(
                *run.model, run.theta, dpts.data(), int(dpts.size() / 2));
        }
        hist.rows.push_back(row);
        write_periodic_checkpoint(cfg, seed, t, *run.model, run.theta);
    }

    TrainResult out;
    out.model = run.model;
    out.theta = std::move(run.theta);
    if (!hist.rows.empty() && std::isfinite(hist.rows.back().rel_l2))
        out.final_rel_l2 = hist.rows.back().rel_l2;
    else
        out.final_rel_l2 = model_rel_l2(*out.model, out.theta, run.ref);
    out.history = std::move(hist);
    if (cfg.iterations >= timed_from) {
        const double ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - clk)
                              .count();
        out.ms_per_iter = ms / double(cfg.iterations - timed_from + 1);
    }
    return out;
}

TrainResult train_fit(const RunConfig& cfg, uint64_t seed) {
    const TargetId tid = target_from_name(cfg.problem);
    const int d = target_dim(tid);
    ModelSpec ms = spec_from_config(cfg, d);
    auto model = build_model(ms);
    Vec theta = init_model_params(*model, seed);

    const int N = cfg.fit_samples;
    Rng data_rng = Rng::derived(seed, "fit_data");
    Vec X(size_t(N) * d), y(N);
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < d; ++j) X[size_t(i) * d + j] = data_rng.uniform(-1, 1);
        y[i] = target_function(tid, &X[size_t(i) * d]);
    }
    const int NT = 4096;
    Rng test_rng = Rng::derived(seed, "fit_test");
    Vec XT(size_t(NT) * d), yt(NT);
    for (int i = 0; i < NT; ++i) {
        for (int j = 0; j < d; ++j) XT[size_t(i) * d + j] = test_rng.uniform(-1, 1);
        yt[i] = target_function(tid, &XT[size_t(i) * d]);
    }

    Tape tape(model->prog, 1, 0, N, {0});
    tape.bind_points(X.data(), N);

    RunHistory hist;
    hist.rows.reserve(size_t(cfg.iterations));
    AdamState opt;
    opt.init(theta.size());
    Vec grad(theta.size());
    int consec_bad = 0;
    const int unode = model->nodes.u;

    auto clk = std::chrono::steady_clock::now();
    long long timed_from = 1;
    for (long long t = 1; t <= cfg.iterations; ++t) {
        if (t == cfg.schedule.warmup + 1) {
            clk = std::chrono::steady_clock::now();
            timed_from = t;
        }
        const double lr = lr_schedule(t, cfg.schedule);
        bool fwd_ok = true;
        try {
            tape.forward(theta.data());
        } catch (const NumericError&) {
            fwd_ok = false;
        } catch (const DomainError&) {
            fwd_ok = false;
        }
        const double* u = fwd_ok ? tape.value(unode) : nullptr;
        double mse = 0.0;
        bool ok = fwd_ok;
        if (fwd_ok) {
            for (int i = 0; i < N; ++i) {
                const double r = u[i] - y[i];
                ok = ok && std::isfinite(r);
                mse += r * r;
            }
            mse /= N;
        }

        HistoryRow row;
        row.iter = t;
        row.lr = lr;
        row.lam_pde = 1.0;
        row.lam_ic = 0.0;
        row.rel_l2 = row.snr = row.complexity = NAN_;

        if (!ok || !std::isfinite(mse)) {
            row.loss_pde = row.loss_ic = row.total = NAN_;
            hist.rows.push_back(row);
            if (++consec_bad >= 10) {
                hist.diverged = true;
                hist.diverged_at = t;
                throw TrainDivergence("fit loss non-finite for 10 consecutive iterations",
                                      hist, theta);
            }
            continue;
        }

        std::fill(grad.begin(), grad.end(), 0.0);
        tape.zero_adjoints();
        double* a = tape.adj(unode);
        for (int i = 0; i < N; ++i) a[i] = 2.0 * (u[i] - y[i]) / N;
        tape.backward(theta.data(), grad.data());
        if (!all_finite(grad.data(), grad.size())) {
            row.loss_pde = row.loss_ic = row.total = NAN_;
            hist.rows.push_back(row);
            if (++consec_bad >= 10) {
                hist.diverged = true;
                hist.diverged_at = t;
                throw TrainDivergence("fit gradient non-finite for 10 consecutive iterations",
                                      hist, theta);
            }
            continue;
        }
        adam_step(opt, theta, grad, lr);
        consec_bad = 0;

        row.loss_pde = mse;
        row.loss_ic = 0.0;
        row.total = mse;
        if (t % cfg.diag_period == 0 || t == cfg.iterations) {
            Vec pred = model_eval(*model, theta, XT.data(), NT);
            row.rel_l2 = relative_l2(pred, yt);
        }
        hist.rows.push_back(row);
        write_periodic_checkpoint(cfg, seed, t, *model, theta);
    }

    TrainResult out;
    out.model = std::move(model);
    out.theta = std::move(theta);
    if (!hist.rows.empty() && std::isfinite(hist.rows.back().rel_l2)) {
        out.final_rel_l2 = hist.rows.back().rel_l2;
    } else {
        Vec pred = model_eval(*out.model, out.theta, XT.data(), NT);
        out.final_rel_l2 = relative_l2(pred, yt);
    }
    out.history = std::move(hist);
    if (cfg.iterations >= timed_from) {
        const double ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - clk)
                              .count();
        out.ms_per_iter = ms / double(cfg.iterations - timed_from + 1);
    }
    return out;
}

}  // namespace

ModelSpec model_spec_for(const RunConfig& cfg) {
    validate_config(cfg);
    if (cfg.kind == RunKind::Fit)
        return spec_from_config(cfg, target_dim(target_from_name(cfg.problem)));
    PdeProblem p = problem_from_config(cfg);
    ModelSpec ms = spec_from_config(cfg, p.dim());
    apply_problem_bcs(ms, p);
    return ms;
}

TrainResult train(const RunConfig& cfg, uint64_t seed) {
    validate_config(cfg);
    if (cfg.kind == RunKind::Fit) return train_fit(cfg, seed);
    return train_pde(cfg, seed);
}

}  // namespace pikan

#include "pikan/models.hpp"

#include <cmath>
#include <cstring>

namespace pikan {

static constexpr double kTwoPi = 6.283185307179586476925286766559;

static void validate(const ModelSpec& s) {
    if (s.d_in < 1 || s.d_out < 1) throw ConfigError("model: bad input/output dims");
    if (s.width < 1) throw ConfigError("model: width must be positive");
    if (s.depth < 0) throw ConfigError("model: negative depth");
    if (s.degree < 1) throw ConfigError("model: degree must be >= 1");
    if (s.scheme != "glorot_like" && s.scheme != "default")
        throw ConfigError("model: unknown init scheme '" + s.scheme + "'");
    if (s.gain <= 0.0 || s.first_layer_gain <= 0.0) throw ConfigError("model: gain must be positive");
    for (const PeriodicCoord& p : s.periodic) {
        if (p.coord < 0 || p.coord >= s.d_in) throw ConfigError("model: periodic coordinate out of range");
        if (p.length <= 0.0) throw ConfigError("model: period must be positive");
    }
    for (const DirichletCoord& d : s.dirichlet) {
        if (d.coord < 0 || d.coord >= s.d_in) throw ConfigError("model: Dirichlet coordinate out of range");
        if (!(d.hi > d.lo)) throw ConfigError("model: Dirichlet interval empty");
    }
    if (s.arch != Arch::Cpikan) {
        if (s.depth < 1) throw ConfigError("model: block count must be >= 1");
        if ((s.alpha_init != 0.0 && s.alpha_init != 1.0) ||
            (s.beta_init != 0.0 && s.beta_init != 1.0))
            throw ConfigError("model: block mixes initialize to 0 or 1");
    }
    if (s.arch == Arch::RgaKan && s.sine_degree < 1)
        throw ConfigError("model: sine degree must be >= 1");
    if (s.arch == Arch::PirateNet && s.width % 2 != 0)
        throw ConfigError("model: PirateNet width must be even");
}

static int emit_embed(Program& P, const ModelSpec& spec, int x) {
    if (spec.periodic.empty()) return x;
    Node em;
    em.op = Op::PeriodicEmbed;
    em.a = x;
    em.icols.assign(spec.d_in, 0);
    em.dvals.assign(spec.d_in, 0.0);
    for (const PeriodicCoord& p : spec.periodic) {
        em.icols[p.coord] = 1;
        em.dvals[p.coord] = kTwoPi / p.length;
    }
    return P.emit(em);
}

static int emit_cheby_basis(Program& P, int a, int D) {
    Node n;
    n.op = Op::ChebyBasis;
    n.a = a;
    n.i0 = D;
    return P.emit(n);
}

static int emit_contract(Program& P, int a, int s_w, int s_b) {
    Node n;
    n.op = Op::Contract;
    n.a = a;
    n.s_w = s_w;
    n.s_b = s_b;
    return P.emit(n);
}

// g = f.*U + (1 - f).*V, written as the four-node form shared by both
// gated architectures
static int emit_gate_mix(Program& P, int f, int U, int V) {
    Node m1;
    m1.op = Op::Mul;
    m1.a = f;
    m1.b = U;
    int a = P.emit(m1);
    Node om;
    om.op = Op::ScaleAdd;
    om.a = f;
    om.c0 = 1.0;
    om.c1 = -1.0;
    int nf = P.emit(om);
    Node m2;
    m2.op = Op::Mul;
    m2.a = nf;
    m2.b = V;
    int b = P.emit(m2);
    Node add;
    add.op = Op::ScaleAdd;
    add.a = a;
    add.b = b;
    add.c1 = 1.0;
    add.c2 = 1.0;
    return P.emit(add);
}

static int emit_mix(Program& P, int slice, int a, int b) {
    Node n;
    n.op = Op::MixParam;
    n.s_w = slice;
    n.a = a;
    n.b = b;
    return P.emit(n);
}

ModelNodes emit_model(Program& P, const ModelSpec& spec, InitPlan& plan) {
    validate(spec);
    ParamLayout& L = *P.params;
    int x = P.d_in > 0 ? P.input : P.emit_input(spec.d_in);
    if (P.at(x).width != spec.d_in) throw ConfigError("model: program input dim mismatch");

    ModelNodes out;
    int h = emit_embed(P, spec, x);
    const int din = P.at(h).width;
    out.embed_width = din;

    const int D = spec.degree;
    const int dH = spec.width;

    // per-layer weight rule under the chosen scheme
    auto cheby_rule = [&](const std::string& name, int fi, int fo, double g) {
        if (spec.scheme == "default")
            plan.normal(name, 0.0, default_cheby_sigma(fi, D));
        else
            plan.per_term(name, glorot_like_sigmas(cheby_moments(D), fi, fo, D, g));
    };

    switch (spec.arch) {
        case Arch::Cpikan: {
            int prev = h;
            int fin = din;
            for (int l = 0; l < spec.depth; ++l) {
                const std::string base = "l" + std::to_string(l);
                int basis = emit_cheby_basis(P, prev, D);
                prev = emit_contract(P, basis, L.add(base + ".w", dH, fin * D),
                                     L.add(base + ".b", dH, 1));
                cheby_rule(base + ".w", fin, dH,
                           l == 0 ? spec.first_layer_gain * spec.gain : spec.gain);
                plan.zero(base + ".b");
                fin = dH;
            }
            int basis = emit_cheby_basis(P, prev, D);
            out.u_raw = emit_contract(P, basis, L.add("out.w", spec.d_out, fin * D),
                                      L.add("out.b", spec.d_out, 1));
            cheby_rule("out.w", fin, spec.d_out,
                       spec.depth == 0 ? spec.first_layer_gain * spec.gain : spec.gain);
            plan.zero("out.b");
            out.out_feat = basis;
            out.out_w = "out.w";
            out.out_b = "out.b";
            break;
        }

        case Arch::RgaKan: {
            const int Ds = spec.sine_degree;
            Node sb;
            sb.op = Op::SineBasis;
            sb.a = h;
            sb.s_w = L.add("sine.omega", Ds, 1);
            sb.s_b = L.add("sine.phase", Ds, 1);
            int sbasis = P.emit(sb);
            int s = emit_contract(P, sbasis, L.add("sine.w", dH, din * Ds),
                                  L.add("sine.b", dH, 1));
            plan.normal("sine.omega", 0.0, 1.0);
            plan.zero("sine.phase");
            plan.zero("sine.b");
            if (spec.scheme == "default")
                plan.normal("sine.w", 0.0, default_cheby_sigma(din, Ds));
            else
                plan.sine_glorot("sine.w", "sine.omega", "sine.phase", din, dH,
                                 spec.first_layer_gain * spec.gain);

            // gates come from s once and are shared by every block
            int gbasis = emit_cheby_basis(P, s, D);
            int U = emit_contract(P, gbasis, L.add("gate_u.w", dH, dH * D),
                                  L.add("gate_u.b", dH, 1));
            int V = emit_contract(P, gbasis, L.add("gate_v.w", dH, dH * D),
                                  L.add("gate_v.b", dH, 1));
            cheby_rule("gate_u.w", dH, dH, spec.gain);
            cheby_rule("gate_v.w", dH, dH, spec.gain);
            plan.zero("gate_u.b");
            plan.zero("gate_v.b");

            int xn = s;
            for (int nblk = 0; nblk < spec.depth; ++nblk) {
                const std::string base = "blk" + std::to_string(nblk);
                int b1 = emit_cheby_basis(P, xn, D);
                int f = emit_contract(P, b1, L.add(base + ".l1.w", dH, dH * D),
                                      L.add(base + ".l1.b", dH, 1));
                int g = emit_gate_mix(P, f, U, V);
                int z = emit_mix(P, L.add(base + ".beta", 1, 1), g, xn);
                int b2 = emit_cheby_basis(P, z, D);
                int f2 = emit_contract(P, b2, L.add(base + ".l2.w", dH, dH * D),
                                       L.add(base + ".l2.b", dH, 1));
                int g2 = emit_gate_mix(P, f2, U, V);
                xn = emit_mix(P, L.add(base + ".alpha", 1, 1), g2, xn);
                cheby_rule(base + ".l1.w", dH, dH, spec.gain);
                cheby_rule(base + ".l2.w", dH, dH, spec.gain);
                plan.zero(base + ".l1.b");
                plan.zero(base + ".l2.b");
                plan.constant(base + ".alpha", spec.alpha_init);
                plan.constant(base + ".beta", spec.beta_init);
            }

            int obasis = emit_cheby_basis(P, xn, D);
            out.u_raw = emit_contract(P, obasis, L.add("out.w", spec.d_out, dH * D), -1);
            cheby_rule("out.w", dH, spec.d_out, spec.gain);
            out.out_feat = obasis;
            out.out_w = "out.w";
            break;
        }

        case Arch::PirateNet: {
            const int F = dH / 2;
            int bx = emit_contract(P, h, L.add("rff.b", F, din), -1);
            Node scf;
            scf.op = Op::SinCosFeat;
            scf.a = bx;
            int phi = P.emit(scf);
            plan.normal("rff.b", 0.0, 1.0);

            auto rwf_tanh = [&](const std::string& base, int in_node, int nin) {
                Node c;
                c.op = Op::ContractRwf;
                c.a = in_node;
                c.s_w = L.add(base + ".v", dH, nin);
                c.s_aux = L.add(base + ".s", dH, 1);
                c.s_b = L.add(base + ".b", dH, 1);
                int lin = P.emit(c);
                Node t;
                t.op = Op::Tanh;
                t.a = lin;
                plan.normal(base + ".s", 0.5, 0.1);
                plan.rwf_vector(base + ".v", base + ".s", std::sqrt(2.0 / (nin + dH)));
                plan.zero(base + ".b");
                return P.emit(t);
            };

            int U = rwf_tanh("gate_u", phi, dH);
            int V = rwf_tanh("gate_v", phi, dH);
            int xn = phi;
            for (int nblk = 0; nblk < spec.depth; ++nblk) {
                const std::string base = "blk" + std::to_string(nblk);
                int f = rwf_tanh(base + ".l1", xn, dH);
                int z1 = emit_gate_mix(P, f, U, V);
                int g = rwf_tanh(base + ".l2", z1, dH);
                int z2 = emit_gate_mix(P, g, U, V);
                int hh = rwf_tanh(base + ".l3", z2, dH);
                xn = emit_mix(P, L.add(base + ".alpha", 1, 1), hh, xn);
                plan.constant(base + ".alpha", spec.alpha_init);
            }
            out.u_raw = emit_contract(P, xn, L.add("out.w", spec.d_out, dH), -1);
            plan.normal("out.w", 0.0, std::sqrt(2.0 / (dH + spec.d_out)));
            out.out_feat = xn;
            out.out_w = "out.w";
            break;
        }
    }

    out.u = out.u_raw;
    if (!spec.dirichlet.empty()) {
        Node sh;
        sh.op = Op::DirichletShape;
        sh.a = out.u_raw;
        for (const DirichletCoord& d : spec.dirichlet) {
            sh.icols.push_back(d.coord);
            sh.dvals.push_back(d.lo);
            sh.dvals.push_back(d.hi);
        }
        out.u = P.emit(sh);
    }
    return out;
}

long long count_params(const ModelSpec& s) {
    validate(s);
    const long long dH = s.width, D = s.degree, dO = s.d_out;
    const long long di = s.d_in + (long long)s.periodic.size();
    switch (s.arch) {
        case Arch::Cpikan: {
            const long long L = s.depth;
            if (L == 0) return dO * di * D + dO;
            return dH * (di * D + D * (L - 1) * dH + L + dO * D) + dO;
        }
        case Arch::RgaKan: {
            const long long N = s.depth, Ds = s.sine_degree;
            return dH * (di * Ds + 1) + 2 * Ds + 2 * dH * (dH * D + 1) +
                   N * (2 * dH * (dH * D + 1) + 2) + dO * dH * D;
        }
        case Arch::PirateNet: {
            const long long N = s.depth;
            return (dH / 2) * di + dO * dH + dH * (dH + 2) * (3 * N + 2) + N;
        }
    }
    throw ConfigError("model: unknown architecture");
}

std::unique_ptr<Model> build_model(const ModelSpec& spec) {
    auto m = std::make_unique<Model>();
    m->spec = spec;
    m->nodes = emit_model(m->prog, spec, m->plan);
    return m;
}

Vec init_model_params(const Model& m, uint64_t seed) {
    return init_params(m.layout, m.plan, seed);
}

Vec model_eval(const Model& m, const Vec& theta, const double* pts, int n) {
    Tape t(m.prog, 1, 0, n, {0});
    t.bind_points(pts, n);
    t.forward(theta.data());
    const double* v = t.value(m.nodes.u);
    return Vec(v, v + size_t(m.spec.d_out) * n);
}

void cheby_layer_forward(const double* w, const double* b, int d_out, int d_in,
                         int D, const double* x, double* y) {
    std::vector<double> B(size_t(d_in) * D);
    for (int i = 0; i < d_in; ++i) cheby_eval(D, x[i], B.data() + size_t(i) * D);
    for (int j = 0; j < d_out; ++j) {
        double acc = 0.0;
        const double* wj = w + size_t(j) * d_in * D;
        for (size_t c = 0; c < B.size(); ++c) acc += wj[c] * B[c];
        y[j] = acc + (b ? b[j] : 0.0);
    }
}

void sine_layer_forward(const double* w, const double* c, int d_out, int d_in,
                        const SineParams& sp, const double* x, double* y) {
    const int Ds = sp.size();
    std::vector<double> B(size_t(d_in) * Ds);
    for (int i = 0; i < d_in; ++i) sine_eval(sp, x[i], B.data() + size_t(i) * Ds);
    for (int j = 0; j < d_out; ++j) {
        double acc = 0.0;
        const double* wj = w + size_t(j) * d_in * Ds;
        for (size_t k = 0; k < B.size(); ++k) acc += wj[k] * B[k];
        y[j] = acc + (c ? c[j] : 0.0);
    }
}

void rga_gates_forward(const double* wu, const double* cu, const double* wv,
                       const double* cv, int d, int D, const double* s,
                       double* U, double* V) {
    cheby_layer_forward(wu, cu, d, d, D, s, U);
    cheby_layer_forward(wv, cv, d, d, D, s, V);
}

void rga_block_forward(const double* w1, const double* c1, const double* w2,
                       const double* c2, double alpha, double beta, int d,
                       int D, const double* x, const double* U,
                       const double* V, double* out) {
    std::vector<double> f(d), z(d), f2(d);
    cheby_layer_forward(w1, c1, d, d, D, x, f.data());
    for (int j = 0; j < d; ++j) {
        double g = f[j] * U[j] + (1.0 - f[j]) * V[j];
        z[j] = beta * g + (1.0 - beta) * x[j];
    }
    cheby_layer_forward(w2, c2, d, d, D, z.data(), f2.data());
    for (int j = 0; j < d; ++j) {
        double g2 = f2[j] * U[j] + (1.0 - f2[j]) * V[j];
        out[j] = alpha * g2 + (1.0 - alpha) * x[j];
    }
}

Vec bc_embed(const ModelSpec& spec, const double* pt) {
    std::vector<double> om(spec.d_in, 0.0);
    std::vector<int> per(spec.d_in, 0);
    for (const PeriodicCoord& p : spec.periodic) {
        per[p.coord] = 1;
        om[p.coord] = kTwoPi / p.length;
    }
    Vec out;
    for (int c = 0; c < spec.d_in; ++c) {
        if (!per[c]) {
            out.push_back(pt[c]);
        } else {
            out.push_back(std::cos(om[c] * pt[c]));
            out.push_back(std::sin(om[c] * pt[c]));
        }
    }
    return out;
}

double dirichlet_phi(const ModelSpec& spec, const double* pt) {
    double phi = 1.0;
    for (const DirichletCoord& d : spec.dirichlet) {
        const double sc = 4.0 / ((d.hi - d.lo) * (d.hi - d.lo));
        phi *= sc * (pt[d.coord] - d.lo) * (d.hi - pt[d.coord]);
    }
    return phi;
}

Vec effective_weight_matrix(const double* w, int d_out, int d_in, int D) {
    Vec r(size_t(d_out) * d_in, 0.0);
    for (int j = 0; j < d_out; ++j)
        for (int i = 0; i < d_in; ++i) {
            double acc = 0.0;
            for (int m = 1; m <= D; m += 2) {
                const double sign = ((m - 1) / 2) % 2 ? -1.0 : 1.0;
                acc += sign * m * w[(size_t(j) * d_in + i) * D + m - 1];
            }
            r[size_t(j) * d_in + i] = acc;
        }
    return r;
}

PiInitResult physics_informed_output_init(const Model& m, Vec& theta,
                                          const double* pts, int n,
                                          const double* targets, double ridge,
                                          int min_points) {
    if (n < min_points)
        throw ConfigError("output init: need at least " + std::to_string(min_points) +
                          " fit points, got " + std::to_string(n));
    const ModelNodes& nd = m.nodes;
    Tape t(m.prog, 1, 0, n, {0});
    t.bind_points(pts, n);
    t.forward(theta.data());

    const int nfeat = m.prog.at(nd.out_feat).width;
    const bool bias = !nd.out_b.empty();
    const int P = nfeat + (bias ? 1 : 0);
    const bool shaped = nd.u != nd.u_raw;
    Vec phi(n, 1.0);
    if (shaped)
        for (int i = 0; i < n; ++i) phi[i] = dirichlet_phi(m.spec, pts + size_t(i) * m.spec.d_in);

    Vec A(size_t(n) * P);
    const double* feat = t.value(nd.out_feat);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < nfeat; ++c) A[size_t(i) * P + c] = phi[i] * feat[size_t(c) * n + i];
        if (bias) A[size_t(i) * P + nfeat] = phi[i];
    }

    const ParamSlice& sw = m.layout.at(m.layout.find(nd.out_w));
    if (sw.rows != m.spec.d_out || sw.cols != nfeat)
        throw ConfigError("output init: weight slice shape mismatch");

    PiInitResult res;
    double ss = 0.0;
    Vec yj(n);
    for (int j = 0; j < m.spec.d_out; ++j) {
        bool allz = true;
        for (int i = 0; i < n; ++i) {
            yj[i] = targets[size_t(j) * n + i];
            allz = allz && yj[i] == 0.0;
        }
        Vec coeff(P, 0.0);
        if (!allz) {
            LsSolution s = solve_least_squares(A.data(), n, P, yj.data(), ridge);
            coeff = s.coeff;
            ss += s.residual * s.residual;
            res.min_norm = res.min_norm || s.min_norm;
        }
        double* wrow = theta.data() + sw.offset + size_t(j) * nfeat;
        std::memcpy(wrow, coeff.data(), sizeof(double) * nfeat);
        if (bias) {
            const ParamSlice& sb = m.layout.at(m.layout.find(nd.out_b));
            theta[sb.offset + j] = coeff[nfeat];
        }
    }
    res.misfit = std::sqrt(ss);
    return res;
}

}  // namespace pikan

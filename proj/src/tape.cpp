#include "pikan/tape.hpp"

#include <algorithm>
#include <cstring>

#include "pikan/bases.hpp"

namespace pikan {

namespace {

// Row chunk for contractions. Fixed: gradient reductions accumulate chunk by
// chunk, so this constant is part of the deterministic summation order.
constexpr int kChunk = 2048;

inline void axpy(double w, const double* x, double* y, int n) {
    for (int r = 0; r < n; ++r) y[r] += w * x[r];
}

// dot product with a fixed 8-lane accumulator tree; the association never
// depends on n, so results are reproducible and the lanes vectorize.
inline double dot8(const double* a, const double* b, int n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
    int r = 0;
    for (; r + 8 <= n; r += 8) {
        s0 += a[r] * b[r];
        s1 += a[r + 1] * b[r + 1];
        s2 += a[r + 2] * b[r + 2];
        s3 += a[r + 3] * b[r + 3];
        s4 += a[r + 4] * b[r + 4];
        s5 += a[r + 5] * b[r + 5];
        s6 += a[r + 6] * b[r + 6];
        s7 += a[r + 7] * b[r + 7];
    }
    double t = ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
    for (; r < n; ++r) t += a[r] * b[r];
    return t;
}

inline double sum_n(const double* a, int n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    int r = 0;
    for (; r + 4 <= n; r += 4) {
        s0 += a[r];
        s1 += a[r + 1];
        s2 += a[r + 2];
        s3 += a[r + 3];
    }
    double t = (s0 + s1) + (s2 + s3);
    for (; r < n; ++r) t += a[r];
    return t;
}

// ---- jet kernels on one (direction, column) block -------------------------
// Block layout: coefficient k occupies [k*nb, (k+1)*nb).

// y = a * b (Cauchy product truncated at K); y must not alias a or b
void jet_mul_block(const double* a, const double* b, double* y, int K, int nb) {
    for (int k = 0; k <= K; ++k) {
        double* yk = y + k * nb;
        const double* a0 = a;
        const double* bk = b + k * nb;
        for (int r = 0; r < nb; ++r) yk[r] = a0[r] * bk[r];
        for (int j = 1; j <= k; ++j) {
            const double* aj = a + j * nb;
            const double* bkj = b + (k - j) * nb;
            for (int r = 0; r < nb; ++r) yk[r] += aj[r] * bkj[r];
        }
    }
}

// adjoint of the Cauchy product w.r.t. factor a: adja_j += sum_{k>=j} adjy_k * b_{k-j}
void jet_mul_corr(const double* adjy, const double* b, double* adja, int K, int nb) {
    for (int j = 0; j <= K; ++j) {
        double* aj = adja + j * nb;
        for (int k = j; k <= K; ++k) {
            const double* yk = adjy + k * nb;
            const double* bkj = b + (k - j) * nb;
            for (int r = 0; r < nb; ++r) aj[r] += yk[r] * bkj[r];
        }
    }
}

// tanh jets via t' = 1 - t^2; p returns 1 - t*t (scratch for the reverse)
void tanh_block(const double* u, double* t, double* p, int K, int nb) {
    for (int r = 0; r < nb; ++r) {
        t[r] = std::tanh(u[r]);
        p[r] = 1.0 - t[r] * t[r];
    }
    for (int k = 1; k <= K; ++k) {
        double* tk = t + k * nb;
        double* pk = p + k * nb;
        std::memset(tk, 0, sizeof(double) * nb);
        for (int j = 1; j <= k; ++j) {
            const double* uj = u + j * nb;
            const double* pkj = p + (k - j) * nb;
            const double w = double(j) / double(k);
            for (int r = 0; r < nb; ++r) tk[r] += w * uj[r] * pkj[r];
        }
        std::memset(pk, 0, sizeof(double) * nb);
        for (int j = 0; j <= k; ++j) {
            const double* tj = t + j * nb;
            const double* tkj = t + (k - j) * nb;
            for (int r = 0; r < nb; ++r) pk[r] -= tj[r] * tkj[r];
        }
    }
}

// reverse of tanh_block. adj_t is consumed (and mutated); adj_u accumulates.
// p must hold the forward 1-t*t jets; adj_p is zeroed scratch.
void tanh_block_rev(const double* u, const double* t, const double* p, double* adj_t,
                    double* adj_p, double* adj_u, int K, int nb) {
    std::memset(adj_p, 0, sizeof(double) * size_t(K + 1) * nb);
    for (int k = K; k >= 1; --k) {
        // p_k = -sum_{j=0..k} t_j t_{k-j}
        const double* apk = adj_p + k * nb;
        for (int j = 0; j <= k; ++j) {
            double* atj = adj_t + j * nb;
            const double* tkj = t + (k - j) * nb;
            for (int r = 0; r < nb; ++r) atj[r] -= 2.0 * tkj[r] * apk[r];
        }
        // t_k = (1/k) sum_{j=1..k} j u_j p_{k-j}
        const double* atk = adj_t + k * nb;
        for (int j = 1; j <= k; ++j) {
            const double w = double(j) / double(k);
            double* auj = adj_u + j * nb;
            double* apkj = adj_p + (k - j) * nb;
            const double* pkj = p + (k - j) * nb;
            const double* uj = u + j * nb;
            for (int r = 0; r < nb; ++r) {
                auj[r] += w * pkj[r] * atk[r];
                apkj[r] += w * uj[r] * atk[r];
            }
        }
    }
    for (int r = 0; r < nb; ++r) {
        double at0 = adj_t[r] - 2.0 * t[r] * adj_p[r];
        adj_u[r] += p[r] * at0;
    }
}

// joint sine/cosine jets
void sincos_block(const double* u, double* s, double* c, int K, int nb) {
    for (int r = 0; r < nb; ++r) {
        s[r] = std::sin(u[r]);
        c[r] = std::cos(u[r]);
    }
    for (int k = 1; k <= K; ++k) {
        double* sk = s + k * nb;
        double* ck = c + k * nb;
        std::memset(sk, 0, sizeof(double) * nb);
        std::memset(ck, 0, sizeof(double) * nb);
        for (int j = 1; j <= k; ++j) {
            const double w = double(j) / double(k);
            const double* uj = u + j * nb;
            const double* ckj = c + (k - j) * nb;
            const double* skj = s + (k - j) * nb;
            for (int r = 0; r < nb; ++r) {
                sk[r] += w * uj[r] * ckj[r];
                ck[r] -= w * uj[r] * skj[r];
            }
        }
    }
}

// reverse of sincos_block; adj_s/adj_c are consumed and mutated, adj_u accumulates
void sincos_block_rev(const double* u, const double* s, const double* c, double* adj_s,
                      double* adj_c, double* adj_u, int K, int nb) {
    for (int k = K; k >= 1; --k) {
        const double* ask = adj_s + k * nb;
        const double* ack = adj_c + k * nb;
        for (int j = 1; j <= k; ++j) {
            const double w = double(j) / double(k);
            double* auj = adj_u + j * nb;
            double* ackj = adj_c + (k - j) * nb;
            double* askj = adj_s + (k - j) * nb;
            const double* uj = u + j * nb;
            const double* ckj = c + (k - j) * nb;
            const double* skj = s + (k - j) * nb;
            for (int r = 0; r < nb; ++r) {
                auj[r] += w * ckj[r] * ask[r];
                ackj[r] += w * uj[r] * ask[r];
                auj[r] -= w * skj[r] * ack[r];
                askj[r] -= w * uj[r] * ack[r];
            }
        }
    }
    for (int r = 0; r < nb; ++r) adj_u[r] += c[r] * adj_s[r] - s[r] * adj_c[r];
}

double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

}  // namespace

// ---------------------------------------------------------------------------
// Program
// ---------------------------------------------------------------------------

int Program::emit_input(int d) {
    if (input >= 0) throw ConfigError("program already has an input node");
    Node n;
    n.op = Op::Input;
    n.width = d;
    d_in = d;
    input = emit(n);
    return input;
}

int Program::emit(Node n) {
    auto need = [&](int id) -> const Node& {
        if (id < 0 || id >= int(nodes.size())) throw ConfigError("emit: bad operand id");
        return nodes[id];
    };
    auto slice = [&](int sid) -> const ParamSlice& {
        if (sid < 0 || sid >= int(params->slices.size())) throw ConfigError("emit: bad slice id");
        return params->at(sid);
    };
    switch (n.op) {
        case Op::Input:
            if (n.width < 1) throw ConfigError("input width must be positive");
            break;
        case Op::PeriodicEmbed: {
            const Node& a = need(n.a);
            if (a.op != Op::Input)
                throw ConfigError("periodic embedding must apply to the input node");
            if (int(n.icols.size()) != a.width || n.dvals.size() != n.icols.size())
                throw ConfigError("periodic embedding: per-coordinate flags/omegas required");
            int w = 0;
            for (int f : n.icols) w += f ? 2 : 1;
            n.width = w;
            break;
        }
        case Op::Contract: {
            const Node& a = need(n.a);
            const ParamSlice& W = slice(n.s_w);
            if (W.cols != a.width) throw ConfigError("contract: weight cols != operand width");
            if (n.s_b >= 0 && slice(n.s_b).size() != W.rows)
                throw ConfigError("contract: bias size != weight rows");
            n.width = W.rows;
            break;
        }
        case Op::ContractRwf: {
            const Node& a = need(n.a);
            const ParamSlice& V = slice(n.s_w);
            if (V.cols != a.width) throw ConfigError("rwf contract: weight cols != operand width");
            if (slice(n.s_aux).size() != V.rows)
                throw ConfigError("rwf contract: scale size != rows");
            if (n.s_b >= 0 && slice(n.s_b).size() != V.rows)
                throw ConfigError("rwf contract: bias size != rows");
            n.width = V.rows;
            break;
        }
        case Op::ChebyBasis: {
            const Node& a = need(n.a);
            if (n.i0 < 1) throw ConfigError("chebyshev basis: degree must be >= 1");
            n.width = a.width * n.i0;
            break;
        }
        case Op::SineBasis: {
            const Node& a = need(n.a);
            const ParamSlice& w = slice(n.s_w);
            const ParamSlice& p = slice(n.s_b);
            if (w.size() != p.size() || w.size() < 1)
                throw ConfigError("sine basis: omega/phase size mismatch");
            n.i0 = w.size();
            n.width = a.width * n.i0;
            break;
        }
        case Op::SinCosFeat:
            n.width = need(n.a).width * 2;
            break;
        case Op::Tanh:
        case Op::Sin:
            n.width = need(n.a).width;
            break;
        case Op::Mul:
        case Op::ScaleAdd:
            if (n.b >= 0 && need(n.a).width != need(n.b).width)
                throw ConfigError("binary op: operand widths differ");
            n.width = need(n.a).width;
            break;
        case Op::MixParam: {
            if (need(n.a).width != need(n.b).width)
                throw ConfigError("mix: operand widths differ");
            const ParamSlice& s = slice(n.s_w);
            if (n.i0 < 0 || n.i0 >= s.size()) throw ConfigError("mix: scalar index out of slice");
            n.width = need(n.a).width;
            break;
        }
        case Op::DirichletShape: {
            const Node& a = need(n.a);
            if (n.icols.empty() || n.dvals.size() != 2 * n.icols.size())
                throw ConfigError("shape: coordinate/bounds mismatch");
            n.width = a.width;
            break;
        }
        case Op::GatherCols: {
            const Node& a = need(n.a);
            if (n.icols.empty()) throw ConfigError("gather: empty map");
            for (int c : n.icols)
                if (c < 0 || c >= a.width) throw ConfigError("gather: column out of range");
            n.width = int(n.icols.size());
            break;
        }
        case Op::Extract: {
            const Node& a = need(n.a);
            if (n.i2 < 0 || n.i2 >= a.width) throw ConfigError("extract: column out of range");
            if (n.i0 < 0 || n.i1 < 0) throw ConfigError("extract: negative direction/order");
            n.width = 1;
            break;
        }
        case Op::AddConst: {
            const Node& a = need(n.a);
            if (!n.cgen) throw ConfigError("add-const: missing generator");
            n.width = a.width;
            break;
        }
    }
    nodes.push_back(std::move(n));
    return int(nodes.size()) - 1;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Tape::Tape(const Program& prog, int dirs, int K, int batch, std::vector<int> dir_coord)
    : prog_(&prog), dirs_(dirs), K_(K), batch_(batch), planes_(dirs * (K + 1)),
      dir_coord_(std::move(dir_coord)) {
    if (dirs < 1 || K < 0 || batch < 1) throw ConfigError("tape: bad shape");
    if (int(dir_coord_.size()) != dirs) throw ConfigError("tape: direction map size != dirs");
    for (int c : dir_coord_)
        if (c < 0 || c >= prog.d_in) throw ConfigError("tape: direction names unknown coordinate");

    const int N = int(prog.nodes.size());
    nplanes_.resize(N);
    point_pure_.assign(N, 0);
    val_.resize(N);
    adj_.resize(N);
    aux_.resize(N);
    for (int id = 0; id < N; ++id) {
        const Node& n = prog.nodes[id];
        int pl;
        switch (n.op) {
            case Op::Input:
            case Op::PeriodicEmbed:
                pl = planes_;
                point_pure_[id] = 1;
                break;
            case Op::Extract: {
                const int apl = nplanes_[n.a];
                if (apl == 1) {
                    if (n.i0 != 0 || n.i1 != 0)
                        throw ConfigError("extract: operand carries no jets");
                } else {
                    if (n.i0 >= dirs_) throw ConfigError("extract: direction out of range");
                    if (n.i1 > K_) throw ConfigError("extract: order exceeds tape order");
                }
                pl = 1;
                break;
            }
            case Op::AddConst:
                if (nplanes_[n.a] != 1)
                    throw ConfigError("add-const: operand must be plain (order-0)");
                pl = 1;
                break;
            default: {
                pl = nplanes_[n.a];
                if (n.b >= 0 && nplanes_[n.b] != pl)
                    throw ConfigError("binary op: operand plane counts differ");
                break;
            }
        }
        nplanes_[id] = pl;
        val_[id].assign(size_t(n.width) * pl * batch_, 0.0);
        // aux buffers
        switch (n.op) {
            case Op::ChebyBasis:
                aux_[id].assign(size_t(prog.nodes[n.a].width) * pl * batch_, 0.0);
                break;
            case Op::SineBasis:
            case Op::Sin:
                aux_[id].assign(size_t(n.width) * pl * batch_, 0.0);
                break;
            case Op::DirichletShape:
                aux_[id].assign(size_t(pl) * batch_, 0.0);
                break;
            case Op::AddConst:
                aux_[id].assign(size_t(n.width) * batch_, 0.0);
                break;
            default:
                break;
        }
    }
    scratch_.assign(size_t(8) * (K_ + 1) * batch_, 0.0);
}

const double* Tape::plain(int node) const {
    if (nplanes_[node] != 1) throw ConfigError("plain(): node carries jets");
    return val_[node].data();
}

void Tape::bind_points(const double* pts, int n) {
    if (n != batch_) throw ConfigError("bind_points: count must equal tape batch");
    pts_.assign(pts, pts + size_t(n) * prog_->d_in);
    const int d = prog_->d_in;
    for (int id = 0; id < int(prog_->nodes.size()); ++id) {
        const Node& nd = prog_->nodes[id];
        if (nd.op == Op::Input) {
            // col c, dir dd: k=0 -> x_c, k=1 -> d(x_c)/d(dir) in {0,1}
            const int rows = planes_ * batch_;
            for (int c = 0; c < d; ++c) {
                double* base = val_[id].data() + size_t(c) * rows;
                std::memset(base, 0, sizeof(double) * rows);
                for (int dd = 0; dd < dirs_; ++dd) {
                    double* blk = base + size_t(dd) * (K_ + 1) * batch_;
                    for (int b = 0; b < batch_; ++b) blk[b] = pts_[size_t(b) * d + c];
                    if (K_ >= 1 && dir_coord_[dd] == c) {
                        double* k1 = blk + batch_;
                        for (int b = 0; b < batch_; ++b) k1[b] = 1.0;
                    }
                }
            }
        } else if (nd.op == Op::PeriodicEmbed || nd.op == Op::DirichletShape ||
                   nd.op == Op::AddConst) {
            exec_point_pure(id);
        }
    }
    bound_ = true;
}

void Tape::exec_point_pure(int id) {
    const Node& nd = prog_->nodes[id];
    const int d = prog_->d_in;
    const int nb = batch_;
    if (nd.op == Op::PeriodicEmbed) {
        const int rows = planes_ * nb;
        double* u = scratch_.data();                       // (K+1)*nb
        double* sj = scratch_.data() + (K_ + 1) * nb;      // (K+1)*nb
        double* cj = scratch_.data() + 2 * (K_ + 1) * nb;  // (K+1)*nb
        int oc = 0;
        for (int c = 0; c < d; ++c) {
            if (!nd.icols[c]) {
                // passthrough coordinate: copy the input jets
                double* dst = val_[id].data() + size_t(oc) * rows;
                const double* src = val_[prog_->input].data() + size_t(c) * rows;
                std::memcpy(dst, src, sizeof(double) * rows);
                oc += 1;
                continue;
            }
            const double w = nd.dvals[c];
            for (int dd = 0; dd < dirs_; ++dd) {
                std::memset(u, 0, sizeof(double) * (K_ + 1) * nb);
                for (int b = 0; b < nb; ++b) u[b] = w * pts_[size_t(b) * d + c];
                if (K_ >= 1 && dir_coord_[dd] == c)
                    for (int b = 0; b < nb; ++b) u[nb + b] = w;
                sincos_block(u, sj, cj, K_, nb);
                double* dstc = val_[id].data() + size_t(oc) * rows + size_t(dd) * (K_ + 1) * nb;
                double* dsts = val_[id].data() + size_t(oc + 1) * rows + size_t(dd) * (K_ + 1) * nb;
                std::memcpy(dstc, cj, sizeof(double) * (K_ + 1) * nb);
                std::memcpy(dsts, sj, sizeof(double) * (K_ + 1) * nb);
            }
            oc += 2;
        }
    } else if (nd.op == Op::DirichletShape) {
        // phi = prod over shaped coords of 4/(b-a)^2 (x-a)(b-x), as jets
        const int pl = nplanes_[id];
        const int Kn = pl == 1 ? 0 : K_;
        const int dn = pl == 1 ? 1 : dirs_;
        double* acc = scratch_.data();               // (K+1)*nb
        double* fac = scratch_.data() + (Kn + 1) * nb;
        double* tmp = scratch_.data() + 2 * (Kn + 1) * nb;
        for (int dd = 0; dd < dn; ++dd) {
            // acc = 1 jet
            std::memset(acc, 0, sizeof(double) * (Kn + 1) * nb);
            for (int b = 0; b < nb; ++b) acc[b] = 1.0;
            for (size_t ci = 0; ci < nd.icols.size(); ++ci) {
                const int c = nd.icols[ci];
                const double a = nd.dvals[2 * ci], bb = nd.dvals[2 * ci + 1];
                const double sc = 4.0 / ((bb - a) * (bb - a));
                std::memset(fac, 0, sizeof(double) * (Kn + 1) * nb);
                const int seed = (pl > 1 && dir_coord_[dd] == c) ? 1 : 0;
                for (int b = 0; b < nb; ++b) {
                    const double x = pts_[size_t(b) * d + c];
                    fac[b] = sc * (x - a) * (bb - x);
                    if (Kn >= 1 && seed) fac[nb + b] = sc * (a + bb - 2.0 * x);
                    if (Kn >= 2 && seed) fac[2 * nb + b] = -sc;
                }
                jet_mul_block(acc, fac, tmp, Kn, nb);
                std::memcpy(acc, tmp, sizeof(double) * (Kn + 1) * nb);
            }
            std::memcpy(aux_[id].data() + size_t(dd) * (Kn + 1) * nb, acc,
                        sizeof(double) * (Kn + 1) * nb);
        }
    } else if (nd.op == Op::AddConst) {
        nd.cgen(pts_.data(), nb, d, aux_[id].data());
    }
}

void Tape::forward(const double* theta) {
    if (!bound_) throw ConfigError("forward before bind_points");
    for (int id = 0; id < int(prog_->nodes.size()); ++id) {
        if (point_pure_[id]) continue;
        exec(id, theta);
    }
}

void Tape::exec(int id, const double* theta) {
    const Node& nd = prog_->nodes[id];
    const int nb = batch_;
    const int pl = nplanes_[id];
    const int rows = pl * nb;
    const int Kn = pl == 1 ? 0 : K_;
    const int dn = pl == 1 ? 1 : dirs_;
    double* out = val_[id].data();

    switch (nd.op) {
        case Op::Input:
        case Op::PeriodicEmbed:
            break;  // bind-time

        case Op::Contract: {
            const ParamSlice& Ws = prog_->params->at(nd.s_w);
            const double* W = theta + Ws.offset;
            const int wo = Ws.rows, wi = Ws.cols;
            const double* x = val_[nd.a].data();
            std::memset(out, 0, sizeof(double) * size_t(wo) * rows);
            for (int r0 = 0; r0 < rows; r0 += kChunk) {
                const int len = std::min(kChunk, rows - r0);
                for (int j = 0; j < wo; ++j) {
                    double* yj = out + size_t(j) * rows + r0;
                    const double* wrow = W + size_t(j) * wi;
                    for (int i = 0; i < wi; ++i)
                        axpy(wrow[i], x + size_t(i) * rows + r0, yj, len);
                }
            }
            if (nd.s_b >= 0) {
                const double* bias = theta + prog_->params->at(nd.s_b).offset;
                for (int j = 0; j < wo; ++j)
                    for (int dd = 0; dd < dn; ++dd) {
                        double* y0 = out + size_t(j) * rows + size_t(dd) * (Kn + 1) * nb;
                        for (int b = 0; b < nb; ++b) y0[b] += bias[j];
                    }
            }
            break;
        }

        case Op::ContractRwf: {
            const ParamSlice& Vs = prog_->params->at(nd.s_w);
            const double* V = theta + Vs.offset;
            const double* s = theta + prog_->params->at(nd.s_aux).offset;
            const int wo = Vs.rows, wi = Vs.cols;
            const double* x = val_[nd.a].data();
            std::memset(out, 0, sizeof(double) * size_t(wo) * rows);
            for (int r0 = 0; r0 < rows; r0 += kChunk) {
                const int len = std::min(kChunk, rows - r0);
                for (int j = 0; j < wo; ++j) {
                    double* yj = out + size_t(j) * rows + r0;
                    const double* vrow = V + size_t(j) * wi;
                    for (int i = 0; i < wi; ++i)
                        axpy(vrow[i], x + size_t(i) * rows + r0, yj, len);
                }
            }
            for (int j = 0; j < wo; ++j) {
                const double es = std::exp(s[j]);
                double* yj = out + size_t(j) * rows;
                for (int r = 0; r < rows; ++r) yj[r] *= es;
            }
            if (nd.s_b >= 0) {
                const double* bias = theta + prog_->params->at(nd.s_b).offset;
                for (int j = 0; j < wo; ++j)
                    for (int dd = 0; dd < dn; ++dd) {
                        double* y0 = out + size_t(j) * rows + size_t(dd) * (Kn + 1) * nb;
                        for (int b = 0; b < nb; ++b) y0[b] += bias[j];
                    }
            }
            break;
        }

        case Op::ChebyBasis: {
            const int D = nd.i0;
            const int wi = prog_->nodes[nd.a].width;
            const double* x = val_[nd.a].data();
            double* tau_all = aux_[id].data();
            double* p = scratch_.data();
            double* C = scratch_.data() + (Kn + 1) * nb;
            for (int i = 0; i < wi; ++i) {
                for (int dd = 0; dd < dn; ++dd) {
                    const size_t boff = size_t(dd) * (Kn + 1) * nb;
                    const double* xb = x + size_t(i) * rows + boff;
                    double* tau = tau_all + size_t(i) * rows + boff;
                    tanh_block(xb, tau, p, Kn, nb);
                    // T_1 = tau
                    double* T1 = out + size_t(i * D) * rows + boff;
                    std::memcpy(T1, tau, sizeof(double) * (Kn + 1) * nb);
                    const double* Tm2 = nullptr;  // T_0 == 1 handled inline
                    const double* Tm1 = T1;
                    for (int m = 2; m <= D; ++m) {
                        double* Tm = out + size_t(i * D + m - 1) * rows + boff;
                        jet_mul_block(tau, Tm1, C, Kn, nb);
                        if (m == 2) {
                            for (int k = 0; k <= Kn; ++k) {
                                double* tk = Tm + k * nb;
                                const double* ck = C + k * nb;
                                if (k == 0)
                                    for (int r = 0; r < nb; ++r) tk[r] = 2.0 * ck[r] - 1.0;
                                else
                                    for (int r = 0; r < nb; ++r) tk[r] = 2.0 * ck[r];
                            }
                        } else {
                            for (int r = 0; r < (Kn + 1) * nb; ++r) Tm[r] = 2.0 * C[r] - Tm2[r];
                        }
                        Tm2 = Tm1;
                        Tm1 = Tm;
                    }
                }
            }
            break;
        }

        case Op::SineBasis: {
            const int Ds = nd.i0;
            const int wi = prog_->nodes[nd.a].width;
            const double* x = val_[nd.a].data();
            const double* om = theta + prog_->params->at(nd.s_w).offset;
            const double* ph = theta + prog_->params->at(nd.s_b).offset;
            double* u = scratch_.data();
            double* sj = scratch_.data() + (Kn + 1) * nb;
            for (int m = 0; m < Ds; ++m) {
                const SineMoments sm = sine_mu_sigma(om[m], ph[m]);
                const double inv_sigma = 1.0 / sm.sigma;
                for (int i = 0; i < wi; ++i) {
                    for (int dd = 0; dd < dn; ++dd) {
                        const size_t boff = size_t(dd) * (Kn + 1) * nb;
                        const double* xb = x + size_t(i) * rows + boff;
                        for (int k = 0; k <= Kn; ++k)
                            for (int r = 0; r < nb; ++r)
                                u[k * nb + r] = om[m] * xb[k * nb + r] + (k == 0 ? ph[m] : 0.0);
                        double* cb = aux_[id].data() + size_t(i * Ds + m) * rows + boff;
                        sincos_block(u, sj, cb, Kn, nb);
                        double* ob = out + size_t(i * Ds + m) * rows + boff;
                        for (int k = 0; k <= Kn; ++k) {
                            const double sub = k == 0 ? sm.mu : 0.0;
                            for (int r = 0; r < nb; ++r)
                                ob[k * nb + r] = (sj[k * nb + r] - sub) * inv_sigma;
                        }
                    }
                }
            }
            break;
        }

        case Op::SinCosFeat: {
            const int wi = prog_->nodes[nd.a].width;
            const double* x = val_[nd.a].data();
            for (int i = 0; i < wi; ++i)
                for (int dd = 0; dd < dn; ++dd) {
                    const size_t boff = size_t(dd) * (Kn + 1) * nb;
                    sincos_block(x + size_t(i) * rows + boff,
                                 out + size_t(wi + i) * rows + boff,
                                 out + size_t(i) * rows + boff, Kn, nb);
                }
            break;
        }

        case Op::Tanh: {
            const double* x = val_[nd.a].data();
            double* p = scratch_.data();
            for (int c = 0; c < nd.width; ++c)
                for (int dd = 0; dd < dn; ++dd) {
                    const size_t boff = size_t(c) * rows + size_t(dd) * (Kn + 1) * nb;
                    tanh_block(x + boff, out + boff, p, Kn, nb);
                }
            break;
        }

        case Op::Sin: {
            const double* x = val_[nd.a].data();
            for (int c = 0; c < nd.width; ++c)
                for (int dd = 0; dd < dn; ++dd) {
                    const size_t boff = size_t(c) * rows + size_t(dd) * (Kn + 1) * nb;
                    sincos_block(x + boff, out + boff, aux_[id].data() + boff, Kn, nb);
                }
            break;
        }

        case Op::Mul: {
            const double* a = val_[nd.a].data();
            const double* b = val_[nd.b].data();
            for (int c = 0; c < nd.width; ++c)
                for (int dd = 0; dd < dn; ++dd) {
                    const size_t boff = size_t(c) * rows + size_t(dd) * (Kn + 1) * nb;
                    jet_mul_block(a + boff, b + boff, out + boff, Kn, nb);
                }
            break;
        }

        case Op::ScaleAdd: {
            const double* a = val_[nd.a].data();
            const double* b = nd.b >= 0 ? val_[nd.b].data() : nullptr;
            const size_t tot = size_t(nd.width) * rows;
            if (b)
                for (size_t r = 0; r < tot; ++r) out[r] = nd.c1 * a[r] + nd.c2 * b[r];
            else
                for (size_t r = 0; r < tot; ++r) out[r] = nd.c1 * a[r];
            if (nd.c0 != 0.0)
                for (int c = 0; c < nd.width; ++c)
                    for (int dd = 0; dd < dn; ++dd) {
                        double* y0 = out + size_t(c) * rows + size_t(dd) * (Kn + 1) * nb;
                        for (int r = 0; r < nb; ++r) y0[r] += nd.c0;
                    }
            break;
        }

        case Op::MixParam: {
            const double p = theta[prog_->params->at(nd.s_w).offset + nd.i0];
            const double q = 1.0 - p;
            const double* a = val_[nd.a].data();
            const double* b = val_[nd.b].data();
            const size_t tot = size_t(nd.width) * rows;
            for (size_t r = 0; r < tot; ++r) out[r] = p * a[r] + q * b[r];
            break;
        }

        case Op::DirichletShape: {
            const double* a = val_[nd.a].data();
            const double* phi = aux_[id].data();
            for (int c = 0; c < nd.width; ++c)
                for (int dd = 0; dd < dn; ++dd) {
                    const size_t boff = size_t(c) * rows + size_t(dd) * (Kn + 1) * nb;
                    jet_mul_block(phi + size_t(dd) * (Kn + 1) * nb, a + boff, out + boff, Kn, nb);
                }
            break;
        }

        case Op::GatherCols: {
            const double* a = val_[nd.a].data();
            const int arows = rows;
            for (int c = 0; c < nd.width; ++c)
                std::memcpy(out + size_t(c) * rows, a + size_t(nd.icols[c]) * arows,
                            sizeof(double) * rows);
            break;
        }

        case Op::Extract: {
            const double* a = val_[nd.a].data();
            const int apl = nplanes_[nd.a];
            const int aK = apl == 1 ? 0 : K_;
            const double f = factorial(nd.i1);
            const double* src =
                a + size_t(nd.i2) * apl * nb + size_t(nd.i0) * (aK + 1) * nb + size_t(nd.i1) * nb;
            for (int b = 0; b < nb; ++b) out[b] = f * src[b];
            break;
        }

        case Op::AddConst: {
            const double* a = val_[nd.a].data();
            const double* cb = aux_[id].data();
            for (size_t r = 0; r < size_t(nd.width) * nb; ++r) out[r] = a[r] + cb[r];
            break;
        }
    }
}

void Tape::ensure_adj() {
    if (have_adj_) return;
    for (int id = 0; id < int(prog_->nodes.size()); ++id)
        adj_[id].assign(val_[id].size(), 0.0);
    have_adj_ = true;
}

void Tape::zero_adjoints() {
    ensure_adj();
    for (auto& a : adj_) std::fill(a.begin(), a.end(), 0.0);
}

double* Tape::adj(int node) {
    ensure_adj();
    return adj_[node].data();
}

void Tape::backward(const double* theta, double* grad) {
    ensure_adj();
    for (int id = int(prog_->nodes.size()) - 1; id >= 0; --id) back(id, theta, grad);
}

void Tape::back(int id, const double* theta, double* grad) {
    const Node& nd = prog_->nodes[id];
    const int nb = batch_;
    const int pl = nplanes_[id];
    const int rows = pl * nb;
    const int Kn = pl == 1 ? 0 : K_;
    const int dn = pl == 1 ? 1 : dirs_;
    double* ao = adj_[id].data();

    switch (nd.op) {
        case Op::Input:
        case Op::PeriodicEmbed:
            break;  // coordinates are not trainable

        case Op::Contract: {
            const ParamSlice& Ws = prog_->params->at(nd.s_w);
            const double* W = theta + Ws.offset;
            const int wo = Ws.rows, wi = Ws.cols;
            const double* x = val_[nd.a].data();
            double* ax = adj_[nd.a].data();
            for (int r0 = 0; r0 < rows; r0 += kChunk) {
                const int len = std::min(kChunk, rows - r0);
                for (int i = 0; i < wi; ++i) {
                    double* axi = ax + size_t(i) * rows + r0;
                    for (int j = 0; j < wo; ++j)
                        axpy(W[size_t(j) * wi + i], ao + size_t(j) * rows + r0, axi, len);
                }
                for (int j = 0; j < wo; ++j) {
                    const double* aj = ao + size_t(j) * rows + r0;
                    double* gw = grad + Ws.offset + size_t(j) * wi;
                    for (int i = 0; i < wi; ++i)
                        gw[i] += dot8(aj, x + size_t(i) * rows + r0, len);
                }
            }
            if (nd.s_b >= 0) {
                const int boff = prog_->params->at(nd.s_b).offset;
                for (int j = 0; j < wo; ++j) {
                    double g = 0.0;
                    for (int dd = 0; dd < dn; ++dd)
                        g += sum_n(ao + size_t(j) * rows + size_t(dd) * (Kn + 1) * nb, nb);
                    grad[boff + j] += g;
                }
            }
            break;
        }

        case Op::ContractRwf: {
            const ParamSlice& Vs = prog_->params->at(nd.s_w);
            const double* V = theta + Vs.offset;
            const int soff = prog_->params->at(nd.s_aux).offset;
            const double* s = theta + soff;
            const int wo = Vs.rows, wi = Vs.cols;
            const double* x = val_[nd.a].data();
            const double* y = val_[id].data();
            double* ax = adj_[nd.a].data();
            const double* bias =
                nd.s_b >= 0 ? theta + prog_->params->at(nd.s_b).offset : nullptr;
            // grad_s and bias first (use y and raw adim)
            for (int j = 0; j < wo; ++j) {
                const double* aj = ao + size_t(j) * rows;
                const double* yj = y + size_t(j) * rows;
                double gs = dot8(aj, yj, rows);
                double g0 = 0.0;
                for (int dd = 0; dd < dn; ++dd)
                    g0 += sum_n(aj + size_t(dd) * (Kn + 1) * nb, nb);
                if (bias) gs -= bias[j] * g0;
                grad[soff + j] += gs;
                if (nd.s_b >= 0) grad[prog_->params->at(nd.s_b).offset + j] += g0;
            }
            // adj through the scale: az_j = exp(s_j) * adj_j, then plain contract rules
            Vec& az = adj_[id];  // reuse in place
            for (int j = 0; j < wo; ++j) {
                const double es = std::exp(s[j]);
                double* aj = az.data() + size_t(j) * rows;
                for (int r = 0; r < rows; ++r) aj[r] *= es;
            }
            for (int r0 = 0; r0 < rows; r0 += kChunk) {
                const int len = std::min(kChunk, rows - r0);
                for (int i = 0; i < wi; ++i) {
                    double* axi = ax + size_t(i) * rows + r0;
                    for (int j = 0; j < wo; ++j)
                        axpy(V[size_t(j) * wi + i], az.data() + size_t(j) * rows + r0, axi, len);
                }
                for (int j = 0; j < wo; ++j) {
                    const double* aj = az.data() + size_t(j) * rows + r0;
                    double* gv = grad + Vs.offset + size_t(j) * wi;
                    for (int i = 0; i < wi; ++i)
                        gv[i] += dot8(aj, x + size_t(i) * rows + r0, len);
                }
            }
            break;
        }

        case Op::ChebyBasis: {
            const int D = nd.i0;
            const int wi = prog_->nodes[nd.a].width;
            const double* x = val_[nd.a].data();
            double* ax = adj_[nd.a].data();
            const double* tau_all = aux_[id].data();
            const double* T = val_[id].data();
            double* p = scratch_.data();
            double* adj_tau = scratch_.data() + (Kn + 1) * nb;
            double* tmpA = scratch_.data() + 2 * (Kn + 1) * nb;
            double* adj_p = scratch_.data() + 3 * (Kn + 1) * nb;
            for (int i = 0; i < wi; ++i) {
                for (int dd = 0; dd < dn; ++dd) {
                    const size_t boff = size_t(dd) * (Kn + 1) * nb;
                    const double* tau = tau_all + size_t(i) * rows + boff;
                    std::memset(adj_tau, 0, sizeof(double) * (Kn + 1) * nb);
                    for (int m = D; m >= 2; --m) {
                        double* aTm = ao + size_t(i * D + m - 1) * rows + boff;
                        const double* Tm1 = T + size_t(i * D + m - 2) * rows + boff;
                        for (int r = 0; r < (Kn + 1) * nb; ++r) tmpA[r] = 2.0 * aTm[r];
                        jet_mul_corr(tmpA, Tm1, adj_tau, Kn, nb);
                        double* aTm1 = ao + size_t(i * D + m - 2) * rows + boff;
                        jet_mul_corr(tmpA, tau, aTm1, Kn, nb);
                        if (m >= 3) {
                            double* aTm2 = ao + size_t(i * D + m - 3) * rows + boff;
                            for (int r = 0; r < (Kn + 1) * nb; ++r) aTm2[r] -= aTm[r];
                        }
                    }
                    {  // T_1 = tau
                        const double* aT1 = ao + size_t(i * D) * rows + boff;
                        for (int r = 0; r < (Kn + 1) * nb; ++r) adj_tau[r] += aT1[r];
                    }
                    // recompute p = 1 - tau^2 jets, then reverse tanh into operand
                    {
                        for (int r = 0; r < nb; ++r) p[r] = 1.0 - tau[r] * tau[r];
                        for (int k = 1; k <= Kn; ++k) {
                            double* pk = p + k * nb;
                            std::memset(pk, 0, sizeof(double) * nb);
                            for (int j = 0; j <= k; ++j) {
                                const double* tj = tau + j * nb;
                                const double* tkj = tau + (k - j) * nb;
                                for (int r = 0; r < nb; ++r) pk[r] -= tj[r] * tkj[r];
                            }
                        }
                    }
                    const double* xb = x + size_t(i) * rows + boff;
                    double* axb = ax + size_t(i) * rows + boff;
                    tanh_block_rev(xb, tau, p, adj_tau, adj_p, axb, Kn, nb);
                }
            }
            break;
        }

        case Op::SineBasis: {
            const int Ds = nd.i0;
            const int wi = prog_->nodes[nd.a].width;
            const double* x = val_[nd.a].data();
            double* ax = adj_[nd.a].data();
            const int ooff = prog_->params->at(nd.s_w).offset;
            const int poff = prog_->params->at(nd.s_b).offset;
            const double* om = theta + ooff;
            const double* ph = theta + poff;
            const double* outv = val_[id].data();
            double* u = scratch_.data();
            double* sv = scratch_.data() + (Kn + 1) * nb;
            double* adj_s = scratch_.data() + 2 * (Kn + 1) * nb;
            double* adj_c = scratch_.data() + 3 * (Kn + 1) * nb;
            double* adj_u = scratch_.data() + 4 * (Kn + 1) * nb;
            for (int m = 0; m < Ds; ++m) {
                const SineMoments smom = sine_mu_sigma(om[m], ph[m]);
                const double inv_sigma = 1.0 / smom.sigma;
                double g_sigma = 0.0, g_mu = 0.0, g_om = 0.0, g_ph = 0.0;
                for (int i = 0; i < wi; ++i) {
                    for (int dd = 0; dd < dn; ++dd) {
                        const size_t boff = size_t(dd) * (Kn + 1) * nb;
                        const size_t coff = size_t(i * Ds + m) * rows + boff;
                        const double* xb = x + size_t(i) * rows + boff;
                        const double* ob = outv + coff;
                        const double* aob = ao + coff;
                        const double* cb = aux_[id].data() + coff;
                        // rebuild u and s
                        for (int k = 0; k <= Kn; ++k)
                            for (int r = 0; r < nb; ++r)
                                u[k * nb + r] =
                                    om[m] * xb[k * nb + r] + (k == 0 ? ph[m] : 0.0);
                        for (int k = 0; k <= Kn; ++k) {
                            const double add = k == 0 ? smom.mu : 0.0;
                            for (int r = 0; r < nb; ++r)
                                sv[k * nb + r] = smom.sigma * ob[k * nb + r] + add;
                        }
                        g_sigma -= inv_sigma * dot8(ob, aob, (Kn + 1) * nb);
                        g_mu -= inv_sigma * sum_n(aob, nb);  // order-0 plane only
                        for (int r = 0; r < (Kn + 1) * nb; ++r) adj_s[r] = aob[r] * inv_sigma;
                        std::memset(adj_c, 0, sizeof(double) * (Kn + 1) * nb);
                        std::memset(adj_u, 0, sizeof(double) * (Kn + 1) * nb);
                        sincos_block_rev(u, sv, cb, adj_s, adj_c, adj_u, Kn, nb);
                        double* axb = ax + size_t(i) * rows + boff;
                        for (int r = 0; r < (Kn + 1) * nb; ++r) axb[r] += om[m] * adj_u[r];
                        g_om += dot8(xb, adj_u, (Kn + 1) * nb);
                        g_ph += sum_n(adj_u, nb);
                    }
                }
                grad[ooff + m] += g_om + g_mu * smom.dmu_dw + g_sigma * smom.dsigma_dw;
                grad[poff + m] += g_ph + g_mu * smom.dmu_dp + g_sigma * smom.dsigma_dp;
            }
            break;
        }

        case Op::SinCosFeat: {
            const int wi = prog_->nodes[nd.a].width;
            const double* x = val_[nd.a].data();
            double* ax = adj_[nd.a].data();
            const double* outv = val_[id].data();
            double* adj_u = scratch_.data();
            for (int i = 0; i < wi; ++i)
                for (int dd = 0; dd < dn; ++dd) {
                    const size_t boff = size_t(dd) * (Kn + 1) * nb;
                    const double* ub = x + size_t(i) * rows + boff;
                    const double* sb = outv + size_t(wi + i) * rows + boff;
                    const double* cb = outv + size_t(i) * rows + boff;
                    double* as = ao + size_t(wi + i) * rows + boff;
                    double* ac = ao + size_t(i) * rows + boff;
                    std::memset(adj_u, 0, sizeof(double) * (Kn + 1) * nb);
                    sincos_block_rev(ub, sb, cb, as, ac, adj_u, Kn, nb);
                    double* axb = ax + size_t(i) * rows + boff;
                    for (int r = 0; r < (Kn + 1) * nb; ++r) axb[r] += adj_u[r];
                }
            break;
        }

        case Op::Tanh: {
            const double* x = val_[nd.a].data();
            const double* t = val_[id].data();
            double* ax = adj_[nd.a].data();
            double* p = scratch_.data();
            double* adj_p = scratch_.data() + (Kn + 1) * nb;
            for (int c = 0; c < nd.width; ++c)
                for (int dd = 0; dd < dn; ++dd) {
                    const size_t boff = size_t(c) * rows + size_t(dd) * (Kn + 1) * nb;
                    const double* tb = t + boff;
                    for (int r = 0; r < nb; ++r) p[r] = 1.0 - tb[r] * tb[r];
                    for (int k = 1; k <= Kn; ++k) {
                        double* pk = p + k * nb;
                        std::memset(pk, 0, sizeof(double) * nb);
                        for (int j = 0; j <= k; ++j) {
                            const double* tj = tb + j * nb;
                            const double* tkj = tb + (k - j) * nb;
                            for (int r = 0; r < nb; ++r) pk[r] -= tj[r] * tkj[r];
                        }
                    }
                    tanh_block_rev(x + boff, tb, p, ao + boff, adj_p, ax + boff, Kn, nb);
                }
            break;
        }

        case Op::Sin: {
            const double* x = val_[nd.a].data();
            const double* sv = val_[id].data();
            const double* cv = aux_[id].data();
            double* ax = adj_[nd.a].data();
            double* adj_c = scratch_.data();
            double* adj_u = scratch_.data() + (Kn + 1) * nb;
            for (int c = 0; c < nd.width; ++c)
                for (int dd = 0; dd < dn; ++dd) {
                    const size_t boff = size_t(c) * rows + size_t(dd) * (Kn + 1) * nb;
                    std::memset(adj_c, 0, sizeof(double) * (Kn + 1) * nb);
                    std::memset(adj_u, 0, sizeof(double) * (Kn + 1) * nb);
                    sincos_block_rev(x + boff, sv + boff, cv + boff, ao + boff, adj_c, adj_u,
                                     Kn, nb);
                    double* axb = ax + boff;
                    for (int r = 0; r < (Kn + 1) * nb; ++r) axb[r] += adj_u[r];
                }
            break;
        }

        case Op::Mul: {
            const double* a = val_[nd.a].data();
            const double* b = val_[nd.b].data();
            double* aa = adj_[nd.a].data();
            double* ab = adj_[nd.b].data();
            for (int c = 0; c < nd.width; ++c)
                for (int dd = 0; dd < dn; ++dd) {
                    const size_t boff = size_t(c) * rows + size_t(dd) * (Kn + 1) * nb;
                    jet_mul_corr(ao + boff, b + boff, aa + boff, Kn, nb);
                    jet_mul_corr(ao + boff, a + boff, ab + boff, Kn, nb);
                }
            break;
        }

        case Op::ScaleAdd: {
            double* aa = adj_[nd.a].data();
            const size_t tot = size_t(nd.width) * rows;
            for (size_t r = 0; r < tot; ++r) aa[r] += nd.c1 * ao[r];
            if (nd.b >= 0) {
                double* ab = adj_[nd.b].data();
                for (size_t r = 0; r < tot; ++r) ab[r] += nd.c2 * ao[r];
            }
            break;
        }

        case Op::MixParam: {
            const ParamSlice& ps = prog_->params->at(nd.s_w);
            const double p = theta[ps.offset + nd.i0];
            const double q = 1.0 - p;
            const double* a = val_[nd.a].data();
            const double* b = val_[nd.b].data();
            double* aa = adj_[nd.a].data();
            double* ab = adj_[nd.b].data();
            const size_t tot = size_t(nd.width) * rows;
            double gp0 = 0, gp1 = 0;
            for (size_t r = 0; r < tot; ++r) {
                aa[r] += p * ao[r];
                ab[r] += q * ao[r];
            }
            gp0 = dot8(a, ao, int(tot));
            gp1 = dot8(b, ao, int(tot));
            grad[ps.offset + nd.i0] += gp0 - gp1;
            break;
        }

        case Op::DirichletShape: {
            const double* phi = aux_[id].data();
            double* aa = adj_[nd.a].data();
            for (int c = 0; c < nd.width; ++c)
                for (int dd = 0; dd < dn; ++dd) {
                    const size_t boff = size_t(c) * rows + size_t(dd) * (Kn + 1) * nb;
                    jet_mul_corr(ao + boff, phi + size_t(dd) * (Kn + 1) * nb, aa + boff, Kn, nb);
                }
            break;
        }

        case Op::GatherCols: {
            double* aa = adj_[nd.a].data();
            for (int c = 0; c < nd.width; ++c)
                axpy(1.0, ao + size_t(c) * rows, aa + size_t(nd.icols[c]) * rows, rows);
            break;
        }

        case Op::Extract: {
            const int apl = nplanes_[nd.a];
            const int aK = apl == 1 ? 0 : K_;
            const double f = factorial(nd.i1);
            double* dst = adj_[nd.a].data() + size_t(nd.i2) * apl * nb +
                          size_t(nd.i0) * (aK + 1) * nb + size_t(nd.i1) * nb;
            for (int b = 0; b < nb; ++b) dst[b] += f * ao[b];
            break;
        }

        case Op::AddConst: {
            double* aa = adj_[nd.a].data();
            axpy(1.0, ao, aa, int(size_t(nd.width) * nb));
            break;
        }
    }
}

}  // namespace pikan

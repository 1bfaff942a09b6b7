#include "pikan/diag.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <sstream>

#include "pikan/tape.hpp"
#include "pikan/trainer.hpp"

namespace pikan {

double relative_l2(const Vec& pred, const Vec& ref) {
    if (pred.size() != ref.size())
        throw ConfigError("relative l2: size mismatch (" + std::to_string(pred.size()) +
                          " vs " + std::to_string(ref.size()) + ")");
    double num = 0, den = 0;
    for (size_t i = 0; i < ref.size(); ++i) {
        num += sq(pred[i] - ref[i]);
        den += sq(ref[i]);
    }
    if (den == 0.0)
        throw DomainError("relative l2: reference field has zero norm; metric undefined");
    return std::sqrt(num / den);
}

double model_rel_l2(Model& m, const Vec& theta, const ReferenceField& ref) {
    Vec pts = ref.grid_points();
    const int n = int(ref.size());
    // chunked evaluation keeps the plain tape footprint bounded on big grids
    const int CHUNK = 8192;
    const int d = m.spec.d_in;
    Vec pred(n);
    for (int base = 0; base < n; base += CHUNK) {
        const int k = std::min(CHUNK, n - base);
        Vec part = model_eval(m, theta, &pts[size_t(base) * d], k);
        std::memcpy(&pred[base], part.data(), size_t(k) * sizeof(double));
    }
    return relative_l2(pred, ref.values);
}

double snr_from_grads(const std::vector<Vec>& grads) {
    const int B = int(grads.size());
    if (B < 2) throw ConfigError("snr: need at least two batches");
    const size_t P = grads[0].size();
    for (const Vec& g : grads)
        if (g.size() != P) throw ConfigError("snr: inconsistent gradient sizes");
    double mean_sq = 0, var_sum = 0;
    for (size_t j = 0; j < P; ++j) {
        double mu = 0;
        for (const Vec& g : grads) mu += g[j];
        mu /= B;
        double v = 0;
        for (const Vec& g : grads) v += sq(g[j] - mu);
        v /= B;  // population variance
        mean_sq += mu * mu;
        var_sum += v;
    }
    if (var_sum == 0.0) return std::numeric_limits<double>::infinity();
    return std::sqrt(mean_sq) / std::sqrt(var_sum);
}

double batch_snr(Model& m, const Vec& theta, const ResidualGraph& rg, const Vec& pts,
                 const Vec& rba, int B, Rng& rng) {
    const int d = m.spec.d_in;
    const int n = int(pts.size()) / d;
    if (B < 2) throw ConfigError("batch snr: need at least two batches");
    if (n < B) throw ConfigError("batch snr: fewer points than batches");
    if (!rba.empty() && int(rba.size()) != n)
        throw ConfigError("batch snr: weight/point count mismatch");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    std::vector<Vec> grads;
    grads.reserve(B);
    const int base_sz = n / B, rem = n % B;
    int pos = 0;
    for (int b = 0; b < B; ++b) {
        const int sn = base_sz + (b < rem ? 1 : 0);
        Vec bp(size_t(sn) * d), bw(sn, 1.0);
        for (int i = 0; i < sn; ++i) {
            const int src = order[pos + i];
            std::memcpy(&bp[size_t(i) * d], &pts[size_t(src) * d], d * sizeof(double));
            if (!rba.empty()) bw[i] = rba[src];
        }
        pos += sn;
        Tape t(rg.prog, rg.shape.dirs, rg.shape.K, sn, rg.shape.dir_coord);
        t.bind_points(bp.data(), sn);
        t.forward(theta.data());
        const double* r = t.plain(rg.res);
        t.zero_adjoints();
        double* a = t.adj(rg.res);
        for (int i = 0; i < sn; ++i) a[i] = 2.0 * sq(bw[i]) * r[i] / sn;
        Vec g(m.layout.total, 0.0);
        t.backward(theta.data(), g.data());
        grads.push_back(std::move(g));
    }
    return snr_from_grads(grads);
}

double geometric_complexity(Model& m, const Vec& theta, const double* pts, int n) {
    if (n < 1) throw ConfigError("complexity: no points");
    const int d = m.spec.d_in;
    Program prog(&m.layout);
    InitPlan scratch;
    ModelNodes net = emit_model(prog, m.spec, scratch);
    std::vector<int> ex(d);
    for (int c = 0; c < d; ++c) ex[c] = prog.emit(make_extract(net.u, c, 1, 0));
    std::vector<int> dir_coord(d);
    std::iota(dir_coord.begin(), dir_coord.end(), 0);

    const int CHUNK = 8192;
    double acc = 0.0;
    for (int base = 0; base < n; base += CHUNK) {
        const int k = std::min(CHUNK, n - base);
        Tape t(prog, d, 1, k, dir_coord);
        t.bind_points(pts + size_t(base) * d, k);
        t.forward(theta.data());
        for (int c = 0; c < d; ++c) {
            const double* g = t.plain(ex[c]);
            for (int i = 0; i < k; ++i) acc += sq(g[i]);
        }
    }
    return acc / n;
}

std::string ib_phase_annotation(const RunHistory& h) {
    std::vector<std::pair<long long, double>> s;
    for (const HistoryRow& r : h.rows)
        if (std::isfinite(r.snr)) s.push_back({r.iter, r.snr});
    std::ostringstream out;
    out << "# heuristic training-phase markers from the batch snr trend\n";
    out << "# informational only; boundaries are smoothed-trend sign changes\n";
    if (s.size() < 5) {
        out << "insufficient snr samples (" << s.size() << ")\n";
        return out.str();
    }
    // centered moving average, window 5
    const int n = int(s.size());
    Vec sm(n);
    for (int i = 0; i < n; ++i) {
        int lo = std::max(0, i - 2), hi = std::min(n - 1, i + 2);
        double acc = 0;
        for (int k = lo; k <= hi; ++k) acc += s[k].second;
        sm[i] = acc / (hi - lo + 1);
    }
    const int peak = int(std::max_element(sm.begin(), sm.end()) - sm.begin());
    const int tail_n = std::max(3, n / 5);
    double tail = 0;
    for (int i = n - tail_n; i < n; ++i) tail += sm[i];
    tail /= tail_n;
    int eq = n - 1;
    for (int i = peak; i < n; ++i)
        if (sm[i] <= tail + 0.1 * (sm[peak] - tail)) {
            eq = i;
            break;
        }
    out << "fitting: iterations [" << s.front().first << ", " << s[peak].first << "]\n";
    if (eq > peak)
        out << "diffusion: iterations (" << s[peak].first << ", " << s[eq].first << "]\n";
    out << "equilibrium: iterations (" << s[eq].first << ", " << s.back().first << "]\n";
    return out.str();
}

}  // namespace pikan

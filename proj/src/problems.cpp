#include "pikan/problems.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pikan/spectral.hpp"

namespace pikan {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 6.28318530717958647692;

double posmod_2pi(double y) {
    double m = std::fmod(y, kTwoPi);
    if (m < 0) m += kTwoPi;
    return m;
}
}  // namespace

int PdeProblem::ic_rows() const {
    if (!has_ic) return 0;
    return id == PdeId::SineGordon ? 2 : 1;  // wave equation: value and velocity
}

PdeProblem make_problem(PdeId id) {
    PdeProblem p;
    p.id = id;
    switch (id) {
        case PdeId::AllenCahn:
            p.name = "allen_cahn";
            p.domain = {{0, 1}, {-1, 1}};
            p.has_time = true;
            p.arity = {{0, 1}, {1, 2}};
            p.max_order = 2;
            p.bc = {BcKind::None, BcKind::Periodic};
            p.has_ic = true;
            break;
        case PdeId::Burgers:
            p.name = "burgers";
            p.domain = {{0, 1}, {-1, 1}};
            p.has_time = true;
            p.arity = {{0, 1}, {1, 1}, {1, 2}};
            p.max_order = 2;
            p.bc = {BcKind::None, BcKind::DirichletZero};
            p.has_ic = true;
            p.nu = 1.0 / (100.0 * kPi);
            break;
        case PdeId::Kdv:
            p.name = "kdv";
            p.domain = {{0, 1}, {-1, 1}};
            p.has_time = true;
            p.arity = {{0, 1}, {1, 1}, {1, 3}};
            p.max_order = 3;
            p.bc = {BcKind::None, BcKind::Periodic};
            p.has_ic = true;
            break;
        case PdeId::SineGordon:
            p.name = "sine_gordon";
            p.domain = {{0, 1}, {0, 1}};
            p.has_time = true;
            p.arity = {{0, 2}, {1, 2}};
            p.max_order = 2;
            p.bc = {BcKind::None, BcKind::DirichletZero};
            p.has_ic = true;
            p.has_analytic = true;
            break;
        case PdeId::Advection:
            p.name = "advection";
            p.domain = {{0, 1}, {0, kTwoPi}};
            p.has_time = true;
            p.arity = {{0, 1}, {1, 1}};
            p.max_order = 1;
            p.bc = {BcKind::None, BcKind::Periodic};
            p.has_ic = true;
            p.has_analytic = true;
            break;
        case PdeId::Helmholtz:
            p.name = "helmholtz";
            p.domain = {{-1, 1}, {-1, 1}};
            p.arity = {{0, 2}, {1, 2}};
            p.max_order = 2;
            p.bc = {BcKind::DirichletZero, BcKind::DirichletZero};
            p.has_analytic = true;
            p.a1 = 1.0;
            p.a2 = 4.0;
            break;
        case PdeId::Poisson:
            p.name = "poisson";
            p.domain = {{-1, 1}, {-1, 1}};
            p.arity = {{0, 2}, {1, 2}};
            p.max_order = 2;
            p.bc = {BcKind::DirichletZero, BcKind::DirichletZero};
            p.has_analytic = true;
            p.omega = 1.0;
            break;
    }
    return p;
}

PdeProblem make_helmholtz(double a1, double a2) {
    PdeProblem p = make_problem(PdeId::Helmholtz);
    p.a1 = a1;
    p.a2 = a2;
    return p;
}

PdeProblem make_poisson(double omega) {
    PdeProblem p = make_problem(PdeId::Poisson);
    p.omega = omega;
    return p;
}

PdeProblem make_sine_gordon(bool literal_form) {
    PdeProblem p = make_problem(PdeId::SineGordon);
    p.literal_form = literal_form;
    return p;
}

PdeId pde_id_from_name(const std::string& name) {
    if (name == "allen_cahn") return PdeId::AllenCahn;
    if (name == "burgers") return PdeId::Burgers;
    if (name == "kdv") return PdeId::Kdv;
    if (name == "sine_gordon") return PdeId::SineGordon;
    if (name == "advection") return PdeId::Advection;
    if (name == "helmholtz") return PdeId::Helmholtz;
    if (name == "poisson") return PdeId::Poisson;
    throw ConfigError("unknown problem: " + name);
}

// ---------------------------------------------------------------------------
// FieldValues
// ---------------------------------------------------------------------------

void FieldValues::set(int coord, int order, double v) {
    for (size_t i = 0; i < idx.size(); ++i)
        if (idx[i].coord == coord && idx[i].order == order) {
            val[i] = v;
            return;
        }
    idx.push_back({coord, order});
    val.push_back(v);
}

bool FieldValues::has(int coord, int order) const {
    for (const auto& d : idx)
        if (d.coord == coord && d.order == order) return true;
    return false;
}

double FieldValues::get(int coord, int order) const {
    for (size_t i = 0; i < idx.size(); ++i)
        if (idx[i].coord == coord && idx[i].order == order) return val[i];
    throw ConfigError("residual: missing derivative field (coord " + std::to_string(coord) +
                      ", order " + std::to_string(order) + ")");
}

double source(const PdeProblem& p, const double* pt) {
    switch (p.id) {
        case PdeId::SineGordon: {
            if (p.literal_form) return 0.0;
            const double t = pt[0], x = pt[1];
            const double uref = 0.5 * (std::sin(kPi * (x + t)) + std::sin(kPi * (x - t)));
            return std::sin(uref);
        }
        case PdeId::Helmholtz: {
            const double x = pt[0], y = pt[1];
            return (1.0 - kPi * kPi * (p.a1 * p.a1 + p.a2 * p.a2)) * std::sin(p.a1 * kPi * x) *
                   std::sin(p.a2 * kPi * y);
        }
        case PdeId::Poisson: {
            const double x = pt[0], y = pt[1];
            return -2.0 * kPi * kPi * p.omega * p.omega * std::sin(p.omega * kPi * x) *
                   std::sin(p.omega * kPi * y);
        }
        default:
            return 0.0;
    }
}

double residual(const PdeProblem& p, const FieldValues& f, const double* pt) {
    // exact-arity contract: every declared derivative present, nothing extra
    for (const auto& d : p.arity) (void)f.get(d.coord, d.order);
    for (const auto& d : f.idx) {
        bool declared = false;
        for (const auto& a : p.arity)
            if (a.coord == d.coord && a.order == d.order) declared = true;
        if (!declared)
            throw ConfigError("residual: field (coord " + std::to_string(d.coord) + ", order " +
                              std::to_string(d.order) + ") is not part of " + p.name);
    }
    const double u = f.u;
    switch (p.id) {
        case PdeId::AllenCahn:
            return f.get(0, 1) - 1e-4 * f.get(1, 2) - 5.0 * (u - u * u * u);
        case PdeId::Burgers:
            return f.get(0, 1) + u * f.get(1, 1) - p.nu * f.get(1, 2);
        case PdeId::Kdv:
            return f.get(0, 1) + u * f.get(1, 1) + 0.022 * 0.022 * f.get(1, 3);
        case PdeId::SineGordon:
            return f.get(0, 2) - f.get(1, 2) + std::sin(u) - source(p, pt);
        case PdeId::Advection:
            return f.get(0, 1) + 20.0 * f.get(1, 1);
        case PdeId::Helmholtz:
            return f.get(0, 2) + f.get(1, 2) + u - source(p, pt);
        case PdeId::Poisson:
            return f.get(0, 2) + f.get(1, 2) - source(p, pt);
    }
    throw ConfigError("residual: unknown problem");
}

double analytic_solution(const PdeProblem& p, const double* pt) {
    switch (p.id) {
        case PdeId::SineGordon: {
            const double t = pt[0], x = pt[1];
            return 0.5 * (std::sin(kPi * (x + t)) + std::sin(kPi * (x - t)));
        }
        case PdeId::Advection:
            return std::sin(posmod_2pi(pt[1] - 20.0 * pt[0]));
        case PdeId::Helmholtz:
            return std::sin(p.a1 * kPi * pt[0]) * std::sin(p.a2 * kPi * pt[1]);
        case PdeId::Poisson:
            return std::sin(p.omega * kPi * pt[0]) * std::sin(p.omega * kPi * pt[1]);
        default:
            throw DomainError("no closed-form solution for " + p.name);
    }
}

double initial_condition(const PdeProblem& p, double x) {
    switch (p.id) {
        case PdeId::AllenCahn:
            return x * x * std::cos(kPi * x);
        case PdeId::Burgers:
            return -std::sin(kPi * x);
        case PdeId::Kdv:
            return std::cos(kPi * x);
        case PdeId::SineGordon:
            return std::sin(kPi * x);
        case PdeId::Advection:
            return std::sin(x);
        default:
            throw DomainError(p.name + " has no initial condition");
    }
}

bool advection_near_wrap(const double* pt, double tol) {
    const double m = posmod_2pi(pt[1] - 20.0 * pt[0]);
    return m < tol || kTwoPi - m < tol;
}

// ---------------------------------------------------------------------------
// Collocation pool
// ---------------------------------------------------------------------------

CollocationPool make_pool(const PdeProblem& p, const std::vector<int>& res, Rng& rng,
                          int n_active, int n_ic) {
    const int d = p.dim();
    if (int(res.size()) != d) throw ConfigError("make_pool: resolution rank != problem dim");
    for (int r : res)
        if (r < 2) throw ConfigError("make_pool: resolution must be >= 2 per axis");

    CollocationPool pool;
    pool.d = d;
    long long n = 1;
    std::vector<Vec> ax(d);
    for (int a = 0; a < d; ++a) {
        ax[a] = linspace(p.domain[a].lo, p.domain[a].hi, res[a]);
        n *= res[a];
    }
    pool.n_pool = int(n);
    pool.pts.resize(n * d);
    std::vector<int> odo(d, 0);
    for (long long i = 0; i < n; ++i) {
        for (int a = 0; a < d; ++a) pool.pts[i * d + a] = ax[a][odo[a]];
        for (int a = d - 1; a >= 0; --a) {
            if (++odo[a] < res[a]) break;
            odo[a] = 0;
        }
    }
    pool.rba.assign(pool.n_pool, 1.0);

    if (n_active > 0) {
        if (n_active > pool.n_pool) throw ConfigError("make_pool: n_active exceeds pool size");
        // partial Fisher-Yates gives a uniform draw without replacement
        std::vector<int> perm(pool.n_pool);
        for (int i = 0; i < pool.n_pool; ++i) perm[i] = i;
        for (int i = 0; i < n_active; ++i) {
            const int j = i + int(rng.uniform01() * double(pool.n_pool - i));
            std::swap(perm[i], perm[std::min(j, pool.n_pool - 1)]);
        }
        pool.active.assign(perm.begin(), perm.begin() + n_active);
    }

    if (p.has_ic && n_ic > 0) {
        pool.n_ic = n_ic;
        pool.ic_pts.resize(size_t(n_ic) * d);
        Vec xs = linspace(p.domain[1].lo, p.domain[1].hi, n_ic);
        for (int i = 0; i < n_ic; ++i) {
            pool.ic_pts[size_t(i) * d + 0] = p.domain[0].lo;
            pool.ic_pts[size_t(i) * d + 1] = xs[i];
        }
        pool.ic_rba.assign(size_t(n_ic) * p.ic_rows(), 1.0);
    }
    return pool;
}

// ---------------------------------------------------------------------------
// Reference fields
// ---------------------------------------------------------------------------

long long ReferenceField::size() const {
    long long n = 1;
    for (const auto& a : axes) n *= (long long)a.size();
    return n;
}

Vec ReferenceField::grid_points() const {
    const int d = axis_count();
    const long long n = size();
    Vec pts(n * d);
    std::vector<int> odo(d, 0);
    for (long long i = 0; i < n; ++i) {
        for (int a = 0; a < d; ++a) pts[i * d + a] = axes[a][odo[a]];
        for (int a = d - 1; a >= 0; --a) {
            if (++odo[a] < int(axes[a].size())) break;
            odo[a] = 0;
        }
    }
    return pts;
}

void save_reference(const ReferenceField& f, const std::string& path) {
    nlohmann::json h;
    h["axes"] = f.axis_names;
    std::vector<std::vector<double>> dom;
    for (const auto& iv : f.domain) dom.push_back({iv.lo, iv.hi});
    h["domain"] = dom;
    std::vector<int> shape;
    for (const auto& a : f.axes) shape.push_back(int(a.size()));
    h["shape"] = shape;
    h["coords"] = f.axes;
    h["provenance"] = f.provenance;

    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw ConfigError("cannot open for write: " + path);
    const std::string hl = h.dump();
    std::fwrite(hl.data(), 1, hl.size(), fp);
    std::fputc('\n', fp);
    const long long ncols = shape.empty() ? 1 : shape.back();
    char buf[32];
    for (long long i = 0; i < (long long)f.values.size(); ++i) {
        const int len = std::snprintf(buf, sizeof buf, "%.17g", f.values[i]);
        std::fwrite(buf, 1, len, fp);
        std::fputc((i + 1) % ncols == 0 ? '\n' : ',', fp);
    }
    std::fclose(fp);
}

ReferenceField load_reference(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open reference file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string buf = ss.str();

    const size_t nl = buf.find('\n');
    if (nl == std::string::npos)
        throw ConfigError("reference parse error at byte 0: missing header line");
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(buf.substr(0, nl));
    } catch (const std::exception& e) {
        throw ConfigError(std::string("reference header parse error at byte 0: ") + e.what());
    }

    ReferenceField f;
    try {
        f.axis_names = h.at("axes").get<std::vector<std::string>>();
        for (const auto& iv : h.at("domain")) {
            if (iv.size() != 2) throw ConfigError("domain entries must be [lo, hi]");
            f.domain.push_back({iv[0].get<double>(), iv[1].get<double>()});
        }
        f.axes = h.at("coords").get<std::vector<Vec>>();
        const auto shape = h.at("shape").get<std::vector<long long>>();
        if (shape.size() != f.axes.size() || f.axis_names.size() != f.axes.size() ||
            f.domain.size() != f.axes.size())
            throw ConfigError("header rank mismatch between axes/shape/domain/coords");
        for (size_t a = 0; a < shape.size(); ++a)
            if (shape[a] != (long long)f.axes[a].size())
                throw ConfigError("declared shape disagrees with coordinate count on axis " +
                                  std::to_string(a));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("reference header invalid: ") + e.what());
    }

    const long long expected = f.size();
    f.values.reserve(expected);
    const char* base = buf.data();
    const char* q = base + nl + 1;
    const char* end = base + buf.size();
    while (true) {
        while (q < end && (*q == ',' || *q == ' ' || *q == '\n' || *q == '\r' || *q == '\t')) ++q;
        if (q >= end) break;
        char* next = nullptr;
        const double v = std::strtod(q, &next);
        if (next == q)
            throw ConfigError("reference parse error at byte " + std::to_string(q - base));
        f.values.push_back(v);
        q = next;
    }
    if ((long long)f.values.size() != expected)
        throw ConfigError("reference value count mismatch: declared " + std::to_string(expected) +
                          ", found " + std::to_string(f.values.size()));
    f.provenance = "file";
    return f;
}

ReferenceField analytic_field(const PdeProblem& p, const std::vector<int>& shape) {
    if (!p.has_analytic) throw DomainError("no closed-form solution for " + p.name);
    if (int(shape.size()) != p.dim()) throw ConfigError("analytic_field: shape rank mismatch");
    ReferenceField f;
    f.axis_names = p.has_time ? std::vector<std::string>{"t", "x"}
                              : std::vector<std::string>{"x", "y"};
    f.domain = p.domain;
    for (int a = 0; a < p.dim(); ++a)
        f.axes.push_back(linspace(p.domain[a].lo, p.domain[a].hi, shape[a]));
    const Vec pts = f.grid_points();
    const long long n = f.size();
    f.values.resize(n);
    for (long long i = 0; i < n; ++i) f.values[i] = analytic_solution(p, &pts[i * p.dim()]);
    f.provenance = "analytic";
    return f;
}

ReferenceField make_reference(const PdeProblem& p) {
    switch (p.id) {
        case PdeId::SineGordon:
        case PdeId::Advection:
            return analytic_field(p, {101, 256});
        case PdeId::Helmholtz:
        case PdeId::Poisson:
            return analytic_field(p, {256, 256});
        case PdeId::AllenCahn:
        case PdeId::Burgers:
            return spectral_reference(p, 1024, 1.0 / 4000);
        case PdeId::Kdv:
            return spectral_reference(p, 512, 1.0 / 20000);
    }
    throw ConfigError("make_reference: unknown problem");
}

// ---------------------------------------------------------------------------
// Residual / IC graphs
// ---------------------------------------------------------------------------

namespace {

int emit_mul(Program& P, int a, int b) {
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    return P.emit(n);
}

int emit_sadd(Program& P, int a, int b, double c1, double c2, double c0 = 0.0) {
    Node n;
    n.op = Op::ScaleAdd;
    n.a = a;
    n.b = b;
    n.c0 = c0;
    n.c1 = c1;
    n.c2 = c2;
    return P.emit(n);
}

int emit_sin(Program& P, int a) {
    Node n;
    n.op = Op::Sin;
    n.a = a;
    return P.emit(n);
}

// adds -source(pt) so the assembled node is F[u] - f
int emit_minus_source(Program& P, int a, const PdeProblem& p) {
    Node n;
    n.op = Op::AddConst;
    n.a = a;
    n.cgen = [p](const double* pts, int cnt, int d, double* out) {
        for (int i = 0; i < cnt; ++i) out[i] = -source(p, pts + size_t(i) * d);
    };
    return P.emit(n);
}

}  // namespace

ResidualGraph build_residual_graph(Model& m, const PdeProblem& p) {
    if (m.spec.d_in != p.dim() || m.spec.d_out != 1)
        throw ConfigError("residual graph: model is " + std::to_string(m.spec.d_in) + "->" +
                          std::to_string(m.spec.d_out) + ", problem needs " +
                          std::to_string(p.dim()) + "->1");
    ResidualGraph g(&m.layout);
    InitPlan scratch;
    const ModelNodes net = emit_model(g.prog, m.spec, scratch);
    Program& P = g.prog;
    auto ex = [&](int dir, int k) { return P.emit(make_extract(net.u, dir, k, 0)); };

    const int u = ex(0, 0);
    switch (p.id) {
        case PdeId::AllenCahn: {
            const int ut = ex(0, 1), uxx = ex(1, 2);
            const int u2 = emit_mul(P, u, u);
            const int u3 = emit_mul(P, u2, u);
            const int poly = emit_sadd(P, u, u3, -5.0, 5.0);
            const int lin = emit_sadd(P, ut, uxx, 1.0, -1e-4);
            g.res = emit_sadd(P, lin, poly, 1.0, 1.0);
            break;
        }
        case PdeId::Burgers: {
            const int ut = ex(0, 1), ux = ex(1, 1), uxx = ex(1, 2);
            const int adv = emit_mul(P, u, ux);
            const int lin = emit_sadd(P, ut, uxx, 1.0, -p.nu);
            g.res = emit_sadd(P, lin, adv, 1.0, 1.0);
            break;
        }
        case PdeId::Kdv: {
            const int ut = ex(0, 1), ux = ex(1, 1), uxxx = ex(1, 3);
            const int adv = emit_mul(P, u, ux);
            const int lin = emit_sadd(P, ut, uxxx, 1.0, 0.022 * 0.022);
            g.res = emit_sadd(P, lin, adv, 1.0, 1.0);
            break;
        }
        case PdeId::SineGordon: {
            const int utt = ex(0, 2), uxx = ex(1, 2);
            const int wave = emit_sadd(P, utt, uxx, 1.0, -1.0);
            const int r = emit_sadd(P, wave, emit_sin(P, u), 1.0, 1.0);
            g.res = p.literal_form ? r : emit_minus_source(P, r, p);
            break;
        }
        case PdeId::Advection: {
            const int ut = ex(0, 1), ux = ex(1, 1);
            g.res = emit_sadd(P, ut, ux, 1.0, 20.0);
            break;
        }
        case PdeId::Helmholtz: {
            const int uxx = ex(0, 2), uyy = ex(1, 2);
            const int lap = emit_sadd(P, uxx, uyy, 1.0, 1.0);
            const int r = emit_sadd(P, lap, u, 1.0, 1.0);
            g.res = emit_minus_source(P, r, p);
            break;
        }
        case PdeId::Poisson: {
            const int uxx = ex(0, 2), uyy = ex(1, 2);
            const int lap = emit_sadd(P, uxx, uyy, 1.0, 1.0);
            g.res = emit_minus_source(P, lap, p);
            break;
        }
    }
    g.shape.dirs = 2;
    g.shape.K = p.max_order;
    g.shape.dir_coord = {0, 1};
    return g;
}

IcGraph build_ic_graph(Model& m, const PdeProblem& p) {
    if (!p.has_ic) throw ConfigError(p.name + " has no initial condition");
    if (m.spec.d_in != p.dim() || m.spec.d_out != 1)
        throw ConfigError("ic graph: model shape does not match problem");
    IcGraph g(&m.layout);
    InitPlan scratch;
    const ModelNodes net = emit_model(g.prog, m.spec, scratch);
    g.rows.push_back(g.prog.emit(make_extract(net.u, 0, 0, 0)));
    if (p.ic_rows() == 2) {
        g.rows.push_back(g.prog.emit(make_extract(net.u, 0, 1, 0)));
        g.shape = {1, 1, {0}};
    } else {
        g.shape = {1, 0, {0}};
    }
    return g;
}

void apply_problem_bcs(ModelSpec& spec, const PdeProblem& p) {
    spec.d_in = p.dim();
    spec.d_out = 1;
    spec.periodic.clear();
    spec.dirichlet.clear();
    for (int c = 0; c < p.dim(); ++c) {
        if (p.bc[c] == BcKind::Periodic)
            spec.periodic.push_back({c, p.domain[c].len()});
        else if (p.bc[c] == BcKind::DirichletZero)
            spec.dirichlet.push_back({c, p.domain[c].lo, p.domain[c].hi});
    }
}

Vec ic_targets(const PdeProblem& p, const CollocationPool& pool) {
    if (!p.has_ic) throw ConfigError(p.name + " has no initial condition");
    Vec g(size_t(pool.n_ic) * p.ic_rows(), 0.0);
    for (int i = 0; i < pool.n_ic; ++i)
        g[i] = initial_condition(p, pool.ic_pts[size_t(i) * pool.d + 1]);
    return g;  // velocity rows stay zero
}

// ---------------------------------------------------------------------------
// Function-fitting targets
// ---------------------------------------------------------------------------

double bessel_i1(double x) {
    if (x == 0.0) return 0.0;
    const double q = 0.25 * x * x;
    double term = 0.5 * x;
    double sum = term;
    for (int k = 1; k < 200; ++k) {
        term *= q / (double(k) * double(k + 1));
        sum += term;
        if (std::abs(term) <= 1e-15 * std::abs(sum)) break;
    }
    return sum;
}

double bessel_i1_scaled(double x) { return std::exp(-std::abs(x)) * bessel_i1(x); }

int target_dim(TargetId id) {
    switch (id) {
        case TargetId::F1: return 1;
        case TargetId::F2: return 2;
        case TargetId::F3: return 2;
        case TargetId::F4: return 3;
        case TargetId::F5: return 5;
    }
    throw ConfigError("unknown target");
}

TargetId target_from_name(const std::string& name) {
    if (name == "f1") return TargetId::F1;
    if (name == "f2") return TargetId::F2;
    if (name == "f3") return TargetId::F3;
    if (name == "f4") return TargetId::F4;
    if (name == "f5") return TargetId::F5;
    throw ConfigError("unknown target: " + name);
}

double target_function(TargetId id, const double* x) {
    switch (id) {
        case TargetId::F1:
            return std::sin(2.0 * kPi * x[0]) + 3.0 * x[0];
        case TargetId::F2:
            return x[0] * x[1];
        case TargetId::F3:
            return bessel_i1(x[0]) + std::exp(bessel_i1_scaled(x[1])) + std::sin(x[0] * x[1]);
        case TargetId::F4: {
            static const double al[4] = {1.0, 1.2, 3.0, 3.2};
            static const double A[4][3] = {
                {3, 10, 30}, {0.1, 10, 35}, {3, 10, 30}, {0.1, 10, 35}};
            static const double Pm[4][3] = {{0.3689, 0.1170, 0.2673},
                                            {0.4699, 0.4387, 0.7470},
                                            {0.1091, 0.8732, 0.5547},
                                            {0.0381, 0.5743, 0.8828}};
            double s = 0.0;
            for (int k = 0; k < 4; ++k) {
                double e = 0.0;
                for (int j = 0; j < 3; ++j) e += A[k][j] * sq(x[j] - Pm[k][j]);
                s += al[k] * std::exp(-e);
            }
            return -s;
        }
        case TargetId::F5: {
            static const double a[5] = {-0.5, 0.0, 0.5, 1.0, 1.5};
            double prod = 1.0;
            for (int j = 0; j < 5; ++j)
                prod *= (std::abs(4.0 * x[j] - 2.0) + a[j]) / (1.0 + a[j]);
            return prod;
        }
    }
    throw ConfigError("unknown target");
}

}  // namespace pikan

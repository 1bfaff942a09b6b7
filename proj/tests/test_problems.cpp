#include <gsl/gsl_sf_bessel.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "pikan/problems.hpp"

using namespace pikan;

namespace {

constexpr double PI = 3.14159265358979323846;

// closed-form derivative fields of the analytic solutions, for feeding the
// residual contract independently of the tape engine
FieldValues analytic_fields(const PdeProblem& p, const double* pt) {
    FieldValues f;
    f.u = analytic_solution(p, pt);
    switch (p.id) {
        case PdeId::SineGordon: {
            const double t = pt[0], x = pt[1];
            const double s = std::sin(PI * (x + t)) + std::sin(PI * (x - t));
            f.set(0, 2, -0.5 * PI * PI * s);
            f.set(1, 2, -0.5 * PI * PI * s);
            break;
        }
        case PdeId::Advection: {
            const double arg = std::fmod(pt[1] - 20.0 * pt[0], 2 * PI);
            f.set(0, 1, -20.0 * std::cos(arg));
            f.set(1, 1, std::cos(arg));
            break;
        }
        case PdeId::Helmholtz: {
            const double sx = std::sin(p.a1 * PI * pt[0]), sy = std::sin(p.a2 * PI * pt[1]);
            f.set(0, 2, -p.a1 * p.a1 * PI * PI * sx * sy);
            f.set(1, 2, -p.a2 * p.a2 * PI * PI * sx * sy);
            break;
        }
        case PdeId::Poisson: {
            const double w = p.omega;
            const double sx = std::sin(w * PI * pt[0]), sy = std::sin(w * PI * pt[1]);
            f.set(0, 2, -w * w * PI * PI * sx * sy);
            f.set(1, 2, -w * w * PI * PI * sx * sy);
            break;
        }
        default:
            break;
    }
    return f;
}

Vec random_interior(const PdeProblem& p, int n, uint64_t seed) {
    Rng rng(seed);
    Vec pts(size_t(n) * p.dim());
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < p.dim(); ++a)
            pts[size_t(i) * p.dim() + a] = rng.uniform(p.domain[a].lo, p.domain[a].hi);
    return pts;
}

double* p0_dummy() {
    static double p[2] = {0.5, 0.5};
    return p;
}

}  // namespace

TEST_SUITE("problems") {

TEST_CASE("initial conditions at pinned points") {
    CHECK(initial_condition(make_problem(PdeId::AllenCahn), 1.0) == doctest::Approx(-1.0));
    CHECK(initial_condition(make_problem(PdeId::Burgers), 0.0) == 0.0);
    CHECK(initial_condition(make_problem(PdeId::Kdv), 0.0) == 1.0);
    CHECK(initial_condition(make_problem(PdeId::SineGordon), 0.5) == doctest::Approx(1.0));
    CHECK(initial_condition(make_problem(PdeId::Advection), PI / 2) == doctest::Approx(1.0));
    CHECK_THROWS_AS(initial_condition(make_problem(PdeId::Helmholtz), 0.0), DomainError);
    CHECK_THROWS_AS(initial_condition(make_problem(PdeId::Poisson), 0.0), DomainError);
}

TEST_CASE("problem shape declarations") {
    for (PdeId id : {PdeId::AllenCahn, PdeId::Burgers, PdeId::Kdv, PdeId::SineGordon,
                     PdeId::Advection, PdeId::Helmholtz, PdeId::Poisson}) {
        PdeProblem p = make_problem(id);
        CHECK(p.dim() == 2);
        CHECK(pde_id_from_name(p.name) == id);
        CHECK(p.has_ic == p.has_time);  // every evolution problem here has an IC
        if (!p.has_time) {
            CHECK(p.ic_rows() == 0);
            CHECK(p.has_analytic);
        }
    }
    PdeProblem kdv = make_problem(PdeId::Kdv);
    bool third = false;
    for (auto d : kdv.arity) third = third || (d.coord == 1 && d.order == 3);
    CHECK(third);
    CHECK(kdv.max_order == 3);
    CHECK(make_problem(PdeId::SineGordon).ic_rows() == 2);
    CHECK(make_problem(PdeId::Burgers).ic_rows() == 1);
    CHECK_THROWS_AS(pde_id_from_name("heat"), ConfigError);
}

TEST_CASE("analytic solution consistency with the ICs") {
    PdeProblem sg = make_problem(PdeId::SineGordon);
    PdeProblem adv = make_problem(PdeId::Advection);
    Rng rng(11);
    for (int i = 0; i < 100; ++i) {
        double xs = rng.uniform01();
        double p0[2] = {0.0, xs};
        CHECK(analytic_solution(sg, p0) ==
              doctest::Approx(initial_condition(sg, xs)).epsilon(1e-14));
        double xa = rng.uniform(0, 2 * PI);
        double p1[2] = {0.0, xa};
        CHECK(analytic_solution(adv, p1) ==
              doctest::Approx(initial_condition(adv, xa)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(analytic_solution(make_problem(PdeId::AllenCahn), p0_dummy()), DomainError);
}

TEST_CASE("residual demands the declared derivative set, nothing else") {
    PdeProblem p = make_problem(PdeId::Burgers);
    double pt[2] = {0.3, 0.2};
    FieldValues f;
    f.u = 0.5;
    f.set(0, 1, 1.0);
    f.set(1, 1, 2.0);
    CHECK_THROWS_AS(residual(p, f, pt), ConfigError);  // u_xx missing
    f.set(1, 2, 3.0);
    CHECK(residual(p, f, pt) == doctest::Approx(1.0 + 0.5 * 2.0 - p.nu * 3.0).epsilon(1e-15));
    f.set(0, 2, 9.0);  // not part of burgers
    CHECK_THROWS_AS(residual(p, f, pt), ConfigError);
}

TEST_CASE("residual formulas at hand-evaluated points") {
    double pt[2] = {0.25, -0.5};
    {
        FieldValues f;
        f.u = 0.5;
        f.set(0, 1, 2.0);
        f.set(1, 2, 4.0);
        // 2 - 1e-4*4 - 5*(0.5 - 0.125)
        CHECK(residual(make_problem(PdeId::AllenCahn), f, pt) ==
              doctest::Approx(2.0 - 4e-4 - 1.875).epsilon(1e-15));
    }
    {
        FieldValues f;
        f.u = -1.0;
        f.set(0, 1, 1.0);
        f.set(1, 1, 2.0);
        f.set(1, 3, 3.0);
        CHECK(residual(make_problem(PdeId::Kdv), f, pt) ==
              doctest::Approx(1.0 - 2.0 + 0.022 * 0.022 * 3.0).epsilon(1e-15));
    }
    {
        FieldValues f;
        f.u = 0.0;
        f.set(0, 1, 3.0);
        f.set(1, 1, -1.0);
        CHECK(residual(make_problem(PdeId::Advection), f, pt) == doctest::Approx(-17.0));
    }
}

TEST_CASE("analytic solutions satisfy their equations on random points") {
    const int N = 1000;
    SUBCASE("helmholtz a1=1 a2=4") {
        PdeProblem p = make_helmholtz(1, 4);
        Vec pts = random_interior(p, N, 101);
        double worst = 0;
        for (int i = 0; i < N; ++i) {
            const double* x = &pts[2 * i];
            worst = std::max(worst, std::abs(residual(p, analytic_fields(p, x), x)));
        }
        CHECK(worst <= 1e-9);
    }
    SUBCASE("poisson omega 1,2,4") {
        for (double w : {1.0, 2.0, 4.0}) {
            PdeProblem p = make_poisson(w);
            Vec pts = random_interior(p, N, 37 + int(w));
            double worst = 0;
            for (int i = 0; i < N; ++i) {
                const double* x = &pts[2 * i];
                worst = std::max(worst, std::abs(residual(p, analytic_fields(p, x), x)));
            }
            CHECK(worst <= 1e-9);
        }
    }
    SUBCASE("advection away from the wrap line") {
        PdeProblem p = make_problem(PdeId::Advection);
        Vec pts = random_interior(p, N, 55);
        double worst = 0;
        int used = 0;
        for (int i = 0; i < N; ++i) {
            const double* x = &pts[2 * i];
            if (advection_near_wrap(x)) continue;
            ++used;
            worst = std::max(worst, std::abs(residual(p, analytic_fields(p, x), x)));
        }
        CHECK(used > 900);
        CHECK(worst <= 1e-10);
    }
    SUBCASE("sine gordon with the source correction") {
        PdeProblem p = make_problem(PdeId::SineGordon);
        Vec pts = random_interior(p, N, 77);
        double worst = 0;
        for (int i = 0; i < N; ++i) {
            const double* x = &pts[2 * i];
            worst = std::max(worst, std::abs(residual(p, analytic_fields(p, x), x)));
        }
        CHECK(worst <= 1e-9);
    }
    SUBCASE("literal sine gordon differs from the corrected form by the source") {
        PdeProblem lit = make_sine_gordon(true);
        PdeProblem cor = make_sine_gordon(false);
        double pt[2] = {0.4, 0.7};
        FieldValues f = analytic_fields(cor, pt);
        CHECK(residual(lit, f, pt) - residual(cor, f, pt) ==
              doctest::Approx(source(cor, pt)).epsilon(1e-14));
        CHECK(source(lit, pt) == 0.0);
    }
}

TEST_CASE("boundary values of the analytic solutions") {
    Rng rng(5);
    PdeProblem hh = make_helmholtz(1, 4);
    PdeProblem sg = make_problem(PdeId::SineGordon);
    PdeProblem adv = make_problem(PdeId::Advection);
    for (int i = 0; i < 1000; ++i) {
        const double r = rng.uniform(-1, 1);
        for (double edge : {-1.0, 1.0}) {
            double px[2] = {edge, r}, py[2] = {r, edge};
            CHECK(std::abs(analytic_solution(hh, px)) <= 1e-12);
            CHECK(std::abs(analytic_solution(hh, py)) <= 1e-12);
        }
        const double t = rng.uniform01();
        double s0[2] = {t, 0.0}, s1[2] = {t, 1.0};
        CHECK(std::abs(analytic_solution(sg, s0)) <= 1e-12);
        CHECK(std::abs(analytic_solution(sg, s1)) <= 1e-12);
        double a0[2] = {t, 0.0}, a1[2] = {t, 2 * PI};
        CHECK(analytic_solution(adv, a0) ==
              doctest::Approx(analytic_solution(adv, a1)).epsilon(1e-11));
    }
}

TEST_CASE("pool is the tensor grid with unit weights") {
    Rng rng(42);
    PdeProblem ac = make_problem(PdeId::AllenCahn);
    CollocationPool big = make_pool(ac, {400, 400}, rng);
    CHECK(big.n_pool == 160000);
    CHECK(big.rba.size() == 160000);
    for (int i : {0, 7777, 159999}) CHECK(big.rba[i] == 1.0);
    // corners of the 2x2 grid, row-major with t slowest
    CollocationPool c = make_pool(ac, {2, 2}, rng);
    CHECK(c.n_pool == 4);
    const double want[8] = {0, -1, 0, 1, 1, -1, 1, 1};
    for (int i = 0; i < 8; ++i) CHECK(c.pts[i] == want[i]);
}

TEST_CASE("pool initial-condition points and active draw") {
    PdeProblem sg = make_problem(PdeId::SineGordon);
    Rng rng(9);
    CollocationPool pool = make_pool(sg, {11, 13}, rng, 40, 64);
    CHECK(pool.n_pool == 143);
    CHECK(pool.n_ic == 64);
    CHECK(pool.ic_rba.size() == 128);  // value + velocity rows
    CHECK(int(pool.active.size()) == 40);
    std::vector<char> seen(pool.n_pool, 0);
    for (int a : pool.active) {
        CHECK(a >= 0);
        CHECK(a < pool.n_pool);
        CHECK(!seen[a]);
        seen[a] = 1;
    }
    for (int i = 0; i < 64; ++i) {
        CHECK(pool.ic_pts[2 * i] == 0.0);
        CHECK(pool.ic_pts[2 * i + 1] == doctest::Approx(double(i) / 63.0).epsilon(1e-15));
    }

    PdeProblem ac = make_problem(PdeId::AllenCahn);
    Rng r2(9);
    CHECK(make_pool(ac, {5, 5}, r2, 0, 16).ic_rba.size() == 16);

    PdeProblem hh = make_problem(PdeId::Helmholtz);
    Rng r3(9);
    CollocationPool hp = make_pool(hh, {5, 5}, r3, 0, 64);
    CHECK(hp.n_ic == 0);
    CHECK(hp.ic_pts.empty());

    Rng r4(9);
    CHECK_THROWS_AS(make_pool(ac, {2, 2}, r4, 5, 0), ConfigError);   // 5 > 4
    CHECK_THROWS_AS(make_pool(ac, {1, 4}, r4, 0, 0), ConfigError);   // res < 2
    CHECK_THROWS_AS(make_pool(ac, {4}, r4, 0, 0), ConfigError);      // rank
}

TEST_CASE("pool determinism under a fixed seed") {
    PdeProblem ac = make_problem(PdeId::AllenCahn);
    Rng a(123), b(123), c(321);
    CollocationPool p1 = make_pool(ac, {20, 20}, a, 50, 32);
    CollocationPool p2 = make_pool(ac, {20, 20}, b, 50, 32);
    CollocationPool p3 = make_pool(ac, {20, 20}, c, 50, 32);
    CHECK(p1.pts == p2.pts);
    CHECK(p1.active == p2.active);
    CHECK(p1.ic_pts == p2.ic_pts);
    CHECK(p1.active != p3.active);
}

TEST_CASE("reference field round-trips through the csv format") {
    ReferenceField f;
    f.axis_names = {"t", "x"};
    f.domain = {{0, 1}, {-1, 1}};
    f.axes = {{0.0, 1.0}, {-1.0, 0.9999999999999}};
    f.values = {1.5, -2.25e-17, 3.0, 0.1 + 0.2};
    f.provenance = "analytic";
    const std::string path = "ref_roundtrip_test.csv";
    save_reference(f, path);
    ReferenceField g = load_reference(path);
    CHECK(g.axis_names == f.axis_names);
    CHECK(g.axes == f.axes);  // %.17g is lossless for doubles
    CHECK(g.values == f.values);
    CHECK(g.domain.size() == 2);
    CHECK(g.domain[1].lo == -1.0);
    CHECK(g.provenance == "file");
    std::remove(path.c_str());
}

TEST_CASE("reference loader rejects malformed files") {
    const std::string path = "ref_bad_test.csv";
    {
        std::ofstream out(path);
        out << "{\"axes\":[\"t\",\"x\"],\"domain\":[[0,1],[-1,1]],\"shape\":[2,2],"
               "\"coords\":[[0,1],[0,1]],\"provenance\":\"file\"}\n1,2\n3\n";
    }
    CHECK_THROWS_WITH_AS(load_reference(path), doctest::Contains("mismatch"), ConfigError);
    {
        std::ofstream out(path);
        out << "not json at all\n1,2,3,4\n";
    }
    CHECK_THROWS_AS(load_reference(path), ConfigError);
    {
        std::ofstream out(path);
        out << "{\"axes\":[\"t\",\"x\"],\"domain\":[[0,1],[-1,1]],\"shape\":[2,2],"
               "\"coords\":[[0,1],[0,1]],\"provenance\":\"file\"}\n1,2\n3,garbage\n";
    }
    CHECK_THROWS_WITH_AS(load_reference(path), doctest::Contains("byte"), ConfigError);
    {
        std::ofstream out(path);
        out << "{\"axes\":[\"t\"],\"domain\":[[0,1]],\"shape\":[3],"
               "\"coords\":[[0,1]],\"provenance\":\"file\"}\n1,2,3\n";
    }
    CHECK_THROWS_WITH_AS(load_reference(path), doctest::Contains("axis"), ConfigError);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_reference("no_such_file_anywhere.csv"), ConfigError);
}

TEST_CASE("declared 100x256 grid with matching values is accepted") {
    PdeProblem hh = make_helmholtz(1, 4);
    ReferenceField f = analytic_field(hh, {100, 256});
    CHECK(f.size() == 25600);
    const std::string path = "ref_hh_test.csv";
    save_reference(f, path);
    ReferenceField g = load_reference(path);
    CHECK(g.values == f.values);
    std::remove(path.c_str());
}

TEST_CASE("analytic field samples the closed form on the grid") {
    PdeProblem p = make_poisson(2);
    ReferenceField f = analytic_field(p, {21, 17});
    CHECK(f.axes[0].size() == 21);
    CHECK(f.axes[1].size() == 17);
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const int i = int(rng.uniform01() * 21), j = int(rng.uniform01() * 17);
        double pt[2] = {f.axes[0][i], f.axes[1][j]};
        CHECK(f.values[size_t(i) * 17 + j] ==
              doctest::Approx(analytic_solution(p, pt)).epsilon(1e-15));
    }
    CHECK_THROWS_AS(analytic_field(make_problem(PdeId::Burgers), {4, 4}), DomainError);
    Vec pts = analytic_field(p, {3, 2}).grid_points();
    CHECK(pts.size() == 12);
    CHECK(pts[0] == -1.0);   // (x0, y0)
    CHECK(pts[1] == -1.0);
    CHECK(pts[3] == 1.0);    // (x0, y1)
    CHECK(pts[4] == 0.0);    // (x1, y0)
}

TEST_CASE("problem bcs map onto the model spec") {
    ModelSpec spec;
    apply_problem_bcs(spec, make_problem(PdeId::Advection));
    CHECK(spec.d_in == 2);
    REQUIRE(spec.periodic.size() == 1);
    CHECK(spec.periodic[0].coord == 1);
    CHECK(spec.periodic[0].length == doctest::Approx(2 * PI));
    CHECK(spec.dirichlet.empty());

    apply_problem_bcs(spec, make_problem(PdeId::Helmholtz));
    CHECK(spec.periodic.empty());
    REQUIRE(spec.dirichlet.size() == 2);
    CHECK(spec.dirichlet[0].coord == 0);
    CHECK(spec.dirichlet[1].coord == 1);
    CHECK(spec.dirichlet[0].lo == -1.0);
    CHECK(spec.dirichlet[0].hi == 1.0);

    apply_problem_bcs(spec, make_problem(PdeId::Burgers));
    CHECK(spec.periodic.empty());
    REQUIRE(spec.dirichlet.size() == 1);
    CHECK(spec.dirichlet[0].coord == 1);
}

TEST_CASE("tape residual graphs match the point-wise contract") {
    struct Case {
        PdeProblem p;
        Arch arch;
    };
    std::vector<Case> cases = {
        {make_problem(PdeId::AllenCahn), Arch::RgaKan},
        {make_problem(PdeId::Burgers), Arch::Cpikan},
        {make_problem(PdeId::Kdv), Arch::Cpikan},
        {make_problem(PdeId::SineGordon), Arch::Cpikan},
        {make_sine_gordon(true), Arch::Cpikan},
        {make_problem(PdeId::Advection), Arch::Cpikan},
        {make_problem(PdeId::Helmholtz), Arch::RgaKan},
        {make_problem(PdeId::Poisson), Arch::Cpikan},
    };
    const int n = 64;
    for (auto& cs : cases) {
        CAPTURE(cs.p.name);
        ModelSpec spec;
        spec.arch = cs.arch;
        spec.width = 4;
        spec.depth = 1;
        spec.degree = 3;
        spec.sine_degree = 3;
        if (cs.arch == Arch::RgaKan) {
            spec.alpha_init = 1.0;
            spec.beta_init = 0.0;
        }
        apply_problem_bcs(spec, cs.p);
        auto m = build_model(spec);
        Vec theta = init_model_params(*m, 2024);
        Rng pr(606);
        for (auto& th : theta) th += 0.02 * pr.normal();

        ResidualGraph rg = build_residual_graph(*m, cs.p);
        CHECK(rg.shape.K == cs.p.max_order);
        Vec pts = random_interior(cs.p, n, 1000 + int(cs.p.id));
        Tape tr(rg.prog, rg.shape.dirs, rg.shape.K, n, rg.shape.dir_coord);
        tr.bind_points(pts.data(), n);
        tr.forward(theta.data());
        const double* res = tr.plain(rg.res);

        // independent path: raw derivative extracts -> scalar contract
        Program P2(&m->layout);
        InitPlan scratch;
        ModelNodes net2 = emit_model(P2, m->spec, scratch);
        const int un = P2.emit(make_extract(net2.u, 0, 0, 0));
        std::vector<int> exn;
        for (auto d : cs.p.arity)
            exn.push_back(P2.emit(make_extract(net2.u, d.coord, d.order, 0)));
        Tape t2(P2, 2, cs.p.max_order, n, {0, 1});
        t2.bind_points(pts.data(), n);
        t2.forward(theta.data());
        for (int i = 0; i < n; ++i) {
            FieldValues fv;
            fv.u = t2.plain(un)[i];
            for (size_t a = 0; a < cs.p.arity.size(); ++a)
                fv.set(cs.p.arity[a].coord, cs.p.arity[a].order, t2.plain(exn[a])[i]);
            const double want = residual(cs.p, fv, &pts[2 * i]);
            CHECK(res[i] == doctest::Approx(want).epsilon(1e-11));
        }
    }
}

TEST_CASE("residual graph rejects a mismatched model") {
    ModelSpec spec;
    spec.d_in = 3;
    spec.d_out = 1;
    auto m = build_model(spec);
    PdeProblem p = make_problem(PdeId::Burgers);
    CHECK_THROWS_AS(build_residual_graph(*m, p), ConfigError);
}

TEST_CASE("ic graph rows: value everywhere, velocity for the wave equation") {
    PdeProblem sg = make_problem(PdeId::SineGordon);
    ModelSpec spec;
    spec.width = 6;
    spec.depth = 1;
    spec.degree = 4;
    apply_problem_bcs(spec, sg);
    auto m = build_model(spec);
    Vec theta = init_model_params(*m, 7);
    Rng pr(17);
    for (auto& th : theta) th += 0.05 * pr.normal();

    Rng prng(33);
    CollocationPool pool = make_pool(sg, {5, 5}, prng, 0, 32);
    IcGraph g = build_ic_graph(*m, sg);
    REQUIRE(g.rows.size() == 2);
    CHECK(g.shape.K == 1);
    Tape t(g.prog, g.shape.dirs, g.shape.K, pool.n_ic, g.shape.dir_coord);
    t.bind_points(pool.ic_pts.data(), pool.n_ic);
    t.forward(theta.data());

    Vec u0 = model_eval(*m, theta, pool.ic_pts.data(), pool.n_ic);
    for (int i = 0; i < pool.n_ic; ++i)
        CHECK(t.plain(g.rows[0])[i] == doctest::Approx(u0[i]).epsilon(1e-13));

    // velocity row against central differences in t
    const double h = 1e-6;
    Vec shifted = pool.ic_pts;
    for (int i = 0; i < pool.n_ic; ++i) shifted[2 * i] += h;
    Vec up = model_eval(*m, theta, shifted.data(), pool.n_ic);
    for (int i = 0; i < pool.n_ic; ++i) shifted[2 * i] -= 2 * h;
    Vec um = model_eval(*m, theta, shifted.data(), pool.n_ic);
    for (int i = 0; i < pool.n_ic; ++i) {
        const double fd = (up[i] - um[i]) / (2 * h);
        CHECK(t.plain(g.rows[1])[i] == doctest::Approx(fd).epsilon(1e-5));
    }

    // first-order problems carry a single row
    PdeProblem ac = make_problem(PdeId::AllenCahn);
    ModelSpec spec2;
    spec2.width = 4;
    spec2.depth = 1;
    spec2.degree = 3;
    apply_problem_bcs(spec2, ac);
    auto m2 = build_model(spec2);
    IcGraph g2 = build_ic_graph(*m2, ac);
    CHECK(g2.rows.size() == 1);
    CHECK(g2.shape.K == 0);
    CHECK_THROWS_AS(build_ic_graph(*m2, make_problem(PdeId::Poisson)), ConfigError);
}

TEST_CASE("ic targets stack value rows then zero velocity rows") {
    PdeProblem sg = make_problem(PdeId::SineGordon);
    Rng rng(1);
    CollocationPool pool = make_pool(sg, {4, 4}, rng, 0, 16);
    Vec tg = ic_targets(sg, pool);
    REQUIRE(tg.size() == 32);
    for (int i = 0; i < 16; ++i) {
        CHECK(tg[i] == doctest::Approx(std::sin(PI * pool.ic_pts[2 * i + 1])).epsilon(1e-14));
        CHECK(tg[16 + i] == 0.0);
    }
}

TEST_CASE("wrap-line detector flags only the discontinuity band") {
    double on[2] = {0.0, 1e-5};
    CHECK(advection_near_wrap(on));
    double on2[2] = {0.05, 1.0 + 1e-4};  // x - 20t = 1e-4
    CHECK(advection_near_wrap(on2));
    double off[2] = {0.0, PI};
    CHECK(!advection_near_wrap(off));
    double just_out[2] = {0.0, 2e-3};
    CHECK(!advection_near_wrap(just_out));
}

TEST_CASE("target functions at pinned points") {
    double x2[2] = {0.5, -0.5};
    CHECK(target_function(TargetId::F2, x2) == -0.25);
    double x1[1] = {0.0};
    CHECK(target_function(TargetId::F1, x1) == 0.0);
    x1[0] = 0.25;
    CHECK(target_function(TargetId::F1, x1) == doctest::Approx(1.75).epsilon(1e-15));
    double x5[5] = {0.75, 0.75, 0.75, 0.75, 0.75};
    CHECK(target_function(TargetId::F5, x5) == 1.0);
    CHECK(target_dim(TargetId::F1) == 1);
    CHECK(target_dim(TargetId::F3) == 2);
    CHECK(target_dim(TargetId::F4) == 3);
    CHECK(target_dim(TargetId::F5) == 5);
    CHECK(target_from_name("f4") == TargetId::F4);
    CHECK_THROWS_AS(target_from_name("f9"), ConfigError);
}

TEST_CASE("bessel series agrees with the library implementation") {
    CHECK(bessel_i1(0.0) == 0.0);
    for (double x = -1.0; x <= 1.0001; x += 0.0625) {
        CHECK(bessel_i1(x) == doctest::Approx(gsl_sf_bessel_I1(x)).epsilon(1e-14));
        CHECK(bessel_i1_scaled(x) ==
              doctest::Approx(gsl_sf_bessel_I1_scaled(x)).epsilon(1e-14));
        CHECK(bessel_i1(-x) == doctest::Approx(-bessel_i1(x)).epsilon(1e-15));
    }
    // a couple of values outside the fitting box for series robustness
    CHECK(bessel_i1(3.5) == doctest::Approx(gsl_sf_bessel_I1(3.5)).epsilon(1e-13));
    double x3[2] = {0.3, -0.8};
    const double want = gsl_sf_bessel_I1(0.3) + std::exp(gsl_sf_bessel_I1_scaled(-0.8)) +
                        std::sin(0.3 * -0.8);
    CHECK(target_function(TargetId::F3, x3) == doctest::Approx(want).epsilon(1e-13));
}

TEST_CASE("hartmann matches the published minimum") {
    // global minimum of the standard 3-d hartmann function
    double xm[3] = {0.114614, 0.555649, 0.852547};
    CHECK(target_function(TargetId::F4, xm) == doctest::Approx(-3.86278).epsilon(2e-5));
    // perturbations never go lower
    Rng rng(8);
    for (int i = 0; i < 200; ++i) {
        double x[3];
        for (int j = 0; j < 3; ++j) x[j] = xm[j] + 0.3 * rng.normal();
        CHECK(target_function(TargetId::F4, x) >= -3.86279);
    }
}

TEST_CASE("sobol g-function has unit mean on the unit cube") {
    Rng rng(999);
    double acc = 0.0;
    const int N = 200000;
    for (int i = 0; i < N; ++i) {
        double x[5];
        for (int j = 0; j < 5; ++j) x[j] = rng.uniform01();
        acc += target_function(TargetId::F5, x);
    }
    CHECK(acc / N == doctest::Approx(1.0).epsilon(0.02));
}

}  // TEST_SUITE

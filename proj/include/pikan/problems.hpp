#pragma once

#include <string>
#include <vector>

#include "pikan/models.hpp"
#include "pikan/rng.hpp"

namespace pikan {

// ---------------------------------------------------------------------------
// Benchmark problems. All are scalar-valued over two coordinates: (t, x) for
// the evolution equations, (x, y) for the stationary ones.
// ---------------------------------------------------------------------------

enum class PdeId { AllenCahn, Burgers, Kdv, SineGordon, Advection, Helmholtz, Poisson };

struct Interval {
    double lo = 0.0, hi = 1.0;
    double len() const { return hi - lo; }
};

// one required derivative: d^order u / d coord^order
struct DerivIndex {
    int coord = 0;
    int order = 1;
};

enum class BcKind { None, Periodic, DirichletZero };

struct PdeProblem {
    PdeId id{};
    std::string name;
    std::vector<Interval> domain;  // coordinate 0 is time when has_time
    bool has_time = false;
    std::vector<DerivIndex> arity;  // minimal derivative set of the residual
    int max_order = 0;              // largest derivative order (tape jet order)
    std::vector<BcKind> bc;         // per coordinate
    bool has_ic = false;
    bool has_analytic = false;
    // parameters
    double nu = 0.0;            // burgers viscosity
    double a1 = 1.0, a2 = 4.0;  // helmholtz frequencies
    double omega = 1.0;         // poisson frequency
    // sine_gordon: the stated closed form solves the sourceless wave part, so
    // the default residual subtracts f = sin(u_ref); literal_form drops f and
    // with it the exactness of the reference.
    bool literal_form = false;

    int dim() const { return int(domain.size()); }
    // residual rows per initial-condition point (2 when the equation is
    // second order in time: value and velocity)
    int ic_rows() const;
};

PdeProblem make_problem(PdeId id);
PdeProblem make_helmholtz(double a1, double a2);
PdeProblem make_poisson(double omega);
PdeProblem make_sine_gordon(bool literal_form);
PdeId pde_id_from_name(const std::string& name);

// ---------------------------------------------------------------------------
// Point-wise reference semantics. FieldValues carries u and exactly the
// derivative entries the caller filled in; residual() demands the problem's
// declared set, nothing more, so mismatched callers fail loudly.
// ---------------------------------------------------------------------------

struct FieldValues {
    double u = 0.0;
    std::vector<DerivIndex> idx;
    Vec val;

    void set(int coord, int order, double v);
    bool has(int coord, int order) const;
    double get(int coord, int order) const;  // throws when absent
};

// F[u] - f at one point
double residual(const PdeProblem& p, const FieldValues& f, const double* pt);

// forcing term f (zero for most problems)
double source(const PdeProblem& p, const double* pt);

double analytic_solution(const PdeProblem& p, const double* pt);
double initial_condition(const PdeProblem& p, double x);

// true within `tol` of the characteristic wrap line mod(x - 20t, 2pi) = 0,
// where the advection reference is non-smooth in floating point
bool advection_near_wrap(const double* pt, double tol = 1e-3);

// ---------------------------------------------------------------------------
// Collocation pool: a fixed uniform grid the trainer resamples from, plus the
// initial-condition point set. RBA weights live here so they persist across
// resamples.
// ---------------------------------------------------------------------------

struct CollocationPool {
    int d = 0;
    int n_pool = 0;
    Vec pts;                  // n_pool x d row-major
    Vec rba;                  // n_pool, init 1
    std::vector<int> active;  // current training subset (indices into pool)
    int n_ic = 0;
    Vec ic_pts;  // n_ic x d at t = lo (empty for stationary problems)
    Vec ic_rba;  // n_ic * ic_rows(), init 1
};

// uniform grid with `res[a]` points per axis (endpoints included); n_active
// initial training indices drawn uniformly without replacement; n_ic
// initial-condition points uniformly spaced on the t = t0 slice
CollocationPool make_pool(const PdeProblem& p, const std::vector<int>& res,
                          Rng& rng, int n_active = 0, int n_ic = 64);

// ---------------------------------------------------------------------------
// Reference solutions on tensor-product grids.
// ---------------------------------------------------------------------------

struct ReferenceField {
    std::vector<std::string> axis_names;
    std::vector<Interval> domain;
    std::vector<Vec> axes;  // explicit coordinates per axis
    Vec values;             // row-major, first axis slowest
    std::string provenance;  // analytic | file | spectral_oracle

    int axis_count() const { return int(axes.size()); }
    long long size() const;
    // flattened grid points (size() x axis_count), same order as values
    Vec grid_points() const;
};

void save_reference(const ReferenceField& f, const std::string& path);
ReferenceField load_reference(const std::string& path);

// closed form sampled on a uniform grid (problems with has_analytic)
ReferenceField analytic_field(const PdeProblem& p, const std::vector<int>& shape);

// Fourier-collocation / IF-RK4 oracle for the three periodic evolution
// problems; nt = round(1/dt) steps. Output grid: 101 time slices x the
// collocation grid (subsampled to 256 columns when modes is a multiple).
ReferenceField spectral_reference(const PdeProblem& p, int modes, double dt);

// dispatch: analytic where available, otherwise the spectral oracle at the
// per-problem default resolution
ReferenceField make_reference(const PdeProblem& p);

// ---------------------------------------------------------------------------
// Residual / initial-condition graphs over a network. The graphs share the
// model's parameter layout, so one theta drives every tape.
// ---------------------------------------------------------------------------

struct TapeShape {
    int dirs = 0;
    int K = 0;
    std::vector<int> dir_coord;
};

struct ResidualGraph {
    Program prog;
    int res = -1;  // plain per-point residual node
    TapeShape shape;
    explicit ResidualGraph(ParamLayout* layout) : prog(layout) {}
};

struct IcGraph {
    Program prog;
    std::vector<int> rows;  // plain nodes: u(t0, x), then u_t(t0, x) if second order
    TapeShape shape;
    explicit IcGraph(ParamLayout* layout) : prog(layout) {}
};

ResidualGraph build_residual_graph(Model& m, const PdeProblem& p);
IcGraph build_ic_graph(Model& m, const PdeProblem& p);

// fills spec.d_in / periodic / dirichlet from the problem's BCs
void apply_problem_bcs(ModelSpec& spec, const PdeProblem& p);

// initial-condition targets at the pool's ic points, ic_rows() rows stacked
// (velocity rows are zero)
Vec ic_targets(const PdeProblem& p, const CollocationPool& pool);

// ---------------------------------------------------------------------------
// Function-fitting targets.
// ---------------------------------------------------------------------------

enum class TargetId { F1, F2, F3, F4, F5 };

int target_dim(TargetId id);
double target_function(TargetId id, const double* x);
TargetId target_from_name(const std::string& name);

// modified Bessel I1 via its power series (relative truncation 1e-15) and the
// exponentially scaled variant exp(-|x|) I1(x)
double bessel_i1(double x);
double bessel_i1_scaled(double x);

}  // namespace pikan

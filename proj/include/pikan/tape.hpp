#pragma once
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pikan/common.hpp"

namespace pikan {

// ---------------------------------------------------------------------------
// Parameter layout: named slices into one flat vector. Builders call add()
// with define-or-lookup semantics so the same model emitted into several
// programs (pde / ic / bc tapes) maps onto one parameter vector.
// ---------------------------------------------------------------------------
struct ParamSlice {
    std::string name;
    int offset = 0;
    int rows = 0, cols = 0;  // cols == 1 for vectors/scalars
    int size() const { return rows * cols; }
};

struct ParamLayout {
    std::vector<ParamSlice> slices;
    int total = 0;

    int add(const std::string& name, int rows, int cols) {
        for (int i = 0; i < int(slices.size()); ++i) {
            if (slices[i].name == name) {
                if (slices[i].rows != rows || slices[i].cols != cols)
                    throw ConfigError("param slice redefined with different shape: " + name);
                return i;
            }
        }
        ParamSlice s;
        s.name = name;
        s.offset = total;
        s.rows = rows;
        s.cols = cols;
        slices.push_back(s);
        total += rows * cols;
        return int(slices.size()) - 1;
    }
    int find(const std::string& name) const {
        for (int i = 0; i < int(slices.size()); ++i)
            if (slices[i].name == name) return i;
        throw ConfigError("unknown param slice: " + name);
    }
    const ParamSlice& at(int id) const { return slices[id]; }
};

// ---------------------------------------------------------------------------
// Program: a straight-line graph of batched jet operations. Built once per
// tape kind (pde residual / ic residual / plain eval), evaluated many times.
// ---------------------------------------------------------------------------
enum class Op : uint8_t {
    Input,           // coordinates; jets seeded by direction map
    PeriodicEmbed,   // per-coordinate passthrough or (cos Wx, sin Wx); operand = Input
    Contract,        // W a + bias (bias on order-0 planes)
    ContractRwf,     // exp(s)_j * (V a)_j + bias_j  (row-weight factorization)
    ChebyBasis,      // out[i*D+m-1] = T_m(tanh a_i), m = 1..D
    SineBasis,       // out[i*Ds+m-1] = (sin(w_m a_i + p_m) - mu_m)/sigma_m
    SinCosFeat,      // [cos(a); sin(a)], width doubles
    Tanh,            // elementwise
    Sin,             // elementwise
    Mul,             // elementwise jet product
    ScaleAdd,        // c1*a + c2*b + c0 (b optional; c0 on order-0 planes)
    MixParam,        // p*a + (1-p)*b, p a scalar parameter
    DirichletShape,  // phi(x) * a, phi = product of scaled boundary factors
    GatherCols,      // out[c] = a[cols[c]]
    Extract,         // k-th derivative along one direction of one column -> plain
    AddConst,        // a + per-point constant (plain operands only)
};

struct Node {
    Op op{};
    int width = 0;
    int a = -1, b = -1;  // operand node ids
    // param slice ids (meaning depends on op)
    int s_w = -1, s_b = -1, s_aux = -1;
    int i0 = 0, i1 = 0, i2 = 0;       // op ints: D / dir / k / col / param index
    double c0 = 0, c1 = 1, c2 = 0;    // ScaleAdd coefficients
    std::vector<int> icols;           // GatherCols map; PeriodicEmbed periodic flags;
                                      // DirichletShape coordinate indices
    std::vector<double> dvals;        // PeriodicEmbed omegas; DirichletShape (a,b) pairs
    // AddConst: fills out[0..n) given points (n x d row-major); called at bind
    std::function<void(const double* pts, int n, int d, double* out)> cgen;
};

inline Node make_extract(int a, int dir, int k, int col = 0) {
    Node n;
    n.op = Op::Extract;
    n.a = a;
    n.i0 = dir;
    n.i1 = k;
    n.i2 = col;
    return n;
}

struct Program {
    ParamLayout* params = nullptr;  // not owned
    std::vector<Node> nodes;
    int d_in = 0;
    int input = -1;

    explicit Program(ParamLayout* layout) : params(layout) {}

    int emit(Node n);  // validates operands, returns node id
    int emit_input(int d);
    const Node& at(int id) const { return nodes[id]; }
};

// ---------------------------------------------------------------------------
// Tape: a Program instantiated at a batch shape. dirs directions, jets to
// order K, batch points. Plain evaluation is the same engine at dirs=1, K=0.
// dir_coord[d] names the coordinate differentiated along direction d.
// ---------------------------------------------------------------------------
class Tape {
  public:
    Tape(const Program& prog, int dirs, int K, int batch, std::vector<int> dir_coord);

    // n must equal batch; points row-major (n x d_in)
    void bind_points(const double* pts, int n);

    void forward(const double* theta);

    // adjoint seeding: zero everything, then write into adj(node)
    void zero_adjoints();
    double* adj(int node);
    // reverse sweep; parameter gradients accumulate into grad (size layout.total)
    void backward(const double* theta, double* grad);

    const double* value(int node) const { return val_[node].data(); }
    int planes_of(int node) const { return nplanes_[node]; }
    int rows_of(int node) const { return nplanes_[node] * batch_; }
    int batch() const { return batch_; }
    int order() const { return K_; }
    int dirs() const { return dirs_; }

    // plain per-point view of an extracted / assembled node (planes == 1)
    const double* plain(int node) const;

  private:
    const Program* prog_;
    int dirs_, K_, batch_, planes_;
    std::vector<int> dir_coord_;
    std::vector<int> nplanes_;
    std::vector<char> point_pure_;  // computed at bind_points, skipped in forward
    std::vector<Vec> val_, adj_, aux_;
    Vec scratch_;
    Vec pts_;
    bool bound_ = false, have_adj_ = false;

    void ensure_adj();
    void exec(int id, const double* theta);
    void exec_point_pure(int id);
    void back(int id, const double* theta, double* grad);
};

}  // namespace pikan

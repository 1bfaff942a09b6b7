#pragma once
#include <string>
#include <vector>

#include "pikan/common.hpp"
#include "pikan/models.hpp"
#include "pikan/problems.hpp"
#include "pikan/rng.hpp"

namespace pikan {

struct RunHistory;  // trainer.hpp

// ||pred - ref||_2 / ||ref||_2; zero-norm reference is undefined
double relative_l2(const Vec& pred, const Vec& ref);

// evaluate the model over the reference grid (chunked) and score it
double model_rel_l2(Model& m, const Vec& theta, const ReferenceField& ref);

// ||mean_b g_b|| / ||std_b g_b||, std per component across batches
// (population), then the l2 norm. Identical gradients in every component
// return +inf.
double snr_from_grads(const std::vector<Vec>& grads);

// per-batch gradients of the (rba-weighted, lambda-free) pde mean square over
// B contiguous shards of a seeded shuffle of the active points
double batch_snr(Model& m, const Vec& theta, const ResidualGraph& rg, const Vec& pts,
                 const Vec& rba, int B, Rng& rng);

// (1/N) sum ||grad_x u||^2 over the points (n x d_in row-major)
double geometric_complexity(Model& m, const Vec& theta, const double* pts, int n);

// heuristic fitting/diffusion/equilibrium markers from the recorded snr trend;
// informational output only
std::string ib_phase_annotation(const RunHistory& h);

}  // namespace pikan

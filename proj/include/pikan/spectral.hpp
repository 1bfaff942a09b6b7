#pragma once

#include "pikan/problems.hpp"

namespace pikan {

// Fourier collocation in space, RK4 with integrating factor for the stiff
// linear term. Periodic on the problem's native interval; burgers' Dirichlet
// data is odd and 2-periodic, which the equation preserves, so the periodic
// solve honors the walls exactly.
struct SpectralResult {
    Vec x;                       // collocation grid, right end open
    Vec times;                   // nt_out snapshot times including 0 and T
    std::vector<Vec> snapshots;  // one profile per time
};

// nt time steps to T = 1; (nt_out - 1) must divide nt
SpectralResult spectral_solve(PdeId id, int modes, int nt, int nt_out = 2);

}  // namespace pikan

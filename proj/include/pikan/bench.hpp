#pragma once
#include <string>
#include <vector>

#include "pikan/common.hpp"
#include "pikan/trainer.hpp"

namespace pikan {

// aggregation and report schemas shared by the bench tool and its tests.
// fixed column orders; every summary number is recomputable from the
// per-seed history files alone.

struct MeanSe {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double se = std::numeric_limits<double>::quiet_NaN();
    int n = 0;
};

// mean and standard error (sample std / sqrt(n)); n == 1 gives se 0
MeanSe mean_se(const Vec& xs);

struct SeedOutcome {
    uint64_t seed = 0;
    bool completed = false;  // ran every iteration without divergence
    double final_rel_l2 = std::numeric_limits<double>::quiet_NaN();
    double final_total = std::numeric_limits<double>::quiet_NaN();
};

struct RunSummary {
    int n_seeds = 0, n_completed = 0, n_diverged = 0;
    MeanSe rel_l2, total;  // over completed seeds only
};

RunSummary summarize(const std::vector<SeedOutcome>& seeds);

// csv schema: n_seeds,n_completed,n_diverged,rel_l2_mean,rel_l2_se,
//             final_total_mean,final_total_se
std::string summary_csv(const RunSummary& s);
RunSummary parse_summary_csv(const std::string& text);

// outcome as recorded in a seed's history file: completed means not diverged,
// metrics from the last row
SeedOutcome outcome_from_history(uint64_t seed, const RunHistory& h);

// artifact layout inside a run directory
std::string seed_history_path(const std::string& dir, uint64_t seed);
std::string seed_checkpoint_path(const std::string& dir, uint64_t seed);
std::string seed_phases_path(const std::string& dir, uint64_t seed);

// timing csv schema: seed,completed,ms_per_iter (not part of the summary:
// wall-clock numbers cannot be audited from histories)
struct SeedTiming {
    uint64_t seed = 0;
    bool completed = false;
    double ms_per_iter = 0.0;
};
std::string timing_csv(const std::vector<SeedTiming>& ts);
std::vector<SeedTiming> parse_timing_csv(const std::string& text);

// improvement heatmap: (eps_default - eps_proposed)/eps_default * 100,
// clipped to [0,100]; a cell where the proposal is worse is flagged
struct HeatCell {
    double value = 0.0;
    bool flagged = false;
};
HeatCell heatmap_cell(double eps_default, double eps_proposed);

// one sweep cell: csv schema width,depth,rel_l2_mean,rel_l2_se,dir
struct GridPoint {
    int width = 0, depth = 0;
    double rel_l2_mean = std::numeric_limits<double>::quiet_NaN();
    double rel_l2_se = 0.0;
    std::string dir;
};
std::string grid_csv(const std::vector<GridPoint>& g);
std::vector<GridPoint> parse_grid_csv(const std::string& text);

// cells for matched grids, row-major over (depth, width) sorted ascending;
// mismatched cell sets are a config error naming the offenders
struct HeatGrid {
    std::vector<int> widths, depths;
    std::vector<HeatCell> cells;
};
HeatGrid heatmap_from_grids(const std::vector<GridPoint>& dflt,
                            const std::vector<GridPoint>& prop);

// csv schema: depth,width,improvement_pct,flagged
std::string heatmap_csv(const HeatGrid& g);

}  // namespace pikan

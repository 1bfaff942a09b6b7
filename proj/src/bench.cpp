#include "pikan/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace pikan {

MeanSe mean_se(const Vec& xs) {
    MeanSe out;
    out.n = int(xs.size());
    if (out.n == 0) return out;
    double mu = 0;
    for (double x : xs) mu += x;
    mu /= out.n;
    out.mean = mu;
    if (out.n == 1) {
        out.se = 0.0;
        return out;
    }
    double ss = 0;
    for (double x : xs) ss += sq(x - mu);
    out.se = std::sqrt(ss / (out.n - 1)) / std::sqrt(double(out.n));
    return out;
}

RunSummary summarize(const std::vector<SeedOutcome>& seeds) {
    RunSummary s;
    s.n_seeds = int(seeds.size());
    Vec rel, tot;
    for (const SeedOutcome& o : seeds) {
        if (!o.completed) {
            ++s.n_diverged;
            continue;
        }
        ++s.n_completed;
        rel.push_back(o.final_rel_l2);
        tot.push_back(o.final_total);
    }
    s.rel_l2 = mean_se(rel);
    s.total = mean_se(tot);
    return s;
}

static const char* kSummaryHeader =
    "n_seeds,n_completed,n_diverged,rel_l2_mean,rel_l2_se,final_total_mean,"
    "final_total_se";

std::string summary_csv(const RunSummary& s) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%.17g,%.17g,%.17g,%.17g\n", s.n_seeds,
                  s.n_completed, s.n_diverged, s.rel_l2.mean, s.rel_l2.se,
                  s.total.mean, s.total.se);
    return std::string(kSummaryHeader) + "\n" + buf;
}

RunSummary parse_summary_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kSummaryHeader)
        throw ConfigError("summary: unexpected header");
    if (!std::getline(in, line)) throw ConfigError("summary: missing data row");
    RunSummary s;
    if (std::sscanf(line.c_str(), "%d,%d,%d,%lf,%lf,%lf,%lf", &s.n_seeds,
                    &s.n_completed, &s.n_diverged, &s.rel_l2.mean, &s.rel_l2.se,
                    &s.total.mean, &s.total.se) != 7)
        throw ConfigError("summary: malformed data row: " + line);
    s.rel_l2.n = s.total.n = s.n_completed;
    return s;
}

SeedOutcome outcome_from_history(uint64_t seed, const RunHistory& h) {
    SeedOutcome o;
    o.seed = seed;
    o.completed = !h.diverged && !h.rows.empty();
    if (o.completed) {
        o.final_rel_l2 = h.rows.back().rel_l2;
        o.final_total = h.rows.back().total;
    }
    return o;
}

std::string seed_history_path(const std::string& dir, uint64_t seed) {
    return dir + "/seed" + std::to_string(seed) + "_history.csv";
}
std::string seed_checkpoint_path(const std::string& dir, uint64_t seed) {
    return dir + "/seed" + std::to_string(seed) + "_final.ckpt";
}
std::string seed_phases_path(const std::string& dir, uint64_t seed) {
    return dir + "/seed" + std::to_string(seed) + "_phases.txt";
}

static const char* kTimingHeader = "seed,completed,ms_per_iter";

std::string timing_csv(const std::vector<SeedTiming>& ts) {
    std::string out = kTimingHeader;
    out += '\n';
    char buf[128];
    for (const SeedTiming& t : ts) {
        std::snprintf(buf, sizeof buf, "%llu,%d,%.17g\n",
                      (unsigned long long)t.seed, t.completed ? 1 : 0, t.ms_per_iter);
        out += buf;
    }
    return out;
}

std::vector<SeedTiming> parse_timing_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kTimingHeader)
        throw ConfigError("timing: unexpected header");
    std::vector<SeedTiming> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        SeedTiming t;
        unsigned long long s = 0;
        int c = 0;
        if (std::sscanf(line.c_str(), "%llu,%d,%lf", &s, &c, &t.ms_per_iter) != 3)
            throw ConfigError("timing: malformed row: " + line);
        t.seed = s;
        t.completed = c != 0;
        out.push_back(t);
    }
    return out;
}

HeatCell heatmap_cell(double eps_default, double eps_proposed) {
    HeatCell c;
    c.flagged = eps_proposed > eps_default;
    if (eps_default > 0.0) {
        const double raw = (eps_default - eps_proposed) / eps_default * 100.0;
        c.value = std::min(100.0, std::max(0.0, raw));
    } else {
        c.value = 0.0;  // both zero: no improvement to report
    }
    return c;
}

std::string grid_csv(const std::vector<GridPoint>& g) {
    std::string out = "width,depth,rel_l2_mean,rel_l2_se,dir\n";
    char buf[512];
    for (const GridPoint& p : g) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%s\n", p.width, p.depth,
                      p.rel_l2_mean, p.rel_l2_se, p.dir.c_str());
        out += buf;
    }
    return out;
}

std::vector<GridPoint> parse_grid_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "width,depth,rel_l2_mean,rel_l2_se,dir")
        throw ConfigError("grid: unexpected header");
    std::vector<GridPoint> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        GridPoint p;
        char dir[400] = {0};
        if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf,%399s", &p.width, &p.depth,
                        &p.rel_l2_mean, &p.rel_l2_se, dir) < 4)
            throw ConfigError("grid: malformed row: " + line);
        p.dir = dir;
        out.push_back(p);
    }
    return out;
}

HeatGrid heatmap_from_grids(const std::vector<GridPoint>& dflt,
                            const std::vector<GridPoint>& prop) {
    std::map<std::pair<int, int>, double> dm, pm;
    for (const GridPoint& p : dflt) dm[{p.depth, p.width}] = p.rel_l2_mean;
    for (const GridPoint& p : prop) pm[{p.depth, p.width}] = p.rel_l2_mean;
    std::string missing;
    for (const auto& kv : dm)
        if (!pm.count(kv.first))
            missing += " (depth " + std::to_string(kv.first.first) + ", width " +
                       std::to_string(kv.first.second) + ") absent from proposed";
    for (const auto& kv : pm)
        if (!dm.count(kv.first))
            missing += " (depth " + std::to_string(kv.first.first) + ", width " +
                       std::to_string(kv.first.second) + ") absent from default";
    if (!missing.empty()) throw ConfigError("heatmap: grid mismatch:" + missing);
    if (dm.empty()) throw ConfigError("heatmap: empty grids");

    HeatGrid g;
    for (const auto& kv : dm) {
        if (g.depths.empty() || g.depths.back() != kv.first.first)
            g.depths.push_back(kv.first.first);
    }
    for (const auto& kv : dm)
        if (kv.first.first == g.depths.front()) g.widths.push_back(kv.first.second);
    for (int d : g.depths)
        for (int w : g.widths) {
            if (!dm.count({d, w}))
                throw ConfigError("heatmap: grid is not a full rectangle at depth " +
                                  std::to_string(d) + ", width " + std::to_string(w));
            g.cells.push_back(heatmap_cell(dm[{d, w}], pm[{d, w}]));
        }
    return g;
}

std::string heatmap_csv(const HeatGrid& g) {
    std::string out = "depth,width,improvement_pct,flagged\n";
    char buf[128];
    for (size_t di = 0; di < g.depths.size(); ++di)
        for (size_t wi = 0; wi < g.widths.size(); ++wi) {
            const HeatCell& c = g.cells[di * g.widths.size() + wi];
            std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%d\n", g.depths[di],
                          g.widths[wi], c.value, c.flagged ? 1 : 0);
            out += buf;
        }
    return out;
}

}  // namespace pikan

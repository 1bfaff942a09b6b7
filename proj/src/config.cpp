#include "pikan/config.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace pikan {

using nlohmann::json;

namespace {

[[noreturn]] void field_err(const std::string& field, const std::string& why) {
    throw ConfigError("config field '" + field + "': " + why);
}

// typed accessors: wrong types report the field, not a json backtrace
double num(const json& j, const std::string& field, double dflt) {
    if (!j.contains(field)) return dflt;
    if (!j[field].is_number()) field_err(field, "expected a number");
    return j[field].get<double>();
}
long long inum(const json& j, const std::string& field, long long dflt) {
    if (!j.contains(field)) return dflt;
    if (!j[field].is_number_integer()) field_err(field, "expected an integer");
    return j[field].get<long long>();
}
bool flag(const json& j, const std::string& field, bool dflt) {
    if (!j.contains(field)) return dflt;
    if (!j[field].is_boolean()) field_err(field, "expected true/false");
    return j[field].get<bool>();
}
std::string str(const json& j, const std::string& field, const std::string& dflt) {
    if (!j.contains(field)) return dflt;
    if (!j[field].is_string()) field_err(field, "expected a string");
    return j[field].get<std::string>();
}

void check_keys(const json& j, const std::string& scope,
                std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed) ok = ok || it.key() == k;
        if (!ok)
            throw ConfigError("config: unknown field '" +
                              (scope.empty() ? it.key() : scope + "." + it.key()) + "'");
    }
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: json parse error at byte " + std::to_string(e.byte) +
                          ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    check_keys(j, "",
               {"kind", "problem", "problem_params", "arch", "width", "depth", "degree",
                "sine_degree", "init", "rad", "rba", "causal", "anneal", "schedule",
                "iterations", "seeds", "pool_res", "n_ic", "diag_period",
                "checkpoint_period", "fit_samples", "out_dir"});

    RunConfig c;
    const std::string kind = str(j, "kind", "pde");
    if (kind == "pde")
        c.kind = RunKind::Pde;
    else if (kind == "fit")
        c.kind = RunKind::Fit;
    else
        field_err("kind", "expected 'pde' or 'fit'");
    c.problem = str(j, "problem", c.problem);

    if (j.contains("problem_params")) {
        const json& p = j["problem_params"];
        if (!p.is_object()) field_err("problem_params", "expected an object");
        check_keys(p, "problem_params", {"a1", "a2", "omega", "literal_form"});
        c.helm_a1 = num(p, "a1", c.helm_a1);
        c.helm_a2 = num(p, "a2", c.helm_a2);
        c.poisson_omega = num(p, "omega", c.poisson_omega);
        c.sg_literal = flag(p, "literal_form", c.sg_literal);
    }

    c.arch = str(j, "arch", c.arch);
    c.width = int(inum(j, "width", c.width));
    c.depth = int(inum(j, "depth", c.depth));
    c.degree = int(inum(j, "degree", c.degree));
    c.sine_degree = int(inum(j, "sine_degree", c.sine_degree));

    if (j.contains("init")) {
        const json& p = j["init"];
        if (!p.is_object()) field_err("init", "expected an object");
        check_keys(p, "init",
                   {"scheme", "gain", "first_layer_gain", "alpha", "beta", "pi_init"});
        c.init_scheme = str(p, "scheme", c.init_scheme);
        c.gain = num(p, "gain", c.gain);
        c.first_layer_gain = num(p, "first_layer_gain", c.first_layer_gain);
        c.alpha_init = num(p, "alpha", c.alpha_init);
        c.beta_init = num(p, "beta", c.beta_init);
        c.pi_init = flag(p, "pi_init", c.pi_init);
    }

    if (j.contains("rad")) {
        const json& p = j["rad"];
        if (!p.is_object()) field_err("rad", "expected an object");
        check_keys(p, "rad", {"enabled", "delta", "C", "period", "n_pde"});
        c.rad.enabled = flag(p, "enabled", c.rad.enabled);
        c.rad.delta = num(p, "delta", c.rad.delta);
        c.rad.C = num(p, "C", c.rad.C);
        c.rad.period = inum(p, "period", c.rad.period);
        c.rad.n_pde = int(inum(p, "n_pde", c.rad.n_pde));
    }
    if (j.contains("rba")) {
        const json& p = j["rba"];
        if (!p.is_object()) field_err("rba", "expected an object");
        check_keys(p, "rba", {"enabled", "gamma", "eta"});
        c.rba.enabled = flag(p, "enabled", c.rba.enabled);
        c.rba.gamma = num(p, "gamma", c.rba.gamma);
        c.rba.eta = num(p, "eta", c.rba.eta);
    }
    if (j.contains("causal")) {
        const json& p = j["causal"];
        if (!p.is_object()) field_err("causal", "expected an object");
        check_keys(p, "causal", {"enabled", "segments", "eps"});
        c.causal.enabled = flag(p, "enabled", c.causal.enabled);
        c.causal.segments = int(inum(p, "segments", c.causal.segments));
        c.causal.eps = num(p, "eps", c.causal.eps);
    }
    if (j.contains("anneal")) {
        const json& p = j["anneal"];
        if (!p.is_object()) field_err("anneal", "expected an object");
        check_keys(p, "anneal", {"enabled", "a", "period"});
        c.anneal.enabled = flag(p, "enabled", c.anneal.enabled);
        c.anneal.a = num(p, "a", c.anneal.a);
        c.anneal.period = inum(p, "period", c.anneal.period);
    }
    if (j.contains("schedule")) {
        const json& p = j["schedule"];
        if (!p.is_object()) field_err("schedule", "expected an object");
        check_keys(p, "schedule", {"peak", "warmup", "decay", "decay_period"});
        c.schedule.peak = num(p, "peak", c.schedule.peak);
        c.schedule.warmup = inum(p, "warmup", c.schedule.warmup);
        c.schedule.decay = num(p, "decay", c.schedule.decay);
        c.schedule.decay_period = inum(p, "decay_period", c.schedule.decay_period);
    }

    c.iterations = inum(j, "iterations", c.iterations);
    if (j.contains("seeds")) {
        if (!j["seeds"].is_array()) field_err("seeds", "expected an array");
        c.seeds.clear();
        for (const auto& s : j["seeds"]) {
            if (!s.is_number_integer() || s.get<long long>() < 0)
                field_err("seeds", "entries must be non-negative integers");
            c.seeds.push_back(s.get<uint64_t>());
        }
    }
    if (j.contains("pool_res")) {
        if (!j["pool_res"].is_array()) field_err("pool_res", "expected an array");
        c.pool_res.clear();
        for (const auto& r : j["pool_res"]) {
            if (!r.is_number_integer()) field_err("pool_res", "entries must be integers");
            c.pool_res.push_back(r.get<int>());
        }
    }
    c.n_ic = int(inum(j, "n_ic", c.n_ic));
    c.diag_period = inum(j, "diag_period", c.diag_period);
    c.checkpoint_period = inum(j, "checkpoint_period", c.checkpoint_period);
    c.fit_samples = int(inum(j, "fit_samples", c.fit_samples));
    c.out_dir = str(j, "out_dir", c.out_dir);
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_run_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::string serialize_run_config(const RunConfig& c) {
    json j;
    j["kind"] = c.kind == RunKind::Fit ? "fit" : "pde";
    j["problem"] = c.problem;
    j["problem_params"] = {{"a1", c.helm_a1},
                           {"a2", c.helm_a2},
                           {"omega", c.poisson_omega},
                           {"literal_form", c.sg_literal}};
    j["arch"] = c.arch;
    j["width"] = c.width;
    j["depth"] = c.depth;
    j["degree"] = c.degree;
    j["sine_degree"] = c.sine_degree;
    j["init"] = {{"scheme", c.init_scheme},       {"gain", c.gain},
                 {"first_layer_gain", c.first_layer_gain},
                 {"alpha", c.alpha_init},         {"beta", c.beta_init},
                 {"pi_init", c.pi_init}};
    j["rad"] = {{"enabled", c.rad.enabled},
                {"delta", c.rad.delta},
                {"C", c.rad.C},
                {"period", c.rad.period},
                {"n_pde", c.rad.n_pde}};
    j["rba"] = {{"enabled", c.rba.enabled}, {"gamma", c.rba.gamma}, {"eta", c.rba.eta}};
    j["causal"] = {{"enabled", c.causal.enabled},
                   {"segments", c.causal.segments},
                   {"eps", c.causal.eps}};
    j["anneal"] = {{"enabled", c.anneal.enabled},
                   {"a", c.anneal.a},
                   {"period", c.anneal.period}};
    j["schedule"] = {{"peak", c.schedule.peak},
                     {"warmup", c.schedule.warmup},
                     {"decay", c.schedule.decay},
                     {"decay_period", c.schedule.decay_period}};
    j["iterations"] = c.iterations;
    j["seeds"] = c.seeds;
    j["pool_res"] = c.pool_res;
    j["n_ic"] = c.n_ic;
    j["diag_period"] = c.diag_period;
    j["checkpoint_period"] = c.checkpoint_period;
    j["fit_samples"] = c.fit_samples;
    j["out_dir"] = c.out_dir;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// history csv
// ---------------------------------------------------------------------------

static const char* kHistoryHeader =
    "iter,lr,lambda_pde,lambda_ic,loss_pde,loss_ic,total,rel_l2,snr,complexity,diverged";

std::string history_csv(const RunHistory& h) {
    std::string out = kHistoryHeader;
    out += '\n';
    char buf[512];
    for (const HistoryRow& r : h.rows) {
        const int dv = (h.diverged && r.iter == h.diverged_at) ? 1 : 0;
        std::snprintf(buf, sizeof buf,
                      "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                      r.iter, r.lr, r.lam_pde, r.lam_ic, r.loss_pde, r.loss_ic, r.total,
                      r.rel_l2, r.snr, r.complexity, dv);
        out += buf;
    }
    return out;
}

void write_history_csv(const std::string& path, const RunHistory& h) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("history: cannot open " + path + " for writing");
    out << history_csv(h);
    if (!out) throw ConfigError("history: short write to " + path);
}

RunHistory read_history_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("history: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != kHistoryHeader)
        throw ConfigError("history: unexpected header in " + path);
    RunHistory h;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        HistoryRow r;
        int dv = 0;
        if (std::sscanf(line.c_str(),
                        "%lld,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%d", &r.iter, &r.lr,
                        &r.lam_pde, &r.lam_ic, &r.loss_pde, &r.loss_ic, &r.total,
                        &r.rel_l2, &r.snr, &r.complexity, &dv) != 11)
            throw ConfigError("history: malformed row in " + path + ": " + line);
        if (dv) {
            h.diverged = true;
            h.diverged_at = r.iter;
        }
        h.rows.push_back(r);
    }
    return h;
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

void save_checkpoint(const std::string& path, const ModelSpec& spec, const Vec& theta,
                     long long iter) {
    json j;
    j["format"] = "pikan-checkpoint";
    j["version"] = 1;
    j["iter"] = iter;
    j["params"] = theta.size();
    json s;
    s["arch"] = spec.arch == Arch::RgaKan    ? "rga_kan"
                : spec.arch == Arch::Cpikan  ? "cpikan"
                                             : "piratenet";
    s["d_in"] = spec.d_in;
    s["d_out"] = spec.d_out;
    s["width"] = spec.width;
    s["depth"] = spec.depth;
    s["degree"] = spec.degree;
    s["sine_degree"] = spec.sine_degree;
    s["scheme"] = spec.scheme;
    s["gain"] = spec.gain;
    s["first_layer_gain"] = spec.first_layer_gain;
    s["alpha_init"] = spec.alpha_init;
    s["beta_init"] = spec.beta_init;
    json per = json::array();
    for (const auto& p : spec.periodic) per.push_back({{"coord", p.coord}, {"length", p.length}});
    s["periodic"] = per;
    json dir = json::array();
    for (const auto& d : spec.dirichlet)
        dir.push_back({{"coord", d.coord}, {"lo", d.lo}, {"hi", d.hi}});
    s["dirichlet"] = dir;
    j["spec"] = s;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("checkpoint: cannot open " + path + " for writing");
    out << j.dump() << '\n';
    out.write(reinterpret_cast<const char*>(theta.data()),
              std::streamsize(theta.size() * sizeof(double)));
    if (!out) throw ConfigError("checkpoint: short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("checkpoint: cannot open " + path);
    std::string header;
    if (!std::getline(in, header)) throw ConfigError("checkpoint: missing header in " + path);
    json j;
    try {
        j = json::parse(header);
    } catch (const json::parse_error& e) {
        throw ConfigError("checkpoint: bad header in " + path + ": " + e.what());
    }
    if (str(j, "format", "") != "pikan-checkpoint")
        throw ConfigError("checkpoint: " + path + " is not a checkpoint file");
    Checkpoint c;
    c.iter = inum(j, "iter", 0);
    const size_t n = size_t(inum(j, "params", 0));
    if (!j.contains("spec") || !j["spec"].is_object())
        throw ConfigError("checkpoint: missing spec in " + path);
    const json& s = j["spec"];
    const std::string arch = str(s, "arch", "");
    if (arch == "rga_kan")
        c.spec.arch = Arch::RgaKan;
    else if (arch == "cpikan")
        c.spec.arch = Arch::Cpikan;
    else if (arch == "piratenet")
        c.spec.arch = Arch::PirateNet;
    else
        throw ConfigError("checkpoint: unknown arch '" + arch + "' in " + path);
    c.spec.d_in = int(inum(s, "d_in", 2));
    c.spec.d_out = int(inum(s, "d_out", 1));
    c.spec.width = int(inum(s, "width", 16));
    c.spec.depth = int(inum(s, "depth", 2));
    c.spec.degree = int(inum(s, "degree", 5));
    c.spec.sine_degree = int(inum(s, "sine_degree", 5));
    c.spec.scheme = str(s, "scheme", "glorot_like");
    c.spec.gain = num(s, "gain", 1.0);
    c.spec.first_layer_gain = num(s, "first_layer_gain", c.spec.first_layer_gain);
    c.spec.alpha_init = num(s, "alpha_init", 0.0);
    c.spec.beta_init = num(s, "beta_init", 0.0);
    if (s.contains("periodic"))
        for (const auto& p : s["periodic"])
            c.spec.periodic.push_back(
                {p.at("coord").get<int>(), p.at("length").get<double>()});
    if (s.contains("dirichlet"))
        for (const auto& d : s["dirichlet"])
            c.spec.dirichlet.push_back({d.at("coord").get<int>(),
                                        d.at("lo").get<double>(),
                                        d.at("hi").get<double>()});

    c.theta.resize(n);
    in.read(reinterpret_cast<char*>(c.theta.data()), std::streamsize(n * sizeof(double)));
    if (size_t(in.gcount()) != n * sizeof(double))
        throw ConfigError("checkpoint: parameter blob truncated in " + path);
    return c;
}

}  // namespace pikan

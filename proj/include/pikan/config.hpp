#pragma once
#include <string>
#include <vector>

#include "pikan/models.hpp"
#include "pikan/trainer.hpp"

namespace pikan {

// strict json -> RunConfig: unknown keys and type mismatches raise ConfigError
// naming the offending field; parse errors carry the byte offset
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// emits every field; parse(serialize(cfg)) reproduces cfg exactly
std::string serialize_run_config(const RunConfig& cfg);

// fixed column order, %.17g values; the diverged flag marks the terminal row
std::string history_csv(const RunHistory& h);
void write_history_csv(const std::string& path, const RunHistory& h);
RunHistory read_history_csv(const std::string& path);

// single-line json header followed by a raw little-endian double blob
void save_checkpoint(const std::string& path, const ModelSpec& spec, const Vec& theta,
                     long long iter);

struct Checkpoint {
    ModelSpec spec;
    Vec theta;
    long long iter = 0;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pikan

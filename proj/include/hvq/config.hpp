#pragma once

#include <optional>
#include <string>

#include "json.hpp"

#include "hvq/dataset.hpp"
#include "hvq/segmenter.hpp"
#include "hvq/train.hpp"

namespace hvq {

// Everything a run needs in one JSON-serializable bundle. Parsing is strict:
// unknown keys anywhere are rejected.
struct RunConfig {
    TrainConfig train;
    DecodeOptions decode;
    Protocol protocol = Protocol::full;
    std::optional<std::string> background_token;
};

RunConfig parse_run_config(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& config);

SyntheticSpec parse_synth_spec(const nlohmann::json& j);
nlohmann::json synth_spec_to_json(const SyntheticSpec& spec);

// Seed resolution: explicit value > HVQ_SEED environment variable > 0.
uint64_t resolve_seed(const std::optional<uint64_t>& explicit_seed);

}  // namespace hvq

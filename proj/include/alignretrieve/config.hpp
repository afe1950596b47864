#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "alignretrieve/backend.hpp"
#include "alignretrieve/error.hpp"
#include "alignretrieve/pipeline.hpp"
#include "alignretrieve/trainer.hpp"

namespace alignretrieve {

struct AppConfig {
    std::string repo_path;
    std::string corpus_path;
    std::string checkpoint_path;
    std::string tasks_path;

    BackendConfig sampler;
    BackendConfig evaluator;
    BackendConfig generator;

    PipelineConfig pipeline;
    std::size_t embed_dim = 128;
    std::size_t embed_buckets = 4096;

    TrainConfig train;
    std::uint64_t seed = 0;  // master seed feeding the named streams
};

// Flat "section.key" -> raw value view of a TOML-style document: [section]
// headers, key = value lines, '#' comments, quoted strings, numbers, booleans.
std::map<std::string, std::string> parse_config_text(const std::string& text);

// Defaults overlaid with the file's values. Unknown keys warn, bad values throw.
AppConfig load_app_config(const std::string& path, Diagnostics* diags);
AppConfig app_config_from_text(const std::string& text, Diagnostics* diags);

void validate_app_config(const AppConfig& config);

}  // namespace alignretrieve

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "creagen/trainer.hpp"
#include "json.hpp"

namespace creagen {

inline constexpr const char* kToolVersion = "0.3.0";

/// Raised when an input file or directory a stage needs is missing or malformed.
/// Treated like a configuration problem (exit code 1).
class InputError : public std::invalid_argument {
   public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

/// Master configuration with one section per stage. Defaults fill every key.
nlohmann::ordered_json default_master_config();

/// Applies `overrides` (deep merge) on top of defaults and the file contents.
/// Unknown sections or keys are rejected with ConfigError.
nlohmann::ordered_json merge_config(const nlohmann::ordered_json& base, const nlohmann::json& overrides,
                                    const std::string& where = "");

/// Parses "section.key=value"; the value is read as JSON, falling back to a string.
nlohmann::json parse_override(const std::string& assignment);

/// Root seed from the config, else CREAGEN_SEED, else 0.
std::uint64_t resolve_seed(const nlohmann::json& master);

/// Seed of one stage: the section's explicit "seed" when set, else derived from the root.
std::uint64_t stage_seed(const nlohmann::json& master, const std::string& stage);

struct StageIo {
    std::vector<std::filesystem::path> inputs;
    std::filesystem::path out;
};

/// Runs one stage under a manifest: writes effective_config.json and
/// manifest.json to `io.out`. On failure the manifest is marked invalid and
/// the exception is rethrown. Returns the stage summary.
nlohmann::ordered_json run_stage(const std::string& command, const nlohmann::ordered_json& master, const StageIo& io);

// Individual stages; `master` is the merged configuration.
nlohmann::ordered_json stage_synth(const nlohmann::ordered_json& master, const std::filesystem::path& out);
/// inputs: dataset dir.
nlohmann::ordered_json stage_train(const nlohmann::ordered_json& master, const std::filesystem::path& data,
                                   const std::filesystem::path& out);
/// inputs: training run dir or checkpoint file, dataset dir (masks for the mask-conditioned generator).
nlohmann::ordered_json stage_sample(const nlohmann::ordered_json& master, const std::filesystem::path& run,
                                    const std::filesystem::path& data, const std::filesystem::path& out);
/// inputs: samples dir, dataset dir. Trains the classifier unless metrics.classifier names a bundle.
nlohmann::ordered_json stage_metrics(const nlohmann::ordered_json& master, const std::filesystem::path& samples,
                                     const std::filesystem::path& data, const std::filesystem::path& out);
/// inputs: metrics dir, samples dir.
nlohmann::ordered_json stage_select_sets(const nlohmann::ordered_json& master, const std::filesystem::path& metrics,
                                         const std::filesystem::path& samples, const std::filesystem::path& out);
/// inputs: pairs of (metrics dir, sets dir), one per model.
nlohmann::ordered_json stage_analyze(const nlohmann::ordered_json& master,
                                     const std::vector<std::filesystem::path>& inputs,
                                     const std::filesystem::path& out);
nlohmann::ordered_json stage_gradcheck(const nlohmann::ordered_json& master, const std::filesystem::path& out);
/// inputs: any stage output dirs; their manifests and tables are collected.
nlohmann::ordered_json stage_report(const nlohmann::ordered_json& master,
                                    const std::vector<std::filesystem::path>& inputs,
                                    const std::filesystem::path& out);

/// Samples dir layout: images/NNNNNN.png and index.csv (id,mask_index).
std::vector<Image8> load_samples(const std::filesystem::path& dir);

}  // namespace creagen

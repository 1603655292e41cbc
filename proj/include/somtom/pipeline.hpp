#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "somtom/codec.hpp"
#include "somtom/evalkit.hpp"
#include "somtom/segmentation.hpp"
#include "somtom/tom.hpp"
#include "somtom/tracking.hpp"

namespace somtom {

std::uint64_t fnv1a64(std::string_view s);

// Seed for one record: the global seed folded with the record id, so results
// never depend on worker count or scheduling.
inline std::uint64_t record_seed(std::uint64_t global_seed, const std::string& record_id) {
    return global_seed ^ fnv1a64(record_id);
}

struct PipelineConfig {
    std::uint64_t seed = 0;
    int workers = 0;  // 0 = one per hardware thread
    std::filesystem::path out_dir = "out";
    double fail_budget = 0.01;  // tolerated per-record failure fraction

    TomConfig tom;
    int tom_horizon = 8;  // future steps per planning record
    TrackerConfig tracker;
    ShotConfig shots;
    double similarity_threshold = 0.25;
    std::optional<std::filesystem::path> scores_path;

    int vocab = 32000;
    std::optional<std::filesystem::path> stats_path;

    double eval_horizon_s = 1.0;
    double eval_fps = 24.0;
    bool eval_per_clip = false;

    int resolved_workers() const;
};

void validate_pipeline_config(const PipelineConfig& cfg);

// Values passed on the command line or via SOMTOM_SEED / SOMTOM_WORKERS.
struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> out_dir;
    std::optional<double> fail_budget;
    std::optional<std::string> scores_path;
    std::optional<std::string> stats_path;
    std::optional<int> vocab;
    std::optional<double> eval_horizon_s;
    std::optional<double> eval_fps;
    std::optional<bool> eval_per_clip;
};

// Resolution order: built-in defaults, then the JSON config file, then the
// SOMTOM_* environment, then explicit flags. Unknown config keys are
// rejected. Relative paths inside the file resolve against its directory.
PipelineConfig resolve_config(const std::optional<std::filesystem::path>& config_file,
                              const ConfigOverrides& overrides);

// Canonical JSON form of a resolved config, and the 16-hex-digit hash of it
// embedded in every output manifest.
nlohmann::json config_to_json(const PipelineConfig& cfg);
std::string config_hash(const PipelineConfig& cfg);

struct ManifestRecord {
    std::string id;
    std::string type;  // ui-image | video-clip | robot-trajectory
    nlohmann::json fields;
};

struct DatasetManifest {
    std::filesystem::path source;
    std::vector<ManifestRecord> records;
};

// Reads a JSONL manifest. Ids must be unique, types known, and every
// referenced file or directory present (paths resolve against the manifest's
// directory).
DatasetManifest load_manifest(const std::filesystem::path& path);

// Corpus commands. Each writes artifacts plus a manifest.jsonl under a stage
// directory in cfg.out_dir, prints a summary line, and returns the process
// exit code (0 unless the failure rate exceeds cfg.fail_budget). Reruns skip
// records whose logged outputs still match their content hashes.
int cmd_som_ui(const DatasetManifest& manifest, const PipelineConfig& cfg);
int cmd_segment(const DatasetManifest& manifest, const PipelineConfig& cfg);
int cmd_tom(const DatasetManifest& manifest, const PipelineConfig& cfg);
int cmd_encode_robot(const DatasetManifest& manifest, const PipelineConfig& cfg);

// Single pair of trace/annotation files, or a manifest of
// {"id", "traces", "annotations", "fps"} rows for a per-clip breakdown.
int cmd_eval_traces(const std::filesystem::path& traces_path,
                    const std::filesystem::path& annotations_path, const PipelineConfig& cfg);
int cmd_eval_traces_manifest(const DatasetManifest& manifest, const PipelineConfig& cfg);

int cmd_validate(const std::filesystem::path& manifest_path);

}  // namespace somtom

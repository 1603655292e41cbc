#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "somtom/errors.hpp"
#include "somtom/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using somtom::ConfigOverrides;
using somtom::PipelineConfig;

struct CommonArgs {
    std::optional<std::string> config_file;
    ConfigOverrides overrides;
};

void add_common_flags(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_file, "JSON config file");
    cmd->add_option("--seed", args.overrides.seed, "Global seed");
    cmd->add_option("--workers", args.overrides.workers, "Worker threads (0 = auto)");
    cmd->add_option("--out", args.overrides.out_dir, "Output directory");
    cmd->add_option("--fail-budget", args.overrides.fail_budget,
                    "Tolerated per-record failure fraction");
}

PipelineConfig resolve(const CommonArgs& args) {
    std::optional<fs::path> file;
    if (args.config_file) file = fs::path(*args.config_file);
    return somtom::resolve_config(file, args.overrides);
}

int run_manifest_command(const std::string& manifest_path, const CommonArgs& args,
                         int (*cmd)(const somtom::DatasetManifest&, const PipelineConfig&)) {
    const PipelineConfig cfg = resolve(args);
    const somtom::DatasetManifest manifest = somtom::load_manifest(manifest_path);
    return cmd(manifest, cfg);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"somtom: set-of-mark and trace-of-mark supervision pipeline"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string manifest_path;
    std::string scores;
    std::string stats;
    std::string traces_path;
    std::string annotations_path;

    auto* som_ui = app.add_subcommand("som-ui", "Overlay numbered marks on UI screenshots");
    som_ui->add_option("manifest", manifest_path, "Dataset manifest (JSONL)")->required();
    add_common_flags(som_ui, common);

    auto* segment = app.add_subcommand("segment", "Split videos into shot-stable clips");
    segment->add_option("manifest", manifest_path, "Dataset manifest (JSONL)")->required();
    add_common_flags(segment, common);
    segment->add_option("--scores", scores, "Clip similarity scores (CSV or JSONL)");

    auto* tom = app.add_subcommand("tom", "Track marks and emit planning supervision");
    tom->add_option("manifest", manifest_path, "Clip manifest (JSONL)")->required();
    add_common_flags(tom, common);

    auto* robot = app.add_subcommand("encode-robot", "Tokenize robot action trajectories");
    robot->add_option("manifest", manifest_path, "Dataset manifest (JSONL)")->required();
    add_common_flags(robot, common);
    robot->add_option("--stats", stats, "Pre-fit action stats (JSON)");
    robot->add_option("--vocab", common.overrides.vocab, "Tokenizer vocabulary size");

    auto* eval = app.add_subcommand("eval-traces", "Score traces against box annotations");
    eval->add_option("--manifest", manifest_path, "Manifest of trace-eval records");
    eval->add_option("--traces", traces_path, "Trace file (JSONL)");
    eval->add_option("--annotations", annotations_path, "Box annotations (JSONL)");
    add_common_flags(eval, common);
    eval->add_option("--horizon-s", common.overrides.eval_horizon_s, "Horizon in seconds");
    eval->add_option("--fps", common.overrides.eval_fps, "Frame rate of the traces");
    eval->add_flag("--per-clip", [&](std::int64_t) { common.overrides.eval_per_clip = true; },
                   "Include a per-clip breakdown in the report");

    auto* validate = app.add_subcommand("validate", "Check a dataset manifest");
    validate->add_option("manifest", manifest_path, "Dataset manifest (JSONL)")->required();

    CLI11_PARSE(app, argc, argv);

    if (!scores.empty()) common.overrides.scores_path = scores;
    if (!stats.empty()) common.overrides.stats_path = stats;

    try {
        if (som_ui->parsed()) return run_manifest_command(manifest_path, common, somtom::cmd_som_ui);
        if (segment->parsed()) {
            return run_manifest_command(manifest_path, common, somtom::cmd_segment);
        }
        if (tom->parsed()) return run_manifest_command(manifest_path, common, somtom::cmd_tom);
        if (robot->parsed()) {
            return run_manifest_command(manifest_path, common, somtom::cmd_encode_robot);
        }
        if (eval->parsed()) {
            const PipelineConfig cfg = resolve(common);
            if (!manifest_path.empty()) {
                return somtom::cmd_eval_traces_manifest(somtom::load_manifest(manifest_path),
                                                        cfg);
            }
            if (traces_path.empty() || annotations_path.empty()) {
                std::cerr << "eval-traces: need --manifest or both --traces and "
                             "--annotations\n";
                return 2;
            }
            return somtom::cmd_eval_traces(traces_path, annotations_path, cfg);
        }
        if (validate->parsed()) return somtom::cmd_validate(manifest_path);
    } catch (const somtom::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

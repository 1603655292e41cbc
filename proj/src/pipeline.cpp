#include "somtom/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "somtom/json_io.hpp"

namespace somtom {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string file_hash(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("hash: cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    return hex64(fnv1a64(bytes));
}

void write_text_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("write: cannot open " + p.string());
    out << content;
    if (!out) throw Error("write: failed for " + p.string());
}

// Filesystem-safe artifact stem for a record id; a changed stem gets a hash
// suffix so distinct ids cannot collide.
std::string safe_stem(const std::string& id) {
    std::string s;
    s.reserve(id.size());
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
        s += ok ? c : '_';
    }
    if (s != id) s += "-" + hex64(fnv1a64(id)).substr(0, 8);
    return s;
}

json parse_json_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ParseError("json: cannot open " + p.string());
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw ParseError("json: " + p.string() + ": " + e.what());
    }
}

std::vector<json> parse_jsonl_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ParseError("jsonl: cannot open " + p.string());
    std::vector<json> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw ParseError("jsonl: " + p.string() + " line " + std::to_string(line_no) +
                             ": " + e.what());
        }
    }
    return rows;
}

double read_dir_fps(const fs::path& dir) {
    const fs::path meta = dir / "metadata.json";
    if (!fs::exists(meta)) return 24.0;
    const json j = parse_json_file(meta);
    return j.contains("fps") ? j.at("fps").get<double>() : 24.0;
}

}  // namespace

int PipelineConfig::resolved_workers() const {
    if (workers > 0) return workers;
    const unsigned hw = std::thread::hardware_concurrency();
    return std::clamp<int>(static_cast<int>(hw), 1, 64);
}

void validate_pipeline_config(const PipelineConfig& cfg) {
    if (cfg.workers < 0) throw ConfigError("config: workers must be >= 0");
    if (cfg.fail_budget < 0.0 || cfg.fail_budget > 1.0) {
        throw ConfigError("config: fail_budget must be in [0, 1]");
    }
    if (cfg.tom_horizon < 1) throw ConfigError("config: tom horizon must be >= 1");
    if (cfg.vocab <= kRobotBins) {
        throw ConfigError("config: vocab must exceed " + std::to_string(kRobotBins));
    }
    if (!(cfg.eval_fps > 0.0)) throw ConfigError("config: eval fps must be positive");
    if (cfg.eval_horizon_s < 0.0) throw ConfigError("config: eval horizon must be >= 0");
    validate_tom_config(cfg.tom);
    validate_tracker_config(cfg.tracker);
    validate_shot_config(cfg.shots);
}

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (known.find(key) == known.end()) {
            throw ConfigError("config: unknown key '" + key + "' in " + where);
        }
    }
}

void apply_config_file(PipelineConfig& cfg, const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("config: no such file " + path.string());
    const json j = parse_json_file(path);
    if (!j.is_object()) throw ConfigError("config: root must be an object");
    reject_unknown_keys(j,
                        {"seed", "workers", "out", "fail_budget", "tom", "tracker", "shots",
                         "similarity_threshold", "scores", "codec", "eval"},
                        "config root");
    const fs::path base = path.parent_path();
    const auto rel = [&](const std::string& p) {
        const fs::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };

    try {
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("workers")) cfg.workers = j.at("workers").get<int>();
        if (j.contains("out")) cfg.out_dir = rel(j.at("out").get<std::string>());
        if (j.contains("fail_budget")) cfg.fail_budget = j.at("fail_budget").get<double>();
        if (j.contains("similarity_threshold")) {
            cfg.similarity_threshold = j.at("similarity_threshold").get<double>();
        }
        if (j.contains("scores")) cfg.scores_path = rel(j.at("scores").get<std::string>());

        if (j.contains("tom")) {
            const json& t = j.at("tom");
            reject_unknown_keys(t,
                                {"grid_size", "eta_px", "eps_px", "max_fg_clusters",
                                 "max_occluded_frac", "deterministic_selection", "horizon",
                                 "ransac_inlier_px", "ransac_max_iters"},
                                "tom");
            if (t.contains("grid_size")) cfg.tom.grid_size = t.at("grid_size").get<int>();
            if (t.contains("eta_px")) cfg.tom.eta_px = t.at("eta_px").get<double>();
            if (t.contains("eps_px")) cfg.tom.eps_px = t.at("eps_px").get<double>();
            if (t.contains("max_fg_clusters")) {
                cfg.tom.max_fg_clusters = t.at("max_fg_clusters").get<int>();
            }
            if (t.contains("max_occluded_frac")) {
                cfg.tom.max_occluded_frac = t.at("max_occluded_frac").get<double>();
            }
            if (t.contains("deterministic_selection")) {
                cfg.tom.deterministic_selection = t.at("deterministic_selection").get<bool>();
            }
            if (t.contains("horizon")) cfg.tom_horizon = t.at("horizon").get<int>();
            if (t.contains("ransac_inlier_px")) {
                cfg.tom.ransac.inlier_px = t.at("ransac_inlier_px").get<double>();
            }
            if (t.contains("ransac_max_iters")) {
                cfg.tom.ransac.max_iters = t.at("ransac_max_iters").get<int>();
            }
        }
        if (j.contains("tracker")) {
            const json& t = j.at("tracker");
            reject_unknown_keys(
                t, {"pyramid_levels", "window", "max_iters", "fb_threshold"}, "tracker");
            if (t.contains("pyramid_levels")) {
                cfg.tracker.pyramid_levels = t.at("pyramid_levels").get<int>();
            }
            if (t.contains("window")) cfg.tracker.window = t.at("window").get<int>();
            if (t.contains("max_iters")) cfg.tracker.max_iters = t.at("max_iters").get<int>();
            if (t.contains("fb_threshold")) {
                cfg.tracker.fb_threshold = t.at("fb_threshold").get<double>();
            }
        }
        if (j.contains("shots")) {
            const json& t = j.at("shots");
            reject_unknown_keys(t, {"threshold", "min_len"}, "shots");
            if (t.contains("threshold")) cfg.shots.threshold = t.at("threshold").get<double>();
            if (t.contains("min_len")) cfg.shots.min_len = t.at("min_len").get<int>();
        }
        if (j.contains("codec")) {
            const json& t = j.at("codec");
            reject_unknown_keys(t, {"vocab", "stats"}, "codec");
            if (t.contains("vocab")) cfg.vocab = t.at("vocab").get<int>();
            if (t.contains("stats")) cfg.stats_path = rel(t.at("stats").get<std::string>());
        }
        if (j.contains("eval")) {
            const json& t = j.at("eval");
            reject_unknown_keys(t, {"horizon_s", "fps", "per_clip"}, "eval");
            if (t.contains("horizon_s")) cfg.eval_horizon_s = t.at("horizon_s").get<double>();
            if (t.contains("fps")) cfg.eval_fps = t.at("fps").get<double>();
            if (t.contains("per_clip")) cfg.eval_per_clip = t.at("per_clip").get<bool>();
        }
    } catch (const json::exception& e) {
        throw ConfigError("config: " + path.string() + ": " + e.what());
    }
}

void apply_env(PipelineConfig& cfg) {
    if (const char* v = std::getenv("SOMTOM_SEED")) {
        try {
            std::size_t used = 0;
            cfg.seed = std::stoull(v, &used);
            if (used != std::string(v).size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ConfigError("config: SOMTOM_SEED is not an integer: " + std::string(v));
        }
    }
    if (const char* v = std::getenv("SOMTOM_WORKERS")) {
        try {
            std::size_t used = 0;
            cfg.workers = std::stoi(v, &used);
            if (used != std::string(v).size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ConfigError("config: SOMTOM_WORKERS is not an integer: " + std::string(v));
        }
    }
}

}  // namespace

PipelineConfig resolve_config(const std::optional<fs::path>& config_file,
                              const ConfigOverrides& o) {
    PipelineConfig cfg;
    if (config_file) apply_config_file(cfg, *config_file);
    apply_env(cfg);
    if (o.seed) cfg.seed = *o.seed;
    if (o.workers) cfg.workers = *o.workers;
    if (o.out_dir) cfg.out_dir = *o.out_dir;
    if (o.fail_budget) cfg.fail_budget = *o.fail_budget;
    if (o.scores_path) cfg.scores_path = *o.scores_path;
    if (o.stats_path) cfg.stats_path = *o.stats_path;
    if (o.vocab) cfg.vocab = *o.vocab;
    if (o.eval_horizon_s) cfg.eval_horizon_s = *o.eval_horizon_s;
    if (o.eval_fps) cfg.eval_fps = *o.eval_fps;
    if (o.eval_per_clip) cfg.eval_per_clip = *o.eval_per_clip;
    validate_pipeline_config(cfg);
    return cfg;
}

json config_to_json(const PipelineConfig& cfg) {
    // Semantic fields only: knobs that change output bytes. Execution details
    // (workers, out dir, fail budget) stay out so they never perturb the hash.
    json j;
    j["seed"] = cfg.seed;
    j["tom"] = {{"grid_size", cfg.tom.grid_size},
                {"eta_px", cfg.tom.eta_px},
                {"eps_px", cfg.tom.eps_px},
                {"max_fg_clusters", cfg.tom.max_fg_clusters},
                {"max_occluded_frac", cfg.tom.max_occluded_frac},
                {"deterministic_selection", cfg.tom.deterministic_selection},
                {"horizon", cfg.tom_horizon},
                {"ransac_inlier_px", cfg.tom.ransac.inlier_px},
                {"ransac_max_iters", cfg.tom.ransac.max_iters}};
    j["tracker"] = {{"pyramid_levels", cfg.tracker.pyramid_levels},
                    {"window", cfg.tracker.window},
                    {"max_iters", cfg.tracker.max_iters},
                    {"fb_threshold", cfg.tracker.fb_threshold}};
    j["shots"] = {{"threshold", cfg.shots.threshold}, {"min_len", cfg.shots.min_len}};
    j["similarity_threshold"] = cfg.similarity_threshold;
    j["scores"] = cfg.scores_path ? json(cfg.scores_path->string()) : json(nullptr);
    j["codec"] = {{"vocab", cfg.vocab},
                  {"stats", cfg.stats_path ? json(cfg.stats_path->string()) : json(nullptr)}};
    j["eval"] = {{"horizon_s", cfg.eval_horizon_s},
                 {"fps", cfg.eval_fps},
                 {"per_clip", cfg.eval_per_clip}};
    return j;
}

std::string config_hash(const PipelineConfig& cfg) {
    return hex64(fnv1a64(config_to_json(cfg).dump()));
}

DatasetManifest load_manifest(const fs::path& path) {
    DatasetManifest m;
    m.source = path;
    const fs::path base = path.parent_path();
    const auto rows = parse_jsonl_file(path);
    std::set<std::string> ids;

    static const std::set<std::string> known_types{"ui-image", "video-clip", "robot-trajectory",
                                                   "trace-eval"};
    // Path-valued fields per type: {field, must_be_dir, required}.
    struct PathField {
        const char* field;
        bool dir;
        bool required;
    };
    static const std::map<std::string, std::vector<PathField>> type_paths{
        {"ui-image", {{"image", false, true}, {"boxes", false, true}, {"actions", false, false}}},
        {"video-clip", {{"frames", true, true}, {"segments", false, false}}},
        {"robot-trajectory", {{"actions", false, true}}},
        {"trace-eval", {{"traces", false, true}, {"annotations", false, true}}},
    };

    int line = 0;
    for (const json& row : rows) {
        ++line;
        // Stage manifests chain into the next stage: their header line and
        // failed/skipped rows are bookkeeping, not records.
        if (row.is_object() && row.value("kind", "") == "header") continue;
        const std::string status = row.is_object() ? row.value("status", "ok") : "ok";
        if (status == "failed" || status == "skipped") continue;
        const std::string where = path.string() + " record " + std::to_string(line);
        if (!row.is_object() || !row.contains("id") || !row.contains("type")) {
            throw ValidationError("manifest: " + where + ": need \"id\" and \"type\"");
        }
        ManifestRecord rec;
        rec.id = row.at("id").get<std::string>();
        rec.type = row.at("type").get<std::string>();
        rec.fields = row;
        if (rec.id.empty()) throw ValidationError("manifest: " + where + ": empty id");
        if (!ids.insert(rec.id).second) {
            throw ValidationError("manifest: duplicate id '" + rec.id + "'");
        }
        const auto tp = type_paths.find(rec.type);
        if (tp == type_paths.end()) {
            throw ValidationError("manifest: " + where + ": unknown type '" + rec.type + "'");
        }
        for (const PathField& pf : tp->second) {
            if (!row.contains(pf.field)) {
                if (pf.required) {
                    throw ValidationError("manifest: " + where + ": missing \"" +
                                          pf.field + "\"");
                }
                continue;
            }
            fs::path p(row.at(pf.field).get<std::string>());
            if (!p.is_absolute()) p = base / p;
            if (pf.dir ? !fs::is_directory(p) : !fs::is_regular_file(p)) {
                throw ValidationError("manifest: " + where + ": " + pf.field + " path " +
                                      p.string() + " does not exist");
            }
            rec.fields[pf.field] = p.string();
        }
        m.records.push_back(std::move(rec));
    }
    return m;
}

namespace {

// ---- shared corpus-stage machinery --------------------------------------

struct StageRun {
    fs::path stage_dir;
    fs::path progress_dir;
    std::string cfg_hash;
    std::map<std::string, json> reusable;  // id -> previously completed row
    std::mutex mu;
};

// A previously logged row is trusted when it was produced under the same
// config hash and every listed output still matches its content hash.
bool row_reusable(const json& row, const fs::path& out_dir, const std::string& cfg_hash) {
    if (!row.is_object() || !row.contains("id")) return false;
    if (row.value("config_hash", "") != cfg_hash) return false;
    const std::string status = row.value("status", "");
    if (status != "ok" && status != "skipped") return false;
    if (row.contains("outputs")) {
        for (const json& o : row.at("outputs")) {
            const fs::path p = out_dir / o.at("path").get<std::string>();
            if (!fs::exists(p)) return false;
            try {
                if (file_hash(p) != o.at("hash").get<std::string>()) return false;
            } catch (const std::exception&) {
                return false;
            }
        }
    }
    return true;
}

void open_stage(StageRun& run, const PipelineConfig& cfg, const std::string& stage) {
    run.stage_dir = cfg.out_dir / stage;
    run.progress_dir = run.stage_dir / ".progress";
    run.cfg_hash = config_hash(cfg);
    fs::create_directories(run.progress_dir);

    const auto harvest = [&](const fs::path& file) {
        if (!fs::exists(file)) return;
        for (const json& row : parse_jsonl_file(file)) {
            if (row_reusable(row, cfg.out_dir, run.cfg_hash)) {
                run.reusable[row.at("id").get<std::string>()] = row;
            }
        }
    };
    harvest(run.stage_dir / "manifest.jsonl");
    if (fs::is_directory(run.progress_dir)) {
        std::vector<fs::path> shards;
        for (const auto& e : fs::directory_iterator(run.progress_dir)) {
            if (e.path().extension() == ".jsonl") shards.push_back(e.path());
        }
        std::sort(shards.begin(), shards.end());
        for (const auto& s : shards) harvest(s);
    }
}

// Fans records out to a worker pool. compute(i) returns the merged-manifest
// row for record i; rows land in manifest order regardless of scheduling.
std::vector<json> run_stage(StageRun& run, const PipelineConfig& cfg,
                            const std::vector<ManifestRecord>& records,
                            const std::function<json(const ManifestRecord&)>& compute) {
    const std::size_t n = records.size();
    std::vector<json> rows(n);
    std::atomic<std::size_t> next{0};
    const int n_workers = std::min<int>(cfg.resolved_workers(), std::max<std::size_t>(n, 1));

    const auto worker = [&](int wid) {
        std::ofstream shard(run.progress_dir / ("worker-" + std::to_string(wid) + ".jsonl"),
                            std::ios::app);
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            const ManifestRecord& rec = records[i];
            json row;
            bool fresh = false;
            {
                std::lock_guard<std::mutex> lk(run.mu);
                const auto it = run.reusable.find(rec.id);
                if (it != run.reusable.end()) row = it->second;
            }
            if (row.is_null()) {
                fresh = true;
                try {
                    row = compute(rec);
                } catch (const std::exception& e) {
                    row = json{{"id", rec.id}, {"status", "failed"}, {"error", e.what()}};
                    std::lock_guard<std::mutex> lk(run.mu);
                    std::cerr << "record " << rec.id << " failed: " << e.what() << "\n";
                }
                row["config_hash"] = run.cfg_hash;
            }
            if (fresh && shard) {
                std::lock_guard<std::mutex> lk(run.mu);
                shard << row.dump() << "\n";
                shard.flush();
            }
            rows[i] = std::move(row);
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
    return rows;
}

void write_stage_manifest(const StageRun& run, const std::string& command,
                          const std::vector<json>& rows, json header_extra = {}) {
    json header{{"kind", "header"}, {"command", command}, {"config_hash", run.cfg_hash}};
    if (header_extra.is_object()) {
        for (const auto& [k, v] : header_extra.items()) header[k] = v;
    }
    std::string out = header.dump() + "\n";
    for (const json& r : rows) out += r.dump() + "\n";
    write_text_file(run.stage_dir / "manifest.jsonl", out);
    std::error_code ec;
    fs::remove_all(run.progress_dir, ec);
}

struct StageCounts {
    int ok = 0;
    int skipped = 0;
    int failed = 0;
};

StageCounts count_rows(const std::vector<json>& rows) {
    StageCounts c;
    for (const json& r : rows) {
        const std::string s = r.value("status", "failed");
        if (s == "ok") ++c.ok;
        else if (s == "skipped") ++c.skipped;
        else ++c.failed;
    }
    return c;
}

int finish_stage(const std::string& name, const std::vector<json>& rows, double budget) {
    const StageCounts c = count_rows(rows);
    const std::size_t total = rows.size();
    std::cout << name << ": " << c.ok << " ok, " << c.skipped << " skipped, " << c.failed
              << " failed of " << total << "\n";
    if (total == 0) return 0;
    const double rate = static_cast<double>(c.failed) / static_cast<double>(total);
    if (rate > budget) {
        std::cerr << name << ": failure rate " << rate << " exceeds budget " << budget << "\n";
        return 1;
    }
    return 0;
}

json output_entry(const fs::path& out_dir, const fs::path& file) {
    return json{{"path", fs::relative(file, out_dir).generic_string()},
                {"hash", file_hash(file)}};
}

// ---- som-ui ---------------------------------------------------------------

UiAction parse_action_row(const json& row) {
    UiAction a;
    a.kind = parse_ui_action_kind(row.at("kind").get<std::string>());
    if (row.contains("mark")) a.mark = row.at("mark").get<int>();
    if (row.contains("target")) a.target = row.at("target").get<MarkTarget>();
    if (row.contains("text")) a.text_arg = row.at("text").get<std::string>();
    return a;
}

}  // namespace

int cmd_som_ui(const DatasetManifest& manifest, const PipelineConfig& cfg) {
    StageRun run;
    open_stage(run, cfg, "som");

    const auto compute = [&](const ManifestRecord& rec) -> json {
        if (rec.type != "ui-image") {
            throw ValidationError("som-ui: record " + rec.id + " has type " + rec.type);
        }
        const Raster img = read_frame_rgb(rec.fields.at("image").get<std::string>());
        const json boxes_doc = parse_json_file(rec.fields.at("boxes").get<std::string>());
        const auto boxes = boxes_doc.at("boxes").get<std::vector<BBox>>();

        const SomResult som = apply_som(img, boxes);
        const std::string stem = safe_stem(rec.id);

        const fs::path png = run.stage_dir / (stem + ".png");
        write_png(png, som.image);

        const fs::path marks_file = run.stage_dir / (stem + ".marks.json");
        write_text_file(marks_file, json{{"marks", som.marks}}.dump(2) + "\n");

        std::string placements;
        for (const LabelPlacement& p : som.placements) {
            placements += json{{"label", p.label},
                               {"corner", corner_name(p.corner)},
                               {"box", {p.text_box.x, p.text_box.y, p.text_box.w, p.text_box.h}},
                               {"degraded", p.degraded}}
                              .dump() +
                          "\n";
        }
        const fs::path placements_file = run.stage_dir / (stem + ".placements.jsonl");
        write_text_file(placements_file, placements);

        json row{{"id", rec.id},
                 {"status", "ok"},
                 {"n_marks", som.marks.size()},
                 {"image", fs::relative(png, cfg.out_dir).generic_string()},
                 {"marks", fs::relative(marks_file, cfg.out_dir).generic_string()}};
        json outputs = json::array(
            {output_entry(cfg.out_dir, png), output_entry(cfg.out_dir, marks_file),
             output_entry(cfg.out_dir, placements_file)});

        if (rec.fields.contains("actions")) {
            std::string tokens;
            int line = 0;
            for (const json& arow : parse_jsonl_file(rec.fields.at("actions").get<std::string>())) {
                ++line;
                try {
                    const TokenRecord t = encode_grounding(parse_action_row(arow), som.marks);
                    tokens += json(t).dump() + "\n";
                } catch (const std::exception& e) {
                    throw ValidationError("som-ui: " + rec.id + " action " +
                                          std::to_string(line) + ": " + e.what());
                }
            }
            const fs::path tokens_file = run.stage_dir / (stem + ".tokens.jsonl");
            write_text_file(tokens_file, tokens);
            row["tokens"] = fs::relative(tokens_file, cfg.out_dir).generic_string();
            outputs.push_back(output_entry(cfg.out_dir, tokens_file));
        }
        row["outputs"] = std::move(outputs);
        return row;
    };

    const std::vector<json> rows = run_stage(run, cfg, manifest.records, compute);
    write_stage_manifest(run, "som-ui", rows);
    return finish_stage("som-ui", rows, cfg.fail_budget);
}

// ---- segment ----------------------------------------------------------------

namespace {

struct SegmentSpan {
    int start = 0;
    int end = 0;
    std::string text;
};

std::vector<SegmentSpan> record_segments(const ManifestRecord& rec, int n_frames) {
    std::vector<SegmentSpan> spans;
    if (rec.fields.contains("segments")) {
        for (const json& row : parse_jsonl_file(rec.fields.at("segments").get<std::string>())) {
            SegmentSpan s;
            s.start = row.at("start").get<int>();
            s.end = row.at("end").get<int>();
            s.text = row.value("text", "");
            if (s.start < 0 || s.start >= s.end || s.end > n_frames) {
                throw ValidationError("segment: " + rec.id + " range [" +
                                      std::to_string(s.start) + ", " + std::to_string(s.end) +
                                      ") outside 0.." + std::to_string(n_frames));
            }
            spans.push_back(std::move(s));
        }
        if (spans.empty()) throw ValidationError("segment: " + rec.id + " has no segments");
    } else {
        spans.push_back({0, n_frames, rec.fields.value("action_text", "")});
    }
    return spans;
}

}  // namespace

int cmd_segment(const DatasetManifest& manifest, const PipelineConfig& cfg) {
    std::map<std::string, double> scores;
    if (cfg.scores_path) {
        if (!fs::exists(*cfg.scores_path)) {
            throw ConfigError("segment: scores file " + cfg.scores_path->string() +
                              " does not exist");
        }
        scores = load_similarity_scores(cfg.scores_path->string());
    }

    StageRun run;
    open_stage(run, cfg, "clips");

    const auto compute = [&](const ManifestRecord& rec) -> json {
        if (rec.type != "video-clip") {
            throw ValidationError("segment: record " + rec.id + " has type " + rec.type);
        }
        const fs::path dir = rec.fields.at("frames").get<std::string>();
        const auto files = list_frame_files(dir);
        if (files.empty()) throw ValidationError("segment: " + rec.id + " has no frames");
        const int n = static_cast<int>(files.size());

        json clips = json::array();
        for (const SegmentSpan& span : record_segments(rec, n)) {
            ShotDetector det(rec.id, cfg.shots);
            for (int f = span.start; f < span.end; ++f) det.push(read_frame_rgb(files[f]));
            for (Clip c : det.finish()) {
                c.start_frame += span.start;
                c.end_frame += span.start;
                json crow = c;
                crow["type"] = "video-clip";
                crow["frames"] = dir.string();
                crow["action_text"] = span.text;
                clips.push_back(std::move(crow));
            }
        }
        return json{{"id", rec.id}, {"status", "ok"}, {"clips", std::move(clips)}};
    };

    const std::vector<json> rows = run_stage(run, cfg, manifest.records, compute);

    // Flatten per-record clips into the clip manifest, filtering when scores
    // were supplied.
    std::vector<json> clip_rows;
    int dropped = 0;
    for (const json& row : rows) {
        if (row.value("status", "") != "ok") continue;
        for (const json& crow : row.at("clips")) {
            if (cfg.scores_path) {
                const std::string id = crow.at("id").get<std::string>();
                const auto it = scores.find(id);
                if (it == scores.end()) {
                    throw ValidationError("segment: no similarity score for clip " + id);
                }
                if (it->second < cfg.similarity_threshold) {
                    ++dropped;
                    continue;
                }
                json kept = crow;
                kept["score"] = it->second;
                clip_rows.push_back(std::move(kept));
            } else {
                clip_rows.push_back(crow);
            }
        }
    }
    if (cfg.scores_path && clip_rows.empty()) {
        std::cerr << "segment: every clip fell below similarity "
                  << cfg.similarity_threshold << "\n";
    }

    // Manifest rows are the clips themselves; record failures still count
    // against the budget.
    std::vector<json> manifest_rows = clip_rows;
    for (const json& row : rows) {
        if (row.value("status", "") != "ok") manifest_rows.push_back(row);
    }
    write_stage_manifest(run, "segment", manifest_rows,
                         json{{"aggregation", nullptr},
                              {"similarity_threshold", cfg.similarity_threshold},
                              {"filtered", cfg.scores_path.has_value()},
                              {"dropped", dropped}});

    const StageCounts c = count_rows(rows);
    std::cout << "segment: " << clip_rows.size() << " clips from " << c.ok << " videos, "
              << dropped << " dropped, " << c.failed << " failed\n";
    if (manifest.records.empty()) return 0;
    const double rate = static_cast<double>(c.failed) / manifest.records.size();
    return rate > cfg.fail_budget ? 1 : 0;
}

// ---- tom ---------------------------------------------------------------------

int cmd_tom(const DatasetManifest& manifest, const PipelineConfig& cfg) {
    StageRun run;
    open_stage(run, cfg, "tom");

    const auto compute = [&](const ManifestRecord& rec) -> json {
        if (rec.type != "video-clip") {
            throw ValidationError("tom: record " + rec.id + " has type " + rec.type);
        }
        const fs::path dir = rec.fields.at("frames").get<std::string>();
        const auto files = list_frame_files(dir);
        const int n = static_cast<int>(files.size());
        const int start = rec.fields.value("start", 0);
        const int end = rec.fields.value("end", n);
        if (start < 0 || start >= end || end > n) {
            throw ValidationError("tom: " + rec.id + " frame range [" + std::to_string(start) +
                                  ", " + std::to_string(end) + ") outside 0.." +
                                  std::to_string(n));
        }

        FrameSequence seq;
        seq.fps = read_dir_fps(dir);
        seq.frames.reserve(end - start);
        for (int f = start; f < end; ++f) seq.frames.push_back(read_frame_rgb(files[f]));

        TomConfig tom = cfg.tom;
        tom.seed = record_seed(cfg.seed, rec.id);
        PyramidalLkTracker tracker(cfg.tracker);
        const TomResult result = run_tom(seq, tracker, tom);

        json row{{"id", rec.id}, {"global_motion", result.diagnostics.global_motion}};
        if (!result.has_sample()) {
            row["status"] = "skipped";
            row["reason"] = "no_foreground";
            row["warnings"] = result.diagnostics.warnings;
            return row;
        }

        const std::string stem = safe_stem(rec.id);
        const fs::path png = run.stage_dir / (stem + ".png");
        write_png(png, result.marked_first_frame);
        const fs::path result_file = run.stage_dir / (stem + ".json");
        write_text_file(result_file, json(result).dump(2) + "\n");

        const int horizon =
            std::min<int>(cfg.tom_horizon, static_cast<int>(seq.frames.size()) - 1);
        const TokenRecord token = encode_tom(rec.fields.value("action_text", ""),
                                             result.fg_marks, result.fg_traces, horizon);

        row["status"] = "ok";
        row["k"] = result.k;
        row["fg_marks"] = static_cast<int>(result.fg_marks.size());
        row["marked"] = fs::relative(png, cfg.out_dir).generic_string();
        row["result"] = fs::relative(result_file, cfg.out_dir).generic_string();
        row["token"] = token;
        row["outputs"] = json::array(
            {output_entry(cfg.out_dir, png), output_entry(cfg.out_dir, result_file)});
        return row;
    };

    const std::vector<json> rows = run_stage(run, cfg, manifest.records, compute);

    std::string tokens;
    int global_motion = 0;
    int processed = 0;
    for (const json& row : rows) {
        if (row.contains("global_motion")) {
            ++processed;
            if (row.at("global_motion").get<bool>()) ++global_motion;
        }
        if (row.value("status", "") == "ok") {
            json t = row.at("token");
            t["id"] = row.at("id");
            tokens += t.dump() + "\n";
        }
    }
    write_text_file(run.stage_dir / "tokens.jsonl", tokens);

    const StageCounts c = count_rows(rows);
    const json report{
        {"config_hash", run.cfg_hash},
        {"clips", rows.size()},
        {"samples", c.ok},
        {"skipped", c.skipped},
        {"failed", c.failed},
        {"yield", rows.empty() ? 0.0 : static_cast<double>(c.ok) / rows.size()},
        {"global_motion_rate",
         processed == 0 ? 0.0 : static_cast<double>(global_motion) / processed}};
    write_text_file(run.stage_dir / "report.json", report.dump(2) + "\n");

    write_stage_manifest(run, "tom", rows);
    return finish_stage("tom", rows, cfg.fail_budget);
}

// ---- encode-robot ---------------------------------------------------------

namespace {

std::vector<RobotAction> load_robot_rows(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("robot actions: cannot open " + path.string());
    std::vector<RobotAction> actions;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        std::vector<double> vals;
        double v;
        while (ss >> v) vals.push_back(v);
        if (!ss.eof()) {
            throw ParseError("robot actions: " + path.string() + " row " +
                             std::to_string(line_no) + ": non-numeric value");
        }
        if (vals.size() != kRobotDims) {
            throw ValidationError("robot actions: " + path.string() + " row " +
                                  std::to_string(line_no) + " has " +
                                  std::to_string(vals.size()) + " values, want 7");
        }
        RobotAction a;
        std::copy(vals.begin(), vals.end(), a.delta.begin());
        actions.push_back(a);
    }
    return actions;
}

}  // namespace

int cmd_encode_robot(const DatasetManifest& manifest, const PipelineConfig& cfg) {
    StageRun run;
    open_stage(run, cfg, "robot");

    // Load phase is serial: fitting needs the full calibration set before any
    // record can encode.
    std::vector<std::optional<std::vector<RobotAction>>> loaded(manifest.records.size());
    std::vector<json> load_failures(manifest.records.size());
    std::vector<RobotAction> calibration;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const ManifestRecord& rec = manifest.records[i];
        try {
            if (rec.type != "robot-trajectory") {
                throw ValidationError("encode-robot: record " + rec.id + " has type " +
                                      rec.type);
            }
            auto actions = load_robot_rows(rec.fields.at("actions").get<std::string>());
            calibration.insert(calibration.end(), actions.begin(), actions.end());
            loaded[i] = std::move(actions);
        } catch (const std::exception& e) {
            load_failures[i] = json{{"id", rec.id}, {"status", "failed"}, {"error", e.what()},
                                    {"config_hash", run.cfg_hash}};
            std::cerr << "record " << rec.id << " failed: " << e.what() << "\n";
        }
    }

    ActionStats stats;
    if (cfg.stats_path) {
        if (!fs::exists(*cfg.stats_path)) {
            throw ConfigError("encode-robot: stats file " + cfg.stats_path->string() +
                              " does not exist");
        }
        stats = parse_json_file(*cfg.stats_path).get<ActionStats>();
        validate_action_stats(stats);
    } else {
        stats = fit_stats(calibration);
        for (const std::string& w : stats.warnings) {
            std::cerr << "encode-robot: " << w << "\n";
        }
    }
    const fs::path stats_file = run.stage_dir / "stats.json";
    write_text_file(stats_file, json(stats).dump(2) + "\n");

    const auto compute = [&](const ManifestRecord& rec) -> json {
        std::size_t idx = 0;
        while (idx < manifest.records.size() && manifest.records[idx].id != rec.id) ++idx;
        if (!load_failures[idx].is_null()) {
            json row = load_failures[idx];
            row.erase("config_hash");
            return row;
        }
        const auto& actions = *loaded[idx];

        std::string tokens;
        for (std::size_t s = 0; s < actions.size(); ++s) {
            json t = encode_robot(actions[s], stats, cfg.vocab);
            t["step"] = s;
            tokens += t.dump() + "\n";
        }
        const std::string stem = safe_stem(rec.id);
        const fs::path tokens_file = run.stage_dir / (stem + ".tokens.jsonl");
        write_text_file(tokens_file, tokens);

        return json{{"id", rec.id},
                    {"status", "ok"},
                    {"n_actions", actions.size()},
                    {"tokens", fs::relative(tokens_file, cfg.out_dir).generic_string()},
                    {"outputs", json::array({output_entry(cfg.out_dir, tokens_file)})}};
    };

    const std::vector<json> rows = run_stage(run, cfg, manifest.records, compute);

    std::string merged;
    for (const json& row : rows) {
        if (row.value("status", "") != "ok") continue;
        const fs::path f = cfg.out_dir / row.at("tokens").get<std::string>();
        std::ifstream in(f);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json t = json::parse(line);
            t["id"] = row.at("id");
            merged += t.dump() + "\n";
        }
    }
    write_text_file(run.stage_dir / "tokens.jsonl", merged);

    write_stage_manifest(run, "encode-robot", rows,
                         json{{"stats", fs::relative(stats_file, cfg.out_dir).generic_string()}});
    return finish_stage("encode-robot", rows, cfg.fail_budget);
}

// ---- eval-traces ------------------------------------------------------------

namespace {

std::vector<BoxAnnotation> load_annotations(const fs::path& path) {
    std::vector<BoxAnnotation> out;
    for (const json& row : parse_jsonl_file(path)) out.push_back(row.get<BoxAnnotation>());
    return out;
}

json report_json(const PrecisionReport& rep) {
    return json{{"precision", rep.precision},
                {"n_traces", rep.n_traces},
                {"hits", rep.hits},
                {"horizon_frames", rep.horizon_frames}};
}

}  // namespace

int cmd_eval_traces(const fs::path& traces_path, const fs::path& annotations_path,
                    const PipelineConfig& cfg) {
    const fs::path stage = cfg.out_dir / "eval";
    fs::create_directories(stage);

    const auto traces = load_external_traces(traces_path);
    const auto annotations = load_annotations(annotations_path);

    PrecisionReport rep;
    try {
        rep = trace_precision_report(traces, annotations, cfg.eval_horizon_s, cfg.eval_fps);
    } catch (const UndefinedMetricError& e) {
        std::cerr << "eval-traces: " << e.what() << "\n";
        return 1;
    }

    json report = report_json(rep);
    report["config_hash"] = config_hash(cfg);
    write_text_file(stage / "report.json", report.dump(2) + "\n");
    std::cout << "eval-traces: precision " << rep.precision << " over " << rep.n_traces
              << " traces at horizon " << rep.horizon_frames << "\n";
    return 0;
}

int cmd_eval_traces_manifest(const DatasetManifest& manifest, const PipelineConfig& cfg) {
    const fs::path stage = cfg.out_dir / "eval";
    fs::create_directories(stage);

    json per_clip = json::array();
    long hits = 0;
    long total = 0;
    double precision_sum = 0.0;
    int scored_clips = 0;
    for (const ManifestRecord& rec : manifest.records) {
        if (rec.type != "trace-eval") {
            throw ValidationError("eval-traces: record " + rec.id + " has type " + rec.type);
        }
        const auto traces = load_external_traces(rec.fields.at("traces").get<std::string>());
        const auto annotations =
            load_annotations(rec.fields.at("annotations").get<std::string>());
        const double fps = rec.fields.value("fps", cfg.eval_fps);
        try {
            const PrecisionReport rep =
                trace_precision_report(traces, annotations, cfg.eval_horizon_s, fps);
            json entry = report_json(rep);
            entry["id"] = rec.id;
            per_clip.push_back(std::move(entry));
            hits += rep.hits;
            total += rep.n_traces;
            precision_sum += rep.precision;
            ++scored_clips;
        } catch (const UndefinedMetricError& e) {
            per_clip.push_back(json{{"id", rec.id}, {"error", e.what()}});
            std::cerr << "eval-traces: " << rec.id << ": " << e.what() << "\n";
        }
    }
    if (total == 0) {
        std::cerr << "eval-traces: no clip produced a defined metric\n";
        return 1;
    }

    json report{{"precision", static_cast<double>(hits) / total},
                {"n_traces", total},
                {"hits", hits},
                {"clips", scored_clips},
                {"config_hash", config_hash(cfg)}};
    if (cfg.eval_per_clip) {
        report["per_clip"] = per_clip;
        report["per_clip_mean"] = precision_sum / scored_clips;
    }
    write_text_file(stage / "report.json", report.dump(2) + "\n");
    std::cout << "eval-traces: pooled precision " << report.at("precision").get<double>()
              << " over " << total << " traces in " << scored_clips << " clips\n";
    return 0;
}

int cmd_validate(const fs::path& manifest_path) {
    try {
        const DatasetManifest m = load_manifest(manifest_path);
        std::map<std::string, int> by_type;
        for (const ManifestRecord& r : m.records) ++by_type[r.type];
        std::cout << "manifest ok: " << m.records.size() << " records";
        for (const auto& [type, count] : by_type) std::cout << ", " << count << " " << type;
        std::cout << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "manifest invalid: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace somtom

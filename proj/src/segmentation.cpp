#include "somtom/segmentation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace somtom {

void validate_segment(const Segment& s) {
    if (s.video_id.empty()) throw ValidationError("segment: empty video_id");
    if (s.start_frame < 0) throw ValidationError("segment: negative start_frame");
    if (s.start_frame >= s.end_frame) {
        throw ValidationError("segment: start_frame must be before end_frame");
    }
}

std::string Clip::id() const {
    return segment_ref + ":" + std::to_string(start_frame) + "-" + std::to_string(end_frame);
}

void validate_shot_config(const ShotConfig& cfg) {
    if (cfg.threshold < 0.0) throw ConfigError("shots: threshold must be >= 0");
    if (cfg.min_len < 1) throw ConfigError("shots: min_len must be >= 1");
}

namespace {

// Mean luma over a 16x16 block partition; blocks never land empty because
// cell starts are strictly below the image size.
std::array<double, 256> luma_thumbnail(const GrayImage& img) {
    std::array<double, 256> out{};
    for (int ty = 0; ty < 16; ++ty) {
        int y0 = ty * img.height / 16;
        int y1 = std::max(y0 + 1, (ty + 1) * img.height / 16);
        for (int tx = 0; tx < 16; ++tx) {
            int x0 = tx * img.width / 16;
            int x1 = std::max(x0 + 1, (tx + 1) * img.width / 16);
            double acc = 0.0;
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) acc += img.at(x, y);
            }
            out[ty * 16 + tx] = acc / ((y1 - y0) * (x1 - x0));
        }
    }
    return out;
}

double thumb_mad(const double* a, const double* b) {
    double acc = 0.0;
    for (int i = 0; i < 256; ++i) acc += std::abs(a[i] - b[i]);
    return acc / 256.0;
}

}  // namespace

double shot_change_score(const GrayImage& a, const GrayImage& b) {
    if (a.width != b.width || a.height != b.height) {
        throw ValidationError("shots: frame dimensions differ");
    }
    if (a.width <= 0 || a.height <= 0) throw ValidationError("shots: empty frame");
    const auto ta = luma_thumbnail(a);
    const auto tb = luma_thumbnail(b);
    return thumb_mad(ta.data(), tb.data());
}

ShotDetector::ShotDetector(std::string segment_ref, ShotConfig cfg)
    : segment_ref_(std::move(segment_ref)), cfg_(cfg) {
    validate_shot_config(cfg_);
}

void ShotDetector::push(const GrayImage& frame) {
    if (finished_) throw Error("shots: detector already finished");
    if (frame.width <= 0 || frame.height <= 0) throw ValidationError("shots: empty frame");
    if (!has_prev_) {
        width_ = frame.width;
        height_ = frame.height;
    } else if (frame.width != width_ || frame.height != height_) {
        throw ValidationError("shots: frame dimensions differ");
    }

    const auto thumb = luma_thumbnail(frame);
    if (has_prev_) {
        const double score = thumb_mad(prev_thumb_, thumb.data());
        if (score > cfg_.threshold && frame_count_ - clip_start_ >= cfg_.min_len) {
            done_.push_back({segment_ref_, clip_start_, frame_count_, std::move(scores_)});
            scores_.clear();
            clip_start_ = frame_count_;
            last_cut_score_ = score;
        } else {
            scores_.push_back(score);
        }
    }
    std::copy(thumb.begin(), thumb.end(), prev_thumb_);
    has_prev_ = true;
    ++frame_count_;
}

void ShotDetector::push(const Raster& frame) { push(to_gray(frame)); }

std::vector<Clip> ShotDetector::finish() {
    if (finished_) throw Error("shots: detector already finished");
    finished_ = true;
    if (frame_count_ == 0) return {};

    Clip tail{segment_ref_, clip_start_, frame_count_, std::move(scores_)};
    if (tail.length() < cfg_.min_len && !done_.empty()) {
        // A trailing run too short to stand alone rejoins the previous clip;
        // the cut score becomes an internal boundary again.
        Clip& prev = done_.back();
        prev.end_frame = tail.end_frame;
        prev.shot_score_trace.push_back(last_cut_score_);
        prev.shot_score_trace.insert(prev.shot_score_trace.end(), tail.shot_score_trace.begin(),
                                     tail.shot_score_trace.end());
    } else {
        done_.push_back(std::move(tail));
    }
    return std::move(done_);
}

std::vector<Clip> detect_shots(const FrameSequence& seq, const std::string& segment_ref,
                               const ShotConfig& cfg) {
    if (seq.frames.empty()) throw ValidationError("shots: empty sequence");
    ShotDetector det(segment_ref, cfg);
    for (const Raster& f : seq.frames) det.push(f);
    return det.finish();
}

std::vector<Clip> filter_by_similarity(const std::vector<Clip>& clips,
                                       const std::map<std::string, double>& scores,
                                       double threshold) {
    std::vector<std::string> missing;
    for (const Clip& c : clips) {
        if (scores.find(c.id()) == scores.end()) missing.push_back(c.id());
    }
    if (!missing.empty()) {
        std::string msg = "similarity: missing scores for";
        for (const std::string& id : missing) msg += " " + id;
        throw ValidationError(msg);
    }
    std::vector<Clip> kept;
    for (const Clip& c : clips) {
        if (scores.at(c.id()) >= threshold) kept.push_back(c);
    }
    return kept;
}

namespace {

std::map<std::string, double> load_scores_csv(std::istream& in, const std::string& path) {
    std::map<std::string, double> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line_no == 1 && line.rfind("clip,", 0) == 0) continue;  // header
        const auto comma = line.find_last_of(',');
        if (comma == std::string::npos) {
            throw ParseError("scores: " + path + " line " + std::to_string(line_no) +
                             ": expected 'id,score'");
        }
        const std::string id = line.substr(0, comma);
        double score = 0.0;
        try {
            score = std::stod(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw ParseError("scores: " + path + " line " + std::to_string(line_no) +
                             ": bad score value");
        }
        if (!out.emplace(id, score).second) {
            throw ValidationError("scores: duplicate clip id " + id);
        }
    }
    return out;
}

std::map<std::string, double> load_scores_jsonl(std::istream& in, const std::string& path) {
    std::map<std::string, double> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const nlohmann::json j = nlohmann::json::parse(line);
            const std::string id = j.at("clip").get<std::string>();
            const double score = j.at("score").get<double>();
            if (!out.emplace(id, score).second) {
                throw ValidationError("scores: duplicate clip id " + id);
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("scores: " + path + " line " + std::to_string(line_no) + ": " +
                             e.what());
        }
    }
    return out;
}

}  // namespace

std::map<std::string, double> load_similarity_scores(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("scores: cannot open " + path);
    const bool csv = path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
    return csv ? load_scores_csv(in, path) : load_scores_jsonl(in, path);
}

}  // namespace somtom

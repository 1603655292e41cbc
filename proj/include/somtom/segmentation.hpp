#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "somtom/raster.hpp"
#include "somtom/tracking.hpp"

namespace somtom {

struct Segment {
    std::string video_id;
    int start_frame = 0;
    int end_frame = 0;  // exclusive
    std::string text;
};

void validate_segment(const Segment& s);

struct Clip {
    std::string segment_ref;
    int start_frame = 0;
    int end_frame = 0;  // exclusive
    std::vector<double> shot_score_trace;  // change score per internal frame boundary

    int length() const { return end_frame - start_frame; }
    // Stable id, also the key used by similarity score files.
    std::string id() const;
};

struct ShotConfig {
    double threshold = 27.0;  // mean abs luma diff on the 16x16 thumbnail
    int min_len = 12;         // frames; cuts are suppressed inside younger clips
};

void validate_shot_config(const ShotConfig& cfg);

// Streaming cut detector holding one 16x16 luma thumbnail of state. Feed
// frames in order, then call finish() for the trailing clip. Clips partition
// [0, frames); a trailing run shorter than min_len merges into the previous
// clip.
class ShotDetector {
public:
    ShotDetector(std::string segment_ref, ShotConfig cfg);

    void push(const GrayImage& frame);
    void push(const Raster& frame);
    std::vector<Clip> finish();

private:
    std::string segment_ref_;
    ShotConfig cfg_;
    int width_ = 0;
    int height_ = 0;
    bool has_prev_ = false;
    bool finished_ = false;
    double prev_thumb_[256] = {};
    double last_cut_score_ = 0.0;
    int frame_count_ = 0;
    int clip_start_ = 0;
    std::vector<double> scores_;  // boundary scores of the open clip
    std::vector<Clip> done_;
};

// Change score between two frames: mean absolute difference of their
// 16x16-downsampled luma (0..255 scale).
double shot_change_score(const GrayImage& a, const GrayImage& b);

// Splits a sequence at content cuts. A cut opens where the boundary score
// exceeds cfg.threshold and the open clip already has >= cfg.min_len frames.
std::vector<Clip> detect_shots(const FrameSequence& seq, const std::string& segment_ref,
                               const ShotConfig& cfg = {});

// Keeps clips whose similarity score is >= threshold, preserving order.
// Every clip id must have a score entry; missing ids raise ValidationError.
std::vector<Clip> filter_by_similarity(const std::vector<Clip>& clips,
                                       const std::map<std::string, double>& scores,
                                       double threshold = 0.25);

// Reads clip-id -> score pairs. JSONL lines {"clip": id, "score": s} or CSV
// rows "id,score" (optional "clip,score" header), chosen by file extension.
std::map<std::string, double> load_similarity_scores(const std::string& path);

}  // namespace somtom

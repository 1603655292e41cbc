#pragma once

#include <nlohmann/json.hpp>

#include "somtom/codec.hpp"
#include "somtom/evalkit.hpp"
#include "somtom/geometry.hpp"
#include "somtom/homography.hpp"
#include "somtom/segmentation.hpp"
#include "somtom/som.hpp"
#include "somtom/tom.hpp"

// ADL serializers for the wire formats: Point2 <-> [x, y],
// BBox <-> [x, y, w, h], Trace <-> {"points": ..., "occluded": ..., "seed": n},
// MarkSet <-> {"<label>": [x, y] | [x, y, w, h]}, plus the result and record
// shapes written by the pipeline. Doubles are emitted with shortest
// round-trip formatting, which preserves more than 9 significant digits
// whenever they matter.

namespace somtom {

inline void to_json(nlohmann::json& j, const Point2& p) {
    j = nlohmann::json::array({p.x, p.y});
}

inline void from_json(const nlohmann::json& j, Point2& p) {
    if (!j.is_array() || j.size() != 2) {
        throw ValidationError("point: expected [x, y]");
    }
    p.x = j[0].get<double>();
    p.y = j[1].get<double>();
}

inline void to_json(nlohmann::json& j, const BBox& b) {
    j = nlohmann::json::array({b.x, b.y, b.w, b.h});
}

inline void from_json(const nlohmann::json& j, BBox& b) {
    if (!j.is_array() || j.size() != 4) {
        throw ValidationError("bbox: expected [x, y, w, h]");
    }
    b.x = j[0].get<double>();
    b.y = j[1].get<double>();
    b.w = j[2].get<double>();
    b.h = j[3].get<double>();
}

inline void to_json(nlohmann::json& j, const Trace& t) {
    j = nlohmann::json{{"points", t.points},
                       {"occluded", t.occluded},
                       {"seed", t.seed_index}};
}

inline void from_json(const nlohmann::json& j, Trace& t) {
    if (!j.is_object() || !j.contains("points") || !j.contains("occluded") || !j.contains("seed")) {
        throw ValidationError("trace: expected {\"points\", \"occluded\", \"seed\"}");
    }
    t.points = j.at("points").get<std::vector<Point2>>();
    t.occluded = j.at("occluded").get<std::vector<bool>>();
    t.seed_index = j.at("seed").get<int>();
}

inline void to_json(nlohmann::json& j, const MarkTarget& t) {
    if (std::holds_alternative<Point2>(t)) {
        j = std::get<Point2>(t);
    } else {
        j = std::get<BBox>(t);
    }
}

inline void from_json(const nlohmann::json& j, MarkTarget& t) {
    if (j.is_array() && j.size() == 2) {
        t = j.get<Point2>();
    } else if (j.is_array() && j.size() == 4) {
        t = j.get<BBox>();
    } else {
        throw ValidationError("mark target: expected [x, y] or [x, y, w, h]");
    }
}

inline void to_json(nlohmann::json& j, const MarkSet& m) {
    j = nlohmann::json::object();
    for (const auto& [label, target] : m.entries) j[std::to_string(label)] = target;
}

inline void from_json(const nlohmann::json& j, MarkSet& m) {
    if (!j.is_object()) throw ValidationError("markset: expected an object");
    m.entries.clear();
    for (const auto& [key, value] : j.items()) {
        int label = 0;
        try {
            label = std::stoi(key);
        } catch (const std::exception&) {
            throw ValidationError("markset: non-numeric label '" + key + "'");
        }
        m.entries[label] = value.get<MarkTarget>();
    }
}

inline void to_json(nlohmann::json& j, const StabilizeStepInfo& s) {
    j = nlohmann::json{{"step", s.step},
                       {"applied", s.applied},
                       {"candidates", s.candidates},
                       {"inliers", s.inliers},
                       {"rms_residual_px", s.rms_residual_px}};
}

inline void to_json(nlohmann::json& j, const TomDiagnostics& d) {
    j = nlohmann::json{{"global_motion", d.global_motion},
                       {"stabilized", d.stabilized},
                       {"stabilize_steps", d.stabilize_steps},
                       {"warnings", d.warnings},
                       {"dropped_traces", d.dropped_traces},
                       {"foreground_total", d.foreground_total},
                       {"background_total", d.background_total}};
}

inline void to_json(nlohmann::json& j, const TomResult& r) {
    j = nlohmann::json{{"fg_marks", r.fg_marks},
                       {"bg_marks", r.bg_marks},
                       {"fg_traces", r.fg_traces},
                       {"k", r.k},
                       {"diagnostics", r.diagnostics}};
}

inline void to_json(nlohmann::json& j, const Clip& c) {
    j = nlohmann::json{{"id", c.id()},
                       {"segment_ref", c.segment_ref},
                       {"start", c.start_frame},
                       {"end", c.end_frame},
                       {"shot_scores", c.shot_score_trace}};
}

inline void from_json(const nlohmann::json& j, Clip& c) {
    c.segment_ref = j.at("segment_ref").get<std::string>();
    c.start_frame = j.at("start").get<int>();
    c.end_frame = j.at("end").get<int>();
    if (j.contains("shot_scores")) {
        c.shot_score_trace = j.at("shot_scores").get<std::vector<double>>();
    }
}

inline void to_json(nlohmann::json& j, const TokenRecord& r) {
    j = nlohmann::json{{"text", r.text}, {"kind", r.kind}};
    if (r.token_ids) {
        j["ids"] = *r.token_ids;
    } else {
        j["ids"] = nullptr;
    }
}

inline void from_json(const nlohmann::json& j, TokenRecord& r) {
    r.text = j.at("text").get<std::string>();
    r.kind = j.at("kind").get<std::string>();
    if (j.contains("ids") && !j.at("ids").is_null()) {
        r.token_ids = j.at("ids").get<std::vector<int>>();
    } else {
        r.token_ids.reset();
    }
}

inline void to_json(nlohmann::json& j, const ActionStats& s) {
    j = nlohmann::json{{"low", s.low}, {"high", s.high}};
    if (!s.warnings.empty()) j["warnings"] = s.warnings;
}

inline void from_json(const nlohmann::json& j, ActionStats& s) {
    const auto low = j.at("low").get<std::vector<double>>();
    const auto high = j.at("high").get<std::vector<double>>();
    if (low.size() != kRobotDims || high.size() != kRobotDims) {
        throw ValidationError("action stats: expected 7 bounds per side");
    }
    std::copy(low.begin(), low.end(), s.low.begin());
    std::copy(high.begin(), high.end(), s.high.begin());
    if (j.contains("warnings")) s.warnings = j.at("warnings").get<std::vector<std::string>>();
}

inline void to_json(nlohmann::json& j, const BoxAnnotation& a) {
    j = nlohmann::json{{"frame", a.frame_index}, {"object", a.object_id}, {"box", a.box}};
    if (!a.visible) j["visible"] = false;
}

inline void from_json(const nlohmann::json& j, BoxAnnotation& a) {
    a.frame_index = j.at("frame").get<int>();
    a.object_id = j.at("object").get<std::string>();
    a.visible = !j.contains("visible") || j.at("visible").get<bool>();
    if (a.visible) {
        a.box = j.at("box").get<BBox>();
    } else if (j.contains("box")) {
        a.box = j.at("box").get<BBox>();
    }
}

}  // namespace somtom

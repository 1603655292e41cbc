#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "somtom/geometry.hpp"
#include "somtom/som.hpp"

namespace somtom {

inline constexpr int kRobotDims = 7;
inline constexpr int kRobotBins = 256;  // token ids occupy the last 256 slots

enum class UiActionKind { Click, Type, Select, Scroll, Press };

const char* ui_action_kind_name(UiActionKind k);
UiActionKind parse_ui_action_kind(const std::string& name);

struct UiAction {
    UiActionKind kind = UiActionKind::Click;
    std::optional<int> mark;           // label into a MarkSet
    std::optional<MarkTarget> target;  // direct point or box, used when no mark
    std::optional<std::string> text_arg;
};

// click/select need a mark or a target; type needs text_arg.
void validate_ui_action(const UiAction& a);

struct RobotAction {
    // (x, y, z, yaw, pitch, roll, gripper)
    std::array<double, kRobotDims> delta{};
};

struct ActionStats {
    std::array<double, kRobotDims> low{};
    std::array<double, kRobotDims> high{};
    std::vector<std::string> warnings;  // set by fit_stats on degenerate dims
};

// Requires low < high per dimension.
void validate_action_stats(const ActionStats& s);

struct TokenRecord {
    std::string text;
    std::optional<std::vector<int>> token_ids;
    std::string kind;  // "grounding" | "tom" | "robot"
};

// Grounding record: `<kind> : mark <k> : (<xbin>,<ybin>)`, plus ` : "<text>"`
// when the action carries text. The coordinate comes from the mark's stored
// target (boxes contribute their center); an action without a mark uses its
// own target and omits the mark clause.
TokenRecord encode_grounding(const UiAction& action, const MarkSet& marks);

// Planning record: `<action_text> : marks {k1,..} : traces {k1:[(x,y),..],..}`
// with each trace subsampled to horizon future steps (indices
// round(j*(L-1)/horizon), j = 1..horizon). Marks pair with traces in label
// order. Stabilized points may sit outside the unit square; they are clamped
// into it before binning.
TokenRecord encode_tom(const std::string& action_text, const MarkSet& fg_marks,
                       const std::vector<Trace>& fg_traces, int horizon);

// Robot action: per dimension clip to [low, high], map to [-1,1], bin
// b = floor((v+1)/2*256) clamped to 255, token id = vocab-256+b.
TokenRecord encode_robot(const RobotAction& a, const ActionStats& stats, int vocab);

// Inverse of encode_robot, returning bin centers in original units.
// encode(decode(ids)) reproduces ids exactly.
RobotAction decode_robot(const std::vector<int>& ids, const ActionStats& stats, int vocab);

// Per-dimension 1st/99th percentiles (linear interpolation) of a calibration
// set. A constant dimension is widened by +-1e-6 and noted in warnings.
ActionStats fit_stats(const std::vector<RobotAction>& actions);

// Parsed form of an encode_grounding record.
struct GroundingRecord {
    UiActionKind kind = UiActionKind::Click;
    std::optional<int> mark;
    std::optional<std::pair<int, int>> bins;
    std::optional<std::string> text_arg;
};

GroundingRecord parse_grounding(const std::string& text);

// Parsed form of an encode_tom record.
struct TomRecord {
    std::string action_text;
    std::vector<int> labels;
    std::vector<std::vector<std::pair<int, int>>> traces;  // bins, label order
};

TomRecord parse_tom(const std::string& text);

}  // namespace somtom

#include "somtom/codec.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <variant>

namespace somtom {

const char* ui_action_kind_name(UiActionKind k) {
    switch (k) {
        case UiActionKind::Click: return "click";
        case UiActionKind::Type: return "type";
        case UiActionKind::Select: return "select";
        case UiActionKind::Scroll: return "scroll";
        case UiActionKind::Press: return "press";
    }
    return "click";
}

UiActionKind parse_ui_action_kind(const std::string& name) {
    if (name == "click") return UiActionKind::Click;
    if (name == "type") return UiActionKind::Type;
    if (name == "select") return UiActionKind::Select;
    if (name == "scroll") return UiActionKind::Scroll;
    if (name == "press") return UiActionKind::Press;
    throw ParseError("ui action: unknown kind '" + name + "'");
}

void validate_ui_action(const UiAction& a) {
    if ((a.kind == UiActionKind::Click || a.kind == UiActionKind::Select) && !a.mark &&
        !a.target) {
        throw ValidationError(std::string("ui action: ") + ui_action_kind_name(a.kind) +
                              " needs a mark or a target");
    }
    if (a.kind == UiActionKind::Type && !a.text_arg) {
        throw ValidationError("ui action: type needs text_arg");
    }
    if (a.mark && *a.mark < 1) throw ValidationError("ui action: mark labels start at 1");
}

void validate_action_stats(const ActionStats& s) {
    for (int d = 0; d < kRobotDims; ++d) {
        if (!(s.low[d] < s.high[d])) {
            throw ValidationError("action stats: low >= high in dimension " + std::to_string(d));
        }
    }
}

namespace {

std::string escape_text(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '"': out += "\\\""; break;
            case '\n': out += "\\n"; break;
            default: out += c;
        }
    }
    return out;
}

std::string bin_pair(const Point2& p) {
    const Point2 clamped{std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0)};
    const auto [qx, qy] = quantize(clamped);
    return "(" + std::to_string(qx.bin) + "," + std::to_string(qy.bin) + ")";
}

Point2 target_point(const MarkTarget& t) {
    if (std::holds_alternative<Point2>(t)) return std::get<Point2>(t);
    return std::get<BBox>(t).center();
}

}  // namespace

TokenRecord encode_grounding(const UiAction& action, const MarkSet& marks) {
    validate_ui_action(action);

    std::string text = ui_action_kind_name(action.kind);
    std::optional<MarkTarget> coord;
    if (action.mark) {
        const auto it = marks.entries.find(*action.mark);
        if (it == marks.entries.end()) {
            throw ValidationError("grounding: mark " + std::to_string(*action.mark) +
                                  " is not in the mark set");
        }
        text += " : mark " + std::to_string(*action.mark);
        coord = it->second;
    } else if (action.target) {
        coord = *action.target;
    }
    if (coord) text += " : " + bin_pair(target_point(*coord));
    if (action.text_arg) text += " : \"" + escape_text(*action.text_arg) + "\"";
    return {std::move(text), std::nullopt, "grounding"};
}

TokenRecord encode_tom(const std::string& action_text, const MarkSet& fg_marks,
                       const std::vector<Trace>& fg_traces, int horizon) {
    if (horizon < 1) throw ValidationError("tom record: horizon must be >= 1");
    if (fg_marks.size() != fg_traces.size()) {
        throw ValidationError("tom record: " + std::to_string(fg_marks.size()) + " marks vs " +
                              std::to_string(fg_traces.size()) + " traces");
    }
    if (fg_traces.empty()) throw ValidationError("tom record: no marks");

    std::string marks_part;
    std::string traces_part;
    std::size_t i = 0;
    for (const auto& [label, target] : fg_marks.entries) {
        const Trace& t = fg_traces[i];
        const std::size_t len = t.points.size();
        if (len < static_cast<std::size_t>(horizon) + 1) {
            throw ValidationError("tom record: trace for mark " + std::to_string(label) +
                                  " has " + std::to_string(len) + " steps, horizon needs " +
                                  std::to_string(horizon + 1));
        }
        if (i > 0) {
            marks_part += ",";
            traces_part += ",";
        }
        marks_part += std::to_string(label);
        traces_part += std::to_string(label) + ":[";
        for (int j = 1; j <= horizon; ++j) {
            const auto idx = static_cast<std::size_t>(
                std::lround(static_cast<double>(j) * (len - 1) / horizon));
            if (j > 1) traces_part += ",";
            traces_part += bin_pair(t.points[idx]);
        }
        traces_part += "]";
        ++i;
    }

    std::string text =
        action_text + " : marks {" + marks_part + "} : traces {" + traces_part + "}";
    return {std::move(text), std::nullopt, "tom"};
}

TokenRecord encode_robot(const RobotAction& a, const ActionStats& stats, int vocab) {
    validate_action_stats(stats);
    if (vocab <= kRobotBins) {
        throw ValidationError("robot codec: vocab must exceed " + std::to_string(kRobotBins));
    }

    std::vector<int> ids(kRobotDims);
    std::string text = "robot : (";
    for (int d = 0; d < kRobotDims; ++d) {
        const double v = std::clamp(a.delta[d], stats.low[d], stats.high[d]);
        const double norm = 2.0 * (v - stats.low[d]) / (stats.high[d] - stats.low[d]) - 1.0;
        int bin = static_cast<int>(std::floor((norm + 1.0) / 2.0 * kRobotBins));
        bin = std::clamp(bin, 0, kRobotBins - 1);
        ids[d] = vocab - kRobotBins + bin;
        if (d > 0) text += ",";
        text += std::to_string(bin);
    }
    text += ")";
    return {std::move(text), std::move(ids), "robot"};
}

RobotAction decode_robot(const std::vector<int>& ids, const ActionStats& stats, int vocab) {
    validate_action_stats(stats);
    if (vocab <= kRobotBins) {
        throw ValidationError("robot codec: vocab must exceed " + std::to_string(kRobotBins));
    }
    if (ids.size() != kRobotDims) {
        throw ValidationError("robot codec: expected " + std::to_string(kRobotDims) +
                              " ids, got " + std::to_string(ids.size()));
    }
    RobotAction out;
    for (int d = 0; d < kRobotDims; ++d) {
        const int id = ids[d];
        if (id < vocab - kRobotBins || id >= vocab) {
            throw ValidationError("robot codec: id at position " + std::to_string(d) +
                                  " outside [" + std::to_string(vocab - kRobotBins) + ", " +
                                  std::to_string(vocab - 1) + "]");
        }
        const int bin = id - (vocab - kRobotBins);
        out.delta[d] = stats.low[d] + (bin + 0.5) / kRobotBins * (stats.high[d] - stats.low[d]);
    }
    return out;
}

namespace {

double percentile(const std::vector<double>& sorted, double p) {
    const double rank = p / 100.0 * (sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = rank - lo;
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

ActionStats fit_stats(const std::vector<RobotAction>& actions) {
    if (actions.size() < 2) {
        throw ValidationError("fit_stats: need at least 2 actions, got " +
                              std::to_string(actions.size()));
    }
    ActionStats stats;
    std::vector<double> vals(actions.size());
    for (int d = 0; d < kRobotDims; ++d) {
        for (std::size_t i = 0; i < actions.size(); ++i) vals[i] = actions[i].delta[d];
        std::sort(vals.begin(), vals.end());
        stats.low[d] = percentile(vals, 1.0);
        stats.high[d] = percentile(vals, 99.0);
        if (!(stats.low[d] < stats.high[d])) {
            stats.low[d] -= 1e-6;
            stats.high[d] += 1e-6;
            stats.warnings.push_back("dimension " + std::to_string(d) +
                                     " is constant; bounds widened by 1e-6");
        }
    }
    return stats;
}

namespace {

[[noreturn]] void bad_record(const std::string& what) { throw ParseError(what); }

int parse_uint(const std::string& s, std::size_t& pos, const char* what) {
    if (pos >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos]))) {
        bad_record(std::string("parse: expected ") + what + " at offset " + std::to_string(pos));
    }
    long v = 0;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
        v = v * 10 + (s[pos] - '0');
        if (v > 1'000'000'000L) bad_record(std::string("parse: ") + what + " too large");
        ++pos;
    }
    return static_cast<int>(v);
}

std::pair<int, int> parse_bin_pair(const std::string& s, std::size_t& pos) {
    if (pos >= s.size() || s[pos] != '(') bad_record("parse: expected '('");
    ++pos;
    const int a = parse_uint(s, pos, "x bin");
    if (pos >= s.size() || s[pos] != ',') bad_record("parse: expected ',' in bin pair");
    ++pos;
    const int b = parse_uint(s, pos, "y bin");
    if (pos >= s.size() || s[pos] != ')') bad_record("parse: expected ')'");
    ++pos;
    if (a > kQuantBins - 1 || b > kQuantBins - 1) bad_record("parse: bin exceeds 255");
    return {a, b};
}

std::string parse_quoted_tail(const std::string& s, std::size_t pos) {
    // Opening quote at pos; the quoted text must close the record.
    std::string out;
    ++pos;
    while (pos < s.size()) {
        const char c = s[pos];
        if (c == '\\') {
            if (pos + 1 >= s.size()) bad_record("parse: dangling escape");
            const char e = s[pos + 1];
            if (e == '\\') out += '\\';
            else if (e == '"') out += '"';
            else if (e == 'n') out += '\n';
            else bad_record("parse: unknown escape");
            pos += 2;
            continue;
        }
        if (c == '"') {
            if (pos + 1 != s.size()) bad_record("parse: content after closing quote");
            return out;
        }
        out += c;
        ++pos;
    }
    bad_record("parse: unterminated quote");
}

}  // namespace

GroundingRecord parse_grounding(const std::string& text) {
    static const std::string sep = " : ";
    GroundingRecord rec;

    std::size_t head_end = text.find(sep);
    rec.kind = parse_ui_action_kind(head_end == std::string::npos ? text
                                                                  : text.substr(0, head_end));
    std::size_t pos = head_end == std::string::npos ? text.size() : head_end + sep.size();

    int stage = 0;  // 0: mark allowed, 1: bins allowed, 2: text allowed, 3: done
    while (pos < text.size()) {
        if (text.compare(pos, 5, "mark ") == 0) {
            if (stage > 0) bad_record("grounding record: mark clause out of order");
            pos += 5;
            rec.mark = parse_uint(text, pos, "mark label");
            stage = 1;
        } else if (text[pos] == '(') {
            if (stage > 1) bad_record("grounding record: bins clause out of order");
            rec.bins = parse_bin_pair(text, pos);
            stage = 2;
        } else if (text[pos] == '"') {
            rec.text_arg = parse_quoted_tail(text, pos);
            return rec;
        } else {
            bad_record("grounding record: unexpected clause at offset " + std::to_string(pos));
        }
        if (pos == text.size()) return rec;
        if (text.compare(pos, sep.size(), sep) != 0) {
            bad_record("grounding record: expected ' : ' at offset " + std::to_string(pos));
        }
        pos += sep.size();
        if (pos == text.size()) bad_record("grounding record: trailing separator");
    }
    return rec;
}

TomRecord parse_tom(const std::string& text) {
    static const std::string traces_key = " : traces {";
    static const std::string marks_key = " : marks {";

    if (text.empty() || text.back() != '}') bad_record("tom record: must end with '}'");
    const std::size_t tpos = text.rfind(traces_key);
    if (tpos == std::string::npos) bad_record("tom record: missing traces clause");
    const std::string traces_body =
        text.substr(tpos + traces_key.size(), text.size() - tpos - traces_key.size() - 1);

    const std::string head = text.substr(0, tpos);
    if (head.empty() || head.back() != '}') bad_record("tom record: missing marks clause");
    const std::size_t mpos = head.rfind(marks_key);
    if (mpos == std::string::npos) bad_record("tom record: missing marks clause");
    const std::string marks_body =
        head.substr(mpos + marks_key.size(), head.size() - mpos - marks_key.size() - 1);

    TomRecord rec;
    rec.action_text = head.substr(0, mpos);

    std::size_t pos = 0;
    while (pos < marks_body.size()) {
        rec.labels.push_back(parse_uint(marks_body, pos, "mark label"));
        if (pos < marks_body.size()) {
            if (marks_body[pos] != ',') bad_record("tom record: expected ',' between marks");
            ++pos;
        }
    }
    if (rec.labels.empty()) bad_record("tom record: empty marks clause");

    pos = 0;
    while (pos < traces_body.size()) {
        const int label = parse_uint(traces_body, pos, "trace label");
        if (pos + 1 >= traces_body.size() || traces_body[pos] != ':' ||
            traces_body[pos + 1] != '[') {
            bad_record("tom record: expected ':[' after trace label");
        }
        pos += 2;
        std::vector<std::pair<int, int>> tr;
        while (pos < traces_body.size() && traces_body[pos] == '(') {
            tr.push_back(parse_bin_pair(traces_body, pos));
            if (pos < traces_body.size() && traces_body[pos] == ',' &&
                pos + 1 < traces_body.size() && traces_body[pos + 1] == '(') {
                ++pos;
            }
        }
        if (tr.empty()) bad_record("tom record: empty trace for mark " + std::to_string(label));
        if (pos >= traces_body.size() || traces_body[pos] != ']') {
            bad_record("tom record: expected ']' closing trace");
        }
        ++pos;
        if (rec.traces.size() >= rec.labels.size() ||
            label != rec.labels[rec.traces.size()]) {
            bad_record("tom record: trace labels do not match marks clause");
        }
        rec.traces.push_back(std::move(tr));
        if (pos < traces_body.size()) {
            if (traces_body[pos] != ',') bad_record("tom record: expected ',' between traces");
            ++pos;
        }
    }
    if (rec.traces.size() != rec.labels.size()) {
        bad_record("tom record: trace count does not match marks clause");
    }
    return rec;
}

}  // namespace somtom

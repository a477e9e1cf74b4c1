#include "trailgrade/labeling.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "trailgrade/error.hpp"
#include "text_util.hpp"

namespace trailgrade {

namespace {

constexpr std::string_view kSegmentHeader = "start_ms,end_ms,label";

void check_interval(std::int64_t start, std::int64_t end) {
    if (start >= end) {
        throw Error(Errc::InvalidInterval,
                    "interval [" + std::to_string(start) + ", " + std::to_string(end) + ") is empty");
    }
}

}  // namespace

Difficulty difficulty_from_index(long long value) {
    if (value < 0 || value >= static_cast<long long>(kClassCount)) {
        throw Error(Errc::LabelOutOfRange, "label " + std::to_string(value) + " not in {0,1,2}");
    }
    return static_cast<Difficulty>(value);
}

LabelTrack::LabelTrack(std::vector<LabelSegment> segments) : segments_(std::move(segments)) {
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        check_interval(segments_[i].start_ms, segments_[i].end_ms);
        if (i > 0 && segments_[i].start_ms < segments_[i - 1].end_ms) {
            throw Error(Errc::InvalidInterval, "segments overlap or are unsorted at index " + std::to_string(i));
        }
    }
}

OsmDifficultyMap parse_osm_difficulties(std::string_view xml) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream in{std::string(xml)};
        pt::read_xml(in, tree);
    } catch (const pt::xml_parser_error& e) {
        throw Error(Errc::MalformedXml, e.what());
    }
    auto root = tree.get_child_optional("osm");
    const auto elements = std::count_if(tree.begin(), tree.end(),
                                        [](const auto& child) { return child.first != "<xmlcomment>"; });
    if (!root || elements != 1) throw Error(Errc::MalformedXml, "expected a single <osm> root element");

    OsmDifficultyMap out;
    std::set<std::int64_t> seen;
    for (const auto& [tag_name, way] : *root) {
        if (tag_name != "way") continue;
        auto id_text = way.get_optional<std::string>("<xmlattr>.id");
        std::int64_t id = 0;
        if (!id_text || !detail::parse_int(detail::trim(*id_text), id)) {
            throw Error(Errc::MalformedXml, "<way> without a numeric id attribute");
        }
        if (!seen.insert(id).second) throw Error(Errc::DuplicateWayId, "way " + std::to_string(id));
        for (const auto& [child_name, tag] : way) {
            if (child_name != "tag") continue;
            if (tag.get<std::string>("<xmlattr>.k", "") == "mtb:scale") {
                out[id] = tag.get<std::string>("<xmlattr>.v", "");
            }
        }
    }
    return out;
}

Difficulty map_grade(std::string_view raw_grade) {
    auto g = detail::trim(raw_grade);
    while (!g.empty() && (g.back() == '+' || g.back() == '-')) g.remove_suffix(1);
    if (!g.empty() && (g.front() == 'S' || g.front() == 's')) g.remove_prefix(1);
    if (g.size() == 1 && g[0] >= '0' && g[0] <= '5') {
        switch (g[0]) {
            case '0':
            case '1': return Difficulty::Easy;
            case '2': return Difficulty::Medium;
            default: return Difficulty::Hard;
        }
    }
    throw Error(Errc::UnknownGrade, "'" + std::string(raw_grade) + "'");
}

LabelTrack apply_overrides(const LabelTrack& track, std::span<const LabelSegment> overrides) {
    std::vector<LabelSegment> current = track.segments();
    for (const auto& ov : overrides) {
        check_interval(ov.start_ms, ov.end_ms);
        std::vector<LabelSegment> next;
        next.reserve(current.size() + 2);
        bool placed = false;
        for (const auto& seg : current) {
            if (!placed && seg.start_ms >= ov.start_ms) {
                next.push_back(ov);
                placed = true;
            }
            if (seg.end_ms <= ov.start_ms || seg.start_ms >= ov.end_ms) {
                next.push_back(seg);
                continue;
            }
            if (seg.start_ms < ov.start_ms) next.push_back({seg.start_ms, ov.start_ms, seg.label});
            if (!placed) {
                next.push_back(ov);
                placed = true;
            }
            if (seg.end_ms > ov.end_ms) next.push_back({ov.end_ms, seg.end_ms, seg.label});
        }
        if (!placed) next.push_back(ov);
        current = std::move(next);
    }
    return LabelTrack(std::move(current));
}

std::optional<Difficulty> label_at(const LabelTrack& track, std::int64_t t_ms) {
    const auto& segs = track.segments();
    auto it = std::upper_bound(segs.begin(), segs.end(), t_ms,
                               [](std::int64_t t, const LabelSegment& s) { return t < s.start_ms; });
    if (it == segs.begin()) return std::nullopt;
    --it;
    if (t_ms < it->end_ms) return it->label;
    return std::nullopt;
}

std::vector<LabelSegment> parse_segments_csv(std::string_view text) {
    std::vector<LabelSegment> out;
    bool header_seen = false;
    std::size_t line_no = 0;
    for (auto line : detail::split_lines(text)) {
        ++line_no;
        line = detail::trim(line);
        if (line.empty()) continue;
        if (!header_seen) {
            if (line != kSegmentHeader) {
                throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": expected header '" +
                                                     std::string(kSegmentHeader) + "'");
            }
            header_seen = true;
            continue;
        }
        auto fields = detail::split(line, ',');
        LabelSegment seg;
        long long label = 0;
        if (fields.size() != 3 || !detail::parse_int(detail::trim(fields[0]), seg.start_ms) ||
            !detail::parse_int(detail::trim(fields[1]), seg.end_ms) ||
            !detail::parse_int(detail::trim(fields[2]), label)) {
            throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": cannot parse '" +
                                                 std::string(line) + "'");
        }
        seg.label = difficulty_from_index(label);
        check_interval(seg.start_ms, seg.end_ms);
        out.push_back(seg);
    }
    if (!header_seen) throw Error(Errc::MalformedLine, "line 1: missing header");
    return out;
}

std::string write_segments_csv(std::span<const LabelSegment> segments) {
    std::string out(kSegmentHeader);
    out += '\n';
    for (const auto& s : segments) {
        out += std::to_string(s.start_ms) + ',' + std::to_string(s.end_ms) + ',' +
               std::to_string(to_index(s.label)) + '\n';
    }
    return out;
}

}  // namespace trailgrade

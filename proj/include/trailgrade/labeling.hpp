#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trailgrade {

/// Three-class trail difficulty: blue (S0/S1), red (S2), black (S3 and above).
enum class Difficulty : std::uint8_t { Easy = 0, Medium = 1, Hard = 2 };

inline constexpr std::size_t kClassCount = 3;

constexpr std::size_t to_index(Difficulty d) noexcept { return static_cast<std::size_t>(d); }

// Throws LabelOutOfRange for values outside {0, 1, 2}.
Difficulty difficulty_from_index(long long value);

struct LabelSegment {
    std::int64_t start_ms = 0;  // inclusive
    std::int64_t end_ms = 0;    // exclusive
    Difficulty label = Difficulty::Easy;

    bool operator==(const LabelSegment&) const = default;
};

/// Sorted, non-overlapping labeled intervals. Gaps are unlabeled time.
class LabelTrack {
public:
    LabelTrack() = default;
    // Throws InvalidInterval if segments are empty-length, unsorted or overlapping.
    explicit LabelTrack(std::vector<LabelSegment> segments);

    const std::vector<LabelSegment>& segments() const noexcept { return segments_; }
    bool empty() const noexcept { return segments_.empty(); }
    bool operator==(const LabelTrack&) const = default;

private:
    std::vector<LabelSegment> segments_;
};

using OsmDifficultyMap = std::map<std::int64_t, std::string>;

OsmDifficultyMap parse_osm_difficulties(std::string_view xml);

Difficulty map_grade(std::string_view raw_grade);

// Later overrides win over earlier ones.
LabelTrack apply_overrides(const LabelTrack& track, std::span<const LabelSegment> overrides);

std::optional<Difficulty> label_at(const LabelTrack& track, std::int64_t t_ms);

// CSV with header `start_ms,end_ms,label`. Interval validity is checked;
// ordering and overlap are not (overrides may overlap).
std::vector<LabelSegment> parse_segments_csv(std::string_view text);
std::string write_segments_csv(std::span<const LabelSegment> segments);

inline LabelTrack parse_track_csv(std::string_view text) { return LabelTrack(parse_segments_csv(text)); }

}  // namespace trailgrade

#pragma once

// Windowing of synced sessions into stacked (n, 4, 3) samples, train/test
// splitting, class balancing by duplication and shuffling.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trailgrade/ingest.hpp"
#include "trailgrade/labeling.hpp"

namespace trailgrade {

struct WindowConfig {
    std::int64_t window_ms = 5000;
    double overlap_fraction = 0.75;
    double rate_hz = kSessionRateHz;

    // Throws InvalidArgument unless window_ms * rate_hz / 1000 is a positive integer
    // and 0 <= overlap_fraction < 1.
    std::size_t window_points() const;
    std::size_t stride_points() const;
};

struct SampleOrigin {
    std::string session;
    std::int64_t start_ms = 0;

    auto operator<=>(const SampleOrigin&) const = default;
};

/// One window: data[(t * 4 + row) * 3 + axis], row order as in SyncedSession.
struct WindowSample {
    std::size_t window_points = 0;
    std::vector<float> data;
    Difficulty label = Difficulty::Easy;
    SampleOrigin origin;

    float at(std::size_t t, std::size_t row, std::size_t axis) const noexcept {
        return data[(t * kChannelCount + row) * kAxisCount + axis];
    }
    bool operator==(const WindowSample&) const = default;
};

struct DatasetSplit {
    std::vector<WindowSample> train;
    std::vector<WindowSample> test;
    std::uint64_t seed = 0;
};

using ClassHistogram = std::array<std::size_t, kClassCount>;

// Upper bound on emitted windows: floor((L - w) / s) + 1.
std::size_t candidate_window_count(std::size_t length_points, std::size_t window_points, std::size_t stride);

std::vector<WindowSample> slice_windows(const SyncedSession& session, const LabelTrack& track,
                                        const WindowConfig& config);

WindowSample stack_sample(const SyncedSession& session, std::size_t start_index, std::size_t window_points,
                          Difficulty label);

DatasetSplit split_train_test(std::vector<WindowSample> samples, double train_fraction, std::uint64_t seed);

// Whole recordings go to one side; sessions are shuffled and assigned to train
// until it holds at least round(train_fraction * N) samples.
DatasetSplit split_by_recording(std::vector<WindowSample> samples, double train_fraction, std::uint64_t seed);

std::vector<WindowSample> oversample_balance(std::vector<WindowSample> train, std::uint64_t seed,
                                             bool allow_missing_classes = false);

std::vector<WindowSample> shuffle(std::vector<WindowSample> samples, std::uint64_t seed);

ClassHistogram class_histogram(std::span<const WindowSample> samples);

// Sample archive "TGDS": magic, version byte, window_points (u32), origin width
// (u16), record count (u64), then fixed-width records of
// label (u8) | origin name (NUL padded) | origin start_ms (i64) | n*4*3 float32.
inline constexpr std::size_t kOriginNameWidth = 64;

std::string encode_samples(std::span<const WindowSample> samples);
std::vector<WindowSample> decode_samples(std::string_view bytes);
void save_samples(std::span<const WindowSample> samples, const std::filesystem::path& path);
std::vector<WindowSample> load_samples(const std::filesystem::path& path);

}  // namespace trailgrade

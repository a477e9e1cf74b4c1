#pragma once

// The window-size x kernel-size grid, synthetic IMU sessions for desk-scale
// runs, and report rendering (table, CSV, SVG curves).

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trailgrade/dataset.hpp"
#include "trailgrade/ingest.hpp"
#include "trailgrade/labeling.hpp"
#include "trailgrade/training.hpp"

namespace trailgrade {

struct LabeledSession {
    SyncedSession session;
    LabelTrack track;
};

struct GridSpec {
    std::vector<std::int64_t> window_ms_list{1000, 2000, 5000, 10000, 20000};
    std::vector<std::size_t> kernel_len_list{5, 10, 20, 40, 60};
    TrainConfig train;
    nn::ModelConfig model;  // window_points and kernel_len are overwritten per cell
    double overlap_fraction = 0.75;
    double train_fraction = 0.8;
    std::uint64_t seed = 0;

    void validate() const;
};

enum class CellStatus { Completed, SkippedKernelTooLong };

struct ExperimentResult {
    std::int64_t window_ms = 0;
    std::size_t kernel_len = 0;
    std::size_t window_points = 0;
    CellStatus status = CellStatus::SkippedKernelTooLong;
    // Set only for completed cells.
    std::optional<double> best_test_sca;
    std::optional<std::size_t> best_epoch;
    std::optional<std::size_t> sample_count;
    std::optional<std::size_t> oversampled_train_count;
    std::vector<EpochRecord> history;
    ConfusionMatrix confusion;
};

inline bool kernel_too_long(std::size_t kernel_len, std::size_t window_points) noexcept {
    return kernel_len > window_points;
}

// Seeds for the data split (shared by every kernel in a window row) and for
// training a single cell.
std::uint64_t row_seed(std::uint64_t seed, std::int64_t window_ms) noexcept;
std::uint64_t cell_seed(std::uint64_t seed, std::int64_t window_ms, std::size_t kernel_len) noexcept;

using CellObserver = std::function<void(const ExperimentResult&)>;

// Runs every (window, kernel) cell in row-major order, at most `jobs` at a time.
std::vector<ExperimentResult> run_grid(std::span<const LabeledSession> sessions, const GridSpec& spec,
                                       std::size_t jobs = 1, const CellObserver& on_cell = {});

struct ClassSignature {
    double vibration_g = 0.0;     // accelerometer sinusoid amplitude
    double frequency_hz = 0.0;    // accelerometer sinusoid frequency; gyros run at half
    double gyro_swing_dps = 0.0;  // gyroscope sinusoid amplitude
    double impulse_rate_hz = 0.0; // Poisson rate of bumps, each 3x vibration
};

struct SyntheticSpec {
    std::size_t sessions_per_class = 20;
    std::size_t session_seconds = 20;
    std::array<ClassSignature, kClassCount> signatures{{
        {0.15, 1.5, 15.0, 0.2},
        {0.45, 3.5, 45.0, 0.6},
        {1.00, 6.0, 100.0, 1.2},
    }};
    double noise_std = 0.03;       // g, accelerometer axes
    double gyro_noise_std = 3.0;   // deg/s, gyroscope axes
    // Per-session amplitude scale drawn from [1 - jitter, 1 + jitter].
    double amplitude_jitter = 0.1;
    std::uint64_t seed = 42;

    void validate() const;
};

std::vector<LabeledSession> generate_synthetic(const SyntheticSpec& spec);

struct Report {
    std::string table;  // human-readable grid
    std::string csv;    // one row per cell
};

Report report_table(std::span<const ExperimentResult> results);

struct Curves {
    std::string csv;
    std::string svg;
};

Curves export_curves(std::span<const EpochRecord> history);

// Data directory layout: `<name>.tgss` session archives, each with a sibling
// `<name>.track.csv` label track.
void save_labeled_sessions(std::span<const LabeledSession> sessions, const std::filesystem::path& dir);
std::vector<LabeledSession> load_labeled_sessions(const std::filesystem::path& dir);

}  // namespace trailgrade

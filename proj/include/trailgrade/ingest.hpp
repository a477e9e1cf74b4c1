#pragma once

// Sensor log ingestion: CSV parsing, start-time synchronization and linear
// resampling onto the shared 25 Hz grid.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace trailgrade {

enum class SensorKind : std::uint8_t { Accelerometer, Gyroscope };
enum class Mount : std::uint8_t { Frame, Helmet };

inline constexpr double kSessionRateHz = 25.0;
inline constexpr std::int64_t kSessionStepMs = 40;
inline constexpr std::size_t kChannelCount = 4;
inline constexpr std::size_t kAxisCount = 3;

std::string_view to_string(SensorKind kind) noexcept;
std::string_view to_string(Mount mount) noexcept;

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double operator[](std::size_t axis) const noexcept { return axis == 0 ? x : (axis == 1 ? y : z); }
    bool operator==(const Vec3&) const = default;
};

struct TimedSample {
    std::int64_t timestamp_ms = 0;
    Vec3 value;

    bool operator==(const TimedSample&) const = default;
};

/// One sensor's raw recording, timestamps in milliseconds, strictly increasing.
struct RawSensorLog {
    SensorKind sensor_kind = SensorKind::Accelerometer;
    Mount mount = Mount::Frame;
    std::vector<TimedSample> samples;
    double nominal_rate_hz = 0.0;

    std::int64_t span_ms() const noexcept {
        return samples.empty() ? 0 : samples.back().timestamp_ms - samples.front().timestamp_ms;
    }
    bool operator==(const RawSensorLog&) const = default;
};

/// A log resampled to a constant rate; values[i] is at start_time_ms + i * 1000 / rate_hz.
struct SensorChannel {
    SensorKind sensor_kind = SensorKind::Accelerometer;
    Mount mount = Mount::Frame;
    std::int64_t start_time_ms = 0;
    double rate_hz = kSessionRateHz;
    std::vector<Vec3> values;
};

/// Channel order is fixed: Frame-Accel, Frame-Gyro, Helmet-Accel, Helmet-Gyro.
struct SyncedSession {
    std::string name;
    std::array<SensorChannel, kChannelCount> channels;
    std::size_t length_points = 0;
    std::int64_t start_time_ms = 0;

    std::int64_t time_of(std::size_t index) const noexcept {
        return start_time_ms + static_cast<std::int64_t>(index) * kSessionStepMs;
    }
};

// Row index of a (kind, mount) pair in SyncedSession::channels.
std::size_t channel_row(SensorKind kind, Mount mount) noexcept;

RawSensorLog parse_sensor_csv(std::string_view text, SensorKind kind, Mount mount);
std::string write_sensor_csv(const RawSensorLog& log);

std::array<RawSensorLog, kChannelCount> synchronize(const std::array<RawSensorLog, kChannelCount>& logs);

SensorChannel resample_linear(const RawSensorLog& log, double target_hz = kSessionRateHz);

SyncedSession build_session(std::array<SensorChannel, kChannelCount> channels, std::string name = {});

struct SessionManifest {
    std::string name;
    // Indexed by channel_row().
    std::array<std::filesystem::path, kChannelCount> files;
};

// key=value lines; '#' starts a comment; values may be double-quoted.
// Relative file paths are resolved against `base_dir`.
SessionManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir = {});

// Full ingest: read the four CSVs, synchronize, resample, trim leading points
// so all channels share one start, and build the session.
SyncedSession ingest_session(const SessionManifest& manifest);

// Session archive: magic "TGSS", version byte, name, start, rate, length, then
// 4 x length x 3 little-endian float64 values.
std::string encode_session(const SyncedSession& session);
SyncedSession decode_session(std::string_view bytes);
void save_session(const SyncedSession& session, const std::filesystem::path& path);
SyncedSession load_session(const std::filesystem::path& path);

}  // namespace trailgrade

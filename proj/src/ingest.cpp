#include "trailgrade/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>

#include "trailgrade/binary_io.hpp"
#include "trailgrade/error.hpp"
#include "text_util.hpp"

namespace trailgrade {

namespace {

constexpr std::string_view kCsvHeader = "timestamp_ms,x,y,z";
constexpr std::string_view kSessionMagic = "TGSS";
constexpr std::uint8_t kSessionVersion = 1;

double default_rate(SensorKind kind) {
    return kind == SensorKind::Accelerometer ? 12.5 : 25.0;
}

double estimate_rate(const std::vector<TimedSample>& samples, SensorKind kind) {
    if (samples.size() < 2) return default_rate(kind);
    std::vector<std::int64_t> deltas;
    deltas.reserve(samples.size() - 1);
    for (std::size_t i = 1; i < samples.size(); ++i) {
        deltas.push_back(samples[i].timestamp_ms - samples[i - 1].timestamp_ms);
    }
    auto mid = deltas.begin() + static_cast<std::ptrdiff_t>(deltas.size() / 2);
    std::nth_element(deltas.begin(), mid, deltas.end());
    return 1000.0 / static_cast<double>(*mid);
}

}  // namespace

std::string_view to_string(SensorKind kind) noexcept {
    return kind == SensorKind::Accelerometer ? "accelerometer" : "gyroscope";
}

std::string_view to_string(Mount mount) noexcept {
    return mount == Mount::Frame ? "frame" : "helmet";
}

std::size_t channel_row(SensorKind kind, Mount mount) noexcept {
    return (mount == Mount::Frame ? 0 : 2) + (kind == SensorKind::Accelerometer ? 0 : 1);
}

RawSensorLog parse_sensor_csv(std::string_view text, SensorKind kind, Mount mount) {
    if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

    RawSensorLog log{kind, mount, {}, 0.0};
    bool header_seen = false;
    std::size_t line_no = 0;
    for (auto line : detail::split_lines(text)) {
        ++line_no;
        line = detail::trim(line);
        if (line.empty()) continue;
        if (!header_seen) {
            if (line != kCsvHeader) {
                throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": expected header '" +
                                                     std::string(kCsvHeader) + "'");
            }
            header_seen = true;
            continue;
        }
        auto fields = detail::split(line, ',');
        if (fields.size() != 4) {
            throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": expected 4 fields");
        }
        TimedSample s;
        double xyz[3];
        bool ok = detail::parse_int(detail::trim(fields[0]), s.timestamp_ms);
        for (int a = 0; a < 3 && ok; ++a) ok = detail::parse_double(detail::trim(fields[a + 1]), xyz[a]);
        if (!ok || !std::isfinite(xyz[0]) || !std::isfinite(xyz[1]) || !std::isfinite(xyz[2])) {
            throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": cannot parse '" +
                                                 std::string(line) + "'");
        }
        s.value = {xyz[0], xyz[1], xyz[2]};
        if (!log.samples.empty() && s.timestamp_ms <= log.samples.back().timestamp_ms) {
            throw Error(Errc::NonMonotonicTimestamp, "line " + std::to_string(line_no) + ": timestamp " +
                                                         std::to_string(s.timestamp_ms) + " does not increase");
        }
        log.samples.push_back(s);
    }
    if (!header_seen) throw Error(Errc::EmptyLog, "empty file");
    if (log.samples.empty()) throw Error(Errc::EmptyLog, "no samples after header");
    log.nominal_rate_hz = estimate_rate(log.samples, kind);
    return log;
}

std::string write_sensor_csv(const RawSensorLog& log) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto& s : log.samples) {
        out += std::to_string(s.timestamp_ms);
        for (std::size_t a = 0; a < 3; ++a) {
            out += ',';
            out += detail::format_double(s.value[a]);
        }
        out += '\n';
    }
    return out;
}

std::array<RawSensorLog, kChannelCount> synchronize(const std::array<RawSensorLog, kChannelCount>& logs) {
    std::int64_t t0 = std::numeric_limits<std::int64_t>::min();
    for (const auto& log : logs) {
        if (log.samples.empty()) throw Error(Errc::EmptyLog, "cannot synchronize an empty log");
        t0 = std::max(t0, log.samples.front().timestamp_ms);
    }
    std::array<RawSensorLog, kChannelCount> out;
    for (std::size_t i = 0; i < kChannelCount; ++i) {
        const auto& src = logs[i];
        auto first = std::lower_bound(src.samples.begin(), src.samples.end(), t0,
                                      [](const TimedSample& s, std::int64_t t) { return s.timestamp_ms < t; });
        if (first == src.samples.end()) {
            throw Error(Errc::EmptyAfterSync, std::string(to_string(src.mount)) + " " +
                                                  std::string(to_string(src.sensor_kind)) +
                                                  " has no samples at or after t0=" + std::to_string(t0));
        }
        out[i] = RawSensorLog{src.sensor_kind, src.mount, {}, src.nominal_rate_hz};
        out[i].samples.reserve(static_cast<std::size_t>(src.samples.end() - first));
        for (auto it = first; it != src.samples.end(); ++it) {
            out[i].samples.push_back({it->timestamp_ms - t0, it->value});
        }
    }
    return out;
}

SensorChannel resample_linear(const RawSensorLog& log, double target_hz) {
    if (!(target_hz > 0.0) || !std::isfinite(target_hz)) {
        throw Error(Errc::InvalidArgument, "target rate must be positive");
    }
    if (log.samples.size() < 2) {
        throw Error(Errc::TooFewSamples, "resampling needs at least 2 samples, got " +
                                             std::to_string(log.samples.size()));
    }
    const double step = 1000.0 / target_hz;
    const auto& in = log.samples;
    const double first = static_cast<double>(in.front().timestamp_ms);
    const double last = static_cast<double>(in.back().timestamp_ms);

    // Grid points are integer multiples of the step, anchored at time 0.
    auto k = static_cast<std::int64_t>(std::ceil(first / step));
    if (static_cast<double>(k - 1) * step >= first) --k;

    SensorChannel ch{log.sensor_kind, log.mount, static_cast<std::int64_t>(std::llround(static_cast<double>(k) * step)),
                     target_hz, {}};
    std::size_t j = 0;
    for (;; ++k) {
        const double t = static_cast<double>(k) * step;
        if (t > last) break;
        while (j + 1 < in.size() && static_cast<double>(in[j + 1].timestamp_ms) <= t) ++j;
        const double tj = static_cast<double>(in[j].timestamp_ms);
        if (t == tj || j + 1 == in.size()) {
            ch.values.push_back(in[j].value);
            continue;
        }
        const double tn = static_cast<double>(in[j + 1].timestamp_ms);
        const double frac = (t - tj) / (tn - tj);
        const Vec3& a = in[j].value;
        const Vec3& b = in[j + 1].value;
        ch.values.push_back({a.x + (b.x - a.x) * frac, a.y + (b.y - a.y) * frac, a.z + (b.z - a.z) * frac});
    }
    if (ch.values.empty()) {
        throw Error(Errc::TooFewSamples, "no grid point falls inside the recording");
    }
    return ch;
}

SyncedSession build_session(std::array<SensorChannel, kChannelCount> channels, std::string name) {
    std::array<bool, kChannelCount> seen{};
    SyncedSession session;
    session.name = std::move(name);
    session.start_time_ms = channels[0].start_time_ms;
    std::size_t length = std::numeric_limits<std::size_t>::max();
    for (auto& ch : channels) {
        const auto row = channel_row(ch.sensor_kind, ch.mount);
        if (seen[row]) {
            throw Error(Errc::WrongChannelSet, "duplicate " + std::string(to_string(ch.mount)) + " " +
                                                   std::string(to_string(ch.sensor_kind)) + " channel");
        }
        seen[row] = true;
        if (ch.rate_hz != kSessionRateHz) {
            throw Error(Errc::InvalidArgument, "channel rate must be 25 Hz");
        }
        if (ch.values.empty()) throw Error(Errc::EmptyLog, "empty channel");
        if (ch.start_time_ms != session.start_time_ms) {
            throw Error(Errc::MismatchedStart, "channels start at " + std::to_string(session.start_time_ms) +
                                                   " and " + std::to_string(ch.start_time_ms));
        }
        length = std::min(length, ch.values.size());
        session.channels[row] = std::move(ch);
    }
    for (auto& ch : session.channels) ch.values.resize(length);
    session.length_points = length;
    return session;
}

SessionManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
    static const std::map<std::string, std::size_t, std::less<>> kKeys = {
        {"frame_accel", channel_row(SensorKind::Accelerometer, Mount::Frame)},
        {"frame_gyro", channel_row(SensorKind::Gyroscope, Mount::Frame)},
        {"helmet_accel", channel_row(SensorKind::Accelerometer, Mount::Helmet)},
        {"helmet_gyro", channel_row(SensorKind::Gyroscope, Mount::Helmet)},
    };
    SessionManifest manifest;
    std::array<bool, kChannelCount> seen{};
    bool named = false;
    std::size_t line_no = 0;
    for (auto line : detail::split_lines(text)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(Errc::MalformedManifest, "line " + std::to_string(line_no) + ": expected key=value");
        }
        auto key = detail::trim(line.substr(0, eq));
        auto value = detail::trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (key == "name") {
            manifest.name = std::string(value);
            named = true;
            continue;
        }
        auto it = kKeys.find(key);
        if (it == kKeys.end()) {
            throw Error(Errc::MalformedManifest, "line " + std::to_string(line_no) + ": unknown key '" +
                                                     std::string(key) + "'");
        }
        if (seen[it->second]) {
            throw Error(Errc::MalformedManifest, "duplicate key '" + std::string(key) + "'");
        }
        seen[it->second] = true;
        std::filesystem::path p{std::string(value)};
        manifest.files[it->second] = p.is_relative() ? base_dir / p : p;
    }
    for (const auto& [key, row] : kKeys) {
        if (!seen[row]) throw Error(Errc::MalformedManifest, "missing key '" + key + "'");
    }
    if (!named) throw Error(Errc::MalformedManifest, "missing key 'name'");
    return manifest;
}

SyncedSession ingest_session(const SessionManifest& manifest) {
    std::array<RawSensorLog, kChannelCount> logs;
    for (std::size_t row = 0; row < kChannelCount; ++row) {
        const auto kind = row % 2 == 0 ? SensorKind::Accelerometer : SensorKind::Gyroscope;
        const auto mount = row < 2 ? Mount::Frame : Mount::Helmet;
        logs[row] = parse_sensor_csv(io::read_file(manifest.files[row]), kind, mount);
    }
    const auto synced = synchronize(logs);
    std::array<SensorChannel, kChannelCount> channels;
    std::int64_t common_start = 0;
    for (std::size_t row = 0; row < kChannelCount; ++row) {
        channels[row] = resample_linear(synced[row]);
        common_start = std::max(common_start, channels[row].start_time_ms);
    }
    for (auto& ch : channels) {
        const auto drop = static_cast<std::size_t>((common_start - ch.start_time_ms) / kSessionStepMs);
        if (drop >= ch.values.size()) {
            throw Error(Errc::EmptyAfterSync, "channel ends before the common start");
        }
        ch.values.erase(ch.values.begin(), ch.values.begin() + static_cast<std::ptrdiff_t>(drop));
        ch.start_time_ms = common_start;
    }
    return build_session(std::move(channels), manifest.name);
}

std::string encode_session(const SyncedSession& session) {
    io::ByteWriter w;
    w.put_bytes(kSessionMagic);
    w.put(kSessionVersion);
    w.put_string(session.name);
    w.put(static_cast<std::int64_t>(session.start_time_ms));
    w.put(static_cast<std::uint64_t>(session.length_points));
    for (const auto& ch : session.channels) {
        for (std::size_t i = 0; i < session.length_points; ++i) {
            w.put(ch.values[i].x);
            w.put(ch.values[i].y);
            w.put(ch.values[i].z);
        }
    }
    return w.bytes();
}

SyncedSession decode_session(std::string_view bytes) {
    io::ByteReader r(bytes, Errc::CorruptArchive);
    if (r.get_bytes(4) != kSessionMagic) throw Error(Errc::VersionMismatch, "not a session archive");
    if (r.get<std::uint8_t>() != kSessionVersion) throw Error(Errc::VersionMismatch, "unsupported session version");
    SyncedSession s;
    s.name = r.get_string();
    s.start_time_ms = r.get<std::int64_t>();
    const auto length = r.get<std::uint64_t>();
    if (length == 0 || length * kChannelCount * kAxisCount * sizeof(double) != r.remaining()) {
        throw Error(Errc::CorruptArchive, "session payload size does not match header");
    }
    s.length_points = static_cast<std::size_t>(length);
    for (std::size_t row = 0; row < kChannelCount; ++row) {
        auto& ch = s.channels[row];
        ch.sensor_kind = row % 2 == 0 ? SensorKind::Accelerometer : SensorKind::Gyroscope;
        ch.mount = row < 2 ? Mount::Frame : Mount::Helmet;
        ch.start_time_ms = s.start_time_ms;
        ch.rate_hz = kSessionRateHz;
        ch.values.resize(s.length_points);
        for (auto& v : ch.values) {
            v.x = r.get<double>();
            v.y = r.get<double>();
            v.z = r.get<double>();
        }
    }
    return s;
}

void save_session(const SyncedSession& session, const std::filesystem::path& path) {
    io::write_file(path, encode_session(session));
}

SyncedSession load_session(const std::filesystem::path& path) {
    return decode_session(io::read_file(path));
}

}  // namespace trailgrade

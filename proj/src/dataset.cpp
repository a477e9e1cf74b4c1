#include "trailgrade/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>

#include "trailgrade/binary_io.hpp"
#include "trailgrade/error.hpp"

namespace trailgrade {

namespace {

constexpr std::string_view kSampleMagic = "TGDS";
constexpr std::uint8_t kSampleVersion = 1;

std::size_t train_count_for(std::size_t n, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw Error(Errc::InvalidArgument, "train fraction must lie in (0, 1)");
    }
    auto k = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    return std::clamp<std::size_t>(k, 1, n - 1);
}

}  // namespace

std::size_t WindowConfig::window_points() const {
    const double exact = static_cast<double>(window_ms) * rate_hz / 1000.0;
    const double rounded = std::round(exact);
    if (window_ms <= 0 || rounded < 1.0 || std::abs(exact - rounded) > 1e-9) {
        throw Error(Errc::InvalidArgument, "window of " + std::to_string(window_ms) +
                                               " ms is not a whole number of points");
    }
    if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
        throw Error(Errc::InvalidArgument, "overlap fraction must lie in [0, 1)");
    }
    return static_cast<std::size_t>(rounded);
}

std::size_t WindowConfig::stride_points() const {
    const double raw = static_cast<double>(window_points()) * (1.0 - overlap_fraction);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(raw + 1e-9)));
}

std::size_t candidate_window_count(std::size_t length_points, std::size_t window_points, std::size_t stride) {
    if (window_points == 0 || stride == 0 || length_points < window_points) return 0;
    return (length_points - window_points) / stride + 1;
}

WindowSample stack_sample(const SyncedSession& session, std::size_t start_index, std::size_t window_points,
                          Difficulty label) {
    if (window_points == 0 || start_index + window_points > session.length_points) {
        throw Error(Errc::OutOfRange, "window [" + std::to_string(start_index) + ", " +
                                          std::to_string(start_index + window_points) + ") exceeds session length " +
                                          std::to_string(session.length_points));
    }
    WindowSample s;
    s.window_points = window_points;
    s.label = label;
    s.origin = {session.name, session.time_of(start_index)};
    s.data.resize(window_points * kChannelCount * kAxisCount);
    auto out = s.data.begin();
    for (std::size_t t = 0; t < window_points; ++t) {
        for (const auto& ch : session.channels) {
            const Vec3& v = ch.values[start_index + t];
            *out++ = static_cast<float>(v.x);
            *out++ = static_cast<float>(v.y);
            *out++ = static_cast<float>(v.z);
        }
    }
    return s;
}

std::vector<WindowSample> slice_windows(const SyncedSession& session, const LabelTrack& track,
                                        const WindowConfig& config) {
    const auto w = config.window_points();
    const auto stride = config.stride_points();
    const auto length = session.length_points;
    if (length < w) {
        throw Error(Errc::SessionTooShort, "session '" + session.name + "' has " + std::to_string(length) +
                                               " points, window needs " + std::to_string(w));
    }

    // Per-point label via a merged walk over points and segments.
    std::vector<std::optional<Difficulty>> point_label(length);
    const auto& segs = track.segments();
    std::size_t seg = 0;
    for (std::size_t i = 0; i < length; ++i) {
        const auto t = session.time_of(i);
        while (seg < segs.size() && segs[seg].end_ms <= t) ++seg;
        if (seg < segs.size() && segs[seg].start_ms <= t) point_label[i] = segs[seg].label;
    }
    // run_end[i]: one past the last index of the constant-label run containing i.
    std::vector<std::size_t> run_end(length);
    run_end[length - 1] = length;
    for (std::size_t i = length - 1; i-- > 0;) {
        run_end[i] = point_label[i] == point_label[i + 1] ? run_end[i + 1] : i + 1;
    }

    std::vector<WindowSample> out;
    for (std::size_t start = 0; start + w <= length; start += stride) {
        if (point_label[start] && run_end[start] >= start + w) {
            out.push_back(stack_sample(session, start, w, *point_label[start]));
        }
    }
    return out;
}

DatasetSplit split_train_test(std::vector<WindowSample> samples, double train_fraction, std::uint64_t seed) {
    if (samples.size() < 2) throw Error(Errc::TooFewSamples, "splitting needs at least 2 samples");
    const auto n_train = train_count_for(samples.size(), train_fraction);
    samples = shuffle(std::move(samples), seed);
    DatasetSplit split;
    split.seed = seed;
    split.test.assign(std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(n_train)),
                      std::make_move_iterator(samples.end()));
    samples.resize(n_train);
    split.train = std::move(samples);
    return split;
}

DatasetSplit split_by_recording(std::vector<WindowSample> samples, double train_fraction, std::uint64_t seed) {
    if (samples.size() < 2) throw Error(Errc::TooFewSamples, "splitting needs at least 2 samples");
    const auto target = train_count_for(samples.size(), train_fraction);
    std::vector<std::string> sessions;
    for (const auto& s : samples) sessions.push_back(s.origin.session);
    std::sort(sessions.begin(), sessions.end());
    sessions.erase(std::unique(sessions.begin(), sessions.end()), sessions.end());
    if (sessions.size() < 2) throw Error(Errc::TooFewSamples, "per-recording split needs at least 2 recordings");
    std::mt19937_64 rng(seed);
    std::shuffle(sessions.begin(), sessions.end(), rng);

    std::vector<std::string> train_sessions;
    std::size_t in_train = 0;
    for (std::size_t i = 0; i + 1 < sessions.size() && in_train < target; ++i) {
        train_sessions.push_back(sessions[i]);
        in_train += static_cast<std::size_t>(std::count_if(
            samples.begin(), samples.end(), [&](const WindowSample& s) { return s.origin.session == sessions[i]; }));
    }
    std::sort(train_sessions.begin(), train_sessions.end());
    DatasetSplit split;
    split.seed = seed;
    for (auto& s : samples) {
        auto& side = std::binary_search(train_sessions.begin(), train_sessions.end(), s.origin.session) ? split.train
                                                                                                         : split.test;
        side.push_back(std::move(s));
    }
    return split;
}

std::vector<WindowSample> oversample_balance(std::vector<WindowSample> train, std::uint64_t seed,
                                             bool allow_missing_classes) {
    std::array<std::vector<std::size_t>, kClassCount> members;
    for (std::size_t i = 0; i < train.size(); ++i) members[to_index(train[i].label)].push_back(i);
    std::size_t target = 0;
    for (std::size_t c = 0; c < kClassCount; ++c) {
        if (members[c].empty() && !allow_missing_classes) {
            throw Error(Errc::EmptyClass, "class " + std::to_string(c) + " has no training samples");
        }
        target = std::max(target, members[c].size());
    }

    std::mt19937_64 rng(seed);
    for (std::size_t c = 0; c < kClassCount; ++c) {
        auto& idx = members[c];
        if (idx.empty() || idx.size() == target) continue;
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t a, std::size_t b) { return train[a].origin < train[b].origin; });
        const auto deficit = target - idx.size();
        for (std::size_t cycle = 0; cycle < deficit / idx.size(); ++cycle) {
            for (auto i : idx) train.push_back(train[i]);
        }
        std::vector<std::size_t> extra;
        std::sample(idx.begin(), idx.end(), std::back_inserter(extra), deficit % idx.size(), rng);
        for (auto i : extra) train.push_back(train[i]);
    }
    return train;
}

std::vector<WindowSample> shuffle(std::vector<WindowSample> samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::shuffle(samples.begin(), samples.end(), rng);
    return samples;
}

ClassHistogram class_histogram(std::span<const WindowSample> samples) {
    ClassHistogram h{};
    for (const auto& s : samples) ++h[to_index(s.label)];
    return h;
}

std::string encode_samples(std::span<const WindowSample> samples) {
    const std::size_t n = samples.empty() ? 0 : samples.front().window_points;
    io::ByteWriter w;
    w.put_bytes(kSampleMagic);
    w.put(kSampleVersion);
    w.put(static_cast<std::uint32_t>(n));
    w.put(static_cast<std::uint16_t>(kOriginNameWidth));
    w.put(static_cast<std::uint64_t>(samples.size()));
    for (const auto& s : samples) {
        if (s.window_points != n || s.data.size() != n * kChannelCount * kAxisCount) {
            throw Error(Errc::ShapeMismatch, "all samples in an archive must share one window length");
        }
        w.put(static_cast<std::uint8_t>(to_index(s.label)));
        w.put_fixed_string(s.origin.session, kOriginNameWidth);
        w.put(static_cast<std::int64_t>(s.origin.start_ms));
        for (float v : s.data) w.put(v);
    }
    return w.bytes();
}

std::vector<WindowSample> decode_samples(std::string_view bytes) {
    io::ByteReader r(bytes, Errc::CorruptArchive);
    if (r.get_bytes(4) != kSampleMagic) throw Error(Errc::VersionMismatch, "not a sample archive");
    if (r.get<std::uint8_t>() != kSampleVersion) throw Error(Errc::VersionMismatch, "unsupported archive version");
    const std::size_t n = r.get<std::uint32_t>();
    const std::size_t width = r.get<std::uint16_t>();
    const auto count = r.get<std::uint64_t>();
    const std::size_t values = n * kChannelCount * kAxisCount;
    const std::size_t record = 1 + width + 8 + values * sizeof(float);
    if (width == 0 || (count > 0 && n == 0) || r.remaining() / record < count || r.remaining() != count * record) {
        throw Error(Errc::CorruptArchive, "record count does not match payload size");
    }
    std::vector<WindowSample> out(static_cast<std::size_t>(count));
    for (auto& s : out) {
        const auto label = r.get<std::uint8_t>();
        if (label >= kClassCount) throw Error(Errc::CorruptArchive, "label byte out of range");
        s.label = static_cast<Difficulty>(label);
        s.origin.session = r.get_fixed_string(width);
        s.origin.start_ms = r.get<std::int64_t>();
        s.window_points = n;
        s.data.resize(values);
        for (auto& v : s.data) v = r.get<float>();
    }
    return out;
}

void save_samples(std::span<const WindowSample> samples, const std::filesystem::path& path) {
    io::write_file(path, encode_samples(samples));
}

std::vector<WindowSample> load_samples(const std::filesystem::path& path) {
    return decode_samples(io::read_file(path));
}

}  // namespace trailgrade

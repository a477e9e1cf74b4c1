#include <gtest/gtest.h>

#include <limits>
#include <random>
#include <string>

#include "support/oracles.hpp"
#include "trailgrade/binary_io.hpp"
#include "trailgrade/error.hpp"
#include "trailgrade/ingest.hpp"

using namespace trailgrade;

namespace {

RawSensorLog make_log(std::vector<std::int64_t> times, SensorKind kind = SensorKind::Accelerometer,
                      Mount mount = Mount::Frame) {
    RawSensorLog log;
    log.sensor_kind = kind;
    log.mount = mount;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double v = static_cast<double>(i);
        log.samples.push_back({times[i], {v, -v, 0.5 * v}});
    }
    log.nominal_rate_hz = 25.0;
    return log;
}

SensorChannel make_channel(SensorKind kind, Mount mount, std::size_t length, std::int64_t start = 0) {
    SensorChannel ch;
    ch.sensor_kind = kind;
    ch.mount = mount;
    ch.start_time_ms = start;
    ch.values.assign(length, Vec3{1.0, 2.0, 3.0});
    return ch;
}

std::array<SensorChannel, kChannelCount> four_channels(std::array<std::size_t, 4> lengths) {
    return {make_channel(SensorKind::Accelerometer, Mount::Frame, lengths[0]),
            make_channel(SensorKind::Gyroscope, Mount::Frame, lengths[1]),
            make_channel(SensorKind::Accelerometer, Mount::Helmet, lengths[2]),
            make_channel(SensorKind::Gyroscope, Mount::Helmet, lengths[3])};
}

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return Errc::Io;
}

}  // namespace

TEST(SensorCsv, ParsesTwoSamples) {
    const auto log = parse_sensor_csv("timestamp_ms,x,y,z\n0,0.0,1.0,-0.5\n80,0.2,1.0,-0.4", SensorKind::Accelerometer,
                                      Mount::Frame);
    ASSERT_EQ(log.samples.size(), 2u);
    EXPECT_EQ(log.span_ms(), 80);
    EXPECT_EQ(log.samples[1].value, (Vec3{0.2, 1.0, -0.4}));
}

TEST(SensorCsv, EqualTimestampsRejected) {
    EXPECT_EQ(code_of([] {
                  parse_sensor_csv("timestamp_ms,x,y,z\n0,0,0,0\n0,1,1,1", SensorKind::Gyroscope, Mount::Helmet);
              }),
              Errc::NonMonotonicTimestamp);
}

TEST(SensorCsv, TwelvePointFiveHzFile) {
    std::string text = "timestamp_ms,x,y,z\n";
    for (int i = 0; i <= 100; ++i) text += std::to_string(i * 80) + ",0.1,0.2,0.3\n";
    const auto log = parse_sensor_csv(text, SensorKind::Accelerometer, Mount::Frame);
    EXPECT_EQ(log.samples.size(), 101u);
    EXPECT_EQ(log.span_ms(), 8000);
    EXPECT_DOUBLE_EQ(log.nominal_rate_hz, 12.5);
}

TEST(SensorCsv, CrlfAccepted) {
    const auto log = parse_sensor_csv("timestamp_ms,x,y,z\r\n0,1,2,3\r\n40,4,5,6\r\n", SensorKind::Gyroscope,
                                      Mount::Frame);
    EXPECT_EQ(log.samples.size(), 2u);
    EXPECT_DOUBLE_EQ(log.nominal_rate_hz, 25.0);
}

TEST(SensorCsv, Errors) {
    auto parse = [](std::string text) {
        return [text] { parse_sensor_csv(text, SensorKind::Accelerometer, Mount::Frame); };
    };
    EXPECT_EQ(code_of(parse("timestamp_ms,x,y,z\n")), Errc::EmptyLog);
    EXPECT_EQ(code_of(parse("")), Errc::EmptyLog);
    EXPECT_EQ(code_of(parse("time,x,y,z\n0,1,2,3\n")), Errc::MalformedLine);
    EXPECT_EQ(code_of(parse("timestamp_ms,x,y,z\n0,1,2\n")), Errc::MalformedLine);
    EXPECT_EQ(code_of(parse("timestamp_ms,x,y,z\n0,1,2,abc\n")), Errc::MalformedLine);
    EXPECT_EQ(code_of(parse("timestamp_ms,x,y,z\n40,1,2,3\n0,1,2,3\n")), Errc::NonMonotonicTimestamp);
}

TEST(SensorCsv, MalformedLineNumberReported) {
    try {
        parse_sensor_csv("timestamp_ms,x,y,z\n0,1,2,3\n40,1,2,3\n80,x,2,3\n", SensorKind::Accelerometer, Mount::Frame);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
    }
}

TEST(SensorCsv, RoundTripIsExact) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> d(-20.0, 20.0);
    for (int trial = 0; trial < 20; ++trial) {
        RawSensorLog log;
        log.sensor_kind = trial % 2 ? SensorKind::Gyroscope : SensorKind::Accelerometer;
        log.mount = trial % 3 ? Mount::Helmet : Mount::Frame;
        std::int64_t t = static_cast<std::int64_t>(rng() % 1000);
        for (int i = 0; i < 200; ++i) {
            t += 1 + static_cast<std::int64_t>(rng() % 90);
            log.samples.push_back({t, {d(rng), d(rng) * 1e-7, d(rng) * 1e9}});
        }
        const auto text = write_sensor_csv(log);
        const auto back = parse_sensor_csv(text, log.sensor_kind, log.mount);
        ASSERT_EQ(back.samples, log.samples);
        EXPECT_EQ(write_sensor_csv(back), text);
    }
}

TEST(Synchronize, MaxStartWins) {
    std::array<RawSensorLog, 4> logs{make_log({0, 40, 80, 120}), make_log({0, 40, 80, 120}),
                                     make_log({40, 80, 120}), make_log({0, 40, 80, 120})};
    const auto out = synchronize(logs);
    for (const auto& l : out) {
        EXPECT_EQ(l.samples.front().timestamp_ms, 0);
        EXPECT_EQ(l.samples.size(), 3u);
    }
}

TEST(Synchronize, IdenticalLogsOnlyRebased) {
    const auto base = make_log({120, 160, 200});
    const auto out = synchronize({base, base, base, base});
    for (const auto& l : out) {
        ASSERT_EQ(l.samples.size(), 3u);
        for (std::size_t i = 0; i < 3; ++i) {
            EXPECT_EQ(l.samples[i].timestamp_ms, base.samples[i].timestamp_ms - 120);
            EXPECT_EQ(l.samples[i].value, base.samples[i].value);
        }
    }
}

TEST(Synchronize, HandEnumeratedSurvivors) {
    const auto a = make_log({0, 80, 160});
    const auto b = make_log({100, 140, 180});
    const auto out = synchronize({a, b, b, b});
    ASSERT_EQ(out[0].samples.size(), 1u);
    EXPECT_EQ(out[0].samples[0].timestamp_ms, 60);
    EXPECT_EQ(out[0].samples[0].value, a.samples[2].value);
    EXPECT_EQ(out[1].samples.size(), 3u);
    EXPECT_EQ(out[1].samples[0].timestamp_ms, 0);
}

TEST(Synchronize, Errors) {
    const auto a = make_log({0, 40});
    const auto late = make_log({100, 140});
    EXPECT_EQ(code_of([&] { synchronize({a, late, late, late}); }), Errc::EmptyAfterSync);
    EXPECT_EQ(code_of([&] { synchronize({a, RawSensorLog{}, a, a}); }), Errc::EmptyLog);
}

TEST(Synchronize, NeverGrowsAndRebasesToLatestStart) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::array<RawSensorLog, 4> logs;
        for (auto& l : logs) {
            std::int64_t t = static_cast<std::int64_t>(rng() % 200);
            std::vector<std::int64_t> ts;
            for (int i = 0; i < 30; ++i) ts.push_back(t += 1 + static_cast<std::int64_t>(rng() % 60));
            l = make_log(ts);
        }
        const auto out = synchronize(logs);
        std::int64_t earliest = std::numeric_limits<std::int64_t>::max();
        for (std::size_t i = 0; i < 4; ++i) {
            EXPECT_LE(out[i].samples.size(), logs[i].samples.size());
            EXPECT_GE(out[i].samples.front().timestamp_ms, 0);
            earliest = std::min(earliest, out[i].samples.front().timestamp_ms);
        }
        EXPECT_EQ(earliest, 0);
    }
}

TEST(Resample, MidpointFrom12_5Hz) {
    RawSensorLog log = make_log({0, 80});
    log.samples[0].value = {0, 0, 0};
    log.samples[1].value = {1, 0, 0};
    const auto ch = resample_linear(log);
    ASSERT_EQ(ch.values.size(), 3u);
    EXPECT_EQ(ch.values[0].x, 0.0);
    EXPECT_EQ(ch.values[1].x, 0.5);
    EXPECT_EQ(ch.values[2].x, 1.0);
    EXPECT_EQ(ch.rate_hz, 25.0);
}

TEST(Resample, NoExtrapolation) {
    RawSensorLog log = make_log({0, 100});
    log.samples[0].value = {0, 0, 0};
    log.samples[1].value = {1, 0, 0};
    const auto ch = resample_linear(log);
    ASSERT_EQ(ch.values.size(), 3u);
    EXPECT_NEAR(ch.values[1].x, 0.4, 1e-15);
    EXPECT_NEAR(ch.values[2].x, 0.8, 1e-15);
}

TEST(Resample, OnGridIsIdentityAndIdempotent) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(-2.0, 2.0);
    RawSensorLog log;
    for (int i = 0; i < 100; ++i) log.samples.push_back({i * 40, {d(rng), d(rng), d(rng)}});
    const auto once = resample_linear(log);
    ASSERT_EQ(once.values.size(), log.samples.size());
    for (std::size_t i = 0; i < once.values.size(); ++i) EXPECT_EQ(once.values[i], log.samples[i].value);

    RawSensorLog again;
    for (std::size_t i = 0; i < once.values.size(); ++i) {
        again.samples.push_back({once.start_time_ms + static_cast<std::int64_t>(i) * 40, once.values[i]});
    }
    const auto twice = resample_linear(again);
    ASSERT_EQ(twice.values.size(), once.values.size());
    for (std::size_t i = 0; i < once.values.size(); ++i) {
        for (std::size_t a = 0; a < 3; ++a) EXPECT_NEAR(twice.values[i][a], once.values[i][a], 1e-12);
    }
}

TEST(Resample, ValuesStayWithinBrackets) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> d(-5.0, 5.0);
    for (int trial = 0; trial < 30; ++trial) {
        RawSensorLog log;
        std::int64_t t = 0;
        for (int i = 0; i < 60; ++i) {
            log.samples.push_back({t, {d(rng), d(rng), d(rng)}});
            t += 1 + static_cast<std::int64_t>(rng() % 120);
        }
        const auto ch = resample_linear(log);
        for (std::size_t k = 0; k < ch.values.size(); ++k) {
            const std::int64_t tk = ch.start_time_ms + static_cast<std::int64_t>(k) * 40;
            ASSERT_LE(tk, log.samples.back().timestamp_ms);
            std::size_t hi = 0;
            while (log.samples[hi].timestamp_ms < tk) ++hi;
            const std::size_t lo = log.samples[hi].timestamp_ms == tk ? hi : hi - 1;
            for (std::size_t a = 0; a < 3; ++a) {
                const double lo_v = std::min(log.samples[lo].value[a], log.samples[hi].value[a]);
                const double hi_v = std::max(log.samples[lo].value[a], log.samples[hi].value[a]);
                EXPECT_GE(ch.values[k][a], lo_v - 1e-12);
                EXPECT_LE(ch.values[k][a], hi_v + 1e-12);
            }
        }
        EXPECT_GT(ch.start_time_ms + static_cast<std::int64_t>(ch.values.size()) * 40,
                  log.samples.back().timestamp_ms);
    }
}

TEST(Resample, Errors) {
    EXPECT_EQ(code_of([] { resample_linear(make_log({0})); }), Errc::TooFewSamples);
    EXPECT_EQ(code_of([] { resample_linear(make_log({0, 40}), 0.0); }), Errc::InvalidArgument);
}

TEST(BuildSession, MinLengthRule) {
    const auto s = build_session(four_channels({500, 500, 498, 500}), "trail");
    EXPECT_EQ(s.length_points, 498u);
    for (const auto& ch : s.channels) EXPECT_EQ(ch.values.size(), 498u);
}

TEST(BuildSession, CanonicalOrderRegardlessOfInputOrder) {
    auto ch = four_channels({10, 11, 12, 13});
    std::swap(ch[0], ch[3]);
    std::swap(ch[1], ch[2]);
    const auto s = build_session(ch);
    EXPECT_EQ(s.channels[0].sensor_kind, SensorKind::Accelerometer);
    EXPECT_EQ(s.channels[0].mount, Mount::Frame);
    EXPECT_EQ(s.channels[1].sensor_kind, SensorKind::Gyroscope);
    EXPECT_EQ(s.channels[1].mount, Mount::Frame);
    EXPECT_EQ(s.channels[2].sensor_kind, SensorKind::Accelerometer);
    EXPECT_EQ(s.channels[2].mount, Mount::Helmet);
    EXPECT_EQ(s.channels[3].sensor_kind, SensorKind::Gyroscope);
    EXPECT_EQ(s.channels[3].mount, Mount::Helmet);
    EXPECT_EQ(s.length_points, 10u);
}

TEST(BuildSession, Errors) {
    auto dup = four_channels({5, 5, 5, 5});
    dup[2].mount = Mount::Frame;
    EXPECT_EQ(code_of([&] { build_session(dup); }), Errc::WrongChannelSet);
    auto shifted = four_channels({5, 5, 5, 5});
    shifted[1].start_time_ms = 40;
    EXPECT_EQ(code_of([&] { build_session(shifted); }), Errc::MismatchedStart);
}

TEST(IngestSession, TwentySecondRecordingHas500Points) {
    oracle::TempDir dir("ingest");
    const char* names[] = {"fa.csv", "fg.csv", "ha.csv", "hg.csv"};
    for (int f = 0; f < 4; ++f) {
        const bool accel = f % 2 == 0;
        const int step = accel ? 80 : 40;
        std::string text = "timestamp_ms,x,y,z\n";
        for (int t = 0; t <= 19960; t += step) text += std::to_string(t) + ",0.5,0.25,-1\n";
        if (accel) text += "20000,0.5,0.25,-1\n";
        io::write_file(dir / names[f], text);
    }
    io::write_file(dir / "session.toml",
                   "# a ride\nname = \"run1\"\nframe_accel = fa.csv\nframe_gyro = fg.csv\n"
                   "helmet_accel = ha.csv\nhelmet_gyro = hg.csv\n");
    const auto manifest = parse_manifest(io::read_file(dir / "session.toml"), dir.path());
    const auto s = ingest_session(manifest);
    EXPECT_EQ(s.name, "run1");
    EXPECT_EQ(s.length_points, 500u);
    EXPECT_EQ(s.channels[2].values[137], (Vec3{0.5, 0.25, -1.0}));
}

TEST(IngestSession, StaggeredStartsAreAligned) {
    oracle::TempDir dir("ingest_stagger");
    const int starts[] = {0, 13, 40, 7};
    const char* names[] = {"a.csv", "b.csv", "c.csv", "d.csv"};
    for (int f = 0; f < 4; ++f) {
        std::string text = "timestamp_ms,x,y,z\n";
        for (int t = starts[f]; t <= 4000; t += 40) text += std::to_string(t) + "," + std::to_string(t) + ",0,0\n";
        io::write_file(dir / names[f], text);
    }
    SessionManifest m{"stagger", {dir / "a.csv", dir / "b.csv", dir / "c.csv", dir / "d.csv"}};
    const auto s = ingest_session(m);
    for (const auto& ch : s.channels) {
        EXPECT_EQ(ch.start_time_ms, s.start_time_ms);
        EXPECT_GE(ch.values.size(), s.length_points);
    }
    EXPECT_GT(s.length_points, 90u);
}

TEST(Manifest, Errors) {
    EXPECT_EQ(code_of([] { parse_manifest("name=x\nframe_accel=a\n"); }), Errc::MalformedManifest);
    EXPECT_EQ(code_of([] {
                  parse_manifest("name=x\nframe_accel=a\nframe_gyro=b\nhelmet_accel=c\nhelmet_gyro=d\nspeed=3\n");
              }),
              Errc::MalformedManifest);
    EXPECT_EQ(code_of([] {
                  parse_manifest("name=x\nframe_accel=a\nframe_accel=a\nframe_gyro=b\nhelmet_accel=c\nhelmet_gyro=d\n");
              }),
              Errc::MalformedManifest);
    EXPECT_EQ(code_of([] { parse_manifest("just text\n"); }), Errc::MalformedManifest);
}

TEST(SessionArchive, RoundTrip) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> d(-3.0, 3.0);
    auto s = build_session(four_channels({50, 50, 50, 50}), "archived");
    for (auto& ch : s.channels) {
        for (auto& v : ch.values) v = {d(rng), d(rng), d(rng)};
    }
    const auto bytes = encode_session(s);
    const auto back = decode_session(bytes);
    EXPECT_EQ(back.name, s.name);
    EXPECT_EQ(back.length_points, s.length_points);
    for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ(back.channels[r].values, s.channels[r].values);
    EXPECT_EQ(encode_session(back), bytes);

    EXPECT_EQ(code_of([&] { decode_session(bytes.substr(0, bytes.size() - 3)); }), Errc::CorruptArchive);
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_EQ(code_of([&] { decode_session(bad); }), Errc::VersionMismatch);
}

#include "trailgrade/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numbers>
#include <random>
#include <thread>

#include "trailgrade/binary_io.hpp"
#include "trailgrade/error.hpp"
#include "trailgrade/seeding.hpp"

namespace trailgrade {

namespace {

std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string cell_text(const ExperimentResult& r) {
    if (r.status != CellStatus::Completed) return "-";
    return format_fixed(*r.best_test_sca, 4) + " (" + std::to_string(*r.best_epoch) + ")";
}

std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.insert(0, width - s.size(), ' ');
    return s;
}

}  // namespace

void GridSpec::validate() const {
    if (window_ms_list.empty() || kernel_len_list.empty()) {
        throw Error(Errc::InvalidSpec, "grid needs at least one window size and one kernel length");
    }
    for (auto w : window_ms_list) {
        if (w <= 0) throw Error(Errc::InvalidSpec, "window sizes must be positive");
    }
    for (auto k : kernel_len_list) {
        if (k == 0) throw Error(Errc::InvalidSpec, "kernel lengths must be positive");
    }
    train.validate();
}

std::uint64_t row_seed(std::uint64_t seed, std::int64_t window_ms) noexcept {
    return seed ^ splitmix64(static_cast<std::uint64_t>(window_ms) << 32);
}

std::uint64_t cell_seed(std::uint64_t seed, std::int64_t window_ms, std::size_t kernel_len) noexcept {
    return seed ^ splitmix64((static_cast<std::uint64_t>(window_ms) << 32) | kernel_len);
}

std::vector<ExperimentResult> run_grid(std::span<const LabeledSession> sessions, const GridSpec& spec,
                                       std::size_t jobs, const CellObserver& on_cell) {
    spec.validate();
    std::size_t longest = 0;
    for (const auto& s : sessions) longest = std::max(longest, s.session.length_points);

    struct Row {
        std::size_t window_points = 0;
        std::vector<WindowSample> train;
        std::vector<WindowSample> test;
        std::size_t sample_count = 0;
    };
    std::vector<Row> rows(spec.window_ms_list.size());
    std::size_t max_points = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const WindowConfig wc{spec.window_ms_list[r], spec.overlap_fraction, kSessionRateHz};
        rows[r].window_points = wc.window_points();
        max_points = std::max(max_points, rows[r].window_points);
    }
    if (sessions.empty() || longest < max_points) {
        throw Error(Errc::NoUsableSessions, "no session covers the largest window (" + std::to_string(max_points) +
                                                " points)");
    }

    std::vector<ExperimentResult> results;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (auto k : spec.kernel_len_list) {
            ExperimentResult res;
            res.window_ms = spec.window_ms_list[r];
            res.kernel_len = k;
            res.window_points = rows[r].window_points;
            res.status = kernel_too_long(k, rows[r].window_points) ? CellStatus::SkippedKernelTooLong
                                                                   : CellStatus::Completed;
            results.push_back(std::move(res));
        }
    }

    // Windowing, split and balancing depend only on the window size.
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto first = results.begin() + static_cast<std::ptrdiff_t>(r * spec.kernel_len_list.size());
        const auto last = first + static_cast<std::ptrdiff_t>(spec.kernel_len_list.size());
        if (std::none_of(first, last, [](const auto& c) { return c.status == CellStatus::Completed; })) continue;
        const WindowConfig wc{spec.window_ms_list[r], spec.overlap_fraction, kSessionRateHz};
        std::vector<WindowSample> samples;
        for (const auto& s : sessions) {
            if (s.session.length_points < rows[r].window_points) continue;
            auto w = slice_windows(s.session, s.track, wc);
            samples.insert(samples.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
        }
        rows[r].sample_count = samples.size();
        if (samples.size() < 2) {
            throw Error(Errc::NoUsableSessions, "window " + std::to_string(wc.window_ms) + " ms yields " +
                                                    std::to_string(samples.size()) + " labeled samples");
        }
        const auto seed = row_seed(spec.seed, wc.window_ms);
        auto split = split_train_test(std::move(samples), spec.train_fraction, derive_seed(seed, 1));
        rows[r].train = shuffle(oversample_balance(std::move(split.train), derive_seed(seed, 2), true),
                                derive_seed(seed, 3));
        rows[r].test = std::move(split.test);
    }

    std::atomic<std::size_t> next{0};
    std::mutex report_mutex;
    std::vector<std::exception_ptr> errors(results.size());
    auto worker = [&] {
        for (std::size_t i = next++; i < results.size(); i = next++) {
            auto& res = results[i];
            if (res.status != CellStatus::Completed) {
                std::lock_guard lock(report_mutex);
                if (on_cell) on_cell(res);
                continue;
            }
            try {
                const auto& row = rows[i / spec.kernel_len_list.size()];
                nn::ModelConfig mc = spec.model;
                mc.window_points = row.window_points;
                mc.kernel_len = res.kernel_len;
                TrainConfig tc = spec.train;
                tc.seed = cell_seed(spec.seed, res.window_ms, res.kernel_len);
                auto out = train(row.train, row.test, mc, tc);
                res.best_test_sca = out.best_test_sca;
                res.best_epoch = out.best_epoch;
                res.sample_count = row.sample_count;
                res.oversampled_train_count = row.train.size();
                res.history = std::move(out.history);
                res.confusion = out.confusion;
                std::lock_guard lock(report_mutex);
                if (on_cell) on_cell(res);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, results.size()));
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    pool.clear();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

void SyntheticSpec::validate() const {
    if (sessions_per_class == 0 || session_seconds == 0) {
        throw Error(Errc::InvalidSpec, "need at least one session of at least one second per class");
    }
    if (!(noise_std >= 0.0) || !(gyro_noise_std >= 0.0) || !(amplitude_jitter >= 0.0 && amplitude_jitter < 1.0)) {
        throw Error(Errc::InvalidSpec, "noise and jitter must be non-negative (jitter < 1)");
    }
    const double nyquist = kSessionRateHz / 2.0;
    for (std::size_t c = 0; c < kClassCount; ++c) {
        const auto& s = signatures[c];
        if (!(s.vibration_g > 0.0) || !(s.frequency_hz > 0.0) || !(s.gyro_swing_dps > 0.0) ||
            !(s.impulse_rate_hz >= 0.0)) {
            throw Error(Errc::InvalidSpec, "class " + std::to_string(c) + " signature magnitudes must be positive");
        }
        if (s.frequency_hz >= nyquist) {
            throw Error(Errc::InvalidSpec, "class " + std::to_string(c) + " frequency at or above Nyquist");
        }
        for (std::size_t o = 0; o < c; ++o) {
            const auto& t = signatures[o];
            if (s.vibration_g == t.vibration_g && s.frequency_hz == t.frequency_hz &&
                s.gyro_swing_dps == t.gyro_swing_dps && s.impulse_rate_hz == t.impulse_rate_hz) {
                throw Error(Errc::InvalidSpec, "classes " + std::to_string(o) + " and " + std::to_string(c) +
                                                   " share a signature");
            }
        }
    }
}

std::vector<LabeledSession> generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const std::size_t length = spec.session_seconds * static_cast<std::size_t>(kSessionRateHz);
    const double dt = 1.0 / kSessionRateHz;
    const double two_pi = 2.0 * std::numbers::pi;
    // Gravity as seen by each accelerometer (frame mounted upright, helmet tilted).
    const std::array<Vec3, 2> gravity{Vec3{0.0, 0.0, 1.0}, Vec3{0.0, 0.8, 0.6}};

    std::vector<LabeledSession> out;
    for (std::size_t c = 0; c < kClassCount; ++c) {
        const auto& sig = spec.signatures[c];
        for (std::size_t i = 0; i < spec.sessions_per_class; ++i) {
            std::mt19937_64 rng(derive_seed(spec.seed, c * 1'000'003ULL + i));
            std::uniform_real_distribution<double> phase_dist(0.0, two_pi);
            std::uniform_real_distribution<double> jitter_dist(1.0 - spec.amplitude_jitter, 1.0 + spec.amplitude_jitter);
            std::normal_distribution<double> accel_noise(0.0, spec.noise_std);
            std::normal_distribution<double> gyro_noise(0.0, spec.gyro_noise_std);
            const double scale = spec.amplitude_jitter > 0.0 ? jitter_dist(rng) : 1.0;

            // Bumps hit both mounts at the same instants, with a random sign per axis.
            std::vector<std::array<double, kAxisCount>> bumps(length, {0.0, 0.0, 0.0});
            if (sig.impulse_rate_hz > 0.0) {
                std::exponential_distribution<double> gap(sig.impulse_rate_hz);
                std::bernoulli_distribution sign;
                for (double t = gap(rng); t < static_cast<double>(spec.session_seconds); t += gap(rng)) {
                    const auto k = std::min(length - 1, static_cast<std::size_t>(std::llround(t / dt)));
                    for (auto& b : bumps[k]) b += (sign(rng) ? 3.0 : -3.0) * sig.vibration_g * scale;
                }
            }

            SyncedSession s;
            char name[32];
            std::snprintf(name, sizeof name, "synth_c%zu_s%02zu", c, i);
            s.name = name;
            s.length_points = length;
            s.start_time_ms = 0;
            for (std::size_t row = 0; row < kChannelCount; ++row) {
                auto& ch = s.channels[row];
                const bool accel = row % 2 == 0;
                ch.sensor_kind = accel ? SensorKind::Accelerometer : SensorKind::Gyroscope;
                ch.mount = row < 2 ? Mount::Frame : Mount::Helmet;
                ch.start_time_ms = 0;
                ch.rate_hz = kSessionRateHz;
                ch.values.resize(length);
                std::array<double, kAxisCount> phase{};
                for (auto& p : phase) p = phase_dist(rng);
                const double amp = (accel ? sig.vibration_g : sig.gyro_swing_dps) * scale;
                const double freq = accel ? sig.frequency_hz : sig.frequency_hz / 2.0;
                const Vec3 offset = accel ? gravity[row / 2] : Vec3{};
                for (std::size_t k = 0; k < length; ++k) {
                    const double t = static_cast<double>(k) * dt;
                    std::array<double, kAxisCount> v{};
                    for (std::size_t a = 0; a < kAxisCount; ++a) {
                        v[a] = offset[a] + amp * std::sin(two_pi * freq * t + phase[a]);
                        if (accel) {
                            v[a] += bumps[k][a];
                            if (spec.noise_std > 0.0) v[a] += accel_noise(rng);
                        } else if (spec.gyro_noise_std > 0.0) {
                            v[a] += gyro_noise(rng);
                        }
                    }
                    ch.values[k] = {v[0], v[1], v[2]};
                }
            }
            const auto span_ms = static_cast<std::int64_t>(spec.session_seconds) * 1000;
            out.push_back({std::move(s), LabelTrack({{0, span_ms, static_cast<Difficulty>(c)}})});
        }
    }
    return out;
}

Report report_table(std::span<const ExperimentResult> results) {
    std::vector<std::int64_t> windows;
    std::vector<std::size_t> kernels;
    for (const auto& r : results) {
        if (std::find(windows.begin(), windows.end(), r.window_ms) == windows.end()) windows.push_back(r.window_ms);
        if (std::find(kernels.begin(), kernels.end(), r.kernel_len) == kernels.end()) kernels.push_back(r.kernel_len);
    }
    auto find = [&](std::int64_t w, std::size_t k) -> const ExperimentResult* {
        for (const auto& r : results) {
            if (r.window_ms == w && r.kernel_len == k) return &r;
        }
        return nullptr;
    };

    constexpr std::size_t kCol = 14;
    Report rep;
    std::string& t = rep.table;
    t += pad("window \\ kernel", 16);
    for (auto k : kernels) t += " |" + pad("(" + std::to_string(k) + ",2)", kCol);
    t += " |" + pad("Samples", 9) + " |" + pad("Oversampled", 12) + "\n";
    for (auto w : windows) {
        t += pad(std::to_string(w) + "ms", 16);
        std::string samples = "-", oversampled = "-";
        for (auto k : kernels) {
            const auto* r = find(w, k);
            t += " |" + pad(r ? cell_text(*r) : "-", kCol);
            if (r && r->status == CellStatus::Completed && samples == "-") {
                samples = std::to_string(*r->sample_count);
                oversampled = std::to_string(*r->oversampled_train_count);
            }
        }
        t += " |" + pad(samples, 9) + " |" + pad(oversampled, 12) + "\n";
    }

    rep.csv = "window_ms,kernel_len,status,best_test_sca,best_epoch,sample_count,oversampled_train_count\n";
    for (const auto& r : results) {
        rep.csv += std::to_string(r.window_ms) + ',' + std::to_string(r.kernel_len) + ',';
        if (r.status == CellStatus::Completed) {
            rep.csv += "completed," + format_fixed(*r.best_test_sca, 4) + ',' + std::to_string(*r.best_epoch) + ',' +
                       std::to_string(*r.sample_count) + ',' + std::to_string(*r.oversampled_train_count) + '\n';
        } else {
            rep.csv += "skipped_kernel_too_long,,,,\n";
        }
    }
    return rep;
}

Curves export_curves(std::span<const EpochRecord> history) {
    if (history.empty()) throw Error(Errc::EmptyHistory, "no epochs to plot");
    Curves c;
    c.csv = history_csv(history);

    constexpr double kWidth = 640.0, kHeight = 400.0, kMargin = 40.0;
    std::size_t max_epoch = 1;
    for (const auto& r : history) max_epoch = std::max(max_epoch, r.epoch);
    auto x_of = [&](std::size_t epoch) {
        if (max_epoch == 1) return kMargin;
        return kMargin + static_cast<double>(epoch - 1) / static_cast<double>(max_epoch - 1) * (kWidth - 2 * kMargin);
    };
    auto y_of = [&](double v) { return kHeight - kMargin - std::clamp(v, 0.0, 1.0) * (kHeight - 2 * kMargin); };
    auto polyline = [&](auto metric, const char* colour, const char* id) {
        std::string s = "  <polyline id=\"" + std::string(id) + "\" fill=\"none\" stroke=\"" + colour +
                        "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < history.size(); ++i) {
            if (i) s += ' ';
            s += format_fixed(x_of(history[i].epoch), 2) + ',' + format_fixed(y_of(metric(history[i])), 2);
        }
        return s + "\"/>\n";
    };

    std::string& svg = c.svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
    svg += "  <rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    svg += "  <line x1=\"40\" y1=\"360\" x2=\"600\" y2=\"360\" stroke=\"black\"/>\n";
    svg += "  <line x1=\"40\" y1=\"40\" x2=\"40\" y2=\"360\" stroke=\"black\"/>\n";
    svg += "  <text x=\"320\" y=\"390\" text-anchor=\"middle\" font-size=\"12\">epoch (1.." +
           std::to_string(max_epoch) + ")</text>\n";
    svg += "  <text x=\"12\" y=\"200\" font-size=\"12\" transform=\"rotate(-90 12 200)\" "
           "text-anchor=\"middle\">sparse categorical accuracy</text>\n";
    svg += "  <text x=\"34\" y=\"364\" text-anchor=\"end\" font-size=\"10\">0</text>\n";
    svg += "  <text x=\"34\" y=\"44\" text-anchor=\"end\" font-size=\"10\">1</text>\n";
    svg += polyline([](const EpochRecord& r) { return r.train_sca; }, "#1f77b4", "train_sca");
    svg += polyline([](const EpochRecord& r) { return r.test_sca; }, "#ff7f0e", "test_sca");
    svg += "</svg>\n";
    return c;
}

void save_labeled_sessions(std::span<const LabeledSession> sessions, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& s : sessions) {
        save_session(s.session, dir / (s.session.name + ".tgss"));
        io::write_file(dir / (s.session.name + ".track.csv"), write_segments_csv(s.track.segments()));
    }
}

std::vector<LabeledSession> load_labeled_sessions(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error(Errc::Io, dir.string() + " is not a directory");
    std::vector<std::filesystem::path> archives;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".tgss") archives.push_back(entry.path());
    }
    std::sort(archives.begin(), archives.end());
    std::vector<LabeledSession> out;
    for (const auto& path : archives) {
        auto track_path = path;
        track_path.replace_extension(".track.csv");
        if (!std::filesystem::exists(track_path)) {
            throw Error(Errc::Io, "missing label track " + track_path.string());
        }
        out.push_back({load_session(path), parse_track_csv(io::read_file(track_path))});
    }
    return out;
}

}  // namespace trailgrade

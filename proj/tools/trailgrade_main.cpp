// trailgrade command-line front end.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trailgrade/binary_io.hpp"
#include "trailgrade/dataset.hpp"
#include "trailgrade/error.hpp"
#include "trailgrade/experiments.hpp"
#include "trailgrade/ingest.hpp"
#include "trailgrade/labeling.hpp"
#include "trailgrade/nn/checkpoint.hpp"
#include "trailgrade/nn/kernels.hpp"
#include "trailgrade/seeding.hpp"
#include "trailgrade/training.hpp"

namespace fs = std::filesystem;
using namespace trailgrade;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::string sca_text(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

int cmd_ingest(const fs::path& manifest_path, const fs::path& out) {
    const auto manifest = parse_manifest(io::read_file(manifest_path), manifest_path.parent_path());
    const auto session = ingest_session(manifest);
    save_session(session, out);
    std::cout << session.name << ": " << session.length_points << " points from t=" << session.start_time_ms
              << " ms\n";
    return kExitOk;
}

int cmd_label_osm(const fs::path& osm, std::int64_t way) {
    const auto ways = parse_osm_difficulties(io::read_file(osm));
    const auto it = ways.find(way);
    if (it == ways.end()) throw Error(Errc::UnknownGrade, "way " + std::to_string(way) + " has no mtb:scale tag");
    std::cout << to_index(map_grade(it->second)) << '\n';
    return kExitOk;
}

int cmd_label_track(const fs::path& track_path, const fs::path& overrides_path, const fs::path& out) {
    const auto track = parse_track_csv(io::read_file(track_path));
    const auto overrides = parse_segments_csv(io::read_file(overrides_path));
    const auto merged = apply_overrides(track, overrides);
    io::write_file(out, write_segments_csv(merged.segments()));
    return kExitOk;
}

int cmd_window(const std::vector<fs::path>& sessions, const std::vector<fs::path>& tracks, std::int64_t window_ms,
               double overlap, const fs::path& out) {
    if (sessions.size() != tracks.size()) {
        throw Error(Errc::InvalidArgument, "each --session needs a matching --track");
    }
    const WindowConfig cfg{window_ms, overlap, kSessionRateHz};
    std::vector<WindowSample> all;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        const auto session = load_session(sessions[i]);
        const auto track = parse_track_csv(io::read_file(tracks[i]));
        auto w = slice_windows(session, track, cfg);
        all.insert(all.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
    }
    save_samples(all, out);
    const auto hist = class_histogram(all);
    std::cout << all.size() << " samples (" << hist[0] << '/' << hist[1] << '/' << hist[2] << ")\n";
    return kExitOk;
}

struct TrainArgs {
    fs::path samples, out_model, out_history;
    std::size_t kernel_len = 20;
    std::uint64_t seed = 0;
    double l2 = nn::ModelConfig{}.l2_coeff;
    TrainConfig train;
    bool by_recording = false;
};

int cmd_train(TrainArgs a) {
    auto samples = load_samples(a.samples);
    if (samples.empty()) throw Error(Errc::EmptyDataset, a.samples.string() + " holds no samples");
    auto split = a.by_recording ? split_by_recording(std::move(samples), 0.8, derive_seed(a.seed, 1))
                                : split_train_test(std::move(samples), 0.8, derive_seed(a.seed, 1));
    const auto train_set = shuffle(oversample_balance(std::move(split.train), derive_seed(a.seed, 2), true),
                                   derive_seed(a.seed, 3));

    nn::ModelConfig mc;
    mc.window_points = train_set.front().window_points;
    mc.kernel_len = a.kernel_len;
    mc.l2_coeff = a.l2;
    a.train.seed = a.seed;
    std::cerr << "kernels: " << nn::active_kernels().name << ", train " << train_set.size() << ", test "
              << split.test.size() << '\n';
    const auto result = train(train_set, split.test, mc, a.train, [](const EpochRecord& r) {
        if (r.epoch % 25 == 0) {
            std::cerr << "epoch " << r.epoch << " loss " << r.train_loss << " train " << sca_text(r.train_sca)
                      << " test " << sca_text(r.test_sca) << '\n';
        }
    });
    nn::save_checkpoint(result.best_params, a.out_model);
    io::write_file(a.out_history, history_csv(result.history));
    std::cout << "best test sca " << sca_text(result.best_test_sca) << " at epoch " << result.best_epoch << " of "
              << result.history.size() << (result.stopped_early ? " (stopped early)" : "") << '\n';
    return kExitOk;
}

int cmd_eval(const fs::path& model, const fs::path& samples_path, const fs::path& out) {
    const auto params = nn::load_checkpoint(model);
    const auto samples = load_samples(samples_path);
    const auto ev = evaluate(params, samples);
    io::write_file(out, confusion_csv(ev.confusion));
    std::cout << "sca " << sca_text(ev.accuracy) << " over " << ev.confusion.total() << " samples\n";
    return kExitOk;
}

int cmd_grid(const fs::path& data, GridSpec spec, std::size_t jobs, const fs::path& out) {
    const auto sessions = load_labeled_sessions(data);
    const auto results = run_grid(sessions, spec, jobs, [](const ExperimentResult& r) {
        std::cerr << r.window_ms << " ms / (" << r.kernel_len << ",2): ";
        if (r.status == CellStatus::Completed) {
            std::cerr << sca_text(*r.best_test_sca) << " (" << *r.best_epoch << ")\n";
        } else {
            std::cerr << "skipped\n";
        }
    });
    fs::create_directories(out);
    const auto report = report_table(results);
    io::write_file(out / "report.txt", report.table);
    io::write_file(out / "results.csv", report.csv);
    for (const auto& r : results) {
        if (r.status != CellStatus::Completed) continue;
        const auto stem = "cell_" + std::to_string(r.window_ms) + "_" + std::to_string(r.kernel_len);
        const auto curves = export_curves(r.history);
        io::write_file(out / (stem + "_history.csv"), curves.csv);
        io::write_file(out / (stem + "_curves.svg"), curves.svg);
        io::write_file(out / (stem + "_confusion.csv"), confusion_csv(r.confusion));
    }
    std::cout << report.table;
    return kExitOk;
}

int cmd_synth(const fs::path& out, const SyntheticSpec& spec) {
    const auto sessions = generate_synthetic(spec);
    save_labeled_sessions(sessions, out);
    std::cout << sessions.size() << " sessions written to " << out.string() << '\n';
    return kExitOk;
}

int exit_code_for(Errc code) {
    switch (code) {
        case Errc::NonFiniteLoss: return kExitNumeric;
        case Errc::InvalidArgument:
        case Errc::InvalidSpec: return kExitUsage;
        default: return kExitData;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trailgrade: trail difficulty classification from bike IMU data"};
    app.require_subcommand(1);

    fs::path manifest, archive;
    auto* ingest = app.add_subcommand("ingest", "Parse, synchronize and resample one recording");
    ingest->add_option("--session", manifest, "Session manifest")->required();
    ingest->add_option("--out", archive, "Session archive to write")->required();

    fs::path osm, track, overrides, label_out;
    std::int64_t way = 0;
    auto* label = app.add_subcommand("label", "Map an OSM way grade, or apply label overrides to a track");
    auto* osm_opt = label->add_option("--osm", osm, "OSM XML file");
    auto* way_opt = label->add_option("--way", way, "Way id");
    auto* track_opt = label->add_option("--track", track, "Label track CSV");
    auto* ovr_opt = label->add_option("--overrides", overrides, "Override segments CSV");
    auto* lout_opt = label->add_option("--out", label_out, "Merged track CSV");
    osm_opt->needs(way_opt);
    way_opt->needs(osm_opt);
    track_opt->needs(ovr_opt, lout_opt);
    osm_opt->excludes(track_opt);

    std::vector<fs::path> win_sessions, win_tracks;
    std::int64_t window_ms = 5000;
    double overlap = 0.75;
    fs::path win_out;
    auto* window = app.add_subcommand("window", "Slice labeled sessions into samples");
    window->add_option("--session", win_sessions, "Session archive (repeatable)")->required();
    window->add_option("--track", win_tracks, "Label track CSV, one per --session")->required();
    window->add_option("--window-ms", window_ms, "Window length in ms")->required();
    window->add_option("--overlap", overlap, "Overlap fraction")->capture_default_str();
    window->add_option("--out", win_out, "Sample archive to write")->required();

    TrainArgs ta;
    auto* trn = app.add_subcommand("train", "Train one model on a sample archive");
    trn->add_option("--samples", ta.samples)->required();
    trn->add_option("--kernel-len", ta.kernel_len)->required();
    trn->add_option("--seed", ta.seed)->required();
    trn->add_option("--l2", ta.l2)->capture_default_str();
    trn->add_option("--batch", ta.train.batch_size)->capture_default_str();
    trn->add_option("--max-epochs", ta.train.max_epochs)->capture_default_str();
    auto* trn_patience = trn->add_option("--patience", ta.train.patience)->capture_default_str();
    trn->add_option("--lr", ta.train.learning_rate)->capture_default_str();
    trn->add_flag("--split-by-recording", ta.by_recording, "Keep each recording on one side of the split");
    trn->add_option("--out-model", ta.out_model)->required();
    trn->add_option("--out-history", ta.out_history)->required();

    fs::path model, eval_samples, confusion_out;
    auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint");
    evl->add_option("--model", model)->required();
    evl->add_option("--samples", eval_samples)->required();
    evl->add_option("--out-confusion", confusion_out)->required();

    GridSpec gs;
    fs::path grid_data, grid_out;
    std::size_t jobs = 1;
    auto* grid = app.add_subcommand("grid", "Run the window x kernel grid over a data directory");
    grid->add_option("--data", grid_data)->required()->check(CLI::ExistingDirectory);
    grid->add_option("--seed", gs.seed)->required();
    grid->add_option("--jobs", jobs)->required()->check(CLI::PositiveNumber);
    grid->add_option("--out", grid_out)->required();
    grid->add_option("--max-epochs", gs.train.max_epochs)->capture_default_str();
    auto* grid_patience = grid->add_option("--patience", gs.train.patience)->capture_default_str();

    SyntheticSpec ss;
    fs::path synth_out;
    auto* synth = app.add_subcommand("synth", "Write synthetic labeled sessions");
    synth->add_option("--out", synth_out)->required();
    synth->add_option("--sessions-per-class", ss.sessions_per_class)->required();
    synth->add_option("--seconds", ss.session_seconds)->required();
    synth->add_option("--seed", ss.seed)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    // A shortened run keeps the default patience only as far as it fits.
    if (!*trn_patience) ta.train.patience = std::min(ta.train.patience, ta.train.max_epochs);
    if (!*grid_patience) gs.train.patience = std::min(gs.train.patience, gs.train.max_epochs);

    try {
        if (*ingest) return cmd_ingest(manifest, archive);
        if (*label) {
            if (*osm_opt) return cmd_label_osm(osm, way);
            if (*track_opt) return cmd_label_track(track, overrides, label_out);
            std::cerr << "label: give either --osm/--way or --track/--overrides/--out\n";
            return kExitUsage;
        }
        if (*window) return cmd_window(win_sessions, win_tracks, window_ms, overlap, win_out);
        if (*trn) return cmd_train(ta);
        if (*evl) return cmd_eval(model, eval_samples, confusion_out);
        if (*grid) return cmd_grid(grid_data, gs, jobs, grid_out);
        if (*synth) return cmd_synth(synth_out, ss);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

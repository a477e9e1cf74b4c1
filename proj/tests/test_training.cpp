#include <gtest/gtest.h>

#include <random>

#include "support/oracles.hpp"
#include "trailgrade/dataset.hpp"
#include "trailgrade/error.hpp"
#include "trailgrade/experiments.hpp"
#include "trailgrade/nn/checkpoint.hpp"
#include "trailgrade/training.hpp"

using namespace trailgrade;
using nn::Tensor;

namespace {

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return Errc::Io;
}

Tensor random_probs(std::size_t rows, std::mt19937_64& rng) {
    Tensor p({rows, 3});
    std::uniform_int_distribution<int> coarse(0, 4);
    for (std::size_t r = 0; r < rows; ++r) {
        // Coarse values make ties common, exercising the lowest-index rule.
        double s = 0.0;
        for (std::size_t j = 0; j < 3; ++j) s += p[r * 3 + j] = 1.0 + coarse(rng);
        for (std::size_t j = 0; j < 3; ++j) p[r * 3 + j] /= s;
    }
    return p;
}

struct SmallData {
    std::vector<WindowSample> train;
    std::vector<WindowSample> test;
};

// Short synthetic rides cut into 1 s windows.
SmallData small_data(std::uint64_t seed, std::size_t sessions_per_class = 4) {
    SyntheticSpec spec;
    spec.sessions_per_class = sessions_per_class;
    spec.session_seconds = 4;
    spec.seed = seed;
    std::vector<WindowSample> all;
    for (const auto& s : generate_synthetic(spec)) {
        auto w = slice_windows(s.session, s.track, WindowConfig{1000});
        all.insert(all.end(), w.begin(), w.end());
    }
    auto split = split_train_test(std::move(all), 0.8, seed);
    return {shuffle(oversample_balance(std::move(split.train), seed, true), seed), std::move(split.test)};
}

nn::ModelConfig small_model() {
    nn::ModelConfig c;
    c.window_points = 25;
    c.kernel_len = 5;
    c.dense_units = 16;
    return c;
}

TrainConfig short_run(std::size_t epochs, std::uint64_t seed) {
    TrainConfig c;
    c.max_epochs = epochs;
    c.patience = epochs;
    c.seed = seed;
    return c;
}

}  // namespace

TEST(Accuracy, Examples) {
    const Tensor p({4, 3}, std::vector<double>{0.8, 0.1, 0.1, 0.1, 0.8, 0.1, 0.1, 0.1, 0.8, 0.8, 0.1, 0.1});
    const std::vector<std::size_t> perfect{0, 1, 2, 0};
    const std::vector<std::size_t> three{0, 1, 2, 1};
    EXPECT_EQ(sparse_categorical_accuracy(p, perfect), 1.0);
    EXPECT_EQ(sparse_categorical_accuracy(p, three), 0.75);
    EXPECT_EQ(code_of([] { sparse_categorical_accuracy(Tensor({0, 3}), {}); }), Errc::EmptyBatch);
}

TEST(Accuracy, TiesGoToLowestIndex) {
    const Tensor p({2, 3}, std::vector<double>{0.4, 0.4, 0.2, 0.2, 0.4, 0.4});
    EXPECT_EQ(predicted_class(p, 0), 0u);
    EXPECT_EQ(predicted_class(p, 1), 1u);
}

TEST(Accuracy, MatchesRowLoop) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t rows = 1 + rng() % 64;
        const auto p = random_probs(rows, rng);
        std::vector<std::size_t> labels(rows);
        std::size_t correct = 0;
        for (std::size_t r = 0; r < rows; ++r) {
            labels[r] = rng() % 3;
            correct += oracle::argmax_row(p, r) == labels[r];
        }
        ASSERT_EQ(sparse_categorical_accuracy(p, labels), static_cast<double>(correct) / static_cast<double>(rows));
    }
}

TEST(Confusion, Examples) {
    const Tensor p({3, 3}, std::vector<double>{0.9, 0.05, 0.05, 0.05, 0.9, 0.05, 0.05, 0.05, 0.9});
    const std::vector<std::size_t> labels{0, 1, 2};
    const auto m = confusion_matrix(p, labels);
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t q = 0; q < 3; ++q) EXPECT_EQ(m.counts[t][q], t == q ? 1u : 0u);

    const std::vector<std::size_t> two{2};
    const auto single = confusion_matrix(Tensor({1, 3}, std::vector<double>{0.7, 0.2, 0.1}), two);
    EXPECT_EQ(single.counts[2][0], 1u);
    EXPECT_EQ(single.total(), 1u);
    EXPECT_EQ(confusion_csv(single), ",0,1,2\n0,0,0,0\n1,0,0,0\n2,1,0,0\n");
}

TEST(Confusion, TraceOverTotalIsAccuracy) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t rows = 1 + rng() % 100;
        const auto p = random_probs(rows, rng);
        std::vector<std::size_t> labels(rows);
        for (auto& l : labels) l = rng() % 3;
        const auto m = confusion_matrix(p, labels);
        ASSERT_EQ(m.total(), rows);
        ASSERT_EQ(static_cast<double>(m.trace()) / static_cast<double>(m.total()),
                  sparse_categorical_accuracy(p, labels));
    }
}

TEST(EarlyStoppingTest, StopsAfterPatienceWithoutImprovement) {
    EarlyStopping s(1);
    EXPECT_TRUE(s.observe(1, 0.5));
    EXPECT_FALSE(s.should_stop(1));
    EXPECT_FALSE(s.observe(2, 0.4));
    EXPECT_TRUE(s.should_stop(2));
    EXPECT_EQ(s.best_epoch(), 1u);
}

TEST(EarlyStoppingTest, EqualIsNotImprovement) {
    EarlyStopping s(3);
    s.observe(1, 0.0);
    EXPECT_FALSE(s.observe(2, 0.0));
    EXPECT_TRUE(s.observe(3, 0.1));
    EXPECT_FALSE(s.observe(4, 0.1));
    EXPECT_FALSE(s.should_stop(5));
    EXPECT_TRUE(s.should_stop(6));
    EXPECT_EQ(s.best_epoch(), 3u);
    EXPECT_EQ(s.best_metric(), 0.1);
}

TEST(EarlyStoppingTest, LawOnRandomSequences) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t patience = 1 + rng() % 10, max_epochs = patience + rng() % 40;
        EarlyStopping s(patience);
        std::size_t last = 0;
        double best = -1.0;
        std::size_t best_epoch = 0;
        for (std::size_t e = 1; e <= max_epochs; ++e) {
            const double m = static_cast<double>(rng() % 8) / 8.0;
            if (m > best) {
                best = m;
                best_epoch = e;
            }
            s.observe(e, m);
            last = e;
            if (s.should_stop(e)) break;
        }
        ASSERT_EQ(s.best_epoch(), best_epoch);
        ASSERT_TRUE(last - s.best_epoch() >= patience || last == max_epochs);
        ASSERT_EQ(last - s.best_epoch() >= patience, last - best_epoch >= patience);
    }
}

TEST(TrainConfigTest, Validation) {
    TrainConfig c;
    EXPECT_NO_THROW(c.validate());
    c.patience = 2000;
    EXPECT_EQ(code_of([&] { c.validate(); }), Errc::InvalidArgument);
    c = TrainConfig{};
    c.batch_size = 0;
    EXPECT_EQ(code_of([&] { c.validate(); }), Errc::InvalidArgument);
}

TEST(Train, Errors) {
    const auto d = small_data(1, 1);
    EXPECT_EQ(code_of([&] { train({}, d.test, small_model(), short_run(2, 1)); }), Errc::EmptyDataset);
    EXPECT_EQ(code_of([&] { train(d.train, {}, small_model(), short_run(2, 1)); }), Errc::EmptyDataset);
    auto wrong = small_model();
    wrong.window_points = 50;
    EXPECT_EQ(code_of([&] { train(d.train, d.test, wrong, short_run(2, 1)); }), Errc::ShapeMismatch);
}

TEST(Train, LossDescendsAndSnapshotIsExact) {
    const auto d = small_data(5);
    std::vector<EpochRecord> seen;
    const auto r = train(d.train, d.test, small_model(), short_run(50, 5),
                         [&](const EpochRecord& e) { seen.push_back(e); });
    ASSERT_EQ(r.history.size(), 50u);
    EXPECT_EQ(seen, r.history);
    EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
    for (std::size_t i = 0; i < r.history.size(); ++i) {
        EXPECT_EQ(r.history[i].epoch, i + 1);
        EXPECT_GE(r.history[i].train_sca, 0.0);
        EXPECT_LE(r.history[i].train_sca, 1.0);
        EXPECT_GE(r.history[i].test_sca, 0.0);
        EXPECT_LE(r.history[i].test_sca, 1.0);
        EXPECT_GE(r.history[i].train_loss, 0.0);
    }
    double best = -1.0;
    std::size_t best_epoch = 0;
    for (const auto& e : r.history) {
        if (e.test_sca > best) {
            best = e.test_sca;
            best_epoch = e.epoch;
        }
    }
    EXPECT_EQ(r.best_test_sca, best);
    EXPECT_EQ(r.best_epoch, best_epoch);
    const auto again = evaluate(r.best_params, d.test);
    EXPECT_EQ(again.accuracy, r.best_test_sca);
    EXPECT_EQ(again.confusion, r.confusion);
    EXPECT_FALSE(r.stopped_early);
}

TEST(Train, BitIdenticalAcrossRuns) {
    const auto d = small_data(6, 2);
    const auto a = train(d.train, d.test, small_model(), short_run(8, 11));
    const auto b = train(d.train, d.test, small_model(), short_run(8, 11));
    EXPECT_EQ(a.history, b.history);
    EXPECT_EQ(a.best_epoch, b.best_epoch);
    EXPECT_EQ(nn::encode_checkpoint(a.best_params), nn::encode_checkpoint(b.best_params));
    const auto c = train(d.train, d.test, small_model(), short_run(8, 12));
    EXPECT_NE(a.history, c.history);
}

TEST(Train, EarlyStopLawOnRealRun) {
    // A one-sample test set saturates quickly, so patience ends the run.
    const auto d = small_data(7, 2);
    const std::vector<WindowSample> one_test{d.test.front()};
    TrainConfig cfg = short_run(60, 7);
    cfg.patience = 3;
    const auto r = train(d.train, one_test, small_model(), cfg);
    const std::size_t last = r.history.back().epoch;
    EXPECT_TRUE(last - r.best_epoch >= cfg.patience || last == cfg.max_epochs);
    EXPECT_LE(r.history.size(), cfg.max_epochs);
    EXPECT_TRUE(r.best_test_sca == 0.0 || r.best_test_sca == 1.0);
    if (last < cfg.max_epochs) {
        EXPECT_TRUE(r.stopped_early);
        EXPECT_EQ(last - r.best_epoch, cfg.patience);
    }
}

TEST(Train, ShortFinalBatch) {
    const auto d = small_data(8, 1);
    TrainConfig cfg = short_run(2, 8);
    cfg.batch_size = static_cast<std::size_t>(d.train.size()) - 1;  // leaves a batch of one
    EXPECT_NO_THROW(train(d.train, d.test, small_model(), cfg));
}

TEST(Evaluate, UntrainedModelNearChance) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<WindowSample> samples;
    for (std::size_t i = 0; i < 900; ++i) {
        WindowSample w;
        w.window_points = 25;
        w.data.resize(25 * 12);
        for (auto& v : w.data) v = static_cast<float>(g(rng));
        w.label = static_cast<Difficulty>(i % 3);
        w.origin = {"noise", static_cast<std::int64_t>(i)};
        samples.push_back(std::move(w));
    }
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        nn::Rng init(seed);
        const auto p = nn::build_model(small_model(), init);
        const auto e = evaluate(p, samples);
        EXPECT_NEAR(e.accuracy, 1.0 / 3.0, 0.1);
        EXPECT_EQ(evaluate(p, samples).confusion, e.confusion);
        const auto one = evaluate(p, std::span(samples).first(1));
        EXPECT_TRUE(one.accuracy == 0.0 || one.accuracy == 1.0);
        EXPECT_EQ(static_cast<double>(e.confusion.trace()) / 900.0, e.accuracy);
    }
    nn::Rng init(0);
    const auto p = nn::build_model(small_model(), init);
    EXPECT_EQ(code_of([&] { evaluate(p, {}); }), Errc::EmptyDataset);
}

TEST(HistoryCsv, RoundTripExact) {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    std::vector<EpochRecord> h;
    for (std::size_t e = 1; e <= 100; ++e) h.push_back({e, d(rng), d(rng), d(rng) * 3.0});
    h.push_back({101, 1.0 / 3.0, 0.0, 1e-300});
    const auto text = history_csv(h);
    EXPECT_EQ(text.substr(0, 36), "epoch,train_sca,test_sca,train_loss\n");
    EXPECT_EQ(parse_history_csv(text), h);
    EXPECT_EQ(code_of([] { parse_history_csv("epoch,a,b,c\n"); }), Errc::MalformedLine);
}

#pragma once

// Mini-batch Adam training with early stopping on test-set sparse categorical
// accuracy, plus the evaluation metrics.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trailgrade/dataset.hpp"
#include "trailgrade/nn/model.hpp"

namespace trailgrade {

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t max_epochs = 1500;
    std::size_t patience = 250;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_sca = 0.0;
    double test_sca = 0.0;
    double train_loss = 0.0;

    bool operator==(const EpochRecord&) const = default;
};

/// counts[true][predicted]
struct ConfusionMatrix {
    std::array<std::array<std::size_t, kClassCount>, kClassCount> counts{};

    std::size_t total() const noexcept;
    std::size_t trace() const noexcept;
    bool operator==(const ConfusionMatrix&) const = default;
};

struct TrainResult {
    nn::ModelParams best_params;
    std::size_t best_epoch = 0;
    double best_test_sca = 0.0;
    std::vector<EpochRecord> history;
    ConfusionMatrix confusion;
    bool stopped_early = false;
};

struct Evaluation {
    double accuracy = 0.0;
    ConfusionMatrix confusion;
};

// Row argmax; the lowest index wins ties.
std::size_t predicted_class(const nn::Tensor& probabilities, std::size_t row);

double sparse_categorical_accuracy(const nn::Tensor& probabilities, std::span<const std::size_t> labels);
ConfusionMatrix confusion_matrix(const nn::Tensor& probabilities, std::span<const std::size_t> labels);

/// Tracks the best metric; improvement means strictly greater.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

    // Returns true when the metric improved at this epoch.
    bool observe(std::size_t epoch, double metric);
    bool should_stop(std::size_t epoch) const noexcept { return best_epoch_ > 0 && epoch - best_epoch_ >= patience_; }

    std::size_t best_epoch() const noexcept { return best_epoch_; }
    double best_metric() const noexcept { return best_; }

private:
    std::size_t patience_;
    std::size_t best_epoch_ = 0;
    double best_ = 0.0;
};

// (B, n, 4, 3) batch of the given samples, converted to double.
nn::Tensor make_batch(std::span<const WindowSample> samples, std::span<const std::size_t> indices);
std::vector<std::size_t> labels_of(std::span<const WindowSample> samples, std::span<const std::size_t> indices);

Evaluation evaluate(const nn::ModelParams& params, std::span<const WindowSample> samples,
                    std::size_t batch_size = 128);

using EpochObserver = std::function<void(const EpochRecord&)>;

TrainResult train(std::span<const WindowSample> train_samples, std::span<const WindowSample> test_samples,
                  const nn::ModelConfig& model_config, const TrainConfig& train_config,
                  const EpochObserver& on_epoch = {});

// CSV `epoch,train_sca,test_sca,train_loss`; values written so they parse back exactly.
std::string history_csv(std::span<const EpochRecord> history);
std::vector<EpochRecord> parse_history_csv(std::string_view text);

// 3x3 CSV with header row/column labels 0,1,2.
std::string confusion_csv(const ConfusionMatrix& matrix);

}  // namespace trailgrade

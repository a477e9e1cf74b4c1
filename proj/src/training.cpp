#include "trailgrade/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "trailgrade/error.hpp"
#include "trailgrade/nn/adam.hpp"
#include "trailgrade/seeding.hpp"
#include "text_util.hpp"

namespace trailgrade {

namespace {

void check_probabilities(const nn::Tensor& p, std::span<const std::size_t> labels) {
    if (p.rank() != 2 || p.dim(0) != labels.size()) {
        throw Error(Errc::ShapeMismatch, "probabilities " + nn::shape_string(p.shape()) + " vs " +
                                             std::to_string(labels.size()) + " labels");
    }
    if (labels.empty()) throw Error(Errc::EmptyBatch, "metric of an empty batch");
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size == 0 || max_epochs == 0 || patience == 0 || !(learning_rate > 0.0)) {
        throw Error(Errc::InvalidArgument, "batch size, epochs, patience and learning rate must be positive");
    }
    if (patience > max_epochs) throw Error(Errc::InvalidArgument, "patience exceeds max_epochs");
}

std::size_t ConfusionMatrix::total() const noexcept {
    std::size_t t = 0;
    for (const auto& row : counts) t = std::accumulate(row.begin(), row.end(), t);
    return t;
}

std::size_t ConfusionMatrix::trace() const noexcept {
    std::size_t t = 0;
    for (std::size_t i = 0; i < kClassCount; ++i) t += counts[i][i];
    return t;
}

std::size_t predicted_class(const nn::Tensor& probabilities, std::size_t row) {
    const std::size_t k = probabilities.dim(1);
    const double* p = probabilities.data() + row * k;
    return static_cast<std::size_t>(std::max_element(p, p + k) - p);
}

double sparse_categorical_accuracy(const nn::Tensor& probabilities, std::span<const std::size_t> labels) {
    check_probabilities(probabilities, labels);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) correct += predicted_class(probabilities, i) == labels[i];
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

ConfusionMatrix confusion_matrix(const nn::Tensor& probabilities, std::span<const std::size_t> labels) {
    check_probabilities(probabilities, labels);
    if (probabilities.dim(1) != kClassCount) throw Error(Errc::ShapeMismatch, "confusion matrix expects 3 classes");
    ConfusionMatrix m;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= kClassCount) throw Error(Errc::LabelOutOfRange, "label " + std::to_string(labels[i]));
        ++m.counts[labels[i]][predicted_class(probabilities, i)];
    }
    return m;
}

bool EarlyStopping::observe(std::size_t epoch, double metric) {
    if (best_epoch_ == 0 || metric > best_) {
        best_ = metric;
        best_epoch_ = epoch;
        return true;
    }
    return false;
}

nn::Tensor make_batch(std::span<const WindowSample> samples, std::span<const std::size_t> indices) {
    if (indices.empty()) throw Error(Errc::EmptyBatch, "empty batch");
    const std::size_t n = samples[indices[0]].window_points;
    const std::size_t per = n * kChannelCount * kAxisCount;
    nn::Tensor batch({indices.size(), n, kChannelCount, kAxisCount});
    double* out = batch.data();
    for (auto i : indices) {
        const auto& s = samples[i];
        if (s.window_points != n || s.data.size() != per) {
            throw Error(Errc::ShapeMismatch, "samples in one batch differ in window length");
        }
        out = std::copy(s.data.begin(), s.data.end(), out);
    }
    return batch;
}

std::vector<std::size_t> labels_of(std::span<const WindowSample> samples, std::span<const std::size_t> indices) {
    std::vector<std::size_t> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(to_index(samples[i].label));
    return out;
}

Evaluation evaluate(const nn::ModelParams& params, std::span<const WindowSample> samples, std::size_t batch_size) {
    if (samples.empty()) throw Error(Errc::EmptyDataset, "nothing to evaluate");
    Evaluation e;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < samples.size(); start += batch_size) {
        idx.resize(std::min(batch_size, samples.size() - start));
        std::iota(idx.begin(), idx.end(), start);
        const auto probs = nn::predict(params, make_batch(samples, idx));
        const auto labels = labels_of(samples, idx);
        const auto part = confusion_matrix(probs, labels);
        for (std::size_t t = 0; t < kClassCount; ++t) {
            for (std::size_t p = 0; p < kClassCount; ++p) e.confusion.counts[t][p] += part.counts[t][p];
        }
    }
    e.accuracy = static_cast<double>(e.confusion.trace()) / static_cast<double>(e.confusion.total());
    return e;
}

TrainResult train(std::span<const WindowSample> train_samples, std::span<const WindowSample> test_samples,
                  const nn::ModelConfig& model_config, const TrainConfig& cfg, const EpochObserver& on_epoch) {
    cfg.validate();
    model_config.validate();
    if (train_samples.empty() || test_samples.empty()) {
        throw Error(Errc::EmptyDataset, "training needs non-empty train and test sets");
    }
    for (auto set : {train_samples, test_samples}) {
        for (const auto& s : set) {
            if (s.window_points != model_config.window_points) {
                throw Error(Errc::ShapeMismatch, "sample has " + std::to_string(s.window_points) +
                                                     " points, model expects " +
                                                     std::to_string(model_config.window_points));
            }
        }
    }

    nn::Rng init_rng(derive_seed(cfg.seed, 0));
    nn::Rng order_rng(derive_seed(cfg.seed, 1));
    nn::Rng dropout_rng(derive_seed(cfg.seed, 2));

    nn::ModelParams params = nn::build_model(model_config, init_rng);
    nn::AdamState adam = nn::AdamState::for_model(params);
    const nn::AdamOptions adam_opts{cfg.learning_rate};
    EarlyStopping stopper(cfg.patience);

    TrainResult result;
    std::vector<std::size_t> order(train_samples.size());
    std::iota(order.begin(), order.end(), 0);
    nn::ForwardCache cache;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng);
        double loss_sum = 0.0;
        // Every batch has at least n*4 >= 4 values per channel, so batch
        // normalization never sees a degenerate final batch.
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::span<const std::size_t> idx(order.data() + start,
                                                   std::min(cfg.batch_size, order.size() - start));
            const auto batch = make_batch(train_samples, idx);
            const auto labels = labels_of(train_samples, idx);
            const auto probs = nn::forward(params, batch, nn::Mode::Train, dropout_rng, &cache);
            const double loss = nn::total_loss(params, probs, labels);
            if (!std::isfinite(loss)) {
                throw Error(Errc::NonFiniteLoss, "loss became " + std::to_string(loss) + " at epoch " +
                                                     std::to_string(epoch));
            }
            loss_sum += loss * static_cast<double>(idx.size());
            const auto grads = nn::backward(params, cache, labels);
            nn::adam_step(params, grads, adam, adam_opts);
        }

        const auto train_eval = evaluate(params, train_samples);
        const auto test_eval = evaluate(params, test_samples);
        EpochRecord rec{epoch, train_eval.accuracy, test_eval.accuracy,
                        loss_sum / static_cast<double>(train_samples.size())};
        result.history.push_back(rec);
        if (stopper.observe(epoch, rec.test_sca)) {
            result.best_params = params;
            result.confusion = test_eval.confusion;
        }
        if (on_epoch) on_epoch(rec);
        if (stopper.should_stop(epoch)) {
            result.stopped_early = epoch < cfg.max_epochs;
            break;
        }
    }
    result.best_epoch = stopper.best_epoch();
    result.best_test_sca = stopper.best_metric();
    return result;
}

std::string history_csv(std::span<const EpochRecord> history) {
    std::string out = "epoch,train_sca,test_sca,train_loss\n";
    for (const auto& r : history) {
        out += std::to_string(r.epoch) + ',' + detail::format_double(r.train_sca) + ',' +
               detail::format_double(r.test_sca) + ',' + detail::format_double(r.train_loss) + '\n';
    }
    return out;
}

std::vector<EpochRecord> parse_history_csv(std::string_view text) {
    std::vector<EpochRecord> out;
    bool header = false;
    std::size_t line_no = 0;
    for (auto line : detail::split_lines(text)) {
        ++line_no;
        line = detail::trim(line);
        if (line.empty()) continue;
        if (!header) {
            if (line != "epoch,train_sca,test_sca,train_loss") {
                throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": bad history header");
            }
            header = true;
            continue;
        }
        auto f = detail::split(line, ',');
        EpochRecord r;
        if (f.size() != 4 || !detail::parse_int(f[0], r.epoch) || !detail::parse_double(f[1], r.train_sca) ||
            !detail::parse_double(f[2], r.test_sca) || !detail::parse_double(f[3], r.train_loss)) {
            throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": cannot parse history row");
        }
        out.push_back(r);
    }
    return out;
}

std::string confusion_csv(const ConfusionMatrix& m) {
    std::string out = ",0,1,2\n";
    for (std::size_t t = 0; t < kClassCount; ++t) {
        out += std::to_string(t);
        for (std::size_t p = 0; p < kClassCount; ++p) out += ',' + std::to_string(m.counts[t][p]);
        out += '\n';
    }
    return out;
}

}  // namespace trailgrade

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dalight/core/errors.hpp"
#include "dalight/core/tensor.hpp"

namespace dalight::metrics {

// K x K voxel count table; rows are the true class, columns the predicted
// class. Accumulation is additive across batches, and integer counts make
// parallel merges bit-exact.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int num_classes)
        : k_(num_classes), counts_(static_cast<size_t>(num_classes) * num_classes, 0) {
        if (num_classes < 2) throw ConfigError("ConfusionMatrix: need >= 2 classes");
    }

    void accumulate(std::span<const uint8_t> pred, std::span<const uint8_t> truth) {
        if (pred.size() != truth.size()) {
            throw ShapeError("ConfusionMatrix: prediction and truth lengths differ");
        }
        for (size_t i = 0; i < pred.size(); ++i) {
            if (pred[i] >= k_ || truth[i] >= k_) {
                throw ConfigError("ConfusionMatrix: label out of range [0," +
                                  std::to_string(k_) + ")");
            }
            ++counts_[static_cast<size_t>(truth[i]) * static_cast<size_t>(k_) + pred[i]];
        }
    }

    void add(const ConfusionMatrix& other) {
        if (other.k_ != k_) throw ShapeError("ConfusionMatrix: class count mismatch");
        for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    }

    uint64_t at(int truth, int pred) const {
        return counts_[static_cast<size_t>(truth) * static_cast<size_t>(k_) + pred];
    }

    uint64_t total() const {
        uint64_t n = 0;
        for (uint64_t c : counts_) n += c;
        return n;
    }

    uint64_t trace() const {
        uint64_t n = 0;
        for (int c = 0; c < k_; ++c) n += at(c, c);
        return n;
    }

    int num_classes() const { return k_; }

private:
    int k_;
    std::vector<uint64_t> counts_;
};

// One-vs-rest metrics for a single class. A zero denominator yields an empty
// optional, never a silent zero.
struct MetricSet {
    std::optional<double> dice, iou, precision, sensitivity, specificity;
};

inline std::vector<MetricSet> per_class(const ConfusionMatrix& cm) {
    const int k = cm.num_classes();
    const uint64_t total = cm.total();
    std::vector<MetricSet> out(static_cast<size_t>(k));
    for (int c = 0; c < k; ++c) {
        uint64_t tp = cm.at(c, c), fp = 0, fn = 0;
        for (int o = 0; o < k; ++o) {
            if (o == c) continue;
            fp += cm.at(o, c);
            fn += cm.at(c, o);
        }
        const uint64_t tn = total - tp - fp - fn;
        auto ratio = [](uint64_t num, uint64_t den) -> std::optional<double> {
            if (den == 0) return std::nullopt;
            return static_cast<double>(num) / static_cast<double>(den);
        };
        MetricSet& m = out[static_cast<size_t>(c)];
        m.dice = ratio(2 * tp, 2 * tp + fp + fn);
        m.iou = ratio(tp, tp + fp + fn);
        m.precision = ratio(tp, tp + fp);
        m.sensitivity = ratio(tp, tp + fn);
        m.specificity = ratio(tn, tn + fp);
    }
    return out;
}

// Unweighted mean over the tumor classes (1..K-1); any undefined class metric
// propagates as undefined.
inline MetricSet macro_tumor(const std::vector<MetricSet>& per_class_metrics) {
    MetricSet macro;
    auto mean_of = [&](auto accessor) -> std::optional<double> {
        double sum = 0.0;
        for (size_t c = 1; c < per_class_metrics.size(); ++c) {
            const auto& v = accessor(per_class_metrics[c]);
            if (!v) return std::nullopt;
            sum += *v;
        }
        return sum / static_cast<double>(per_class_metrics.size() - 1);
    };
    macro.dice = mean_of([](const MetricSet& m) -> const std::optional<double>& { return m.dice; });
    macro.iou = mean_of([](const MetricSet& m) -> const std::optional<double>& { return m.iou; });
    macro.precision =
        mean_of([](const MetricSet& m) -> const std::optional<double>& { return m.precision; });
    macro.sensitivity =
        mean_of([](const MetricSet& m) -> const std::optional<double>& { return m.sensitivity; });
    macro.specificity =
        mean_of([](const MetricSet& m) -> const std::optional<double>& { return m.specificity; });
    return macro;
}

// Mean over defined tumor-class Dice values; the trainer's validation scalar.
// Returns 0 when no tumor class is defined.
inline double mean_defined_tumor_dice(const ConfusionMatrix& cm) {
    const auto metrics = per_class(cm);
    double sum = 0.0;
    int defined = 0;
    for (size_t c = 1; c < metrics.size(); ++c) {
        if (metrics[c].dice) {
            sum += *metrics[c].dice;
            ++defined;
        }
    }
    return defined ? sum / defined : 0.0;
}

// Per-voxel argmax over the channel axis of [B,K,spatial...]; ties go to the
// lowest class index.
inline std::vector<uint8_t> argmax_channel(const Tensor& probs) {
    const int64_t B = probs.shape()[0], K = probs.shape()[1];
    const int64_t S = probs.size() / (B * K);
    std::vector<uint8_t> out(static_cast<size_t>(B * S));
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t v = 0; v < S; ++v) {
            int best = 0;
            double best_p = probs[(b * K) * S + v];
            for (int64_t c = 1; c < K; ++c) {
                const double p = probs[(b * K + c) * S + v];
                if (p > best_p) {
                    best_p = p;
                    best = static_cast<int>(c);
                }
            }
            out[static_cast<size_t>(b * S + v)] = static_cast<uint8_t>(best);
        }
    }
    return out;
}

inline double dice_per_million(double mean_dice, double params) {
    if (params <= 0.0) throw ConfigError("dice_per_million: params must be positive");
    return mean_dice / (params / 1e6);
}

}  // namespace dalight::metrics

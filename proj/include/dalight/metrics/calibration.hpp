#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dalight/core/errors.hpp"

namespace dalight::metrics {

struct CalibrationBin {
    double lo = 0.0, hi = 0.0;
    uint64_t count = 0;
    double mean_confidence = 0.0;
    double accuracy = 0.0;
};

struct CalibrationReport {
    std::vector<CalibrationBin> bins;
    double ece = 0.0;
    double overall_accuracy = 0.0;
    uint64_t total = 0;
};

// Expected Calibration Error over equal-width confidence bins on [0,1],
// right-inclusive at 1.0: ece = sum_b (|b|/N) * |acc(b) - conf(b)|.
inline CalibrationReport ece_report(std::span<const double> confidences,
                                    std::span<const uint8_t> correct, int num_bins = 15) {
    if (confidences.size() != correct.size()) {
        throw ShapeError("ece_report: confidence and correctness lengths differ");
    }
    if (num_bins < 1) throw ConfigError("ece_report: need >= 1 bin");

    CalibrationReport report;
    report.bins.resize(static_cast<size_t>(num_bins));
    std::vector<double> conf_sum(static_cast<size_t>(num_bins), 0.0);
    std::vector<uint64_t> correct_sum(static_cast<size_t>(num_bins), 0);
    for (int b = 0; b < num_bins; ++b) {
        report.bins[static_cast<size_t>(b)].lo = static_cast<double>(b) / num_bins;
        report.bins[static_cast<size_t>(b)].hi = static_cast<double>(b + 1) / num_bins;
    }

    uint64_t total_correct = 0;
    for (size_t i = 0; i < confidences.size(); ++i) {
        const double c = confidences[i];
        if (!(c >= 0.0 && c <= 1.0)) {
            throw ConfigError("ece_report: confidence outside [0,1]");
        }
        const int b = std::min(static_cast<int>(c * num_bins), num_bins - 1);
        auto& bin = report.bins[static_cast<size_t>(b)];
        ++bin.count;
        conf_sum[static_cast<size_t>(b)] += c;
        if (correct[i]) {
            ++correct_sum[static_cast<size_t>(b)];
            ++total_correct;
        }
    }

    report.total = confidences.size();
    if (report.total == 0) return report;
    report.overall_accuracy =
        static_cast<double>(total_correct) / static_cast<double>(report.total);
    for (int b = 0; b < num_bins; ++b) {
        auto& bin = report.bins[static_cast<size_t>(b)];
        if (bin.count == 0) continue;
        bin.mean_confidence = conf_sum[static_cast<size_t>(b)] / static_cast<double>(bin.count);
        bin.accuracy =
            static_cast<double>(correct_sum[static_cast<size_t>(b)]) / static_cast<double>(bin.count);
        report.ece += (static_cast<double>(bin.count) / static_cast<double>(report.total)) *
                      std::abs(bin.accuracy - bin.mean_confidence);
    }
    return report;
}

}  // namespace dalight::metrics

#pragma once

#include <string>

#include <json.hpp>

#include "dalight/metrics/calibration.hpp"
#include "dalight/metrics/confusion.hpp"

namespace dalight::metrics {

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json metric_set_json(const MetricSet& m) {
    return {
        {"dice", opt_json(m.dice)},
        {"iou", opt_json(m.iou)},
        {"precision", opt_json(m.precision)},
        {"sensitivity", opt_json(m.sensitivity)},
        {"specificity", opt_json(m.specificity)},
    };
}

}  // namespace detail

// Per-class metrics keyed by class name, plus the tumor-class macro average
// and overall voxel accuracy.
inline nlohmann::json class_metrics_json(const ConfusionMatrix& cm,
                                         const char* const* class_names) {
    const auto metrics = per_class(cm);
    nlohmann::json per;
    for (size_t c = 0; c < metrics.size(); ++c) {
        per[class_names[c]] = detail::metric_set_json(metrics[c]);
    }
    nlohmann::json out;
    out["per_class"] = per;
    out["macro_tumor"] = detail::metric_set_json(macro_tumor(metrics));
    out["total_voxels"] = cm.total();
    out["overall_accuracy"] = cm.total() ? static_cast<double>(cm.trace()) /
                                               static_cast<double>(cm.total())
                                         : 0.0;
    return out;
}

inline nlohmann::json calibration_json(const CalibrationReport& report) {
    nlohmann::json bins = nlohmann::json::array();
    for (const auto& b : report.bins) {
        bins.push_back({{"lo", b.lo},
                        {"hi", b.hi},
                        {"count", b.count},
                        {"mean_confidence", b.mean_confidence},
                        {"accuracy", b.accuracy}});
    }
    return {{"bins", bins},
            {"ece", report.ece},
            {"overall_accuracy", report.overall_accuracy},
            {"total", report.total}};
}

// K rows of K comma-separated counts, rows = true class.
inline std::string confusion_csv(const ConfusionMatrix& cm) {
    std::string out;
    for (int t = 0; t < cm.num_classes(); ++t) {
        for (int p = 0; p < cm.num_classes(); ++p) {
            if (p) out += ",";
            out += std::to_string(cm.at(t, p));
        }
        out += "\n";
    }
    return out;
}

}  // namespace dalight::metrics

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dalight/core/ops.hpp"
#include "dalight/core/tape.hpp"
#include "dalight/core/tensor.hpp"

namespace dalight {

// A closure builds a scalar loss from tensors it captures. It receives a tape
// for the analytic pass and nullptr for the finite-difference evaluations.
using GradClosure = std::function<Tensor(Tape*)>;

struct GradCheckReport {
    double max_rel_error = 0.0;
    int64_t worst_input = -1;
    int64_t worst_element = -1;
    double analytic = 0.0;
    double numeric = 0.0;
};

// Central-difference gradient check. For every element of every listed input,
// compares the analytic gradient against (f(x+h) - f(x-h)) / 2h with
// h = step * max(1, |x|) and relative error
// |a - n| / max(|a|, |n|, 1e-8). Returns the maximum over all elements.
inline GradCheckReport grad_check_report(const GradClosure& closure, std::vector<Tensor> inputs,
                                         double step = 1e-3) {
    if (step <= 0.0) throw ShapeError("grad_check: step must be positive");

    Tape tape;
    Tensor loss = closure(&tape);
    if (!loss.defined() || loss.size() != 1) {
        throw ShapeError("grad_check: closure must return a scalar");
    }
    ops::backward(loss, tape);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (const Tensor& t : inputs) {
        std::vector<double> g(static_cast<size_t>(t.size()));
        for (int64_t i = 0; i < t.size(); ++i) g[static_cast<size_t>(i)] = t.grad_at(i);
        analytic.push_back(std::move(g));
    }
    tape.clear();

    GradCheckReport report;
    for (size_t ti = 0; ti < inputs.size(); ++ti) {
        Tensor& t = inputs[ti];
        for (int64_t i = 0; i < t.size(); ++i) {
            const double orig = t[i];
            const double h = step * std::max(1.0, std::abs(orig));
            t[i] = orig + h;
            const double f_plus = closure(nullptr)[0];
            t[i] = orig - h;
            const double f_minus = closure(nullptr)[0];
            t[i] = orig;
            const double numeric = (f_plus - f_minus) / (2.0 * h);
            if (!std::isfinite(numeric)) {
                throw NumericError("grad_check: non-finite finite-difference value");
            }
            const double a = analytic[ti][static_cast<size_t>(i)];
            const double rel =
                std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_input = static_cast<int64_t>(ti);
                report.worst_element = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    return report;
}

inline double grad_check(const GradClosure& closure, std::vector<Tensor> inputs,
                         double step = 1e-3) {
    return grad_check_report(closure, std::move(inputs), step).max_rel_error;
}

}  // namespace dalight

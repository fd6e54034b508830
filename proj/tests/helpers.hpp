#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "dalight/core/ops.hpp"
#include "dalight/core/rng.hpp"
#include "dalight/core/tape.hpp"
#include "dalight/core/tensor.hpp"

namespace testutil {

inline dalight::Tensor random_tensor(dalight::Shape shape, dalight::Rng& rng, double lo = -1.0,
                                     double hi = 1.0) {
    dalight::Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

inline dalight::Tensor normal_tensor(dalight::Shape shape, dalight::Rng& rng, double mean = 0.0,
                                     double sd = 1.0) {
    dalight::Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal(mean, sd);
    return t;
}

inline double max_abs_diff(const dalight::Tensor& a, const dalight::Tensor& b) {
    if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
    double m = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Scalarizes an op output against fixed random weights, scaled to a mean so
// the closure magnitude stays small; keeps finite-difference cancellation
// noise well under the gradient-check floor.
inline dalight::Tensor weighted_mean(const dalight::Tensor& y, const dalight::Tensor& weights,
                                     dalight::Tape* tape) {
    using namespace dalight;
    return ops::scale(ops::sum_all(ops::mul(y, weights, tape), tape),
                      1.0 / static_cast<double>(y.size()), tape);
}

inline bool bit_equal(const dalight::Tensor& a, const dalight::Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (int64_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) return false;
    }
    return true;
}

}  // namespace testutil

#pragma once

#include "dalight/core/conv_ops.hpp"
#include "dalight/core/norm_ops.hpp"
#include "dalight/core/tensor_ops.hpp"

namespace dalight::ops {

// Replays the tape in reverse, populating dLoss/dParam for every tensor that
// influenced the scalar loss. Parameters off every path keep zero gradient.
inline void backward(const Tensor& loss, Tape& tape) { tape.backward(loss); }

}  // namespace dalight::ops

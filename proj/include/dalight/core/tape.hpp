#pragma once

#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dalight/core/tensor.hpp"

namespace dalight {

// Ordered record of executed primitives. Each node owns a backward rule that
// reads the output gradient and accumulates into the input gradients. Replay
// is strictly reverse insertion order, so gradient accumulation order is
// deterministic. A tape and the grad slots it populates belong to one logical
// thread of control.
class Tape {
public:
    void record(std::function<void()> backward_rule, std::initializer_list<Tensor> touched) {
        nodes_.push_back(std::move(backward_rule));
        for (const Tensor& t : touched) touched_.push_back(t);
    }

    std::size_t node_count() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss) = 1 and replays every rule in reverse order.
    void backward(const Tensor& loss) {
        if (!loss.defined() || loss.size() != 1) {
            throw ShapeError("backward: loss must be a scalar" +
                             (loss.defined() ? ", got " + loss.shape().str() : std::string()));
        }
        if (spent_) {
            throw std::logic_error("backward: tape already consumed; call clear() first");
        }
        spent_ = true;
        loss.ensure_grad()[0] += 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

    // Zeroes every grad slot this tape touched and drops the records.
    void clear() {
        for (auto& t : touched_) t.zero_grad();
        nodes_.clear();
        touched_.clear();
        spent_ = false;
    }

private:
    std::vector<std::function<void()>> nodes_;
    std::vector<Tensor> touched_;
    bool spent_ = false;
};

}  // namespace dalight

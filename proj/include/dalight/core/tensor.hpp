#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dalight/core/errors.hpp"
#include "dalight/core/shape.hpp"

namespace dalight {

// Dense 64-bit float value with an optional gradient buffer of the same
// length. A Tensor is a shared handle: copies alias the same storage, which is
// what lets the tape and the optimizer refer to the very parameters a layer
// owns. const applies to the handle, not the buffers.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape) : impl_(std::make_shared<Impl>()) {
        impl_->shape = std::move(shape);
        impl_->data.assign(static_cast<size_t>(impl_->shape.numel()), 0.0);
    }

    Tensor(Shape shape, std::vector<double> values) : impl_(std::make_shared<Impl>()) {
        if (static_cast<int64_t>(values.size()) != shape.numel()) {
            throw ShapeError("Tensor: " + std::to_string(values.size()) +
                             " values for shape " + shape.str());
        }
        impl_->shape = std::move(shape);
        impl_->data = std::move(values);
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, double value) {
        Tensor t(std::move(shape));
        std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
        return t;
    }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int64_t size() const { return static_cast<int64_t>(impl_->data.size()); }

    double* data() const { return impl_->data.data(); }
    double& operator[](int64_t i) const { return impl_->data[static_cast<size_t>(i)]; }

    bool has_grad() const { return impl_ && !impl_->grad.empty(); }

    // Allocates a zeroed gradient buffer on first use.
    double* ensure_grad() const {
        if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
        return impl_->grad.data();
    }

    double* grad() const { return impl_->grad.empty() ? nullptr : impl_->grad.data(); }

    // Reads 0 where no gradient buffer exists; parameters off every path to
    // the loss hold zero gradient by definition.
    double grad_at(int64_t i) const {
        return impl_->grad.empty() ? 0.0 : impl_->grad[static_cast<size_t>(i)];
    }

    void zero_grad() const {
        std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
    }

    // Deep copy of the data buffer; the gradient slot starts empty.
    Tensor clone() const {
        Tensor t;
        t.impl_ = std::make_shared<Impl>();
        t.impl_->shape = impl_->shape;
        t.impl_->data = impl_->data;
        return t;
    }

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
    const void* id() const { return impl_.get(); }

    void check_finite(const char* what) const {
        for (double v : impl_->data) {
            if (!std::isfinite(v)) {
                throw NumericError(std::string(what) + ": non-finite value in output of shape " +
                                   impl_->shape.str());
            }
        }
    }

private:
    struct Impl {
        Shape shape;
        std::vector<double> data;
        std::vector<double> grad;  // empty = absent
    };
    std::shared_ptr<Impl> impl_;
};

}  // namespace dalight

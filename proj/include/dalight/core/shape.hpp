#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "dalight/core/errors.hpp"

namespace dalight {

// Ordered list of positive extents. Feature maps are [C, D, H, W] by
// convention; batched maps prepend B.
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<int64_t> dims) : Shape(std::vector<int64_t>(dims)) {}
    explicit Shape(std::vector<int64_t> dims) : dims_(std::move(dims)) {
        for (int64_t d : dims_) {
            if (d < 1) {
                throw ShapeError("Shape: extent " + std::to_string(d) + " < 1 in " + str_of(dims_));
            }
        }
    }

    int rank() const { return static_cast<int>(dims_.size()); }
    int64_t operator[](int i) const { return dims_[static_cast<size_t>(i)]; }
    const std::vector<int64_t>& dims() const { return dims_; }

    int64_t numel() const {
        int64_t n = 1;
        for (int64_t d : dims_) n *= d;
        return n;
    }

    bool operator==(const Shape& other) const { return dims_ == other.dims_; }
    bool operator!=(const Shape& other) const { return dims_ != other.dims_; }

    std::string str() const { return str_of(dims_); }

private:
    static std::string str_of(const std::vector<int64_t>& dims) {
        std::string s = "[";
        for (size_t i = 0; i < dims.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(dims[i]);
        }
        return s + "]";
    }

    std::vector<int64_t> dims_;
};

}  // namespace dalight

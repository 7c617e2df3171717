#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "eqstream/errors.hpp"

namespace eqstream {

/// Dense row-major value grid of rank 1..4. Values are stored and
/// accumulated in 64-bit floating point; the weight file narrows to
/// 32-bit on disk.
class ValueGrid {
public:
    ValueGrid() = default;

    explicit ValueGrid(std::vector<std::size_t> dims, double fill = 0.0)
        : dims_(std::move(dims)) {
        if (dims_.empty() || dims_.size() > 4) {
            throw ShapeError("ValueGrid rank must be 1..4");
        }
        std::size_t n = 1;
        for (std::size_t d : dims_) {
            if (d == 0) throw ShapeError("ValueGrid dimension must be >= 1");
            n *= d;
        }
        data_.assign(n, fill);
    }

    ValueGrid(std::initializer_list<std::size_t> dims, double fill = 0.0)
        : ValueGrid(std::vector<std::size_t>(dims), fill) {}

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t rank() const { return dims_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return dims_.at(i); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Rank-specific indexers; callers know their layout.
    double& at(std::size_t i0) { return data_[i0]; }
    double& at(std::size_t i0, std::size_t i1) { return data_[i0 * dims_[1] + i1]; }
    double& at(std::size_t i0, std::size_t i1, std::size_t i2) {
        return data_[(i0 * dims_[1] + i1) * dims_[2] + i2];
    }
    double& at(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t i3) {
        return data_[((i0 * dims_[1] + i1) * dims_[2] + i2) * dims_[3] + i3];
    }
    double at(std::size_t i0) const { return data_[i0]; }
    double at(std::size_t i0, std::size_t i1) const { return data_[i0 * dims_[1] + i1]; }
    double at(std::size_t i0, std::size_t i1, std::size_t i2) const {
        return data_[(i0 * dims_[1] + i1) * dims_[2] + i2];
    }
    double at(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t i3) const {
        return data_[((i0 * dims_[1] + i1) * dims_[2] + i2) * dims_[3] + i3];
    }

    bool same_shape(const ValueGrid& other) const { return dims_ == other.dims_; }

    void fill(double v) { data_.assign(data_.size(), v); }

    double sum() const {
        double s = 0.0;
        for (double v : data_) s += v;
        return s;
    }

    ValueGrid& operator+=(const ValueGrid& other) {
        require_same_shape(other, "operator+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
        return *this;
    }

    ValueGrid& operator*=(double a) {
        for (double& v : data_) v *= a;
        return *this;
    }

    bool operator==(const ValueGrid& other) const {
        return dims_ == other.dims_ && data_ == other.data_;
    }

    void require_same_shape(const ValueGrid& other, const char* where) const {
        if (!same_shape(other)) {
            throw ShapeError(std::string(where) + ": shape mismatch " +
                             shape_string() + " vs " + other.shape_string());
        }
    }

    std::string shape_string() const {
        std::ostringstream os;
        os << "(";
        for (std::size_t i = 0; i < dims_.size(); ++i) {
            if (i) os << ",";
            os << dims_[i];
        }
        os << ")";
        return os.str();
    }

private:
    std::vector<std::size_t> dims_;
    std::vector<double> data_;
};

}  // namespace eqstream

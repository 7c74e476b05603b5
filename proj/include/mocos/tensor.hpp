#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mocos::ad {

/// Tensor extents stored inline, up to rank 8.
class Shape {
public:
    static constexpr std::size_t kMaxRank = 8;

    Shape() = default;
    Shape(std::initializer_list<std::size_t> dims) { assign(dims.begin(), dims.size()); }
    Shape(const std::vector<std::size_t>& dims) { assign(dims.data(), dims.size()); }

    std::size_t size() const noexcept { return rank_; }
    bool empty() const noexcept { return rank_ == 0; }
    std::size_t operator[](std::size_t i) const { return dims_[i]; }
    std::size_t back() const { return dims_[rank_ - 1]; }
    const std::size_t* begin() const noexcept { return dims_.data(); }
    const std::size_t* end() const noexcept { return dims_.data() + rank_; }

    friend bool operator==(const Shape& a, const Shape& b) {
        return std::equal(a.begin(), a.end(), b.begin(), b.end());
    }

private:
    void assign(const std::size_t* dims, std::size_t rank);

    std::array<std::size_t, kMaxRank> dims_{};
    std::size_t rank_ = 0;
};

/// Dense row-major tensor of doubles.
///
/// Every op in this library works on matrices; rank-1 tensors are viewed as a
/// single row and rank-0 as 1x1. Higher ranks are carried for storage only.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
        return Tensor({rows, cols}, fill);
    }
    static Tensor scalar(double v) { return Tensor({1, 1}, v); }
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor row(std::span<const double> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::size_t rows() const noexcept {
        if (shape_.size() < 2) return 1;
        return shape_.back() == 0 ? 0 : data_.size() / shape_.back();
    }
    std::size_t cols() const noexcept { return shape_.empty() ? 1 : shape_.back(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
    std::span<const double> row_span(std::size_t r) const {
        return {data_.data() + r * cols(), cols()};
    }

    bool requires_grad() const noexcept { return requires_grad_; }
    void set_requires_grad(bool on) noexcept { requires_grad_ = on; }

    std::string shape_str() const;
    bool all_finite() const noexcept;
    void fill(double v);

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    Shape shape_;
    std::vector<double> data_;
    bool requires_grad_ = false;
};

std::string shape_str(const Shape& shape);

/// Max absolute elementwise difference; shapes must agree.
double max_abs_diff(const Tensor& a, const Tensor& b);

Tensor transposed(const Tensor& a);

} // namespace mocos::ad

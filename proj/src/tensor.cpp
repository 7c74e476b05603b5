#include "mocos/tensor.hpp"

#include "mocos/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace mocos::ad {

namespace {

std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

} // namespace

void Shape::assign(const std::size_t* dims, std::size_t rank) {
    if (rank > kMaxRank)
        throw ValidationError("tensor rank " + std::to_string(rank) + " exceeds " + std::to_string(kMaxRank));
    std::copy(dims, dims + rank, dims_.begin());
    rank_ = rank;
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (element_count(shape_) != data_.size())
        throw ValidationError("tensor shape " + mocos::ad::shape_str(shape_) + " does not match " +
                              std::to_string(data_.size()) + " values");
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ValidationError("ragged rows in Tensor::from_rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

Tensor Tensor::row(std::span<const double> values) {
    return Tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

std::string Tensor::shape_str() const { return mocos::ad::shape_str(shape_); }

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size())
        throw ValidationError("max_abs_diff: shapes " + a.shape_str() + " and " + b.shape_str());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Tensor transposed(const Tensor& a) {
    Tensor t = Tensor::matrix(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
    return t;
}

} // namespace mocos::ad

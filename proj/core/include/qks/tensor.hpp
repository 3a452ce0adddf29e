#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace qks {

enum class Dtype : std::uint8_t { f32 = 1, f64 = 2 };

template <typename T> struct dtype_of;
template <> struct dtype_of<float>  { static constexpr Dtype value = Dtype::f32; };
template <> struct dtype_of<double> { static constexpr Dtype value = Dtype::f64; };

/// Dense row-major array of float or double. Shapes are fixed at
/// construction; operations never resize in place.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    /// Zero-filled tensor of the given shape.
    explicit Tensor(std::vector<std::size_t> shape);

    Tensor(std::vector<std::size_t> shape, std::vector<T> values);

    static Tensor full(std::vector<std::size_t> shape, T value);

    /// 2-D tensor from nested braces, for tests and small fixtures.
    static Tensor matrix(std::initializer_list<std::initializer_list<T>> rows);

    static Tensor vector(std::initializer_list<T> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t size(std::size_t axis) const;

    /// Row/column accessors for the common 2-D case.
    std::size_t rows() const;
    std::size_t cols() const;

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    T operator[](std::size_t i) const { return data_[i]; }
    T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    T operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    T* row(std::size_t i) { return data_.data() + i * cols_; }
    const T* row(std::size_t i) const { return data_.data() + i * cols_; }

    Dtype dtype() const { return dtype_of<T>::value; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const;

    void fill(T value);
    void zero() { fill(T(0)); }

    bool all_finite() const;

    /// Throws VerificationError naming `what` if any entry is NaN/Inf.
    void ensure_finite(const std::string& what) const;

    /// Converts element type; float -> double is exact.
    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return Tensor<U>(shape_, std::move(out));
    }

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    std::vector<std::size_t> shape_;
    std::size_t cols_ = 0; // last-axis extent, cached for 2-D indexing
    std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

std::string shape_to_string(const std::vector<std::size_t>& shape);

extern template class Tensor<float>;
extern template class Tensor<double>;

} // namespace qks

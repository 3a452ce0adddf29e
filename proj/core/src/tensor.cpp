#include "qks/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "qks/errors.hpp"

namespace qks {

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

std::size_t checked_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t ext : shape) {
        if (ext == 0) throw DataError("tensor shape has a zero extent: " + shape_to_string(shape));
        n *= ext;
    }
    return n;
}

} // namespace

template <typename T>
Tensor<T>::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_numel(shape_), T(0)) {
    cols_ = shape_.empty() ? 1 : shape_.back();
}

template <typename T>
Tensor<T>::Tensor(std::vector<std::size_t> shape, std::vector<T> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (checked_numel(shape_) != data_.size()) {
        throw DataError("tensor data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_to_string(shape_));
    }
    cols_ = shape_.empty() ? 1 : shape_.back();
}

template <typename T>
Tensor<T> Tensor<T>::full(std::vector<std::size_t> shape, T value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

template <typename T>
Tensor<T> Tensor<T>::matrix(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t n = rows.size();
    const std::size_t k = n ? rows.begin()->size() : 0;
    std::vector<T> data;
    data.reserve(n * k);
    for (const auto& r : rows) {
        if (r.size() != k) throw DataError("ragged rows in Tensor::matrix");
        data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor({n, k}, std::move(data));
}

template <typename T>
Tensor<T> Tensor<T>::vector(std::initializer_list<T> values) {
    return Tensor({values.size()}, std::vector<T>(values));
}

template <typename T>
std::size_t Tensor<T>::size(std::size_t axis) const {
    if (axis >= shape_.size()) throw DataError("axis out of range for shape " + shape_str());
    return shape_[axis];
}

template <typename T>
std::size_t Tensor<T>::rows() const {
    if (shape_.size() != 2) throw DataError("rows() on non-2D tensor " + shape_str());
    return shape_[0];
}

template <typename T>
std::size_t Tensor<T>::cols() const {
    if (shape_.size() != 2) throw DataError("cols() on non-2D tensor " + shape_str());
    return shape_[1];
}

template <typename T>
std::string Tensor<T>::shape_str() const {
    return shape_to_string(shape_);
}

template <typename T>
void Tensor<T>::fill(T value) {
    std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
bool Tensor<T>::all_finite() const {
    for (T v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

template <typename T>
void Tensor<T>::ensure_finite(const std::string& what) const {
    if (!all_finite()) throw VerificationError("non-finite values in " + what);
}

template class Tensor<float>;
template class Tensor<double>;

} // namespace qks

#include "qmireg/tensor.hpp"

#include <cmath>
#include <utility>

#include "qmireg/error.hpp"

namespace qmireg::nd {

std::string Shape::str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
           std::to_string(w);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size())
        throw InvalidInput("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_.str());
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
    if (shape.size() != shape_.size())
        throw InvalidInput("cannot reshape " + shape_.str() + " to " + shape.str());
    return BasicTensor(shape, data_);
}

template <typename T>
bool BasicTensor<T>::all_finite() const noexcept {
    for (const T& v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

template class BasicTensor<float>;
template class BasicTensor<double>;

} // namespace qmireg::nd

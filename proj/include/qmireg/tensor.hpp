#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace qmireg::nd {

struct Shape {
    std::size_t n = 0;
    std::size_t c = 0;
    std::size_t h = 0;
    std::size_t w = 0;

    constexpr std::size_t size() const noexcept { return n * c * h * w; }
    constexpr std::size_t plane() const noexcept { return h * w; }
    constexpr std::size_t sample() const noexcept { return c * h * w; }
    friend constexpr bool operator==(const Shape&, const Shape&) = default;

    std::string str() const;
};

/// Dense rank-4 array in row-major (n, c, h, w) order.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() = default;
    explicit BasicTensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.size(), fill) {}
    BasicTensor(Shape shape, std::vector<T> data);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }

    std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
        return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }
    T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
        return data_[offset(n, c, h, w)];
    }
    const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
        return data_[offset(n, c, h, w)];
    }
    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<T> sample(std::size_t n) noexcept {
        return std::span<T>(data_).subspan(n * shape_.sample(), shape_.sample());
    }
    std::span<const T> sample(std::size_t n) const noexcept {
        return std::span<const T>(data_).subspan(n * shape_.sample(), shape_.sample());
    }

    /// Same data, different shape of equal size.
    BasicTensor reshaped(Shape shape) const;

    bool all_finite() const noexcept;

    friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

private:
    Shape shape_{};
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

template <typename To, typename From>
BasicTensor<To> tensor_cast(const BasicTensor<From>& t) {
    BasicTensor<To> out(t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<To>(t[i]);
    return out;
}

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

} // namespace qmireg::nd

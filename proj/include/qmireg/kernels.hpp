#pragma once

// Layer kernels used for training and inference. Batch-level loops are
// OpenMP-parallel; every output element is produced by a fixed serial loop
// nest, so results do not depend on the thread count. The naive serial
// versions live in reference.hpp.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qmireg/tensor.hpp"

namespace qmireg::nd {

template <typename T>
struct ConvLayer {
    BasicTensor<T> kernel;   // (out_ch, in_ch, kh, kw)
    std::vector<T> bias;     // out_ch
    std::size_t stride = 1;
    std::size_t pad = 0;

    std::size_t out_channels() const noexcept { return kernel.shape().n; }
    std::size_t in_channels() const noexcept { return kernel.shape().c; }
    std::size_t kernel_h() const noexcept { return kernel.shape().h; }
    std::size_t kernel_w() const noexcept { return kernel.shape().w; }
    std::size_t parameter_count() const noexcept { return kernel.size() + bias.size(); }

    /// Throws InvalidInput if kernel/bias sizes or stride are inconsistent.
    void validate() const;

    friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

/// Output shape of `layer` applied to `input`; throws InvalidInput on mismatch.
template <typename T>
Shape conv2d_output_shape(const Shape& input, const ConvLayer<T>& layer);

/// Cross-correlation plus bias. For each output element the products are
/// accumulated over (in_ch, ky, kx) in that order, then the bias is added.
template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const ConvLayer<T>& layer);

template <typename T>
struct ConvGrads {
    BasicTensor<T> input;
    BasicTensor<T> kernel;
    std::vector<T> bias;
};

/// Reverse-mode gradients of conv2d_forward. `input` is the cached forward input.
template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const ConvLayer<T>& layer,
                             const BasicTensor<T>& grad_out);

struct PoolIndex {
    Shape input_shape{};
    std::vector<std::uint32_t> argmax;  // flat input offset per output element
};

template <typename T>
struct PoolResult {
    BasicTensor<T> output;
    PoolIndex index;
};

/// 2x2 max-pooling with stride 2. Odd spatial dims are rejected. Ties go to the
/// first element in row-major block order.
template <typename T>
PoolResult<T> maxpool2x2_forward(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> maxpool2x2_backward(const PoolIndex& index, const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input);

/// `input` is the cached pre-activation.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out);

struct OptimizerState {
    std::vector<std::vector<float>> velocity;  // one block per parameter block
    float lr = 1e-3f;
    float momentum = 0.9f;
};

/// Classic momentum: v <- momentum*v - lr*g; p <- p + v.
template <typename T>
void sgd_momentum_step(std::span<T> params, std::span<const T> grads, std::span<T> velocity,
                       T lr, T momentum);

} // namespace qmireg::nd

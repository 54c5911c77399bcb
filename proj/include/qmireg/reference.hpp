#pragma once

// Serial, loop-literal versions of the layer kernels. They are slow on
// purpose: tests and the sliding-window oracle use them as an independent
// route to the optimized kernels.

#include "qmireg/kernels.hpp"

namespace qmireg::nd::reference {

/// Six-loop direct convolution (batch, out_ch, oy, ox, in_ch, ky, kx).
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const ConvLayer<T>& layer);

/// Block max by brute force.
template <typename T>
BasicTensor<T> maxpool2x2(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);

} // namespace qmireg::nd::reference

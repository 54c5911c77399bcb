#include "qmireg/kernels.hpp"

#include <algorithm>
#include <string>

#include "qmireg/error.hpp"

namespace qmireg::nd {

namespace {

// Column matrix of one sample: rows k = (ic, ky, kx), columns p = (oy, ox).
template <typename T>
void im2col(const T* image, const Shape& in, const ConvLayer<T>& layer, std::size_t oh,
            std::size_t ow, T* col) {
    const std::size_t kh = layer.kernel_h(), kw = layer.kernel_w();
    const std::size_t stride = layer.stride;
    const auto pad = static_cast<std::ptrdiff_t>(layer.pad);
    const std::size_t npos = oh * ow;
    for (std::size_t ic = 0; ic < in.c; ++ic) {
        const T* plane = image + ic * in.h * in.w;
        for (std::size_t ky = 0; ky < kh; ++ky) {
            for (std::size_t kx = 0; kx < kw; ++kx) {
                T* row = col + ((ic * kh + ky) * kw + kx) * npos;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
                    T* dst = row + oy * ow;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.h)) {
                        std::fill(dst, dst + ow, T(0));
                        continue;
                    }
                    const T* src = plane + static_cast<std::size_t>(iy) * in.w;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const std::ptrdiff_t ix =
                            static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
                        dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.w))
                                      ? T(0)
                                      : src[ix];
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, const Shape& in, const ConvLayer<T>& layer, std::size_t oh,
                std::size_t ow, T* image) {
    const std::size_t kh = layer.kernel_h(), kw = layer.kernel_w();
    const std::size_t stride = layer.stride;
    const auto pad = static_cast<std::ptrdiff_t>(layer.pad);
    const std::size_t npos = oh * ow;
    for (std::size_t ic = 0; ic < in.c; ++ic) {
        T* plane = image + ic * in.h * in.w;
        for (std::size_t ky = 0; ky < kh; ++ky) {
            for (std::size_t kx = 0; kx < kw; ++kx) {
                const T* row = col + ((ic * kh + ky) * kw + kx) * npos;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.h)) continue;
                    T* dst = plane + static_cast<std::size_t>(iy) * in.w;
                    const T* src = row + oy * ow;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const std::ptrdiff_t ix =
                            static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
                        if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(in.w)) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

// Fixed-order dot product with eight interleaved partial sums.
template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
    T acc[8] = {};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
    for (std::size_t j = 0; i < n; ++i, ++j) acc[j] += a[i] * b[i];
    return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
}

} // namespace

template <typename T>
void ConvLayer<T>::validate() const {
    const Shape& k = kernel.shape();
    if (k.n == 0 || k.c == 0 || k.h == 0 || k.w == 0)
        throw InvalidInput("conv kernel has an empty dimension: " + k.str());
    if (bias.size() != k.n)
        throw InvalidInput("conv bias length " + std::to_string(bias.size()) +
                           " != out channels " + std::to_string(k.n));
    if (stride == 0) throw InvalidInput("conv stride must be positive");
}

template <typename T>
Shape conv2d_output_shape(const Shape& input, const ConvLayer<T>& layer) {
    layer.validate();
    if (input.c != layer.in_channels())
        throw InvalidInput("conv input has " + std::to_string(input.c) +
                           " channels, layer expects " + std::to_string(layer.in_channels()));
    const std::size_t ph = input.h + 2 * layer.pad, pw = input.w + 2 * layer.pad;
    if (ph < layer.kernel_h() || pw < layer.kernel_w())
        throw InvalidInput("conv input " + input.str() + " smaller than kernel");
    return Shape{input.n, layer.out_channels(), (ph - layer.kernel_h()) / layer.stride + 1,
                 (pw - layer.kernel_w()) / layer.stride + 1};
}

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const ConvLayer<T>& layer) {
    const Shape in = input.shape();
    const Shape out_shape = conv2d_output_shape(in, layer);
    BasicTensor<T> out(out_shape);
    const std::size_t oc_count = out_shape.c;
    const std::size_t npos = out_shape.h * out_shape.w;
    const std::size_t kdim = in.c * layer.kernel_h() * layer.kernel_w();
    const T* weights = layer.kernel.data();

#pragma omp parallel
    {
        std::vector<T> col(kdim * npos);
#pragma omp for schedule(static)
        for (std::ptrdiff_t sn = 0; sn < static_cast<std::ptrdiff_t>(in.n); ++sn) {
            const auto n = static_cast<std::size_t>(sn);
            im2col(input.data() + n * in.sample(), in, layer, out_shape.h, out_shape.w,
                   col.data());
            T* dst = out.data() + n * out_shape.sample();
            for (std::size_t oc = 0; oc < oc_count; ++oc) {
                T* orow = dst + oc * npos;
                const T* wrow = weights + oc * kdim;
                for (std::size_t k = 0; k < kdim; ++k) {
                    const T wv = wrow[k];
                    const T* crow = col.data() + k * npos;
                    for (std::size_t p = 0; p < npos; ++p) orow[p] += wv * crow[p];
                }
                const T b = layer.bias[oc];
                for (std::size_t p = 0; p < npos; ++p) orow[p] += b;
            }
        }
    }
    return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const ConvLayer<T>& layer,
                             const BasicTensor<T>& grad_out) {
    const Shape in = input.shape();
    const Shape out_shape = conv2d_output_shape(in, layer);
    if (grad_out.shape() != out_shape)
        throw InvalidInput("conv grad_out shape " + grad_out.shape().str() +
                           " != forward output " + out_shape.str());
    const std::size_t oc_count = out_shape.c;
    const std::size_t npos = out_shape.h * out_shape.w;
    const std::size_t kdim = in.c * layer.kernel_h() * layer.kernel_w();
    const T* weights = layer.kernel.data();

    ConvGrads<T> g{BasicTensor<T>(in), BasicTensor<T>(layer.kernel.shape()),
                   std::vector<T>(oc_count, T(0))};
    // Per-sample parameter partials, reduced afterwards in sample order so
    // the result does not depend on how samples were split across threads.
    std::vector<T> kernel_partial(in.n * oc_count * kdim);
    std::vector<T> bias_partial(in.n * oc_count);

#pragma omp parallel
    {
        std::vector<T> col(kdim * npos);
        std::vector<T> dcol(kdim * npos);
#pragma omp for schedule(static)
        for (std::ptrdiff_t sn = 0; sn < static_cast<std::ptrdiff_t>(in.n); ++sn) {
            const auto n = static_cast<std::size_t>(sn);
            im2col(input.data() + n * in.sample(), in, layer, out_shape.h, out_shape.w,
                   col.data());
            const T* gout = grad_out.data() + n * out_shape.sample();
            T* kp = kernel_partial.data() + n * oc_count * kdim;
            T* bp = bias_partial.data() + n * oc_count;
            std::fill(dcol.begin(), dcol.end(), T(0));
            for (std::size_t oc = 0; oc < oc_count; ++oc) {
                const T* grow = gout + oc * npos;
                T bsum = 0;
                for (std::size_t p = 0; p < npos; ++p) bsum += grow[p];
                bp[oc] = bsum;
                const T* wrow = weights + oc * kdim;
                for (std::size_t k = 0; k < kdim; ++k) {
                    const T* crow = col.data() + k * npos;
                    kp[oc * kdim + k] = dot(grow, crow, npos);
                    const T wv = wrow[k];
                    T* drow = dcol.data() + k * npos;
                    for (std::size_t p = 0; p < npos; ++p) drow[p] += wv * grow[p];
                }
            }
            col2im_add(dcol.data(), in, layer, out_shape.h, out_shape.w,
                       g.input.data() + n * in.sample());
        }
    }
    for (std::size_t n = 0; n < in.n; ++n) {
        const T* kp = kernel_partial.data() + n * oc_count * kdim;
        for (std::size_t i = 0; i < oc_count * kdim; ++i) g.kernel[i] += kp[i];
        for (std::size_t oc = 0; oc < oc_count; ++oc) g.bias[oc] += bias_partial[n * oc_count + oc];
    }
    return g;
}

template <typename T>
PoolResult<T> maxpool2x2_forward(const BasicTensor<T>& input) {
    const Shape in = input.shape();
    if (in.h % 2 != 0 || in.w % 2 != 0)
        throw InvalidInput("maxpool2x2 needs even spatial dims, got " + in.str());
    const Shape out_shape{in.n, in.c, in.h / 2, in.w / 2};
    PoolResult<T> r{BasicTensor<T>(out_shape), PoolIndex{in, {}}};
    r.index.argmax.resize(out_shape.size());
    const std::size_t planes = in.n * in.c;

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t sp = 0; sp < static_cast<std::ptrdiff_t>(planes); ++sp) {
        const auto p = static_cast<std::size_t>(sp);
        const std::size_t in_base = p * in.plane();
        const std::size_t out_base = p * out_shape.plane();
        for (std::size_t oy = 0; oy < out_shape.h; ++oy) {
            for (std::size_t ox = 0; ox < out_shape.w; ++ox) {
                const std::size_t top = in_base + (2 * oy) * in.w + 2 * ox;
                const std::size_t cand[4] = {top, top + 1, top + in.w, top + in.w + 1};
                std::size_t best = cand[0];
                for (std::size_t i = 1; i < 4; ++i)
                    if (input[cand[i]] > input[best]) best = cand[i];
                r.output[out_base + oy * out_shape.w + ox] = input[best];
                r.index.argmax[out_base + oy * out_shape.w + ox] = static_cast<std::uint32_t>(best);
            }
        }
    }
    return r;
}

template <typename T>
BasicTensor<T> maxpool2x2_backward(const PoolIndex& index, const BasicTensor<T>& grad_out) {
    if (index.argmax.empty())
        throw UsageError("maxpool backward called without a cached forward index");
    const Shape& in = index.input_shape;
    if (grad_out.shape() != Shape{in.n, in.c, in.h / 2, in.w / 2} ||
        grad_out.size() != index.argmax.size())
        throw InvalidInput("maxpool grad_out shape " + grad_out.shape().str() +
                           " does not match cached forward");
    BasicTensor<T> g(in);
    // Blocks do not overlap, so each input element receives at most one write.
    for (std::size_t i = 0; i < index.argmax.size(); ++i) g[index.argmax[i]] += grad_out[i];
    return g;
}

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input) {
    BasicTensor<T> out(input.shape());
    const std::size_t n = input.size();
    for (std::size_t i = 0; i < n; ++i) out[i] = input[i] > T(0) ? input[i] : T(0);
    return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out) {
    if (input.shape() != grad_out.shape())
        throw InvalidInput("relu grad_out shape " + grad_out.shape().str() +
                           " != input " + input.shape().str());
    BasicTensor<T> g(input.shape());
    const std::size_t n = input.size();
    for (std::size_t i = 0; i < n; ++i) g[i] = input[i] > T(0) ? grad_out[i] : T(0);
    return g;
}

template <typename T>
void sgd_momentum_step(std::span<T> params, std::span<const T> grads, std::span<T> velocity,
                       T lr, T momentum) {
    if (params.size() != grads.size() || params.size() != velocity.size())
        throw InvalidInput("sgd step: parameter, gradient and velocity sizes differ");
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = momentum * velocity[i] - lr * grads[i];
        params[i] += velocity[i];
    }
}

#define QMIREG_INSTANTIATE(T)                                                                  \
    template struct ConvLayer<T>;                                                              \
    template Shape conv2d_output_shape(const Shape&, const ConvLayer<T>&);                     \
    template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const ConvLayer<T>&);        \
    template ConvGrads<T> conv2d_backward(const BasicTensor<T>&, const ConvLayer<T>&,          \
                                          const BasicTensor<T>&);                              \
    template PoolResult<T> maxpool2x2_forward(const BasicTensor<T>&);                          \
    template BasicTensor<T> maxpool2x2_backward(const PoolIndex&, const BasicTensor<T>&);      \
    template BasicTensor<T> relu_forward(const BasicTensor<T>&);                               \
    template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);       \
    template void sgd_momentum_step(std::span<T>, std::span<const T>, std::span<T>, T, T);

QMIREG_INSTANTIATE(float)
QMIREG_INSTANTIATE(double)

#undef QMIREG_INSTANTIATE

} // namespace qmireg::nd

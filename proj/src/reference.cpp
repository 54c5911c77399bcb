#include "qmireg/reference.hpp"

#include "qmireg/error.hpp"

namespace qmireg::nd::reference {

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const ConvLayer<T>& layer) {
    const Shape in = input.shape();
    const Shape os = conv2d_output_shape(in, layer);
    BasicTensor<T> out(os);
    const auto pad = static_cast<std::ptrdiff_t>(layer.pad);
    for (std::size_t n = 0; n < os.n; ++n)
        for (std::size_t oc = 0; oc < os.c; ++oc)
            for (std::size_t oy = 0; oy < os.h; ++oy)
                for (std::size_t ox = 0; ox < os.w; ++ox) {
                    T acc = 0;
                    for (std::size_t ic = 0; ic < in.c; ++ic)
                        for (std::size_t ky = 0; ky < layer.kernel_h(); ++ky)
                            for (std::size_t kx = 0; kx < layer.kernel_w(); ++kx) {
                                const std::ptrdiff_t iy =
                                    static_cast<std::ptrdiff_t>(oy * layer.stride + ky) - pad;
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * layer.stride + kx) - pad;
                                if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(in.h) ||
                                    ix >= static_cast<std::ptrdiff_t>(in.w))
                                    continue;
                                acc += layer.kernel.at(oc, ic, ky, kx) *
                                       input.at(n, ic, static_cast<std::size_t>(iy),
                                                static_cast<std::size_t>(ix));
                            }
                    out.at(n, oc, oy, ox) = acc + layer.bias[oc];
                }
    return out;
}

template <typename T>
BasicTensor<T> maxpool2x2(const BasicTensor<T>& input) {
    const Shape in = input.shape();
    if (in.h % 2 != 0 || in.w % 2 != 0)
        throw InvalidInput("maxpool2x2 needs even spatial dims, got " + in.str());
    BasicTensor<T> out(Shape{in.n, in.c, in.h / 2, in.w / 2});
    for (std::size_t n = 0; n < in.n; ++n)
        for (std::size_t c = 0; c < in.c; ++c)
            for (std::size_t y = 0; y < in.h / 2; ++y)
                for (std::size_t x = 0; x < in.w / 2; ++x) {
                    T best = input.at(n, c, 2 * y, 2 * x);
                    for (std::size_t dy = 0; dy < 2; ++dy)
                        for (std::size_t dx = 0; dx < 2; ++dx)
                            if (input.at(n, c, 2 * y + dy, 2 * x + dx) > best)
                                best = input.at(n, c, 2 * y + dy, 2 * x + dx);
                    out.at(n, c, y, x) = best;
                }
    return out;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
    BasicTensor<T> out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] < T(0) ? T(0) : input[i];
    return out;
}

template BasicTensor<float> conv2d(const BasicTensor<float>&, const ConvLayer<float>&);
template BasicTensor<double> conv2d(const BasicTensor<double>&, const ConvLayer<double>&);
template BasicTensor<float> maxpool2x2(const BasicTensor<float>&);
template BasicTensor<double> maxpool2x2(const BasicTensor<double>&);
template BasicTensor<float> relu(const BasicTensor<float>&);
template BasicTensor<double> relu(const BasicTensor<double>&);

} // namespace qmireg::nd::reference

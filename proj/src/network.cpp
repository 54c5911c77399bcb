#include "qmireg/network.hpp"

#include <cmath>

#include "qmireg/byte_io.hpp"
#include "qmireg/error.hpp"
#include "qmireg/reference.hpp"
#include "qmireg/rng.hpp"

namespace qmireg::model {

std::string_view variant_name(Variant v) { return v == Variant::RF32 ? "rf32" : "rf64"; }

Variant parse_variant(std::string_view name) {
    if (name == "rf32" || name == "RF32") return Variant::RF32;
    if (name == "rf64" || name == "RF64") return Variant::RF64;
    throw InvalidConfig("unknown variant '" + std::string(name) + "' (expected rf32 or rf64)");
}

std::size_t window_size(Variant v) { return v == Variant::RF32 ? 32 : 64; }
std::size_t output_stride(Variant v) { return v == Variant::RF32 ? 16 : 32; }

std::size_t NetworkSpec::parameter_count() const {
    std::size_t total = 0;
    for (const Layer& l : layers) total += l.conv.parameter_count();
    return total;
}

std::size_t NetworkSpec::embedding_dim() const {
    const std::size_t side = window_size(variant) / output_stride(variant);
    return layers.at(embedding_layer_index).conv.out_channels() * side * side;
}

namespace {

nd::ConvLayer<float> make_conv(std::size_t out, std::size_t in, std::size_t k, std::size_t stride,
                               std::size_t pad, double bound, Rng& rng) {
    nd::ConvLayer<float> conv;
    conv.kernel = Tensor(nd::Shape{out, in, k, k});
    for (float& w : conv.kernel.values()) w = static_cast<float>(rng.uniform(-bound, bound));
    conv.bias.assign(out, 0.0f);
    conv.stride = stride;
    conv.pad = pad;
    return conv;
}

void require_even_grid(const NetworkSpec& net, const nd::Shape& in) {
    const std::size_t s = output_stride(net.variant);
    if (in.h % s != 0 || in.w % s != 0 || in.h < window_size(net.variant) ||
        in.w < window_size(net.variant))
        throw InvalidInput("network input " + in.str() + " must be at least " +
                           std::to_string(window_size(net.variant)) + " px and a multiple of " +
                           std::to_string(s) + " px in each spatial dim");
}

} // namespace

NetworkSpec build_model(Variant variant, std::uint64_t seed, const ArchConfig& arch) {
    Rng rng(seed);
    NetworkSpec net;
    net.variant = variant;
    const std::size_t k = arch.feature_kernel;
    std::size_t in = 3;
    for (std::size_t i = 0; i < 4; ++i) {
        const std::size_t stride = (i == 0 && variant == Variant::RF64) ? 2 : 1;
        const double fan_in = static_cast<double>(in * k * k);
        net.layers.push_back(
            Layer{make_conv(arch.channels[i], in, k, stride, k / 2, std::sqrt(6.0 / fan_in), rng),
                  true, true});
        in = arch.channels[i];
    }
    const std::size_t kc = arch.classifier_kernel;
    const double fan_in = static_cast<double>(in * kc * kc);
    net.layers.push_back(Layer{make_conv(2, in, kc, 1, 0, std::sqrt(3.0 / fan_in), rng), false, false});
    net.embedding_layer_index = 3;
    return net;
}

std::size_t expected_parameter_count(Variant, const ArchConfig& arch) {
    // Stride does not change parameter counts, so both variants agree.
    const std::size_t k2 = arch.feature_kernel * arch.feature_kernel;
    std::size_t total = 0, in = 3;
    for (std::size_t c : arch.channels) {
        total += c * in * k2 + c;
        in = c;
    }
    total += 2 * in * arch.classifier_kernel * arch.classifier_kernel + 2;
    return total;
}

OutputGeometry output_geometry(Variant variant, std::size_t input_h, std::size_t input_w) {
    const std::size_t win = window_size(variant), stride = output_stride(variant);
    if (input_h < win || input_w < win)
        throw InvalidInput("input " + std::to_string(input_w) + "x" + std::to_string(input_h) +
                           " is smaller than the " + std::to_string(win) + "px window");
    return OutputGeometry{(input_h - win) / stride + 1, (input_w - win) / stride + 1, stride, win};
}

Tensor forward(const NetworkSpec& net, const Tensor& input) {
    require_even_grid(net, input.shape());
    Tensor x = input;
    for (const Layer& layer : net.layers) {
        x = nd::conv2d_forward(x, layer.conv);
        if (layer.relu) x = nd::relu_forward(x);
        if (layer.pool) x = nd::maxpool2x2_forward(x).output;
    }
    return x;
}

Tensor forward_reference(const NetworkSpec& net, const Tensor& input) {
    require_even_grid(net, input.shape());
    Tensor x = input;
    for (const Layer& layer : net.layers) {
        x = nd::reference::conv2d(x, layer.conv);
        if (layer.relu) x = nd::reference::relu(x);
        if (layer.pool) x = nd::reference::maxpool2x2(x);
    }
    return x;
}

ForwardTrace forward_trace(const NetworkSpec& net, const Tensor& input) {
    require_even_grid(net, input.shape());
    ForwardTrace t;
    t.layers.resize(net.layers.size());
    Tensor x = input;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const Layer& layer = net.layers[i];
        LayerCache& cache = t.layers[i];
        cache.input = std::move(x);
        cache.pre_activation = nd::conv2d_forward(cache.input, layer.conv);
        x = layer.relu ? nd::relu_forward(cache.pre_activation) : cache.pre_activation;
        if (layer.pool) {
            auto pooled = nd::maxpool2x2_forward(x);
            x = std::move(pooled.output);
            cache.pool = std::move(pooled.index);
        }
        if (i == net.embedding_layer_index) t.embedding = x;
    }
    t.scores = std::move(x);
    return t;
}

ModelGradients backward(const NetworkSpec& net, const ForwardTrace& trace,
                        const Tensor& grad_scores, const Tensor* grad_embedding) {
    if (trace.layers.size() != net.layers.size() || trace.scores.empty())
        throw UsageError("backward called without a matching forward trace");
    if (grad_scores.shape() != trace.scores.shape())
        throw InvalidInput("grad_scores shape " + grad_scores.shape().str() +
                           " != forward scores " + trace.scores.shape().str());
    if (grad_embedding && grad_embedding->shape() != trace.embedding.shape())
        throw InvalidInput("grad_embedding shape " + grad_embedding->shape().str() +
                           " != embedding " + trace.embedding.shape().str());

    ModelGradients g;
    g.kernel.resize(net.layers.size());
    g.bias.resize(net.layers.size());
    Tensor grad = grad_scores;
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const Layer& layer = net.layers[li];
        const LayerCache& cache = trace.layers[li];
        if (li == net.embedding_layer_index && grad_embedding) {
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += (*grad_embedding)[i];
        }
        if (layer.pool) grad = nd::maxpool2x2_backward(cache.pool, grad);
        if (layer.relu) grad = nd::relu_backward(cache.pre_activation, grad);
        auto cg = nd::conv2d_backward(cache.input, layer.conv, grad);
        g.kernel[li] = std::move(cg.kernel);
        g.bias[li] = std::move(cg.bias);
        if (li > 0) grad = std::move(cg.input);
    }
    return g;
}

std::vector<std::uint8_t> serialize(const NetworkSpec& net) {
    io::ByteWriter w;
    w.bytes("VGGH");
    w.u32(kModelFormatVersion);
    w.u8(static_cast<std::uint8_t>(net.variant));
    w.u32(static_cast<std::uint32_t>(net.embedding_layer_index));
    w.u32(static_cast<std::uint32_t>(net.layers.size()));
    for (const Layer& l : net.layers) {
        const nd::Shape& k = l.conv.kernel.shape();
        for (std::size_t v : {k.n, k.c, k.h, k.w, l.conv.stride, l.conv.pad})
            w.u32(static_cast<std::uint32_t>(v));
        w.u8(l.relu ? 1 : 0);
        w.u8(l.pool ? 1 : 0);
        w.f32s(l.conv.kernel.values());
        w.f32s(l.conv.bias);
    }
    return std::move(w.buffer());
}

NetworkSpec deserialize(const std::vector<std::uint8_t>& bytes) {
    io::ByteReader r(bytes);
    if (r.bytes(4, "magic") != "VGGH") throw ParseError("bad model magic (expected VGGH)", 0);
    const std::size_t version_at = r.offset();
    if (const auto v = r.u32("version"); v != kModelFormatVersion)
        throw ParseError("unsupported model format version " + std::to_string(v), version_at);
    NetworkSpec net;
    const std::size_t variant_at = r.offset();
    const std::uint8_t variant = r.u8("variant");
    if (variant > 1) throw ParseError("unknown variant code " + std::to_string(variant), variant_at);
    net.variant = static_cast<Variant>(variant);
    net.embedding_layer_index = r.u32("embedding index");
    const std::size_t count_at = r.offset();
    const std::uint32_t count = r.u32("layer count");
    if (count == 0 || count > 64 || net.embedding_layer_index >= count)
        throw ParseError("implausible layer count " + std::to_string(count), count_at);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::size_t layer_at = r.offset();
        std::uint32_t d[6];
        for (auto& v : d) v = r.u32("layer dims");
        if (d[0] == 0 || d[1] == 0 || d[2] == 0 || d[3] == 0 || d[4] == 0 ||
            static_cast<std::uint64_t>(d[0]) * d[1] * d[2] * d[3] > (1u << 26))
            throw ParseError("invalid dims for layer " + std::to_string(i), layer_at);
        Layer l;
        l.relu = r.u8("relu flag") != 0;
        l.pool = r.u8("pool flag") != 0;
        l.conv.kernel = Tensor(nd::Shape{d[0], d[1], d[2], d[3]});
        l.conv.stride = d[4];
        l.conv.pad = d[5];
        r.need(4 * (l.conv.kernel.size() + d[0]), "layer weights");
        for (float& v : l.conv.kernel.values()) v = r.f32("kernel");
        l.conv.bias.resize(d[0]);
        for (float& v : l.conv.bias) v = r.f32("bias");
        net.layers.push_back(std::move(l));
    }
    if (r.remaining() != 0)
        throw ParseError(std::to_string(r.remaining()) + " trailing bytes after model", r.offset());
    return net;
}

void save_model(const NetworkSpec& net, const std::filesystem::path& path) {
    io::write_file(path, serialize(net));
}

NetworkSpec load_model(const std::filesystem::path& path) { return deserialize(io::read_file(path)); }

} // namespace qmireg::model

#pragma once

// The five-convolution VGG-1080p variants: four 3x3 conv+ReLU+pool stages
// followed by a 2x2 two-channel classifier conv. RF32 sees 32x32 windows at
// an output stride of 16 px; RF64 doubles both by striding the first conv.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "qmireg/kernels.hpp"
#include "qmireg/tensor.hpp"

namespace qmireg::model {

using nd::Tensor;

enum class Variant : std::uint8_t { RF32 = 0, RF64 = 1 };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);  // "rf32" / "rf64"

/// Training-size input side and receptive field: 32 or 64.
std::size_t window_size(Variant v);
/// Distance in input pixels between neighboring output cells: 16 or 32.
std::size_t output_stride(Variant v);

/// Pruned channel widths of the four feature convs. The classifier always has 2.
struct ArchConfig {
    std::array<std::size_t, 4> channels{16, 16, 32, 32};
    std::size_t feature_kernel = 3;
    std::size_t classifier_kernel = 2;
};

struct Layer {
    nd::ConvLayer<float> conv;
    bool relu = true;
    bool pool = true;

    friend bool operator==(const Layer&, const Layer&) = default;
};

struct NetworkSpec {
    Variant variant = Variant::RF32;
    std::vector<Layer> layers;
    /// Layer whose post-ReLU, post-pool activations form the embedding.
    std::size_t embedding_layer_index = 3;

    std::size_t parameter_count() const;
    /// Flattened embedding length for a training-size input.
    std::size_t embedding_dim() const;

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

using TrainedModel = NetworkSpec;

/// Seeded fan-in-scaled uniform weights, zero biases.
NetworkSpec build_model(Variant variant, std::uint64_t seed, const ArchConfig& arch = {});

/// Closed-form parameter count of the layer list `build_model` produces.
std::size_t expected_parameter_count(Variant variant, const ArchConfig& arch = {});

struct OutputGeometry {
    std::size_t grid_h = 0;
    std::size_t grid_w = 0;
    std::size_t stride_px = 0;
    std::size_t window_px = 0;

    friend bool operator==(const OutputGeometry&, const OutputGeometry&) = default;
};

/// grid = floor((dim - window) / stride) + 1 per axis; throws InvalidInput when
/// the input is smaller than the window.
OutputGeometry output_geometry(Variant variant, std::size_t input_h, std::size_t input_w);

/// Scores (N, 2, grid_h, grid_w) for inputs whose spatial dims are multiples
/// of the output stride.
Tensor forward(const NetworkSpec& net, const Tensor& input);

/// Same computation using the serial reference kernels.
Tensor forward_reference(const NetworkSpec& net, const Tensor& input);

struct LayerCache {
    Tensor input;
    Tensor pre_activation;
    nd::PoolIndex pool;
};

struct ForwardTrace {
    std::vector<LayerCache> layers;
    Tensor embedding;  // (N, C, h, w) output of the embedding layer
    Tensor scores;
};

ForwardTrace forward_trace(const NetworkSpec& net, const Tensor& input);

struct ModelGradients {
    std::vector<Tensor> kernel;
    std::vector<std::vector<float>> bias;
};

/// Backpropagates `grad_scores` from the head. `grad_embedding`, if given, is
/// added at the embedding layer's output and therefore reaches only the
/// layers up to and including the embedding layer.
ModelGradients backward(const NetworkSpec& net, const ForwardTrace& trace,
                        const Tensor& grad_scores, const Tensor* grad_embedding = nullptr);

/// Binary model file: "VGGH", u32 version, u8 variant, u32 embedding index,
/// u32 layer count, then per layer u32 (out, in, kh, kw, stride, pad), u8 relu,
/// u8 pool, f32 kernel values, f32 biases. All little-endian.
std::vector<std::uint8_t> serialize(const NetworkSpec& net);
NetworkSpec deserialize(const std::vector<std::uint8_t>& bytes);

void save_model(const NetworkSpec& net, const std::filesystem::path& path);
NetworkSpec load_model(const std::filesystem::path& path);

inline constexpr std::uint32_t kModelFormatVersion = 1;

} // namespace qmireg::model

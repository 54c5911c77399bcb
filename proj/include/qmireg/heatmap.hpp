#pragma once

// Whole-frame heatmaps. The network is applied once to the full image; cell
// (i, j) scores the window whose top-left corner is (i*stride, j*stride).
// Pixels beyond the last full stride on the right/bottom are dropped.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qmireg/dataset.hpp"
#include "qmireg/network.hpp"

namespace qmireg::heatmap {

struct Heatmap {
    model::Variant variant = model::Variant::RF32;
    model::OutputGeometry geometry;
    std::size_t source_h = 0;
    std::size_t source_w = 0;
    std::vector<float> grid;  // grid_h x grid_w x 2, channel fastest

    float score(std::size_t i, std::size_t j, std::size_t channel) const {
        return grid[(i * geometry.grid_w + j) * 2 + channel];
    }

    friend bool operator==(const Heatmap&, const Heatmap&) = default;
};

/// `image` is (1, 3, H, W). Throws InvalidInput if smaller than the window.
Heatmap fully_conv_inference(const model::NetworkSpec& net, const nd::Tensor& image);

/// Extracts every stride-aligned window and runs the training-size forward
/// pass on it with the serial reference kernels. Slow; used as a test oracle.
Heatmap sliding_window_oracle(const model::NetworkSpec& net, const nd::Tensor& image);

enum class ChannelPolicy {
    Difference,  // s_pos - s_neg
    Positive,    // s_pos
};

/// One pixel per grid cell, min-max normalized to 0..255. A constant grid maps to 128.
data::GrayImage render_heatmap(const Heatmap& hm, ChannelPolicy policy = ChannelPolicy::Difference);

/// Heatmap upscaled to the source size (nearest window center) and blended
/// 50/50 with the source luminance.
data::GrayImage render_overlay(const Heatmap& hm, const data::RgbImage& source,
                               ChannelPolicy policy = ChannelPolicy::Difference);

/// Text header ("HMAP 1", variant, grid, stride, window, source, "end") followed
/// by grid_h*grid_w*2 little-endian f32 values.
std::vector<std::uint8_t> encode_heatmap(const Heatmap& hm);
Heatmap decode_heatmap(std::span<const std::uint8_t> bytes);
void save_heatmap(const Heatmap& hm, const std::filesystem::path& path);
Heatmap load_heatmap(const std::filesystem::path& path);

struct BenchReport {
    model::Variant variant = model::Variant::RF32;
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t frames = 0;
    double wall_seconds = 0.0;
    double fps = 0.0;

    friend bool operator==(const BenchReport&, const BenchReport&) = default;
};

/// Times `n_frames` full-frame inferences on synthetic frames after `warmup`
/// untimed ones.
BenchReport benchmark_fps(const model::NetworkSpec& net, std::size_t width, std::size_t height,
                          std::size_t n_frames, std::size_t warmup = 1);

std::string bench_report_text(const BenchReport& r);
BenchReport parse_bench_report(const std::string& text);

} // namespace qmireg::heatmap

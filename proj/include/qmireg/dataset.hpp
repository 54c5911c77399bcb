#pragma once

// Packed binary datasets (PIDS), the deterministic synthetic generator used
// for desk-scale experiments, and PPM/PGM image files.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "qmireg/tensor.hpp"

namespace qmireg::data {

/// "PIDS", then u32 count, h, w, channels (= 3), little-endian; then per
/// sample one label byte followed by h*w interleaved RGB bytes, row-major.
struct PackedDataset {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> labels;
    std::vector<std::uint8_t> pixels;  // count * h * w * 3

    static constexpr std::size_t kChannels = 3;
    static constexpr std::size_t kHeaderSize = 20;

    std::size_t size() const { return labels.size(); }
    std::size_t image_bytes() const { return height * width * kChannels; }
    std::span<const std::uint8_t> image(std::size_t i) const {
        return std::span<const std::uint8_t>(pixels).subspan(i * image_bytes(), image_bytes());
    }
    std::size_t count_label(std::uint8_t label) const;

    friend bool operator==(const PackedDataset&, const PackedDataset&) = default;
};

std::vector<std::uint8_t> encode_packed(const PackedDataset& ds);
/// Throws ParseError naming the offending offset (and record for bad labels).
PackedDataset decode_packed(std::span<const std::uint8_t> bytes);

void write_packed(const PackedDataset& ds, const std::filesystem::path& path);
PackedDataset load_packed(const std::filesystem::path& path);

/// Selected samples as a (N, 3, h, w) tensor scaled to [0, 1].
nd::Tensor to_tensor(const PackedDataset& ds, std::span<const std::size_t> indices);
std::vector<int> labels_of(const PackedDataset& ds, std::span<const std::size_t> indices);

/// Class 1 images contain one bright disc, class 0 images the same amount of
/// bright ink drawn as thin line segments, both over textured noise with a
/// random global brightness. Per-pixel first-order statistics of the two
/// classes nearly coincide, so a linear model on raw pixels does poorly while
/// a small conv net separates them.
struct SynthSpec {
    std::size_t image_size = 32;
    std::size_t count_per_class = 1000;
    std::uint64_t seed = 0;
};

/// Samples alternate label 0, 1, 0, 1, ... so classes are exactly balanced.
PackedDataset generate_synthetic(const SynthSpec& spec);

/// Seed used for the held-out split that accompanies a training seed.
std::uint64_t test_split_seed(std::uint64_t train_seed);

struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> rgb;  // interleaved, row-major

    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Binary P6 with maxval 255.
RgbImage decode_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_ppm(const RgbImage& img);
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const RgbImage& img, const std::filesystem::path& path);

/// Binary P5 with maxval 255.
std::vector<std::uint8_t> encode_pgm(const GrayImage& img);
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);
void write_pgm(const GrayImage& img, const std::filesystem::path& path);

/// (1, 3, h, w) tensor scaled to [0, 1].
nd::Tensor image_to_tensor(const RgbImage& img);
RgbImage sample_image(const PackedDataset& ds, std::size_t i);

} // namespace qmireg::data

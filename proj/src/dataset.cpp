#include "qmireg/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "qmireg/byte_io.hpp"
#include "qmireg/error.hpp"
#include "qmireg/rng.hpp"

namespace qmireg::data {

std::size_t PackedDataset::count_label(std::uint8_t label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

std::vector<std::uint8_t> encode_packed(const PackedDataset& ds) {
    if (ds.pixels.size() != ds.size() * ds.image_bytes())
        throw InvalidInput("packed dataset pixel buffer does not match count*h*w*3");
    io::ByteWriter w;
    w.bytes("PIDS");
    w.u32(static_cast<std::uint32_t>(ds.size()));
    w.u32(static_cast<std::uint32_t>(ds.height));
    w.u32(static_cast<std::uint32_t>(ds.width));
    w.u32(PackedDataset::kChannels);
    auto& buf = w.buffer();
    buf.reserve(PackedDataset::kHeaderSize + ds.size() * (1 + ds.image_bytes()));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        buf.push_back(ds.labels[i]);
        const auto img = ds.image(i);
        buf.insert(buf.end(), img.begin(), img.end());
    }
    return std::move(buf);
}

PackedDataset decode_packed(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes);
    if (r.bytes(4, "magic") != "PIDS") throw ParseError("bad dataset magic (expected PIDS)", 0);
    PackedDataset ds;
    const std::uint32_t count = r.u32("count");
    ds.height = r.u32("height");
    ds.width = r.u32("width");
    const std::size_t channels_at = r.offset();
    if (const auto ch = r.u32("channels"); ch != PackedDataset::kChannels)
        throw ParseError("expected 3 channels, header says " + std::to_string(ch), channels_at);
    if (ds.height == 0 || ds.width == 0) throw ParseError("zero image dimension in header", 8);
    const std::size_t record = 1 + ds.image_bytes();
    const std::size_t expected = PackedDataset::kHeaderSize + count * record;
    if (bytes.size() != expected)
        throw ParseError("dataset length mismatch: expected " + std::to_string(expected) +
                             " bytes for " + std::to_string(count) + " records, found " +
                             std::to_string(bytes.size()),
                         std::min(bytes.size(), expected));
    ds.labels.resize(count);
    ds.pixels.resize(count * ds.image_bytes());
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t at = PackedDataset::kHeaderSize + i * record;
        const std::uint8_t label = bytes[at];
        if (label > 1)
            throw ParseError("record " + std::to_string(i) + " has label byte " +
                                 std::to_string(label) + " (expected 0 or 1)",
                             at);
        ds.labels[i] = label;
        std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(at + 1), ds.image_bytes(),
                    ds.pixels.begin() + static_cast<std::ptrdiff_t>(i * ds.image_bytes()));
    }
    return ds;
}

void write_packed(const PackedDataset& ds, const std::filesystem::path& path) {
    io::write_file(path, encode_packed(ds));
}

PackedDataset load_packed(const std::filesystem::path& path) {
    return decode_packed(io::read_file(path));
}

nd::Tensor to_tensor(const PackedDataset& ds, std::span<const std::size_t> indices) {
    const std::size_t h = ds.height, w = ds.width;
    nd::Tensor t(nd::Shape{indices.size(), 3, h, w});
    for (std::size_t n = 0; n < indices.size(); ++n) {
        const auto img = ds.image(indices[n]);
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                for (std::size_t c = 0; c < 3; ++c)
                    t.at(n, c, y, x) = static_cast<float>(img[(y * w + x) * 3 + c]) / 255.0f;
    }
    return t;
}

std::vector<int> labels_of(const PackedDataset& ds, std::span<const std::size_t> indices) {
    std::vector<int> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) out[i] = ds.labels[indices[i]];
    return out;
}

namespace {

struct Canvas {
    std::size_t side;
    std::vector<double> rgb;  // side*side*3

    double& at(std::size_t y, std::size_t x, std::size_t c) { return rgb[(y * side + x) * 3 + c]; }
    void add(std::ptrdiff_t y, std::ptrdiff_t x, const double (&ink)[3]) {
        if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(side) ||
            x >= static_cast<std::ptrdiff_t>(side))
            return;
        for (std::size_t c = 0; c < 3; ++c)
            at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) += ink[c];
    }
};

void paint_texture(Canvas& cv, Rng& rng) {
    const double base = rng.uniform(0.15, 0.55);
    double tint[3];
    for (double& t : tint) t = rng.uniform(-0.05, 0.05);
    // Two random gratings plus per-pixel noise.
    double fx[2], fy[2], ph[2], amp[2];
    for (int g = 0; g < 2; ++g) {
        const double freq = rng.uniform(0.15, 0.9);
        const double angle = rng.uniform(0.0, 3.141592653589793);
        fx[g] = freq * std::cos(angle);
        fy[g] = freq * std::sin(angle);
        ph[g] = rng.uniform(0.0, 6.283185307179586);
        amp[g] = rng.uniform(0.02, 0.10);
    }
    for (std::size_t y = 0; y < cv.side; ++y)
        for (std::size_t x = 0; x < cv.side; ++x) {
            double v = base;
            for (int g = 0; g < 2; ++g)
                v += amp[g] * std::sin(fx[g] * static_cast<double>(x) +
                                       fy[g] * static_cast<double>(y) + ph[g]);
            for (std::size_t c = 0; c < 3; ++c) cv.at(y, x, c) = v + tint[c] + 0.06 * rng.normal();
        }
}

void paint_disc(Canvas& cv, Rng& rng, double radius, const double (&ink)[3]) {
    const double s = static_cast<double>(cv.side);
    const double cy = rng.uniform(radius, s - radius), cx = rng.uniform(radius, s - radius);
    for (std::size_t y = 0; y < cv.side; ++y)
        for (std::size_t x = 0; x < cv.side; ++x) {
            const double dy = static_cast<double>(y) + 0.5 - cy;
            const double dx = static_cast<double>(x) + 0.5 - cx;
            if (dy * dy + dx * dx <= radius * radius)
                cv.add(static_cast<std::ptrdiff_t>(y), static_cast<std::ptrdiff_t>(x), ink);
        }
}

// Thin axis-aligned strokes carrying about the same amount of ink as a disc of
// `radius`, placed in the same region a disc would occupy.
void paint_strokes(Canvas& cv, Rng& rng, double radius, const double (&ink)[3]) {
    const double s = static_cast<double>(cv.side);
    double budget = 3.141592653589793 * radius * radius;
    while (budget > 0.0) {
        const bool horizontal = rng.below(2) == 0;
        const auto len = static_cast<std::ptrdiff_t>(
            std::min(budget, std::round(rng.uniform(1.2 * radius, 3.0 * radius))));
        const double cy = rng.uniform(radius, s - radius), cx = rng.uniform(radius, s - radius);
        const auto y0 = static_cast<std::ptrdiff_t>(horizontal ? cy : cy - static_cast<double>(len) / 2);
        const auto x0 = static_cast<std::ptrdiff_t>(horizontal ? cx - static_cast<double>(len) / 2 : cx);
        for (std::ptrdiff_t i = 0; i < std::max<std::ptrdiff_t>(len, 1); ++i)
            cv.add(horizontal ? y0 : y0 + i, horizontal ? x0 + i : x0, ink);
        budget -= static_cast<double>(std::max<std::ptrdiff_t>(len, 1));
    }
}

} // namespace

PackedDataset generate_synthetic(const SynthSpec& spec) {
    if (spec.image_size != 32 && spec.image_size != 64)
        throw InvalidConfig("synthetic image size must be 32 or 64, got " +
                            std::to_string(spec.image_size));
    const std::size_t side = spec.image_size;
    const double scale = static_cast<double>(side) / 32.0;
    PackedDataset ds;
    ds.height = ds.width = side;
    const std::size_t count = 2 * spec.count_per_class;
    ds.labels.resize(count);
    ds.pixels.resize(count * ds.image_bytes());
    Rng rng(spec.seed);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint8_t label = static_cast<std::uint8_t>(i % 2);
        Canvas cv{side, std::vector<double>(side * side * 3)};
        paint_texture(cv, rng);
        const double radius = rng.uniform(3.0, 6.5) * scale;
        const double strength = rng.uniform(0.25, 0.45);
        double ink[3];
        for (double& v : ink) v = strength + rng.uniform(-0.03, 0.03);
        if (label == 1)
            paint_disc(cv, rng, radius, ink);
        else
            paint_strokes(cv, rng, radius, ink);
        ds.labels[i] = label;
        std::uint8_t* dst = ds.pixels.data() + i * ds.image_bytes();
        for (std::size_t k = 0; k < cv.rgb.size(); ++k)
            dst[k] = static_cast<std::uint8_t>(std::lround(std::clamp(cv.rgb[k], 0.0, 1.0) * 255.0));
    }
    return ds;
}

std::uint64_t test_split_seed(std::uint64_t train_seed) {
    return train_seed ^ 0x9E3779B97F4A7C15ull;
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string pnm_token(io::ByteReader& r) {
    std::string tok;
    for (;;) {
        if (r.remaining() == 0) throw ParseError("truncated PNM header", r.offset());
        const char c = static_cast<char>(r.u8("header"));
        if (c == '#') {
            while (r.remaining() > 0 && r.u8("comment") != '\n') {
            }
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(c);
    }
}

struct PnmHeader {
    std::size_t width, height;
};

PnmHeader read_pnm_header(io::ByteReader& r, const char* magic) {
    const std::string m = pnm_token(r);
    if (m != magic) throw ParseError("expected " + std::string(magic) + " magic, got '" + m + "'", 0);
    std::size_t vals[3];
    for (std::size_t& v : vals) {
        const std::size_t at = r.offset();
        const std::string t = pnm_token(r);
        if (t.empty() || !std::all_of(t.begin(), t.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); }))
            throw ParseError("bad PNM header field '" + t + "'", at);
        v = std::stoul(t);
    }
    if (vals[2] != 255) throw ParseError("only maxval 255 is supported", r.offset());
    if (vals[0] == 0 || vals[1] == 0) throw ParseError("zero image dimension", r.offset());
    return {vals[0], vals[1]};
}

} // namespace

RgbImage decode_ppm(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes);
    const PnmHeader h = read_pnm_header(r, "P6");
    RgbImage img{h.width, h.height, {}};
    const std::size_t n = h.width * h.height * 3;
    r.need(n, "PPM pixels");
    img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.offset()),
                   bytes.begin() + static_cast<std::ptrdiff_t>(r.offset() + n));
    return img;
}

std::vector<std::uint8_t> encode_ppm(const RgbImage& img) {
    io::ByteWriter w;
    w.bytes("P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n");
    w.buffer().insert(w.buffer().end(), img.rgb.begin(), img.rgb.end());
    return std::move(w.buffer());
}

RgbImage read_ppm(const std::filesystem::path& path) { return decode_ppm(io::read_file(path)); }

void write_ppm(const RgbImage& img, const std::filesystem::path& path) {
    io::write_file(path, encode_ppm(img));
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
    io::ByteWriter w;
    w.bytes("P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n");
    w.buffer().insert(w.buffer().end(), img.pixels.begin(), img.pixels.end());
    return std::move(w.buffer());
}

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes);
    const PnmHeader h = read_pnm_header(r, "P5");
    GrayImage img{h.width, h.height, {}};
    const std::size_t n = h.width * h.height;
    r.need(n, "PGM pixels");
    img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.offset()),
                      bytes.begin() + static_cast<std::ptrdiff_t>(r.offset() + n));
    return img;
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
    io::write_file(path, encode_pgm(img));
}

nd::Tensor image_to_tensor(const RgbImage& img) {
    nd::Tensor t(nd::Shape{1, 3, img.height, img.width});
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                t.at(0, c, y, x) = static_cast<float>(img.rgb[(y * img.width + x) * 3 + c]) / 255.0f;
    return t;
}

RgbImage sample_image(const PackedDataset& ds, std::size_t i) {
    const auto px = ds.image(i);
    return RgbImage{ds.width, ds.height, std::vector<std::uint8_t>(px.begin(), px.end())};
}

} // namespace qmireg::data

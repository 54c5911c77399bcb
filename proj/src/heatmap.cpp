#include "qmireg/heatmap.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "qmireg/byte_io.hpp"
#include "qmireg/error.hpp"
#include "qmireg/rng.hpp"
#include "qmireg/text_format.hpp"

namespace qmireg::heatmap {

namespace {

void check_image(const model::NetworkSpec& net, const nd::Tensor& image) {
    const nd::Shape& s = image.shape();
    if (s.n != 1 || s.c != 3)
        throw InvalidInput("heatmap input must be a single RGB image, got " + s.str());
    model::output_geometry(net.variant, s.h, s.w);  // throws when undersized
}

nd::Tensor crop(const nd::Tensor& image, std::size_t h, std::size_t w) {
    const nd::Shape& s = image.shape();
    if (h == s.h && w == s.w) return image;
    nd::Tensor out(nd::Shape{1, s.c, h, w});
    for (std::size_t c = 0; c < s.c; ++c)
        for (std::size_t y = 0; y < h; ++y)
            std::copy_n(image.data() + image.offset(0, c, y, 0), w, out.data() + out.offset(0, c, y, 0));
    return out;
}

std::vector<double> cell_values(const Heatmap& hm, ChannelPolicy policy) {
    std::vector<double> v(hm.geometry.grid_h * hm.geometry.grid_w);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double pos = hm.grid[2 * i + 1], neg = hm.grid[2 * i];
        v[i] = policy == ChannelPolicy::Difference ? pos - neg : pos;
    }
    return v;
}

std::vector<std::uint8_t> normalize(const std::vector<double>& v) {
    std::vector<std::uint8_t> out(v.size(), 128);
    if (v.empty()) return out;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) return out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = static_cast<std::uint8_t>(std::lround(255.0 * (v[i] - *lo) / range));
    return out;
}

std::size_t nearest_cell(std::size_t px, const model::OutputGeometry& g, std::size_t cells) {
    const double first_center = static_cast<double>(g.window_px) / 2.0;
    const double pos = (static_cast<double>(px) + 0.5 - first_center) / static_cast<double>(g.stride_px);
    const double idx = std::round(pos);
    return static_cast<std::size_t>(std::clamp(idx, 0.0, static_cast<double>(cells - 1)));
}

} // namespace

Heatmap fully_conv_inference(const model::NetworkSpec& net, const nd::Tensor& image) {
    check_image(net, image);
    const nd::Shape& s = image.shape();
    const std::size_t stride = model::output_stride(net.variant);
    const nd::Tensor cropped = crop(image, s.h / stride * stride, s.w / stride * stride);
    const nd::Tensor scores = model::forward(net, cropped);

    Heatmap hm;
    hm.variant = net.variant;
    hm.geometry = model::output_geometry(net.variant, s.h, s.w);
    hm.source_h = s.h;
    hm.source_w = s.w;
    const nd::Shape& os = scores.shape();
    if (os.h != hm.geometry.grid_h || os.w != hm.geometry.grid_w)
        throw std::logic_error("fully convolutional grid " + os.str() +
                               " disagrees with output geometry");
    hm.grid.resize(os.h * os.w * 2);
    for (std::size_t i = 0; i < os.h; ++i)
        for (std::size_t j = 0; j < os.w; ++j)
            for (std::size_t k = 0; k < 2; ++k)
                hm.grid[(i * os.w + j) * 2 + k] = scores.at(0, k, i, j);
    return hm;
}

Heatmap sliding_window_oracle(const model::NetworkSpec& net, const nd::Tensor& image) {
    check_image(net, image);
    const nd::Shape& s = image.shape();
    Heatmap hm;
    hm.variant = net.variant;
    hm.geometry = model::output_geometry(net.variant, s.h, s.w);
    hm.source_h = s.h;
    hm.source_w = s.w;
    const std::size_t win = hm.geometry.window_px, stride = hm.geometry.stride_px;
    hm.grid.resize(hm.geometry.grid_h * hm.geometry.grid_w * 2);
    nd::Tensor window(nd::Shape{1, 3, win, win});
    for (std::size_t i = 0; i < hm.geometry.grid_h; ++i)
        for (std::size_t j = 0; j < hm.geometry.grid_w; ++j) {
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t y = 0; y < win; ++y)
                    for (std::size_t x = 0; x < win; ++x)
                        window.at(0, c, y, x) = image.at(0, c, i * stride + y, j * stride + x);
            const nd::Tensor out = model::forward_reference(net, window);
            for (std::size_t k = 0; k < 2; ++k)
                hm.grid[(i * hm.geometry.grid_w + j) * 2 + k] = out.at(0, k, 0, 0);
        }
    return hm;
}

data::GrayImage render_heatmap(const Heatmap& hm, ChannelPolicy policy) {
    return data::GrayImage{hm.geometry.grid_w, hm.geometry.grid_h, normalize(cell_values(hm, policy))};
}

data::GrayImage render_overlay(const Heatmap& hm, const data::RgbImage& source, ChannelPolicy policy) {
    if (source.width != hm.source_w || source.height != hm.source_h)
        throw InvalidInput("overlay source is " + std::to_string(source.width) + "x" +
                           std::to_string(source.height) + " but the heatmap was computed on " +
                           std::to_string(hm.source_w) + "x" + std::to_string(hm.source_h));
    const std::vector<std::uint8_t> cells = normalize(cell_values(hm, policy));
    data::GrayImage out{source.width, source.height, std::vector<std::uint8_t>(source.width * source.height)};
    for (std::size_t y = 0; y < source.height; ++y) {
        const std::size_t ci = nearest_cell(y, hm.geometry, hm.geometry.grid_h);
        for (std::size_t x = 0; x < source.width; ++x) {
            const std::size_t cj = nearest_cell(x, hm.geometry, hm.geometry.grid_w);
            const std::uint8_t* p = source.rgb.data() + (y * source.width + x) * 3;
            const double lum = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
            const double heat = cells[ci * hm.geometry.grid_w + cj];
            out.pixels[y * source.width + x] = static_cast<std::uint8_t>(std::lround(0.5 * lum + 0.5 * heat));
        }
    }
    return out;
}

std::vector<std::uint8_t> encode_heatmap(const Heatmap& hm) {
    const auto& g = hm.geometry;
    if (hm.grid.size() != g.grid_h * g.grid_w * 2)
        throw InvalidInput("heatmap grid length does not match its geometry");
    io::ByteWriter w;
    w.bytes("HMAP 1\nvariant " + std::string(model::variant_name(hm.variant)) + "\ngrid " +
            std::to_string(g.grid_h) + " " + std::to_string(g.grid_w) + "\nstride " +
            std::to_string(g.stride_px) + "\nwindow " + std::to_string(g.window_px) + "\nsource " +
            std::to_string(hm.source_h) + " " + std::to_string(hm.source_w) + "\nend\n");
    w.f32s(hm.grid);
    return std::move(w.buffer());
}

Heatmap decode_heatmap(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes);
    auto line = [&](const char* what) {
        std::string s;
        for (;;) {
            const char c = static_cast<char>(r.u8(what));
            if (c == '\n') return s;
            s.push_back(c);
            if (s.size() > 128) throw ParseError(std::string("overlong header line in ") + what, r.offset());
        }
    };
    auto fields = [&](const char* key, std::size_t count) {
        const std::size_t at = r.offset();
        std::istringstream in(line(key));
        std::string k;
        in >> k;
        if (k != key) throw ParseError("expected '" + std::string(key) + "' header line", at);
        std::vector<std::string> v(count);
        for (auto& f : v)
            if (!(in >> f)) throw ParseError("missing value in '" + std::string(key) + "' line", at);
        return std::pair{v, at};
    };
    auto number = [](const std::string& s, std::size_t at) {
        try {
            return static_cast<std::size_t>(text::parse_unsigned(s));
        } catch (const InvalidInput& e) {
            throw ParseError(e.what(), at);
        }
    };

    if (line("magic") != "HMAP 1") throw ParseError("bad heatmap magic (expected 'HMAP 1')", 0);
    Heatmap hm;
    {
        auto [v, at] = fields("variant", 1);
        try {
            hm.variant = model::parse_variant(v[0]);
        } catch (const InvalidConfig& e) {
            throw ParseError(e.what(), at);
        }
    }
    {
        auto [v, at] = fields("grid", 2);
        hm.geometry.grid_h = number(v[0], at);
        hm.geometry.grid_w = number(v[1], at);
    }
    {
        auto [v, at] = fields("stride", 1);
        hm.geometry.stride_px = number(v[0], at);
    }
    {
        auto [v, at] = fields("window", 1);
        hm.geometry.window_px = number(v[0], at);
    }
    {
        auto [v, at] = fields("source", 2);
        hm.source_h = number(v[0], at);
        hm.source_w = number(v[1], at);
    }
    const std::size_t end_at = r.offset();
    if (line("end") != "end") throw ParseError("expected 'end' header line", end_at);
    const std::size_t n = hm.geometry.grid_h * hm.geometry.grid_w * 2;
    r.need(4 * n, "heatmap grid");
    hm.grid.resize(n);
    for (float& v : hm.grid) v = r.f32("grid");
    if (r.remaining() != 0)
        throw ParseError(std::to_string(r.remaining()) + " trailing bytes after heatmap grid", r.offset());
    return hm;
}

void save_heatmap(const Heatmap& hm, const std::filesystem::path& path) {
    io::write_file(path, encode_heatmap(hm));
}

Heatmap load_heatmap(const std::filesystem::path& path) { return decode_heatmap(io::read_file(path)); }

BenchReport benchmark_fps(const model::NetworkSpec& net, std::size_t width, std::size_t height,
                          std::size_t n_frames, std::size_t warmup) {
    if (n_frames == 0) throw InvalidInput("benchmark needs at least one frame");
    model::output_geometry(net.variant, height, width);

    constexpr std::size_t kDistinctFrames = 2;
    Rng rng(0xBE4C);
    std::vector<nd::Tensor> frames;
    for (std::size_t f = 0; f < kDistinctFrames; ++f) {
        nd::Tensor t(nd::Shape{1, 3, height, width});
        for (float& v : t.values()) v = static_cast<float>(rng.uniform());
        frames.push_back(std::move(t));
    }
    float sink = 0.0f;
    for (std::size_t i = 0; i < warmup; ++i)
        sink += fully_conv_inference(net, frames[i % kDistinctFrames]).grid[0];

    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < n_frames; ++i)
        sink += fully_conv_inference(net, frames[i % kDistinctFrames]).grid[0];
    const auto t1 = std::chrono::steady_clock::now();
    (void)sink;

    BenchReport r;
    r.variant = net.variant;
    r.width = width;
    r.height = height;
    r.frames = n_frames;
    r.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    r.fps = static_cast<double>(n_frames) / r.wall_seconds;
    return r;
}

std::string bench_report_text(const BenchReport& r) {
    return "variant=" + std::string(model::variant_name(r.variant)) + "\nwidth=" + std::to_string(r.width) +
           "\nheight=" + std::to_string(r.height) + "\nframes=" + std::to_string(r.frames) +
           "\nwall_seconds=" + text::format_double(r.wall_seconds) + "\nfps=" + text::format_double(r.fps) +
           "\n";
}

BenchReport parse_bench_report(const std::string& text) {
    BenchReport r;
    std::istringstream in(text);
    std::string line;
    int seen = 0;
    while (std::getline(in, line)) {
        const std::string_view l = text::trim(line);
        if (l.empty()) continue;
        const auto eq = l.find('=');
        if (eq == std::string_view::npos) throw InvalidInput("bench report line without '=': '" + line + "'");
        const std::string_view key = l.substr(0, eq), val = l.substr(eq + 1);
        if (key == "variant") r.variant = model::parse_variant(val);
        else if (key == "width") r.width = text::parse_unsigned(val);
        else if (key == "height") r.height = text::parse_unsigned(val);
        else if (key == "frames") r.frames = text::parse_unsigned(val);
        else if (key == "wall_seconds") r.wall_seconds = text::parse_double(val);
        else if (key == "fps") r.fps = text::parse_double(val);
        else throw InvalidInput("unknown bench report key '" + std::string(key) + "'");
        ++seen;
    }
    if (seen != 6) throw InvalidInput("bench report is missing fields");
    return r;
}

} // namespace qmireg::heatmap

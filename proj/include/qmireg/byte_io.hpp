#pragma once

// Little-endian byte buffers shared by the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qmireg/error.hpp"

namespace qmireg::io {

class ByteWriter {
public:
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f32s(std::span<const float> vs) {
        for (float v : vs) f32(v);
    }

    std::vector<std::uint8_t>& buffer() { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

    void need(std::size_t n, std::string_view what) const {
        if (remaining() < n)
            throw ParseError("truncated input reading " + std::string(what) + ": expected " +
                                 std::to_string(n) + " more bytes, found " +
                                 std::to_string(remaining()),
                             pos_);
    }
    std::string bytes(std::size_t n, std::string_view what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::uint8_t u8(std::string_view what) {
        need(1, what);
        return data_[pos_++];
    }
    std::uint32_t u32(std::string_view what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32(std::string_view what) { return std::bit_cast<float>(u32(what)); }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

} // namespace qmireg::io

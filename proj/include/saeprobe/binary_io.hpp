#ifndef SAEPROBE_BINARY_IO_HPP
#define SAEPROBE_BINARY_IO_HPP

// Little-endian encode/decode helpers shared by the activation and SAE formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "saeprobe/error.hpp"

namespace saeprobe::binary {

class Writer {
public:
    void bytes(std::span<const char> data) { buffer_.insert(buffer_.end(), data.begin(), data.end()); }
    void u8(std::uint8_t v) { buffer_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buffer_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f32s(std::span<const float> vs) {
        for (float v : vs) f32(v);
    }

    const std::vector<char>& buffer() const noexcept { return buffer_; }

private:
    std::vector<char> buffer_;
};

/// Bounds-checked cursor; running past the end is a corruption error.
class Reader {
public:
    Reader(std::span<const char> data, std::string what) : data_(data), what_(std::move(what)) {}

    std::span<const char> bytes(std::size_t n) {
        need(n);
        auto out = data_.subspan(pos_, n);
        pos_ += n;
        return out;
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(bytes(1)[0]); }
    std::uint32_t u32() {
        auto b = bytes(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::vector<float> f32s(std::size_t n) {
        need(n * 4);
        std::vector<float> out(n);
        for (auto& v : out) v = f32();
        return out;
    }

    std::size_t remaining() const noexcept { return data_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (n > remaining()) {
            throw Error(ErrorKind::Corruption, what_ + ": unexpected end of file");
        }
    }

    std::span<const char> data_;
    std::size_t pos_ = 0;
    std::string what_;
};

std::vector<char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const char> data);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace saeprobe::binary

#endif  // SAEPROBE_BINARY_IO_HPP

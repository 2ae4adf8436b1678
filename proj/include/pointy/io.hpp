// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "pointy/common.hpp"

namespace pointy::io {

// Little-endian byte buffers for the PCF and checkpoint formats.

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename U>
inline U to_little(U v) {
    if constexpr (std::endian::native == std::endian::big) {
        U out = 0;
        auto* src = reinterpret_cast<const unsigned char*>(&v);
        auto* dst = reinterpret_cast<unsigned char*>(&out);
        for (std::size_t i = 0; i < sizeof(U); ++i) dst[i] = src[sizeof(U) - 1 - i];
        return out;
    }
    return v;
}

class ByteWriter {
  public:
    void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u16(std::uint16_t v) { v = to_little(v); bytes(&v, 2); }
    void u32(std::uint32_t v) { v = to_little(v); bytes(&v, 4); }
    void u64(std::uint64_t v) { v = to_little(v); bytes(&v, 8); }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) { bytes(s.data(), s.size()); }

    const std::string& buffer() const { return buf_; }

    /// Appends CRC32 of everything written so far and flushes to disk.
    void finish_to_file(const std::string& path) {
        const std::uint32_t crc = Crc32::of(buf_.data(), buf_.size());
        u32(crc);
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot open '" + path + "' for writing");
        out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
        if (!out) throw FormatError("write failed for '" + path + "'");
    }

  private:
    std::string buf_;
};

class ByteReader {
  public:
    explicit ByteReader(std::string data, std::string origin)
        : data_(std::move(data)), origin_(std::move(origin)) {}

    static ByteReader from_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw FormatError("cannot open '" + path + "'");
        std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return ByteReader(std::move(data), path);
    }

    std::size_t offset() const { return pos_; }
    std::size_t size() const { return data_.size(); }
    std::size_t remaining() const { return data_.size() - pos_; }

    void need(std::size_t n, const char* what) const {
        if (pos_ + n > data_.size()) {
            throw FormatError(origin_ + ": truncated reading " + what + " at byte offset " + std::to_string(pos_) +
                              " (need " + std::to_string(n) + ", have " + std::to_string(data_.size() - pos_) + ")");
        }
    }

    void bytes(void* out, std::size_t n, const char* what) {
        need(n, what);
        std::memcpy(out, data_.data() + pos_, n);
        pos_ += n;
    }

    std::uint8_t u8(const char* what) {
        std::uint8_t v;
        bytes(&v, 1, what);
        return v;
    }
    std::uint16_t u16(const char* what) {
        std::uint16_t v;
        bytes(&v, 2, what);
        return to_little(v);
    }
    std::uint32_t u32(const char* what) {
        std::uint32_t v;
        bytes(&v, 4, what);
        return to_little(v);
    }
    std::uint64_t u64(const char* what) {
        std::uint64_t v;
        bytes(&v, 8, what);
        return to_little(v);
    }
    float f32(const char* what) {
        const std::uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64(const char* what) {
        const std::uint64_t bits = u64(what);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str(std::size_t n, const char* what) {
        need(n, what);
        std::string s(data_.data() + pos_, n);
        pos_ += n;
        return s;
    }

    /// Validates the trailing CRC32 against all bytes before it.
    void check_crc(const char* what) {
        if (data_.size() < 4) throw FormatError(origin_ + ": too short for a CRC trailer");
        if (pos_ != data_.size() - 4) {
            throw FormatError(origin_ + ": " + std::to_string(data_.size() - 4 - pos_) +
                              " unexpected bytes before CRC at offset " + std::to_string(pos_));
        }
        const std::uint32_t stored = u32("crc32");
        const std::uint32_t computed = Crc32::of(data_.data(), data_.size() - 4);
        if (stored != computed) {
            throw FormatError(origin_ + ": CRC mismatch for " + std::string(what) + " at byte offset " +
                              std::to_string(data_.size() - 4));
        }
    }

    const std::string& origin() const { return origin_; }

  private:
    std::string data_;
    std::string origin_;
    std::size_t pos_ = 0;
};

}  // namespace pointy::io

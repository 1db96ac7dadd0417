// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lookaround/error.hpp"

namespace lookaround::io {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

/// Little-endian byte sink.
class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
  void f32s(std::span<const float> vs) {
    if constexpr (std::endian::native == std::endian::little) {
      const auto* p = reinterpret_cast<const char*>(vs.data());
      buf_.insert(buf_.end(), p, p + vs.size_bytes());
    } else {
      for (float v : vs) f32(v);
    }
  }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

/// Little-endian byte source over an in-memory file image. Running past the
/// end raises kTruncated.
class ByteReader {
 public:
  explicit ByteReader(std::span<const char> data) : data_(data) {}

  std::string_view bytes(size_t n) {
    need(n);
    std::string_view out(data_.data() + pos_, n);
    pos_ += n;
    return out;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<uint8_t>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  void f32s(std::span<float> out) {
    need(out.size_bytes());
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
      pos_ += out.size_bytes();
    } else {
      for (auto& v : out) v = f32();
    }
  }
  size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(size_t n) const {
    require(data_.size() - pos_ >= n, ErrorCode::kTruncated,
            "unexpected end of file");
  }
  std::span<const char> data_;
  size_t pos_ = 0;
};

std::vector<char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const char> bytes);

}  // namespace lookaround::io

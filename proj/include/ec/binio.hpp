// Copyright 2026 The Early Cutting Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Little-endian fixed-width encoding shared by the dataset and checkpoint
// containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "ec/error.hpp"

namespace ec::binio {

class Writer {
 public:
  void bytes(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    buf_.insert(buf_.end(), p, p + len);
  }

  template <typename T>
  void le(T value) {
    static_assert(std::is_integral_v<T>);
    using U = std::make_unsigned_t<T>;
    U u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf_.push_back(static_cast<unsigned char>(u & 0xffu));
      u = static_cast<U>(u >> 8);
    }
  }

  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }

  const std::vector<unsigned char>& buffer() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const std::vector<unsigned char>& buf, std::string what)
      : buf_(buf), what_(std::move(what)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }

  void need(std::size_t len, const char* field) const {
    if (remaining() < len) {
      fail(ErrorKind::kFormat, what_ + ": truncated payload at offset " +
                                   std::to_string(pos_) + " reading " + field +
                                   " (need " + std::to_string(len) +
                                   " bytes, have " +
                                   std::to_string(remaining()) + ")");
    }
  }

  void bytes(void* out, std::size_t len, const char* field) {
    need(len, field);
    std::memcpy(out, buf_.data() + pos_, len);
    pos_ += len;
  }

  template <typename T>
  T le(const char* field) {
    static_assert(std::is_integral_v<T>);
    need(sizeof(T), field);
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u = static_cast<U>(u | (static_cast<U>(buf_[pos_ + i]) << (8 * i)));
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  float f32(const char* field) {
    return std::bit_cast<float>(le<std::uint32_t>(field));
  }

  [[noreturn]] void error(const std::string& msg, std::size_t at) const {
    fail(ErrorKind::kFormat,
         what_ + ": " + msg + " at offset " + std::to_string(at));
  }

 private:
  const std::vector<unsigned char>& buf_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::vector<unsigned char> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<unsigned char>& data);

}  // namespace ec::binio

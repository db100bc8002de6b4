/*
 * Copyright (C) 2026 The DexWeaver Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dexweaver/errors.hpp"

namespace dexweaver {

using Bytes = std::vector<uint8_t>;
using BytesView = std::span<const uint8_t>;

// Little-endian cursor over an immutable buffer. All reads are bounds
// checked and fail with TruncatedFile.
class ByteReader {
 public:
  explicit ByteReader(BytesView data, size_t pos = 0) : data_(data), pos_(pos) {}

  size_t pos() const { return pos_; }
  size_t size() const { return data_.size(); }
  size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ >= data_.size(); }

  void seek(size_t pos);
  void skip(size_t n);

  uint8_t u8();
  uint16_t u16();
  uint32_t u32();
  uint32_t uleb128();
  int32_t sleb128();
  // uleb128p1: uleb value minus one, used where NO_INDEX must be encodable.
  int32_t uleb128p1() { return static_cast<int32_t>(uleb128()) - 1; }

  BytesView bytes(size_t n);

 private:
  BytesView data_;
  size_t pos_ = 0;
};

class ByteWriter {
 public:
  void u8(uint8_t v) { out_.push_back(v); }
  void u16(uint16_t v);
  void u32(uint32_t v);
  void uleb128(uint32_t v);
  void sleb128(int32_t v);
  void uleb128p1(int32_t v) { uleb128(static_cast<uint32_t>(v + 1)); }
  void raw(BytesView data);
  void raw(const Bytes& data) { raw(BytesView(data)); }
  void zeros(size_t n);
  void align4();

  size_t size() const { return out_.size(); }
  Bytes take() { return std::move(out_); }
  const Bytes& buffer() const { return out_; }

  void patch_u32(size_t at, uint32_t v);

 private:
  Bytes out_;
};

size_t uleb128_size(uint32_t v);

// MUTF-8 as used by DEX string data: CESU-8 style 3-byte surrogates and a
// two-byte encoding of U+0000. We keep strings as raw MUTF-8 bytes in the
// model; these helpers convert for sorting and display.
std::vector<uint16_t> mutf8_to_utf16(const std::string& mutf8);
std::string utf8_to_mutf8(const std::string& utf8);
std::string mutf8_to_utf8(const std::string& mutf8);

// DEX string pool order: by UTF-16 code unit values.
bool mutf8_less(const std::string& a, const std::string& b);

}  // namespace dexweaver

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

#include "dexweaver/bytes.hpp"

namespace dexweaver {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::DigestMismatch: return "DigestMismatch";
    case ErrorKind::MalformedIndex: return "MalformedIndex";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::RegisterPressure: return "RegisterPressure";
    case ErrorKind::LayoutOverflow: return "LayoutOverflow";
    case ErrorKind::UnsupportedRegion: return "UnsupportedRegion";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::UnknownOpcode: return "UnknownOpcode";
    case ErrorKind::UndefinedLabel: return "UndefinedLabel";
    case ErrorKind::DuplicateLabel: return "DuplicateLabel";
    case ErrorKind::OpaqueRegion: return "OpaqueRegion";
    case ErrorKind::BadZip: return "BadZip";
    case ErrorKind::MissingClassesDex: return "MissingClassesDex";
    case ErrorKind::EntryTooLarge: return "EntryTooLarge";
    case ErrorKind::CryptoFailure: return "CryptoFailure";
    case ErrorKind::DegenerateSamples: return "DegenerateSamples";
    case ErrorKind::UnknownEntry: return "UnknownEntry";
    case ErrorKind::ArityMismatch: return "ArityMismatch";
    case ErrorKind::UnsupportedOpcode: return "UnsupportedOpcode";
  }
  return "Error";
}

void ByteReader::seek(size_t pos) {
  if (pos > data_.size()) fail(ErrorKind::TruncatedFile, "seek past end of buffer");
  pos_ = pos;
}

void ByteReader::skip(size_t n) {
  if (n > remaining()) fail(ErrorKind::TruncatedFile, "skip past end of buffer");
  pos_ += n;
}

uint8_t ByteReader::u8() {
  if (remaining() < 1) fail(ErrorKind::TruncatedFile, "unexpected end of input");
  return data_[pos_++];
}

uint16_t ByteReader::u16() {
  if (remaining() < 2) fail(ErrorKind::TruncatedFile, "unexpected end of input");
  uint16_t v = static_cast<uint16_t>(data_[pos_]) |
               static_cast<uint16_t>(data_[pos_ + 1]) << 8;
  pos_ += 2;
  return v;
}

uint32_t ByteReader::u32() {
  if (remaining() < 4) fail(ErrorKind::TruncatedFile, "unexpected end of input");
  uint32_t v = static_cast<uint32_t>(data_[pos_]) |
               static_cast<uint32_t>(data_[pos_ + 1]) << 8 |
               static_cast<uint32_t>(data_[pos_ + 2]) << 16 |
               static_cast<uint32_t>(data_[pos_ + 3]) << 24;
  pos_ += 4;
  return v;
}

uint32_t ByteReader::uleb128() {
  uint32_t result = 0;
  int shift = 0;
  for (;;) {
    uint8_t byte = u8();
    result |= static_cast<uint32_t>(byte & 0x7f) << shift;
    if ((byte & 0x80) == 0) break;
    shift += 7;
    if (shift > 28) fail(ErrorKind::TruncatedFile, "uleb128 too long");
  }
  return result;
}

int32_t ByteReader::sleb128() {
  int32_t result = 0;
  int shift = 0;
  uint8_t byte;
  do {
    byte = u8();
    result |= static_cast<int32_t>(byte & 0x7f) << shift;
    shift += 7;
    if (shift > 35) fail(ErrorKind::TruncatedFile, "sleb128 too long");
  } while (byte & 0x80);
  if (shift < 32 && (byte & 0x40)) result |= -(1 << shift);
  return result;
}

BytesView ByteReader::bytes(size_t n) {
  if (n > remaining()) fail(ErrorKind::TruncatedFile, "unexpected end of input");
  BytesView view = data_.subspan(pos_, n);
  pos_ += n;
  return view;
}

void ByteWriter::u16(uint16_t v) {
  out_.push_back(static_cast<uint8_t>(v));
  out_.push_back(static_cast<uint8_t>(v >> 8));
}

void ByteWriter::u32(uint32_t v) {
  out_.push_back(static_cast<uint8_t>(v));
  out_.push_back(static_cast<uint8_t>(v >> 8));
  out_.push_back(static_cast<uint8_t>(v >> 16));
  out_.push_back(static_cast<uint8_t>(v >> 24));
}

void ByteWriter::uleb128(uint32_t v) {
  do {
    uint8_t byte = v & 0x7f;
    v >>= 7;
    if (v != 0) byte |= 0x80;
    out_.push_back(byte);
  } while (v != 0);
}

void ByteWriter::sleb128(int32_t v) {
  bool more = true;
  while (more) {
    uint8_t byte = v & 0x7f;
    v >>= 7;
    if ((v == 0 && (byte & 0x40) == 0) || (v == -1 && (byte & 0x40) != 0)) {
      more = false;
    } else {
      byte |= 0x80;
    }
    out_.push_back(byte);
  }
}

void ByteWriter::raw(BytesView data) { out_.insert(out_.end(), data.begin(), data.end()); }

void ByteWriter::zeros(size_t n) { out_.insert(out_.end(), n, 0); }

void ByteWriter::align4() {
  while (out_.size() % 4 != 0) out_.push_back(0);
}

void ByteWriter::patch_u32(size_t at, uint32_t v) {
  out_[at] = static_cast<uint8_t>(v);
  out_[at + 1] = static_cast<uint8_t>(v >> 8);
  out_[at + 2] = static_cast<uint8_t>(v >> 16);
  out_[at + 3] = static_cast<uint8_t>(v >> 24);
}

size_t uleb128_size(uint32_t v) {
  size_t n = 1;
  while (v >>= 7) n++;
  return n;
}

std::vector<uint16_t> mutf8_to_utf16(const std::string& mutf8) {
  std::vector<uint16_t> out;
  size_t i = 0;
  while (i < mutf8.size()) {
    uint8_t c = static_cast<uint8_t>(mutf8[i]);
    if ((c & 0x80) == 0) {
      out.push_back(c);
      i += 1;
    } else if ((c & 0xe0) == 0xc0) {
      if (i + 1 >= mutf8.size()) fail(ErrorKind::TruncatedFile, "bad mutf8 sequence");
      out.push_back(static_cast<uint16_t>(((c & 0x1f) << 6) |
                                          (mutf8[i + 1] & 0x3f)));
      i += 2;
    } else if ((c & 0xf0) == 0xe0) {
      if (i + 2 >= mutf8.size()) fail(ErrorKind::TruncatedFile, "bad mutf8 sequence");
      out.push_back(static_cast<uint16_t>(((c & 0x0f) << 12) |
                                          ((mutf8[i + 1] & 0x3f) << 6) |
                                          (mutf8[i + 2] & 0x3f)));
      i += 3;
    } else {
      fail(ErrorKind::TruncatedFile, "bad mutf8 lead byte");
    }
  }
  return out;
}

std::string utf8_to_mutf8(const std::string& utf8) {
  std::string out;
  size_t i = 0;
  while (i < utf8.size()) {
    uint8_t c = static_cast<uint8_t>(utf8[i]);
    if (c == 0) {
      // U+0000 gets the two-byte form.
      out.push_back(static_cast<char>(0xc0));
      out.push_back(static_cast<char>(0x80));
      i += 1;
    } else if (c < 0xf0) {
      // 1-3 byte sequences are identical in MUTF-8.
      out.push_back(static_cast<char>(c));
      i += 1;
    } else {
      // Supplementary plane: re-encode as a CESU-8 surrogate pair.
      if (i + 3 >= utf8.size()) fail(ErrorKind::TruncatedFile, "bad utf8 sequence");
      uint32_t cp = ((c & 0x07u) << 18) |
                    ((utf8[i + 1] & 0x3fu) << 12) |
                    ((utf8[i + 2] & 0x3fu) << 6) |
                    (utf8[i + 3] & 0x3fu);
      cp -= 0x10000;
      uint16_t hi = static_cast<uint16_t>(0xd800 + (cp >> 10));
      uint16_t lo = static_cast<uint16_t>(0xdc00 + (cp & 0x3ff));
      for (uint16_t unit : {hi, lo}) {
        out.push_back(static_cast<char>(0xe0 | (unit >> 12)));
        out.push_back(static_cast<char>(0x80 | ((unit >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (unit & 0x3f)));
      }
      i += 4;
    }
  }
  return out;
}

std::string mutf8_to_utf8(const std::string& mutf8) {
  std::vector<uint16_t> units = mutf8_to_utf16(mutf8);
  std::string out;
  for (size_t i = 0; i < units.size(); i++) {
    uint32_t cp = units[i];
    if (cp >= 0xd800 && cp < 0xdc00 && i + 1 < units.size() &&
        units[i + 1] >= 0xdc00 && units[i + 1] < 0xe000) {
      cp = 0x10000 + ((cp - 0xd800) << 10) + (units[i + 1] - 0xdc00);
      i++;
    }
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else {
      out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
  }
  return out;
}

bool mutf8_less(const std::string& a, const std::string& b) {
  return mutf8_to_utf16(a) < mutf8_to_utf16(b);
}

}  // namespace dexweaver

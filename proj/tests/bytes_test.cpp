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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "dexweaver/bytes.hpp"

using namespace dexweaver;

TEST_CASE("uleb128 round-trips across the value range") {
  std::mt19937 rng(42);
  std::vector<uint32_t> values = {0, 1, 127, 128, 0x3fff, 0x4000, 0xffffffff};
  for (int i = 0; i < 500; i++) values.push_back(rng());
  for (uint32_t v : values) {
    ByteWriter w;
    w.uleb128(v);
    CHECK(w.size() == uleb128_size(v));
    Bytes bytes = w.take();
    ByteReader r(bytes);
    CHECK(r.uleb128() == v);
    CHECK(r.at_end());
  }
}

TEST_CASE("sleb128 round-trips signed values") {
  std::mt19937 rng(7);
  std::vector<int32_t> values = {0, -1, 1, 63, 64, -64, -65, INT32_MAX, INT32_MIN};
  for (int i = 0; i < 500; i++) values.push_back(static_cast<int32_t>(rng()));
  for (int32_t v : values) {
    ByteWriter w;
    w.sleb128(v);
    Bytes bytes = w.take();
    ByteReader r(bytes);
    CHECK(r.sleb128() == v);
    CHECK(r.at_end());
  }
}

TEST_CASE("reader fails with TruncatedFile past the end") {
  Bytes bytes = {1, 2};
  ByteReader r(bytes);
  r.u16();
  CHECK_THROWS_AS(r.u8(), Error);
  try {
    ByteReader r2(bytes);
    r2.u32();
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TruncatedFile);
  }
}

TEST_CASE("mutf8 conversion handles ascii, two-byte and supplementary") {
  CHECK(utf8_to_mutf8("hello") == "hello");
  CHECK(mutf8_to_utf8("hello") == "hello");

  std::string cafe = "caf\xc3\xa9";  // café
  CHECK(utf8_to_mutf8(cafe) == cafe);
  CHECK(mutf8_to_utf16(cafe).size() == 4);
  CHECK(mutf8_to_utf8(utf8_to_mutf8(cafe)) == cafe);

  // U+10400 needs a surrogate pair in MUTF-8 (six bytes).
  std::string supplementary = "\xf0\x90\x90\x80";
  std::string mutf8 = utf8_to_mutf8(supplementary);
  CHECK(mutf8.size() == 6);
  CHECK(mutf8_to_utf16(mutf8).size() == 2);
  CHECK(mutf8_to_utf8(mutf8) == supplementary);
}

TEST_CASE("mutf8_less orders by utf16 code units") {
  CHECK(mutf8_less("A", "B"));
  CHECK(mutf8_less("A", "AB"));
  CHECK(!mutf8_less("B", "A"));
  CHECK(mutf8_less("I", "IL"));
  CHECK(mutf8_less("LZ", "La"));  // 'Z' < 'a'
}

TEST_CASE("align4 pads the writer to a four-byte boundary") {
  ByteWriter w;
  w.u8(1);
  w.align4();
  CHECK(w.size() == 4);
  w.u32(5);
  w.align4();
  CHECK(w.size() == 8);
}

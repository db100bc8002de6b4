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

#include <cstddef>
#include <optional>

#include "dexweaver/dex_model.hpp"

namespace dexweaver {

// Allocation accounting for the parser working set. Emulates a constrained
// heap: charge() fails with BudgetExceeded once the running total passes the
// ceiling.
class MemoryGauge {
 public:
  explicit MemoryGauge(size_t ceiling_bytes) : ceiling_(ceiling_bytes) {}

  void charge(size_t bytes) {
    used_ += bytes;
    if (used_ > ceiling_) {
      fail(ErrorKind::BudgetExceeded,
           "working set " + std::to_string(used_) + " bytes exceeds ceiling of " +
               std::to_string(ceiling_) + " bytes");
    }
  }
  size_t used() const { return used_; }
  size_t ceiling() const { return ceiling_; }

 private:
  size_t used_ = 0;
  size_t ceiling_;
};

// Parses a complete DEX file. Verifies magic, checksum (Adler-32 over bytes
// after the checksum field) and signature (SHA-1 over bytes after the
// signature field) before building the model. Instructions outside the
// supported subset become fixed-width Opaque units.
DexFile parse_dex(BytesView bytes, MemoryGauge* gauge = nullptr);

// Serializes the model. Section order is fixed and padding minimal, so equal
// models produce identical bytes; file size, checksum and signature are
// recomputed fresh.
Bytes write_dex(const DexFile& dex);

uint32_t dex_checksum(BytesView file_bytes);
std::array<uint8_t, 20> dex_signature(BytesView file_bytes);

}  // namespace dexweaver

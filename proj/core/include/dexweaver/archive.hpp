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

#include <optional>
#include <string>
#include <vector>

#include "dexweaver/bytes.hpp"

namespace dexweaver {

struct ArchiveEntry {
  std::string path;
  Bytes bytes;

  bool operator==(const ArchiveEntry&) const = default;
};

// An application package's contents. Entry order is made lexicographic on
// write; the AndroidManifest payload rides along as an ordinary entry,
// carried verbatim.
struct Archive {
  std::vector<ArchiveEntry> entries;

  const ArchiveEntry* find(const std::string& path) const;
  const Bytes* manifest_bytes() const;
  const Bytes* classes_dex() const;
};

// META-INF/MANIFEST.MF, *.SF, *.RSA and friends: dropped on repack.
bool is_signature_entry(const std::string& path);

// Reads a zip container. All entry bytes are preserved exactly; a container
// without classes.dex fails with MissingClassesDex, structural problems with
// BadZip. Signature verification reads with verify_crc=false so that payload
// tampering is reported by the digest chain, not the container CRC.
Archive unpack(BytesView apk_bytes, bool verify_crc = true);

// Rebuilds the package around new_dex as classes.dex, dropping any old
// signature entries. Output bytes are deterministic: epoch timestamps,
// lexicographic entry order, entries under 1 KiB stored, larger ones
// deflated.
Bytes repack(const Archive& archive, const Bytes& new_dex);

// Serializes an archive as-is (used by signing to append META-INF entries).
Bytes write_zip(const Archive& archive);

}  // namespace dexweaver

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

#include "dexweaver/archive.hpp"

#include <zlib.h>

#include <algorithm>

namespace dexweaver {

namespace {

constexpr uint32_t kLocalHeaderSig = 0x04034b50;
constexpr uint32_t kCentralDirSig = 0x02014b50;
constexpr uint32_t kEndOfCentralDirSig = 0x06054b50;
constexpr uint16_t kMethodStored = 0;
constexpr uint16_t kMethodDeflated = 8;
constexpr size_t kDeflateThreshold = 1024;
// 1980-01-01 00:00:00 in DOS date/time.
constexpr uint16_t kDosDate = 0x0021;
constexpr uint16_t kDosTime = 0x0000;

uint32_t crc_of(const Bytes& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<uint32_t>(crc);
}

Bytes deflate_bytes(const Bytes& input) {
  z_stream stream{};
  if (deflateInit2(&stream, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -15, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK) {
    fail(ErrorKind::BadZip, "deflate init failed");
  }
  Bytes out(deflateBound(&stream, static_cast<uLong>(input.size())));
  stream.next_in = const_cast<Bytef*>(input.data());
  stream.avail_in = static_cast<uInt>(input.size());
  stream.next_out = out.data();
  stream.avail_out = static_cast<uInt>(out.size());
  int rc = deflate(&stream, Z_FINISH);
  deflateEnd(&stream);
  if (rc != Z_STREAM_END) fail(ErrorKind::BadZip, "deflate failed");
  out.resize(out.size() - stream.avail_out);
  return out;
}

Bytes inflate_bytes(BytesView input, size_t expected_size, const std::string& path) {
  z_stream stream{};
  if (inflateInit2(&stream, -15) != Z_OK) fail(ErrorKind::BadZip, "inflate init failed");
  Bytes out(expected_size);
  stream.next_in = const_cast<Bytef*>(input.data());
  stream.avail_in = static_cast<uInt>(input.size());
  stream.next_out = out.data();
  stream.avail_out = static_cast<uInt>(out.size());
  int rc = inflate(&stream, Z_FINISH);
  inflateEnd(&stream);
  if (rc != Z_STREAM_END || stream.avail_out != 0) {
    fail(ErrorKind::BadZip, "corrupt deflate stream: " + path);
  }
  return out;
}

}  // namespace

const ArchiveEntry* Archive::find(const std::string& path) const {
  for (const ArchiveEntry& entry : entries) {
    if (entry.path == path) return &entry;
  }
  return nullptr;
}

const Bytes* Archive::manifest_bytes() const {
  const ArchiveEntry* entry = find("AndroidManifest.xml");
  return entry ? &entry->bytes : nullptr;
}

const Bytes* Archive::classes_dex() const {
  const ArchiveEntry* entry = find("classes.dex");
  return entry ? &entry->bytes : nullptr;
}

bool is_signature_entry(const std::string& path) {
  if (path.rfind("META-INF/", 0) != 0) return false;
  if (path == "META-INF/MANIFEST.MF") return true;
  auto ends_with = [&](const char* suffix) {
    std::string s(suffix);
    return path.size() >= s.size() && path.compare(path.size() - s.size(), s.size(), s) == 0;
  };
  return ends_with(".SF") || ends_with(".RSA") || ends_with(".DSA") || ends_with(".EC");
}

Archive unpack(BytesView apk_bytes, bool verify_crc) {
  // Locate the end-of-central-directory record by scanning back over the
  // (possibly commented) tail.
  if (apk_bytes.size() < 22) fail(ErrorKind::BadZip, "shorter than an empty zip");
  size_t eocd_pos = std::string::npos;
  size_t scan_floor = apk_bytes.size() >= 22 + 0xffff ? apk_bytes.size() - 22 - 0xffff : 0;
  for (size_t pos = apk_bytes.size() - 22;; pos--) {
    ByteReader probe(apk_bytes, pos);
    if (probe.u32() == kEndOfCentralDirSig) {
      eocd_pos = pos;
      break;
    }
    if (pos == scan_floor) break;
  }
  if (eocd_pos == std::string::npos) {
    fail(ErrorKind::BadZip, "no end-of-central-directory record");
  }

  ByteReader eocd(apk_bytes, eocd_pos + 4);
  eocd.u16();  // disk number
  eocd.u16();  // central dir disk
  eocd.u16();  // entries on disk
  uint16_t entry_count = eocd.u16();
  eocd.u32();  // central dir size
  uint32_t central_off = eocd.u32();

  Archive archive;
  ByteReader central(apk_bytes, central_off);
  for (uint16_t i = 0; i < entry_count; i++) {
    if (central.u32() != kCentralDirSig) fail(ErrorKind::BadZip, "bad central directory entry");
    central.u16();  // version made by
    central.u16();  // version needed
    uint16_t flags = central.u16();
    uint16_t method = central.u16();
    central.u16();  // time
    central.u16();  // date
    uint32_t crc = central.u32();
    uint32_t compressed_size = central.u32();
    uint32_t uncompressed_size = central.u32();
    uint16_t name_len = central.u16();
    uint16_t extra_len = central.u16();
    uint16_t comment_len = central.u16();
    central.u16();  // disk start
    central.u16();  // internal attrs
    central.u32();  // external attrs
    uint32_t local_off = central.u32();
    BytesView name = central.bytes(name_len);
    central.skip(extra_len);
    central.skip(comment_len);
    if (flags & 0x08) fail(ErrorKind::BadZip, "streamed entries are not supported");
    if (method != kMethodStored && method != kMethodDeflated) {
      fail(ErrorKind::BadZip, "unsupported compression method");
    }

    ByteReader local(apk_bytes, local_off);
    if (local.u32() != kLocalHeaderSig) fail(ErrorKind::BadZip, "bad local header");
    local.skip(2 + 2 + 2 + 2 + 2 + 4 + 4 + 4);  // version..sizes
    uint16_t local_name_len = local.u16();
    uint16_t local_extra_len = local.u16();
    local.skip(local_name_len);
    local.skip(local_extra_len);
    BytesView payload = local.bytes(compressed_size);

    ArchiveEntry entry;
    entry.path.assign(reinterpret_cast<const char*>(name.data()), name.size());
    if (entry.path.empty()) fail(ErrorKind::BadZip, "empty entry name");
    for (const ArchiveEntry& existing : archive.entries) {
      if (existing.path == entry.path) fail(ErrorKind::BadZip, "duplicate entry " + entry.path);
    }
    if (method == kMethodStored) {
      if (compressed_size != uncompressed_size) {
        fail(ErrorKind::BadZip, "stored entry size mismatch");
      }
      entry.bytes.assign(payload.begin(), payload.end());
    } else {
      entry.bytes = inflate_bytes(payload, uncompressed_size, entry.path);
    }
    if (verify_crc && crc_of(entry.bytes) != crc) {
      fail(ErrorKind::BadZip, "entry CRC mismatch: " + entry.path);
    }
    archive.entries.push_back(std::move(entry));
  }

  if (!archive.find("classes.dex")) {
    fail(ErrorKind::MissingClassesDex, "archive has no classes.dex entry");
  }
  return archive;
}

Bytes write_zip(const Archive& archive) {
  if (archive.entries.size() > 0xffff) fail(ErrorKind::EntryTooLarge, "too many entries");
  std::vector<const ArchiveEntry*> sorted;
  for (const ArchiveEntry& entry : archive.entries) sorted.push_back(&entry);
  std::sort(sorted.begin(), sorted.end(),
            [](const ArchiveEntry* a, const ArchiveEntry* b) { return a->path < b->path; });

  ByteWriter out;
  struct CentralRecord {
    const ArchiveEntry* entry;
    uint16_t method;
    uint32_t crc;
    uint32_t compressed_size;
    uint32_t local_off;
  };
  std::vector<CentralRecord> records;

  for (const ArchiveEntry* entry : sorted) {
    if (entry->bytes.size() >= 0xffffffffull) {
      fail(ErrorKind::EntryTooLarge, entry->path + " exceeds the zip32 size limit");
    }
    uint16_t method = kMethodStored;
    Bytes compressed;
    if (entry->bytes.size() >= kDeflateThreshold) {
      method = kMethodDeflated;
      compressed = deflate_bytes(entry->bytes);
    }
    const Bytes& payload = method == kMethodStored ? entry->bytes : compressed;
    CentralRecord record{entry, method, crc_of(entry->bytes),
                         static_cast<uint32_t>(payload.size()),
                         static_cast<uint32_t>(out.size())};

    out.u32(kLocalHeaderSig);
    out.u16(20);  // version needed
    out.u16(0);   // flags
    out.u16(method);
    out.u16(kDosTime);
    out.u16(kDosDate);
    out.u32(record.crc);
    out.u32(record.compressed_size);
    out.u32(static_cast<uint32_t>(entry->bytes.size()));
    out.u16(static_cast<uint16_t>(entry->path.size()));
    out.u16(0);  // extra length
    out.raw(BytesView(reinterpret_cast<const uint8_t*>(entry->path.data()),
                      entry->path.size()));
    out.raw(payload);
    records.push_back(record);
  }

  uint32_t central_off = static_cast<uint32_t>(out.size());
  for (const CentralRecord& record : records) {
    out.u32(kCentralDirSig);
    out.u16(20);  // version made by
    out.u16(20);  // version needed
    out.u16(0);
    out.u16(record.method);
    out.u16(kDosTime);
    out.u16(kDosDate);
    out.u32(record.crc);
    out.u32(record.compressed_size);
    out.u32(static_cast<uint32_t>(record.entry->bytes.size()));
    out.u16(static_cast<uint16_t>(record.entry->path.size()));
    out.u16(0);  // extra
    out.u16(0);  // comment
    out.u16(0);  // disk start
    out.u16(0);  // internal attrs
    out.u32(0);  // external attrs
    out.u32(record.local_off);
    out.raw(BytesView(reinterpret_cast<const uint8_t*>(record.entry->path.data()),
                      record.entry->path.size()));
  }
  uint32_t central_size = static_cast<uint32_t>(out.size()) - central_off;

  out.u32(kEndOfCentralDirSig);
  out.u16(0);
  out.u16(0);
  out.u16(static_cast<uint16_t>(records.size()));
  out.u16(static_cast<uint16_t>(records.size()));
  out.u32(central_size);
  out.u32(central_off);
  out.u16(0);  // comment length
  return out.take();
}

Bytes repack(const Archive& archive, const Bytes& new_dex) {
  Archive rebuilt;
  rebuilt.entries.push_back({"classes.dex", new_dex});
  for (const ArchiveEntry& entry : archive.entries) {
    if (entry.path == "classes.dex" || is_signature_entry(entry.path)) continue;
    rebuilt.entries.push_back(entry);
  }
  return write_zip(rebuilt);
}

}  // namespace dexweaver

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

#include <openssl/evp.h>
#include <zlib.h>

#include <algorithm>
#include <map>

#include "dexweaver/dex_io.hpp"

namespace dexweaver {

namespace {

constexpr size_t kHeaderSize = 0x70;
constexpr uint32_t kEndianTag = 0x12345678;

// map_list item type codes.
constexpr uint16_t kMapHeader = 0x0000;
constexpr uint16_t kMapStringId = 0x0001;
constexpr uint16_t kMapTypeId = 0x0002;
constexpr uint16_t kMapProtoId = 0x0003;
constexpr uint16_t kMapFieldId = 0x0004;
constexpr uint16_t kMapMethodId = 0x0005;
constexpr uint16_t kMapClassDef = 0x0006;
constexpr uint16_t kMapMapList = 0x1000;
constexpr uint16_t kMapTypeList = 0x1001;
constexpr uint16_t kMapClassData = 0x2000;
constexpr uint16_t kMapCode = 0x2001;
constexpr uint16_t kMapStringData = 0x2002;
constexpr uint16_t kMapDebugInfo = 0x2003;
constexpr uint16_t kMapEncodedArray = 0x2005;

uint8_t opcode_byte(Opcode op) { return opcode_info(op).byte; }

void encode_insns(const CodeItem& code, const std::string& where,
                  std::vector<uint16_t>& out) {
  std::vector<uint32_t> offsets = code.unit_offsets();
  for (size_t i = 0; i < code.insns.size(); i++) {
    const Instruction& insn = code.insns[i];
    check_register_widths(insn, where);
    uint8_t byte = opcode_byte(insn.op);
    switch (insn.op) {
      case Opcode::Nop:
        out.push_back(byte);
        break;
      case Opcode::Move:
      case Opcode::MoveObject:
        out.push_back(static_cast<uint16_t>(byte | (insn.regs[0] << 8) | (insn.regs[1] << 12)));
        break;
      case Opcode::MoveResult:
      case Opcode::MoveResultObject:
      case Opcode::Return:
      case Opcode::ReturnObject:
      case Opcode::Throw:
        out.push_back(static_cast<uint16_t>(byte | (insn.regs[0] << 8)));
        break;
      case Opcode::ReturnVoid:
        out.push_back(byte);
        break;
      case Opcode::Const4:
        out.push_back(static_cast<uint16_t>(byte | (insn.regs[0] << 8) |
                                            ((insn.literal & 0xf) << 12)));
        break;
      case Opcode::Const16:
        if (insn.literal < -32768 || insn.literal > 32767) {
          fail(ErrorKind::LayoutOverflow, "const/16 literal out of range in " + where);
        }
        out.push_back(static_cast<uint16_t>(byte | (insn.regs[0] << 8)));
        out.push_back(static_cast<uint16_t>(insn.literal));
        break;
      case Opcode::ConstString:
      case Opcode::NewInstance:
        if (insn.pool_index > 0xffff) {
          fail(ErrorKind::LayoutOverflow, "pool index exceeds 16 bits in " + where);
        }
        out.push_back(static_cast<uint16_t>(byte | (insn.regs[0] << 8)));
        out.push_back(static_cast<uint16_t>(insn.pool_index));
        break;
      case Opcode::Goto: {
        int32_t delta = static_cast<int32_t>(offsets[insn.target]) -
                        static_cast<int32_t>(offsets[i]);
        if (delta == 0 || delta < -128 || delta > 127) {
          fail(ErrorKind::LayoutOverflow, "goto offset out of range in " + where);
        }
        out.push_back(static_cast<uint16_t>(byte | ((delta & 0xff) << 8)));
        break;
      }
      case Opcode::IfEqz: {
        int32_t delta = static_cast<int32_t>(offsets[insn.target]) -
                        static_cast<int32_t>(offsets[i]);
        if (delta == 0 || delta < -32768 || delta > 32767) {
          fail(ErrorKind::LayoutOverflow, "if-eqz offset out of range in " + where);
        }
        out.push_back(static_cast<uint16_t>(byte | (insn.regs[0] << 8)));
        out.push_back(static_cast<uint16_t>(delta));
        break;
      }
      case Opcode::InvokeVirtual:
      case Opcode::InvokeDirect:
      case Opcode::InvokeStatic: {
        if (insn.pool_index > 0xffff) {
          fail(ErrorKind::LayoutOverflow, "method index exceeds 16 bits in " + where);
        }
        uint16_t g = insn.reg_count > 4 ? insn.regs[4] : 0;
        out.push_back(static_cast<uint16_t>(byte | (g << 8) | (insn.reg_count << 12)));
        out.push_back(static_cast<uint16_t>(insn.pool_index));
        uint16_t packed = 0;
        for (uint8_t a = 0; a < insn.reg_count && a < 4; a++) {
          packed |= static_cast<uint16_t>(insn.regs[a] << (a * 4));
        }
        out.push_back(packed);
        break;
      }
      case Opcode::Opaque:
        for (uint16_t u = 0; u < insn.opaque_units; u++) {
          out.push_back(code.opaque_units[insn.opaque_offset + u]);
        }
        break;
    }
  }
}

void write_code_item(const CodeItem& code, const std::string& where,
                     uint32_t debug_info_off, ByteWriter& data) {
  std::vector<uint16_t> units;
  encode_insns(code, where, units);

  if (code.tries.size() > 0xffff) {
    fail(ErrorKind::LayoutOverflow, "try table exceeds the format limit in " + where);
  }
  data.u16(code.registers_size);
  data.u16(code.ins_size);
  data.u16(code.outs_size);
  data.u16(static_cast<uint16_t>(code.tries.size()));
  data.u32(debug_info_off);
  data.u32(static_cast<uint32_t>(units.size()));
  for (uint16_t u : units) data.u16(u);

  if (code.tries.empty()) return;
  if (units.size() % 2 != 0) data.u16(0);

  std::vector<uint32_t> offsets = code.unit_offsets();
  std::vector<TryBlock> tries = code.tries;
  std::sort(tries.begin(), tries.end(),
            [](const TryBlock& a, const TryBlock& b) { return a.start < b.start; });
  for (size_t t = 1; t < tries.size(); t++) {
    if (tries[t].start < tries[t - 1].end) {
      fail(ErrorKind::LayoutOverflow, "overlapping try ranges in " + where);
    }
  }

  // Handler list entries are emitted per try, in try order; handler_off is a
  // byte offset from the start of the handler list.
  std::vector<Bytes> handler_entries;
  std::vector<uint16_t> handler_offs;
  {
    size_t list_header = uleb128_size(static_cast<uint32_t>(tries.size()));
    size_t at = list_header;
    for (const TryBlock& try_block : tries) {
      ByteWriter entry;
      bool catch_all = !try_block.handlers.empty() && try_block.handlers.back().catch_all;
      int32_t typed = static_cast<int32_t>(try_block.handlers.size()) - (catch_all ? 1 : 0);
      entry.sleb128(catch_all ? -typed : typed);
      for (const Handler& handler : try_block.handlers) {
        if (handler.catch_all) continue;
        entry.uleb128(handler.type_index);
        entry.uleb128(offsets[handler.target]);
      }
      if (catch_all) entry.uleb128(offsets[try_block.handlers.back().target]);
      if (at > 0xffff) {
        fail(ErrorKind::LayoutOverflow, "handler list exceeds the format limit in " + where);
      }
      handler_offs.push_back(static_cast<uint16_t>(at));
      at += entry.size();
      handler_entries.push_back(entry.take());
    }
  }

  for (size_t t = 0; t < tries.size(); t++) {
    uint32_t start_units = offsets[tries[t].start];
    uint32_t end_units = offsets[tries[t].end];
    data.u32(start_units);
    data.u16(static_cast<uint16_t>(end_units - start_units));
    data.u16(handler_offs[t]);
  }
  data.uleb128(static_cast<uint32_t>(tries.size()));
  for (const Bytes& entry : handler_entries) data.raw(entry);
}

}  // namespace

uint32_t dex_checksum(BytesView file_bytes) {
  uLong adler = adler32(0L, Z_NULL, 0);
  adler = adler32(adler, file_bytes.data() + 12, static_cast<uInt>(file_bytes.size() - 12));
  return static_cast<uint32_t>(adler);
}

std::array<uint8_t, 20> dex_signature(BytesView file_bytes) {
  std::array<uint8_t, 20> digest{};
  unsigned int len = 0;
  EVP_Digest(file_bytes.data() + 32, file_bytes.size() - 32, digest.data(), &len,
             EVP_sha1(), nullptr);
  return digest;
}

Bytes write_dex(const DexFile& dex) {
  validate_indices(dex);
  if (!pools_sorted(dex)) {
    fail(ErrorKind::MalformedIndex, "pools are not sorted; normalize the model first");
  }

  size_t ids_end = kHeaderSize + dex.strings.size() * 4 + dex.types.size() * 4 +
                   dex.protos.size() * 12 + dex.fields.size() * 8 +
                   dex.methods.size() * 8 + dex.class_defs.size() * 32;
  uint32_t data_off = static_cast<uint32_t>(ids_end);

  ByteWriter data;
  auto abs = [&](size_t rel) { return static_cast<uint32_t>(data_off + rel); };

  // Type lists: proto parameter lists first (pool order), then class
  // interface lists, deduplicated.
  std::map<std::vector<uint32_t>, uint32_t> type_list_offs;
  uint32_t first_type_list = 0;
  uint32_t type_list_count = 0;
  auto emit_type_list = [&](const std::vector<uint32_t>& list) {
    if (list.empty()) return;
    if (type_list_offs.count(list)) return;
    data.align4();
    if (type_list_count == 0) first_type_list = abs(data.size());
    type_list_offs[list] = abs(data.size());
    type_list_count++;
    data.u32(static_cast<uint32_t>(list.size()));
    for (uint32_t t : list) data.u16(static_cast<uint16_t>(t));
  };
  for (const ProtoRef& proto : dex.protos) emit_type_list(proto.param_type_indices);
  for (const ClassDef& class_def : dex.class_defs) emit_type_list(class_def.interfaces);

  // Debug info blobs, verbatim, in class/method order.
  std::map<const CodeItem*, uint32_t> debug_offs;
  uint32_t first_debug = 0;
  uint32_t debug_count = 0;
  for (const ClassDef& class_def : dex.class_defs) {
    for (const auto* methods : {&class_def.direct_methods, &class_def.virtual_methods}) {
      for (const EncodedMethod& method : *methods) {
        if (!method.code || method.code->debug_info.empty()) continue;
        if (debug_count == 0) first_debug = abs(data.size());
        debug_offs[&*method.code] = abs(data.size());
        debug_count++;
        data.raw(method.code->debug_info);
      }
    }
  }

  // Code items.
  std::map<const CodeItem*, uint32_t> code_offs;
  uint32_t first_code = 0;
  uint32_t code_count = 0;
  for (const ClassDef& class_def : dex.class_defs) {
    for (const auto* methods : {&class_def.direct_methods, &class_def.virtual_methods}) {
      for (const EncodedMethod& method : *methods) {
        if (!method.code) continue;
        data.align4();
        if (code_count == 0) first_code = abs(data.size());
        code_offs[&*method.code] = abs(data.size());
        code_count++;
        uint32_t debug_off = debug_offs.count(&*method.code) ? debug_offs[&*method.code] : 0;
        write_code_item(*method.code, method_signature(dex, method.method_index),
                        debug_off, data);
      }
    }
  }

  // Class data.
  std::map<const ClassDef*, uint32_t> class_data_offs;
  uint32_t first_class_data = 0;
  uint32_t class_data_count = 0;
  for (const ClassDef& class_def : dex.class_defs) {
    if (class_def.static_fields.empty() && class_def.instance_fields.empty() &&
        class_def.direct_methods.empty() && class_def.virtual_methods.empty()) {
      continue;
    }
    if (class_data_count == 0) first_class_data = abs(data.size());
    class_data_offs[&class_def] = abs(data.size());
    class_data_count++;
    data.uleb128(static_cast<uint32_t>(class_def.static_fields.size()));
    data.uleb128(static_cast<uint32_t>(class_def.instance_fields.size()));
    data.uleb128(static_cast<uint32_t>(class_def.direct_methods.size()));
    data.uleb128(static_cast<uint32_t>(class_def.virtual_methods.size()));
    auto emit_fields = [&](const std::vector<EncodedField>& fields) {
      uint32_t prev = 0;
      for (size_t i = 0; i < fields.size(); i++) {
        uint32_t index = fields[i].field_index;
        if (i > 0 && index <= prev) {
          fail(ErrorKind::MalformedIndex, "encoded fields not strictly ascending");
        }
        data.uleb128(i == 0 ? index : index - prev);
        data.uleb128(fields[i].access_flags);
        prev = index;
      }
    };
    emit_fields(class_def.static_fields);
    emit_fields(class_def.instance_fields);
    auto emit_methods = [&](const std::vector<EncodedMethod>& methods) {
      uint32_t prev = 0;
      for (size_t i = 0; i < methods.size(); i++) {
        uint32_t index = methods[i].method_index;
        if (i > 0 && index <= prev) {
          fail(ErrorKind::MalformedIndex, "encoded methods not strictly ascending");
        }
        data.uleb128(i == 0 ? index : index - prev);
        data.uleb128(methods[i].access_flags);
        data.uleb128(methods[i].code ? code_offs[&*methods[i].code] : 0);
        prev = index;
      }
    };
    emit_methods(class_def.direct_methods);
    emit_methods(class_def.virtual_methods);
  }

  // Static value arrays, verbatim.
  std::map<const ClassDef*, uint32_t> static_values_offs;
  uint32_t first_static_values = 0;
  uint32_t static_values_count = 0;
  for (const ClassDef& class_def : dex.class_defs) {
    if (class_def.static_values.empty()) continue;
    if (static_values_count == 0) first_static_values = abs(data.size());
    static_values_offs[&class_def] = abs(data.size());
    static_values_count++;
    data.raw(class_def.static_values);
  }

  // String data.
  std::vector<uint32_t> string_data_offs(dex.strings.size());
  uint32_t first_string_data = abs(data.size());
  for (size_t i = 0; i < dex.strings.size(); i++) {
    string_data_offs[i] = abs(data.size());
    data.uleb128(static_cast<uint32_t>(mutf8_to_utf16(dex.strings[i]).size()));
    data.raw(BytesView(reinterpret_cast<const uint8_t*>(dex.strings[i].data()),
                       dex.strings[i].size()));
    data.u8(0);
  }

  // Map list.
  data.align4();
  uint32_t map_off = abs(data.size());
  struct MapEntry {
    uint16_t type;
    uint32_t count;
    uint32_t offset;
  };
  std::vector<MapEntry> map_entries;
  map_entries.push_back({kMapHeader, 1, 0});
  if (!dex.strings.empty()) {
    map_entries.push_back({kMapStringId, static_cast<uint32_t>(dex.strings.size()),
                           static_cast<uint32_t>(kHeaderSize)});
  }
  uint32_t at = static_cast<uint32_t>(kHeaderSize + dex.strings.size() * 4);
  if (!dex.types.empty()) {
    map_entries.push_back({kMapTypeId, static_cast<uint32_t>(dex.types.size()), at});
  }
  at += dex.types.size() * 4;
  if (!dex.protos.empty()) {
    map_entries.push_back({kMapProtoId, static_cast<uint32_t>(dex.protos.size()), at});
  }
  at += dex.protos.size() * 12;
  if (!dex.fields.empty()) {
    map_entries.push_back({kMapFieldId, static_cast<uint32_t>(dex.fields.size()), at});
  }
  at += dex.fields.size() * 8;
  if (!dex.methods.empty()) {
    map_entries.push_back({kMapMethodId, static_cast<uint32_t>(dex.methods.size()), at});
  }
  at += dex.methods.size() * 8;
  if (!dex.class_defs.empty()) {
    map_entries.push_back({kMapClassDef, static_cast<uint32_t>(dex.class_defs.size()), at});
  }
  if (type_list_count) map_entries.push_back({kMapTypeList, type_list_count, first_type_list});
  if (debug_count) map_entries.push_back({kMapDebugInfo, debug_count, first_debug});
  if (code_count) map_entries.push_back({kMapCode, code_count, first_code});
  if (class_data_count) {
    map_entries.push_back({kMapClassData, class_data_count, first_class_data});
  }
  if (static_values_count) {
    map_entries.push_back({kMapEncodedArray, static_values_count, first_static_values});
  }
  if (!dex.strings.empty()) {
    map_entries.push_back({kMapStringData, static_cast<uint32_t>(dex.strings.size()),
                           first_string_data});
  }
  map_entries.push_back({kMapMapList, 1, map_off});

  data.u32(static_cast<uint32_t>(map_entries.size()));
  for (const MapEntry& entry : map_entries) {
    data.u16(entry.type);
    data.u16(0);
    data.u32(entry.count);
    data.u32(entry.offset);
  }

  Bytes data_bytes = data.take();

  // Assemble the file: header, id sections, data.
  ByteWriter file;
  for (uint8_t b : dex.header.magic) file.u8(b);
  file.u32(0);  // checksum, patched below
  file.zeros(20);  // signature, patched below
  uint32_t file_size = static_cast<uint32_t>(ids_end + data_bytes.size());
  file.u32(file_size);
  file.u32(static_cast<uint32_t>(kHeaderSize));
  file.u32(kEndianTag);
  file.u32(0);  // link_size
  file.u32(0);  // link_off
  file.u32(map_off);
  auto section = [&](size_t count, uint32_t offset) {
    file.u32(static_cast<uint32_t>(count));
    file.u32(count ? offset : 0);
  };
  uint32_t off = static_cast<uint32_t>(kHeaderSize);
  section(dex.strings.size(), off);
  off += dex.strings.size() * 4;
  section(dex.types.size(), off);
  off += dex.types.size() * 4;
  section(dex.protos.size(), off);
  off += dex.protos.size() * 12;
  section(dex.fields.size(), off);
  off += dex.fields.size() * 8;
  section(dex.methods.size(), off);
  off += dex.methods.size() * 8;
  section(dex.class_defs.size(), off);
  file.u32(static_cast<uint32_t>(data_bytes.size()));
  file.u32(data_off);

  for (uint32_t string_off : string_data_offs) file.u32(string_off);
  for (uint32_t t : dex.types) file.u32(t);
  for (const ProtoRef& proto : dex.protos) {
    file.u32(proto.shorty_index);
    file.u32(proto.return_type_index);
    file.u32(proto.param_type_indices.empty() ? 0
                                              : type_list_offs.at(proto.param_type_indices));
  }
  for (const FieldRef& field : dex.fields) {
    file.u16(static_cast<uint16_t>(field.class_type_index));
    file.u16(static_cast<uint16_t>(field.type_index));
    file.u32(field.name_index);
  }
  for (const MethodRef& method : dex.methods) {
    file.u16(static_cast<uint16_t>(method.class_type_index));
    file.u16(static_cast<uint16_t>(method.proto_index));
    file.u32(method.name_index);
  }
  for (const ClassDef& class_def : dex.class_defs) {
    file.u32(class_def.type_index);
    file.u32(class_def.access_flags);
    file.u32(class_def.superclass_index);
    file.u32(class_def.interfaces.empty() ? 0 : type_list_offs.at(class_def.interfaces));
    file.u32(class_def.source_file_index);
    file.u32(0);  // annotations_off: never emitted by this toolchain
    file.u32(class_data_offs.count(&class_def) ? class_data_offs.at(&class_def) : 0);
    file.u32(static_values_offs.count(&class_def) ? static_values_offs.at(&class_def) : 0);
  }

  file.raw(data_bytes);

  Bytes out = file.take();
  if (out.size() != file_size) fail(ErrorKind::LayoutOverflow, "layout size mismatch");

  std::array<uint8_t, 20> signature = dex_signature(out);
  std::copy(signature.begin(), signature.end(), out.begin() + 12);
  uint32_t checksum = dex_checksum(out);
  out[8] = static_cast<uint8_t>(checksum);
  out[9] = static_cast<uint8_t>(checksum >> 8);
  out[10] = static_cast<uint8_t>(checksum >> 16);
  out[11] = static_cast<uint8_t>(checksum >> 24);
  return out;
}

}  // namespace dexweaver

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

#include <algorithm>
#include <optional>

#include "dexweaver/dex_io.hpp"

namespace dexweaver {

namespace {

constexpr size_t kHeaderSize = 0x70;
constexpr uint32_t kEndianTag = 0x12345678;

std::optional<Opcode> opcode_for_byte(uint8_t byte) {
  for (size_t i = 0; i < static_cast<size_t>(Opcode::Opaque); i++) {
    Opcode op = static_cast<Opcode>(i);
    if (opcode_info(op).byte == byte) return op;
  }
  return std::nullopt;
}

struct RawHeader {
  std::array<uint8_t, 8> magic;
  uint32_t checksum;
  std::array<uint8_t, 20> signature;
  uint32_t file_size;
  uint32_t map_off;
  uint32_t string_ids_size, string_ids_off;
  uint32_t type_ids_size, type_ids_off;
  uint32_t proto_ids_size, proto_ids_off;
  uint32_t field_ids_size, field_ids_off;
  uint32_t method_ids_size, method_ids_off;
  uint32_t class_defs_size, class_defs_off;
};

RawHeader read_header(BytesView bytes) {
  if (bytes.size() < kHeaderSize) fail(ErrorKind::TruncatedFile, "shorter than a DEX header");
  ByteReader reader(bytes);
  RawHeader h{};
  for (auto& b : h.magic) b = reader.u8();
  if (h.magic[0] != 'd' || h.magic[1] != 'e' || h.magic[2] != 'x' || h.magic[3] != '\n' ||
      h.magic[7] != 0) {
    fail(ErrorKind::BadMagic, "magic does not spell dex");
  }
  h.checksum = reader.u32();
  for (auto& b : h.signature) b = reader.u8();
  h.file_size = reader.u32();
  uint32_t header_size = reader.u32();
  if (header_size != kHeaderSize) fail(ErrorKind::BadMagic, "unexpected header size");
  uint32_t endian = reader.u32();
  if (endian != kEndianTag) fail(ErrorKind::BadMagic, "unsupported endianness");
  reader.u32();  // link_size
  reader.u32();  // link_off
  h.map_off = reader.u32();
  h.string_ids_size = reader.u32();
  h.string_ids_off = reader.u32();
  h.type_ids_size = reader.u32();
  h.type_ids_off = reader.u32();
  h.proto_ids_size = reader.u32();
  h.proto_ids_off = reader.u32();
  h.field_ids_size = reader.u32();
  h.field_ids_off = reader.u32();
  h.method_ids_size = reader.u32();
  h.method_ids_off = reader.u32();
  h.class_defs_size = reader.u32();
  h.class_defs_off = reader.u32();
  return h;
}

// Walks one encoded_value and returns the byte length, so static value
// arrays can be carried verbatim.
void walk_encoded_value(ByteReader& reader);

void walk_encoded_annotation(ByteReader& reader) {
  reader.uleb128();  // type_idx
  uint32_t size = reader.uleb128();
  for (uint32_t i = 0; i < size; i++) {
    reader.uleb128();  // name_idx
    walk_encoded_value(reader);
  }
}

void walk_encoded_value(ByteReader& reader) {
  uint8_t header = reader.u8();
  uint8_t type = header & 0x1f;
  uint8_t arg = header >> 5;
  switch (type) {
    case 0x00:  // byte
      reader.skip(1);
      break;
    case 0x02: case 0x03: case 0x04: case 0x06:  // short/char/int/long
    case 0x10: case 0x11:                        // float/double
    case 0x15: case 0x16: case 0x17: case 0x18:  // method_type..string
    case 0x19: case 0x1a: case 0x1b: case 0x1c:  // type..enum... (index forms)
      reader.skip(static_cast<size_t>(arg) + 1);
      break;
    case 0x1d: {  // array
      uint32_t size = reader.uleb128();
      for (uint32_t i = 0; i < size; i++) walk_encoded_value(reader);
      break;
    }
    case 0x1e:  // annotation
      walk_encoded_annotation(reader);
      break;
    case 0x1f:  // null
    case 0x20:  // boolean (value in arg)
      break;
    default:
      fail(ErrorKind::MalformedIndex, "unrecognized encoded value type");
  }
}

Bytes read_encoded_array_bytes(BytesView bytes, uint32_t off) {
  ByteReader reader(bytes, off);
  uint32_t size = reader.uleb128();
  for (uint32_t i = 0; i < size; i++) walk_encoded_value(reader);
  return Bytes(bytes.begin() + off, bytes.begin() + reader.pos());
}

// debug_info_item is a self-delimiting state machine program.
Bytes read_debug_info_bytes(BytesView bytes, uint32_t off) {
  ByteReader reader(bytes, off);
  reader.uleb128();  // line_start
  uint32_t parameters_size = reader.uleb128();
  for (uint32_t i = 0; i < parameters_size; i++) reader.uleb128p1();
  for (;;) {
    uint8_t opcode = reader.u8();
    switch (opcode) {
      case 0x00:  // DBG_END_SEQUENCE
        return Bytes(bytes.begin() + off, bytes.begin() + reader.pos());
      case 0x01:  // DBG_ADVANCE_PC
        reader.uleb128();
        break;
      case 0x02:  // DBG_ADVANCE_LINE
        reader.sleb128();
        break;
      case 0x03:  // DBG_START_LOCAL
        reader.uleb128();
        reader.uleb128p1();
        reader.uleb128p1();
        break;
      case 0x04:  // DBG_START_LOCAL_EXTENDED
        reader.uleb128();
        reader.uleb128p1();
        reader.uleb128p1();
        reader.uleb128p1();
        break;
      case 0x05:  // DBG_END_LOCAL
      case 0x06:  // DBG_RESTART_LOCAL
        reader.uleb128();
        break;
      case 0x07:  // DBG_SET_PROLOGUE_END
      case 0x08:  // DBG_SET_EPILOGUE_BEGIN
        break;
      case 0x09:  // DBG_SET_FILE
        reader.uleb128p1();
        break;
      default:
        break;  // special opcodes carry no operands
    }
  }
}

CodeItem read_code_item(BytesView bytes, uint32_t off, MemoryGauge* gauge) {
  ByteReader reader(bytes, off);
  CodeItem code;
  code.registers_size = reader.u16();
  code.ins_size = reader.u16();
  code.outs_size = reader.u16();
  uint16_t tries_size = reader.u16();
  uint32_t debug_info_off = reader.u32();
  uint32_t insns_size = reader.u32();
  if (code.ins_size > code.registers_size) {
    fail(ErrorKind::MalformedIndex, "ins_size exceeds registers_size");
  }

  std::vector<uint16_t> units(insns_size);
  for (uint32_t i = 0; i < insns_size; i++) units[i] = reader.u16();

  // First pass: cut the unit stream into instructions, keeping raw branch
  // deltas; second pass resolves them to instruction indices.
  struct PendingBranch {
    uint32_t insn_index;
    int32_t target_units;
  };
  std::vector<PendingBranch> branches;
  std::vector<uint32_t> insn_offsets;
  uint32_t at = 0;
  while (at < insns_size) {
    uint16_t first = units[at];
    uint8_t byte = static_cast<uint8_t>(first & 0xff);
    std::optional<Opcode> op = opcode_for_byte(byte);
    if (byte == 0x00 && (first >> 8) != 0) op = std::nullopt;  // payload pseudo-insn

    Instruction insn;
    uint32_t width = 0;
    if (op) {
      insn.op = *op;
      width = opcode_info(*op).units;
      if (at + width > insns_size) fail(ErrorKind::TruncatedFile, "truncated instruction");
      switch (*op) {
        case Opcode::Nop:
        case Opcode::ReturnVoid:
          break;
        case Opcode::Move:
        case Opcode::MoveObject:
          insn.reg_count = 2;
          insn.regs[0] = (first >> 8) & 0xf;
          insn.regs[1] = (first >> 12) & 0xf;
          break;
        case Opcode::MoveResult:
        case Opcode::MoveResultObject:
        case Opcode::Return:
        case Opcode::ReturnObject:
        case Opcode::Throw:
          insn.reg_count = 1;
          insn.regs[0] = first >> 8;
          break;
        case Opcode::Const4: {
          insn.reg_count = 1;
          insn.regs[0] = (first >> 8) & 0xf;
          // Top nibble is a signed 4-bit immediate.
          insn.literal = static_cast<int16_t>(first) >> 12;
          break;
        }
        case Opcode::Const16:
          insn.reg_count = 1;
          insn.regs[0] = first >> 8;
          insn.literal = static_cast<int16_t>(units[at + 1]);
          break;
        case Opcode::ConstString:
        case Opcode::NewInstance:
          insn.reg_count = 1;
          insn.regs[0] = first >> 8;
          insn.pool_index = units[at + 1];
          break;
        case Opcode::Goto: {
          int8_t delta = static_cast<int8_t>(first >> 8);
          branches.push_back({static_cast<uint32_t>(insn_offsets.size()),
                              static_cast<int32_t>(at) + delta});
          break;
        }
        case Opcode::IfEqz: {
          insn.reg_count = 1;
          insn.regs[0] = first >> 8;
          int16_t delta = static_cast<int16_t>(units[at + 1]);
          branches.push_back({static_cast<uint32_t>(insn_offsets.size()),
                              static_cast<int32_t>(at) + delta});
          break;
        }
        case Opcode::InvokeVirtual:
        case Opcode::InvokeDirect:
        case Opcode::InvokeStatic: {
          uint8_t count = first >> 12;
          if (count > 5) fail(ErrorKind::MalformedIndex, "invoke argument count");
          insn.reg_count = count;
          insn.pool_index = units[at + 1];
          uint16_t packed = units[at + 2];
          for (uint8_t a = 0; a < count && a < 4; a++) {
            insn.regs[a] = (packed >> (a * 4)) & 0xf;
          }
          if (count == 5) insn.regs[4] = (first >> 8) & 0xf;
          break;
        }
        case Opcode::Opaque:
          break;  // unreachable
      }
    } else {
      size_t opaque_width = dalvik_insn_width(units.data() + at, insns_size - at);
      if (at + opaque_width > insns_size) {
        fail(ErrorKind::TruncatedFile, "opaque instruction overruns body");
      }
      insn.op = Opcode::Opaque;
      insn.opaque_offset = static_cast<uint32_t>(code.opaque_units.size());
      insn.opaque_units = static_cast<uint16_t>(opaque_width);
      code.opaque_units.insert(code.opaque_units.end(), units.begin() + at,
                               units.begin() + at + opaque_width);
      width = static_cast<uint32_t>(opaque_width);
    }
    insn_offsets.push_back(at);
    code.insns.push_back(insn);
    at += width;
  }
  insn_offsets.push_back(at);

  // insn_offsets' final entry is the end-of-body offset; only try-range ends
  // may resolve to it.
  auto index_of_units = [&](int64_t unit_offset, bool allow_end) -> uint32_t {
    if (unit_offset < 0) {
      fail(ErrorKind::MalformedIndex, "address before start of body");
    }
    auto it = std::lower_bound(insn_offsets.begin(), insn_offsets.end(),
                               static_cast<uint32_t>(unit_offset));
    if (it == insn_offsets.end() || *it != static_cast<uint32_t>(unit_offset)) {
      fail(ErrorKind::MalformedIndex, "address is not an instruction boundary");
    }
    uint32_t index = static_cast<uint32_t>(it - insn_offsets.begin());
    if (index == code.insns.size() && !allow_end) {
      fail(ErrorKind::MalformedIndex, "address past end of body");
    }
    return index;
  };

  for (const PendingBranch& branch : branches) {
    uint32_t index = index_of_units(branch.target_units, false);
    code.insns[branch.insn_index].target = static_cast<int32_t>(index);
  }

  if (tries_size > 0) {
    if (insns_size % 2 != 0) reader.u16();  // alignment padding
    struct RawTry {
      uint32_t start_addr;
      uint16_t insn_count;
      uint16_t handler_off;
    };
    std::vector<RawTry> raw_tries(tries_size);
    for (RawTry& raw : raw_tries) {
      raw.start_addr = reader.u32();
      raw.insn_count = reader.u16();
      raw.handler_off = reader.u16();
    }
    size_t handlers_base = reader.pos();
    reader.uleb128();  // handler list size; entries located by offset
    for (const RawTry& raw : raw_tries) {
      TryBlock try_block;
      try_block.start = index_of_units(raw.start_addr, false);
      try_block.end = index_of_units(static_cast<int64_t>(raw.start_addr) + raw.insn_count, true);
      if (try_block.start >= try_block.end) {
        fail(ErrorKind::MalformedIndex, "empty try range");
      }
      ByteReader handler_reader(bytes, handlers_base + raw.handler_off);
      int32_t size = handler_reader.sleb128();
      uint32_t typed = static_cast<uint32_t>(size < 0 ? -size : size);
      for (uint32_t i = 0; i < typed; i++) {
        Handler handler;
        handler.type_index = handler_reader.uleb128();
        handler.target = index_of_units(handler_reader.uleb128(), false);
        try_block.handlers.push_back(handler);
      }
      if (size <= 0) {
        Handler handler;
        handler.catch_all = true;
        handler.target = index_of_units(handler_reader.uleb128(), false);
        try_block.handlers.push_back(handler);
      }
      if (try_block.handlers.empty()) {
        fail(ErrorKind::MalformedIndex, "try block without handlers");
      }
      code.tries.push_back(try_block);
    }
  }

  if (debug_info_off != 0) {
    if (debug_info_off >= bytes.size()) {
      fail(ErrorKind::TruncatedFile, "debug info offset out of range");
    }
    code.debug_info = read_debug_info_bytes(bytes, debug_info_off);
  }

  if (gauge) {
    gauge->charge(sizeof(CodeItem) + code.insns.size() * sizeof(Instruction) +
                  code.opaque_units.size() * 2 + code.debug_info.size() +
                  code.tries.size() * sizeof(TryBlock));
  }
  return code;
}

}  // namespace

DexFile parse_dex(BytesView bytes, MemoryGauge* gauge) {
  RawHeader raw = read_header(bytes);
  if (raw.file_size != bytes.size()) {
    fail(ErrorKind::TruncatedFile, "file_size field disagrees with input length");
  }
  if (dex_checksum(bytes) != raw.checksum) {
    fail(ErrorKind::DigestMismatch, "Adler-32 checksum does not match content");
  }
  if (dex_signature(bytes) != raw.signature) {
    fail(ErrorKind::DigestMismatch, "SHA-1 signature does not match content");
  }

  DexFile dex;
  dex.header.magic = raw.magic;
  dex.header.checksum = raw.checksum;
  dex.header.signature = raw.signature;
  dex.header.file_size = raw.file_size;

  // String pool.
  {
    ByteReader ids(bytes, raw.string_ids_off);
    for (uint32_t i = 0; i < raw.string_ids_size; i++) {
      uint32_t data_off = ids.u32();
      ByteReader reader(bytes, data_off);
      reader.uleb128();  // utf16 length; we trust the terminator
      size_t start = reader.pos();
      while (reader.u8() != 0) {
      }
      std::string s(reinterpret_cast<const char*>(bytes.data()) + start,
                    reader.pos() - 1 - start);
      if (gauge) gauge->charge(s.size() + 32);
      dex.strings.push_back(std::move(s));
    }
  }

  {
    ByteReader ids(bytes, raw.type_ids_off);
    for (uint32_t i = 0; i < raw.type_ids_size; i++) dex.types.push_back(ids.u32());
    if (gauge) gauge->charge(raw.type_ids_size * 16);
  }

  {
    ByteReader ids(bytes, raw.proto_ids_off);
    for (uint32_t i = 0; i < raw.proto_ids_size; i++) {
      ProtoRef proto;
      proto.shorty_index = ids.u32();
      proto.return_type_index = ids.u32();
      uint32_t parameters_off = ids.u32();
      if (parameters_off != 0) {
        ByteReader list(bytes, parameters_off);
        uint32_t size = list.u32();
        for (uint32_t p = 0; p < size; p++) proto.param_type_indices.push_back(list.u16());
      }
      if (gauge) gauge->charge(sizeof(ProtoRef) + proto.param_type_indices.size() * 4);
      dex.protos.push_back(std::move(proto));
    }
  }

  {
    ByteReader ids(bytes, raw.field_ids_off);
    for (uint32_t i = 0; i < raw.field_ids_size; i++) {
      FieldRef field;
      field.class_type_index = ids.u16();
      field.type_index = ids.u16();
      field.name_index = ids.u32();
      dex.fields.push_back(field);
    }
    if (gauge) gauge->charge(raw.field_ids_size * sizeof(FieldRef));
  }

  {
    ByteReader ids(bytes, raw.method_ids_off);
    for (uint32_t i = 0; i < raw.method_ids_size; i++) {
      MethodRef method;
      method.class_type_index = ids.u16();
      method.proto_index = ids.u16();
      method.name_index = ids.u32();
      dex.methods.push_back(method);
    }
    if (gauge) gauge->charge(raw.method_ids_size * sizeof(MethodRef));
  }

  {
    ByteReader defs(bytes, raw.class_defs_off);
    for (uint32_t i = 0; i < raw.class_defs_size; i++) {
      ClassDef class_def;
      class_def.type_index = defs.u32();
      class_def.access_flags = defs.u32();
      class_def.superclass_index = defs.u32();
      uint32_t interfaces_off = defs.u32();
      class_def.source_file_index = defs.u32();
      uint32_t annotations_off = defs.u32();
      uint32_t class_data_off = defs.u32();
      uint32_t static_values_off = defs.u32();

      if (annotations_off != 0) {
        fail(ErrorKind::MalformedIndex,
             "class annotations are not supported by this toolchain");
      }
      if (interfaces_off != 0) {
        ByteReader list(bytes, interfaces_off);
        uint32_t size = list.u32();
        for (uint32_t p = 0; p < size; p++) class_def.interfaces.push_back(list.u16());
      }
      if (static_values_off != 0) {
        class_def.static_values = read_encoded_array_bytes(bytes, static_values_off);
      }
      if (class_data_off != 0) {
        ByteReader data(bytes, class_data_off);
        uint32_t static_fields_size = data.uleb128();
        uint32_t instance_fields_size = data.uleb128();
        uint32_t direct_methods_size = data.uleb128();
        uint32_t virtual_methods_size = data.uleb128();
        uint32_t field_index = 0;
        for (uint32_t f = 0; f < static_fields_size; f++) {
          field_index += data.uleb128();
          class_def.static_fields.push_back({field_index, data.uleb128()});
        }
        field_index = 0;
        for (uint32_t f = 0; f < instance_fields_size; f++) {
          field_index += data.uleb128();
          class_def.instance_fields.push_back({field_index, data.uleb128()});
        }
        auto read_methods = [&](uint32_t count, std::vector<EncodedMethod>& out) {
          uint32_t method_index = 0;
          for (uint32_t m = 0; m < count; m++) {
            method_index += data.uleb128();
            EncodedMethod method;
            method.method_index = method_index;
            method.access_flags = data.uleb128();
            uint32_t code_off = data.uleb128();
            if (code_off != 0) {
              method.code = read_code_item(bytes, code_off, gauge);
            }
            out.push_back(std::move(method));
          }
        };
        read_methods(direct_methods_size, class_def.direct_methods);
        read_methods(virtual_methods_size, class_def.virtual_methods);
      }
      if (gauge) gauge->charge(sizeof(ClassDef));
      dex.class_defs.push_back(std::move(class_def));
    }
  }

  validate_indices(dex);
  if (!pools_sorted(dex)) {
    fail(ErrorKind::MalformedIndex, "pool ordering violates the format's sort rules");
  }
  return dex;
}

}  // namespace dexweaver

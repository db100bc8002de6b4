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

#include "dexweaver/instruction.hpp"

#include <unordered_map>

namespace dexweaver {

namespace {

constexpr OpcodeInfo kOpcodeTable[] = {
    // mnemonic              byte  units pool              branch invoke regs4
    {"nop",                  0x00, 1, PoolKind::None,   false, false, false},
    {"move",                 0x01, 1, PoolKind::None,   false, false, true},
    {"move-object",          0x07, 1, PoolKind::None,   false, false, true},
    {"move-result",          0x0a, 1, PoolKind::None,   false, false, false},
    {"move-result-object",   0x0c, 1, PoolKind::None,   false, false, false},
    {"return-void",          0x0e, 1, PoolKind::None,   false, false, false},
    {"return",               0x0f, 1, PoolKind::None,   false, false, false},
    {"return-object",        0x11, 1, PoolKind::None,   false, false, false},
    {"const/4",              0x12, 1, PoolKind::None,   false, false, true},
    {"const/16",             0x13, 2, PoolKind::None,   false, false, false},
    {"const-string",         0x1a, 2, PoolKind::String, false, false, false},
    {"new-instance",         0x22, 2, PoolKind::Type,   false, false, false},
    {"throw",                0x27, 1, PoolKind::None,   false, false, false},
    {"goto",                 0x28, 1, PoolKind::None,   true,  false, false},
    {"if-eqz",               0x38, 2, PoolKind::None,   true,  false, false},
    {"invoke-virtual",       0x6e, 3, PoolKind::Method, false, true,  true},
    {"invoke-direct",        0x70, 3, PoolKind::Method, false, true,  true},
    {"invoke-static",        0x71, 3, PoolKind::Method, false, true,  true},
    {"(opaque)",             0xff, 0, PoolKind::None,   false, false, false},
};

static_assert(sizeof(kOpcodeTable) / sizeof(kOpcodeTable[0]) ==
              static_cast<size_t>(Opcode::Opaque) + 1);

// Code-unit width per Dalvik opcode byte, DEX version 035. Unused opcodes
// are listed as width 1; the parser only consults entries it encounters.
constexpr uint8_t kDalvikWidth[256] = {
    // 0x00-0x0f
    1, 1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 1, 1, 1, 1, 1,
    // 0x10-0x1f
    1, 1, 1, 2, 3, 2, 2, 3, 5, 2, 2, 3, 2, 1, 1, 2,
    // 0x20-0x2f
    2, 1, 2, 2, 3, 3, 3, 1, 1, 2, 3, 3, 3, 2, 2, 2,
    // 0x30-0x3f
    2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 1, 1,
    // 0x40-0x4f
    1, 1, 1, 1, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2,
    // 0x50-0x5f
    2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2,
    // 0x60-0x6f
    2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 3, 3,
    // 0x70-0x7f
    3, 3, 3, 1, 3, 3, 3, 3, 3, 1, 1, 1, 1, 1, 1, 1,
    // 0x80-0x8f
    1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1,
    // 0x90-0x9f
    2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2,
    // 0xa0-0xaf
    2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2,
    // 0xb0-0xbf
    1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1,
    // 0xc0-0xcf
    1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1,
    // 0xd0-0xdf
    2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2,
    // 0xe0-0xef
    2, 2, 2, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1,
    // 0xf0-0xff
    1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1,
};

}  // namespace

const OpcodeInfo& opcode_info(Opcode op) {
  return kOpcodeTable[static_cast<size_t>(op)];
}

std::optional<Opcode> opcode_from_mnemonic(const std::string& mnemonic) {
  static const std::unordered_map<std::string, Opcode> lookup = [] {
    std::unordered_map<std::string, Opcode> m;
    for (size_t i = 0; i < static_cast<size_t>(Opcode::Opaque); i++) {
      m.emplace(kOpcodeTable[i].mnemonic, static_cast<Opcode>(i));
    }
    return m;
  }();
  auto it = lookup.find(mnemonic);
  if (it == lookup.end()) return std::nullopt;
  return it->second;
}

Instruction make_nop() { return Instruction{}; }

Instruction make_move(Opcode op, uint16_t dst, uint16_t src) {
  Instruction insn;
  insn.op = op;
  insn.reg_count = 2;
  insn.regs[0] = dst;
  insn.regs[1] = src;
  return insn;
}

Instruction make_move_result(Opcode op, uint16_t dst) {
  Instruction insn;
  insn.op = op;
  insn.reg_count = 1;
  insn.regs[0] = dst;
  return insn;
}

Instruction make_return_void() {
  Instruction insn;
  insn.op = Opcode::ReturnVoid;
  return insn;
}

Instruction make_return(Opcode op, uint16_t reg) {
  Instruction insn;
  insn.op = op;
  insn.reg_count = 1;
  insn.regs[0] = reg;
  return insn;
}

Instruction make_const4(uint16_t reg, int32_t value) {
  Instruction insn;
  insn.op = Opcode::Const4;
  insn.reg_count = 1;
  insn.regs[0] = reg;
  insn.literal = value;
  return insn;
}

Instruction make_const16(uint16_t reg, int32_t value) {
  Instruction insn;
  insn.op = Opcode::Const16;
  insn.reg_count = 1;
  insn.regs[0] = reg;
  insn.literal = value;
  return insn;
}

Instruction make_const_string(uint16_t reg, uint32_t string_index) {
  Instruction insn;
  insn.op = Opcode::ConstString;
  insn.reg_count = 1;
  insn.regs[0] = reg;
  insn.pool_index = string_index;
  return insn;
}

Instruction make_new_instance(uint16_t reg, uint32_t type_index) {
  Instruction insn;
  insn.op = Opcode::NewInstance;
  insn.reg_count = 1;
  insn.regs[0] = reg;
  insn.pool_index = type_index;
  return insn;
}

Instruction make_throw(uint16_t reg) {
  Instruction insn;
  insn.op = Opcode::Throw;
  insn.reg_count = 1;
  insn.regs[0] = reg;
  return insn;
}

Instruction make_goto(int32_t target_index) {
  Instruction insn;
  insn.op = Opcode::Goto;
  insn.target = target_index;
  return insn;
}

Instruction make_if_eqz(uint16_t reg, int32_t target_index) {
  Instruction insn;
  insn.op = Opcode::IfEqz;
  insn.reg_count = 1;
  insn.regs[0] = reg;
  insn.target = target_index;
  return insn;
}

Instruction make_invoke(Opcode op, std::vector<uint16_t> args, uint32_t method_index) {
  Instruction insn;
  insn.op = op;
  insn.reg_count = static_cast<uint8_t>(args.size());
  for (size_t i = 0; i < args.size() && i < 5; i++) insn.regs[i] = args[i];
  insn.pool_index = method_index;
  return insn;
}

void check_register_widths(const Instruction& insn, const std::string& context) {
  const OpcodeInfo& info = opcode_info(insn.op);
  uint16_t limit = info.regs4bit ? 15 : 255;
  for (uint8_t i = 0; i < insn.reg_count; i++) {
    if (insn.regs[i] > limit) {
      fail(ErrorKind::RegisterPressure,
           std::string(info.mnemonic) + " register v" + std::to_string(insn.regs[i]) +
               " exceeds " + (info.regs4bit ? "4" : "8") + "-bit field in " + context);
    }
  }
  if (insn.op == Opcode::Const4 && (insn.literal < -8 || insn.literal > 7)) {
    fail(ErrorKind::RegisterPressure, "const/4 literal out of range in " + context);
  }
  if (insn.op == Opcode::InvokeVirtual || insn.op == Opcode::InvokeDirect ||
      insn.op == Opcode::InvokeStatic) {
    if (insn.reg_count > 5) {
      fail(ErrorKind::RegisterPressure, "invoke argument count exceeds 5 in " + context);
    }
  }
}

size_t dalvik_insn_width(const uint16_t* units, size_t remaining) {
  if (remaining == 0) fail(ErrorKind::TruncatedFile, "empty instruction stream");
  uint16_t first = units[0];
  uint8_t opcode = static_cast<uint8_t>(first & 0xff);
  if (opcode == 0x00 && (first >> 8) != 0) {
    // Switch/array payload pseudo-instructions.
    uint16_t ident = first >> 8;
    if (ident == 0x01) {  // packed-switch-payload
      if (remaining < 2) fail(ErrorKind::TruncatedFile, "truncated payload");
      return static_cast<size_t>(units[1]) * 2 + 4;
    }
    if (ident == 0x02) {  // sparse-switch-payload
      if (remaining < 2) fail(ErrorKind::TruncatedFile, "truncated payload");
      return static_cast<size_t>(units[1]) * 4 + 2;
    }
    if (ident == 0x03) {  // fill-array-data-payload
      if (remaining < 4) fail(ErrorKind::TruncatedFile, "truncated payload");
      uint16_t element_width = units[1];
      uint32_t size = static_cast<uint32_t>(units[2]) |
                      (static_cast<uint32_t>(units[3]) << 16);
      return (static_cast<size_t>(size) * element_width + 1) / 2 + 4;
    }
    fail(ErrorKind::UnknownOpcode, "unrecognized payload ident");
  }
  return kDalvikWidth[opcode];
}

}  // namespace dexweaver

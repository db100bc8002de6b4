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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dexweaver/errors.hpp"

namespace dexweaver {

// The rewritable instruction subset. Anything else decodes to Opaque and is
// carried as raw code units that mutation refuses to move.
enum class Opcode : uint8_t {
  Nop,
  Move,
  MoveObject,
  MoveResult,
  MoveResultObject,
  ReturnVoid,
  Return,
  ReturnObject,
  Const4,
  Const16,
  ConstString,
  NewInstance,
  Throw,
  Goto,
  IfEqz,
  InvokeVirtual,
  InvokeDirect,
  InvokeStatic,
  Opaque,
};

// Which constant pool an instruction's index operand points into.
enum class PoolKind : uint8_t { None, String, Type, Method };

struct OpcodeInfo {
  const char* mnemonic;
  uint8_t byte;        // Dalvik opcode byte
  uint8_t units;       // code units occupied
  PoolKind pool;
  bool is_branch;
  bool is_invoke;
  bool regs4bit;       // register operands live in 4-bit fields
};

const OpcodeInfo& opcode_info(Opcode op);
std::optional<Opcode> opcode_from_mnemonic(const std::string& mnemonic);

struct Instruction {
  Opcode op = Opcode::Nop;
  uint8_t reg_count = 0;
  std::array<uint16_t, 5> regs{};
  int32_t literal = 0;       // Const4 / Const16 immediate
  uint32_t pool_index = 0;   // string/type/method index per PoolKind
  int32_t target = -1;       // branch target as an instruction index
  uint32_t opaque_offset = 0;  // slice into CodeItem::opaque_units
  uint16_t opaque_units = 0;

  uint16_t units() const {
    return op == Opcode::Opaque ? opaque_units : opcode_info(op).units;
  }
  bool is_invoke() const { return opcode_info(op).is_invoke; }
  bool is_branch() const { return opcode_info(op).is_branch; }

  bool operator==(const Instruction& other) const = default;
};

Instruction make_nop();
Instruction make_move(Opcode op, uint16_t dst, uint16_t src);
Instruction make_move_result(Opcode op, uint16_t dst);
Instruction make_return_void();
Instruction make_return(Opcode op, uint16_t reg);
Instruction make_const4(uint16_t reg, int32_t value);
Instruction make_const16(uint16_t reg, int32_t value);
Instruction make_const_string(uint16_t reg, uint32_t string_index);
Instruction make_new_instance(uint16_t reg, uint32_t type_index);
Instruction make_throw(uint16_t reg);
Instruction make_goto(int32_t target_index);
Instruction make_if_eqz(uint16_t reg, int32_t target_index);
Instruction make_invoke(Opcode op, std::vector<uint16_t> args, uint32_t method_index);

// Validates that every register operand fits its encoding field; fails with
// RegisterPressure naming `context` otherwise.
void check_register_widths(const Instruction& insn, const std::string& context);

// Code units a full-table Dalvik instruction occupies, given its first code
// unit (and, for payload pseudo-instructions, access to following units).
// Used to step over unsupported opcodes when decoding.
size_t dalvik_insn_width(const uint16_t* units, size_t remaining);

}  // namespace dexweaver

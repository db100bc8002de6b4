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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dexweaver/bytes.hpp"
#include "dexweaver/instruction.hpp"

namespace dexweaver {

constexpr uint32_t kNoIndex = 0xffffffff;

// Access flags (the subset this toolchain understands by name).
constexpr uint32_t kAccPublic = 0x0001;
constexpr uint32_t kAccPrivate = 0x0002;
constexpr uint32_t kAccProtected = 0x0004;
constexpr uint32_t kAccStatic = 0x0008;
constexpr uint32_t kAccFinal = 0x0010;
constexpr uint32_t kAccNative = 0x0100;
constexpr uint32_t kAccAbstract = 0x0400;
constexpr uint32_t kAccConstructor = 0x10000;

struct DexHeader {
  std::array<uint8_t, 8> magic{'d', 'e', 'x', '\n', '0', '3', '5', 0};
  uint32_t checksum = 0;                 // Adler-32 over bytes after this field
  std::array<uint8_t, 20> signature{};   // SHA-1 over bytes after this field
  uint32_t file_size = 0;
};

struct ProtoRef {
  uint32_t shorty_index = 0;       // string index
  uint32_t return_type_index = 0;  // type index
  std::vector<uint32_t> param_type_indices;

  bool operator==(const ProtoRef&) const = default;
};

struct FieldRef {
  uint32_t class_type_index = 0;
  uint32_t type_index = 0;
  uint32_t name_index = 0;

  bool operator==(const FieldRef&) const = default;
};

struct MethodRef {
  uint32_t class_type_index = 0;
  uint32_t proto_index = 0;
  uint32_t name_index = 0;

  bool operator==(const MethodRef&) const = default;
};

// Catch handler inside a try block. Targets are instruction indices; the
// serializer converts to code-unit addresses.
struct Handler {
  bool catch_all = false;
  uint32_t type_index = 0;  // meaningless when catch_all
  uint32_t target = 0;

  bool operator==(const Handler&) const = default;
};

// [start, end) in instruction indices. Handler list is non-empty; at most
// one catch-all, listed last.
struct TryBlock {
  uint32_t start = 0;
  uint32_t end = 0;
  std::vector<Handler> handlers;

  bool operator==(const TryBlock&) const = default;
};

struct CodeItem {
  uint16_t registers_size = 0;
  uint16_t ins_size = 0;   // parameters occupy the highest registers
  uint16_t outs_size = 0;
  std::vector<Instruction> insns;
  std::vector<TryBlock> tries;
  std::vector<uint16_t> opaque_units;  // raw code units referenced by Opaque insns
  Bytes debug_info;                    // verbatim debug_info_item, empty if none

  bool has_opaque() const;
  // Code-unit offset of each instruction plus a final total-units entry.
  std::vector<uint32_t> unit_offsets() const;
  uint32_t total_units() const;
  std::optional<uint32_t> index_at_offset(uint32_t unit_offset) const;

  bool operator==(const CodeItem&) const = default;
};

struct EncodedField {
  uint32_t field_index = 0;
  uint32_t access_flags = 0;

  bool operator==(const EncodedField&) const = default;
};

struct EncodedMethod {
  uint32_t method_index = 0;
  uint32_t access_flags = 0;
  std::optional<CodeItem> code;  // absent for native/abstract

  bool operator==(const EncodedMethod&) const = default;
};

struct ClassDef {
  uint32_t type_index = 0;
  uint32_t access_flags = 0;
  uint32_t superclass_index = kNoIndex;
  uint32_t source_file_index = kNoIndex;
  std::vector<uint32_t> interfaces;  // type indices
  std::vector<EncodedField> static_fields;
  std::vector<EncodedField> instance_fields;
  std::vector<EncodedMethod> direct_methods;
  std::vector<EncodedMethod> virtual_methods;
  Bytes static_values;  // verbatim encoded_array_item, empty if none

  bool operator==(const ClassDef&) const = default;
};

// In-memory model of one DEX container. Pools are index-addressed exactly as
// in the format; normalize() restores the format's sort orders after
// mutation. Strings are raw MUTF-8 bytes.
struct DexFile {
  DexHeader header;
  std::vector<std::string> strings;
  std::vector<uint32_t> types;  // string indices
  std::vector<ProtoRef> protos;
  std::vector<FieldRef> fields;
  std::vector<MethodRef> methods;
  std::vector<ClassDef> class_defs;

  const std::string& string_at(uint32_t index) const;
  const std::string& type_descriptor(uint32_t type_index) const;
};

// Structural equality: pools and classes, ignoring header digests (they are
// recomputed on every write).
bool structurally_equal(const DexFile& a, const DexFile& b);

// "Lcom/ads/x/Banner;" -> "com.ads.x"; classes in the default package map
// to "".
std::string package_of_descriptor(const std::string& descriptor);

// Package prefix match on dotted names, segment-aware: "com.ads" matches
// "com.ads" and "com.ads.x" but not "com.adsense".
bool package_matches(const std::string& package, const std::string& prefix);

// "Lapi/Gps;->getLocation()I" built from the pools.
std::string method_signature(const DexFile& dex, uint32_t method_index);
std::string proto_descriptor(const DexFile& dex, uint32_t proto_index);

// Shorty for a method descriptor: return shape then parameter shapes,
// reference types collapsed to 'L'.
std::string shorty_for(const std::string& return_type,
                       const std::vector<std::string>& param_types);

// Pool interning. New entries are appended; call normalize() afterwards to
// restore sort order (all stored indices are remapped).
uint32_t intern_string(DexFile& dex, const std::string& mutf8);
uint32_t intern_type(DexFile& dex, const std::string& descriptor);
uint32_t intern_proto(DexFile& dex, const std::string& return_type,
                      const std::vector<std::string>& param_types);
uint32_t intern_method(DexFile& dex, const std::string& class_descriptor,
                       const std::string& name, const std::string& return_type,
                       const std::vector<std::string>& param_types);

// Hash-indexed interning for hot paths (assembler, passes, generator). The
// wrapped DexFile must not be mutated behind the interner's back while it is
// alive.
class Interner {
 public:
  explicit Interner(DexFile& dex);

  uint32_t string(const std::string& mutf8);
  uint32_t type(const std::string& descriptor);
  uint32_t proto(const std::string& return_type,
                 const std::vector<std::string>& param_types);
  uint32_t method(const std::string& class_descriptor, const std::string& name,
                  const std::string& return_type,
                  const std::vector<std::string>& param_types);

 private:
  DexFile& dex_;
  std::map<std::string, uint32_t> strings_;
  std::map<uint32_t, uint32_t> types_;  // descriptor string index -> type index
  std::map<std::pair<uint32_t, std::vector<uint32_t>>, uint32_t> protos_;
  std::map<std::tuple<uint32_t, uint32_t, uint32_t>, uint32_t> methods_;
};

void normalize(DexFile& dex);
bool pools_sorted(const DexFile& dex);

// Checks every stored index against its pool; fails with MalformedIndex.
void validate_indices(const DexFile& dex);

struct TrySite {
  uint32_t class_def_index = 0;
  uint32_t method_index = 0;  // method_ids index of the enclosing method
  uint32_t try_index = 0;
  TryBlock try_block;
};

std::vector<TrySite> find_try_blocks(const DexFile& dex,
                                     const std::vector<std::string>& package_prefixes);

struct CallSite {
  uint32_t class_def_index = 0;
  uint32_t method_index = 0;    // enclosing method
  uint32_t insn_index = 0;
  uint32_t callee_method_index = 0;
  std::string key;              // full signature, the permission-map key
};

// Invoke instructions whose callee signature appears in `keys`, in
// class/method/instruction order. The result size is the N of the
// instrumentation accounting.
std::vector<CallSite> find_protected_invocations(const DexFile& dex,
                                                 const std::set<std::string>& keys);

// Approximate working-set size of the model, used by the memory budget.
size_t estimate_model_size(const DexFile& dex);

}  // namespace dexweaver

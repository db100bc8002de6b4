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

#include "dexweaver/dex_model.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

namespace dexweaver {

bool CodeItem::has_opaque() const {
  return std::any_of(insns.begin(), insns.end(),
                     [](const Instruction& i) { return i.op == Opcode::Opaque; });
}

std::vector<uint32_t> CodeItem::unit_offsets() const {
  std::vector<uint32_t> offsets;
  offsets.reserve(insns.size() + 1);
  uint32_t at = 0;
  for (const Instruction& insn : insns) {
    offsets.push_back(at);
    at += insn.units();
  }
  offsets.push_back(at);
  return offsets;
}

uint32_t CodeItem::total_units() const {
  uint32_t at = 0;
  for (const Instruction& insn : insns) at += insn.units();
  return at;
}

std::optional<uint32_t> CodeItem::index_at_offset(uint32_t unit_offset) const {
  uint32_t at = 0;
  for (uint32_t i = 0; i < insns.size(); i++) {
    if (at == unit_offset) return i;
    if (at > unit_offset) return std::nullopt;
    at += insns[i].units();
  }
  if (at == unit_offset) return static_cast<uint32_t>(insns.size());
  return std::nullopt;
}

const std::string& DexFile::string_at(uint32_t index) const {
  if (index >= strings.size()) fail(ErrorKind::MalformedIndex, "string index out of range");
  return strings[index];
}

const std::string& DexFile::type_descriptor(uint32_t type_index) const {
  if (type_index >= types.size()) fail(ErrorKind::MalformedIndex, "type index out of range");
  return string_at(types[type_index]);
}

bool structurally_equal(const DexFile& a, const DexFile& b) {
  return a.header.magic == b.header.magic && a.strings == b.strings &&
         a.types == b.types && a.protos == b.protos && a.fields == b.fields &&
         a.methods == b.methods && a.class_defs == b.class_defs;
}

std::string package_of_descriptor(const std::string& descriptor) {
  if (descriptor.size() < 3 || descriptor.front() != 'L' || descriptor.back() != ';') {
    return "";
  }
  std::string inner = descriptor.substr(1, descriptor.size() - 2);
  size_t last_slash = inner.rfind('/');
  if (last_slash == std::string::npos) return "";
  std::string package = inner.substr(0, last_slash);
  std::replace(package.begin(), package.end(), '/', '.');
  return package;
}

bool package_matches(const std::string& package, const std::string& prefix) {
  if (prefix.empty()) return false;
  if (package.size() < prefix.size()) return false;
  if (package.compare(0, prefix.size(), prefix) != 0) return false;
  return package.size() == prefix.size() || package[prefix.size()] == '.';
}

std::string proto_descriptor(const DexFile& dex, uint32_t proto_index) {
  if (proto_index >= dex.protos.size()) {
    fail(ErrorKind::MalformedIndex, "proto index out of range");
  }
  const ProtoRef& proto = dex.protos[proto_index];
  std::string out = "(";
  for (uint32_t t : proto.param_type_indices) out += dex.type_descriptor(t);
  out += ")";
  out += dex.type_descriptor(proto.return_type_index);
  return out;
}

std::string method_signature(const DexFile& dex, uint32_t method_index) {
  if (method_index >= dex.methods.size()) {
    fail(ErrorKind::MalformedIndex, "method index out of range");
  }
  const MethodRef& method = dex.methods[method_index];
  return dex.type_descriptor(method.class_type_index) + "->" +
         dex.string_at(method.name_index) + proto_descriptor(dex, method.proto_index);
}

std::string shorty_for(const std::string& return_type,
                       const std::vector<std::string>& param_types) {
  auto shape = [](const std::string& descriptor) -> char {
    char c = descriptor.empty() ? 'V' : descriptor[0];
    return (c == 'L' || c == '[') ? 'L' : c;
  };
  std::string shorty(1, shape(return_type));
  for (const std::string& p : param_types) shorty += shape(p);
  return shorty;
}

uint32_t intern_string(DexFile& dex, const std::string& mutf8) {
  for (uint32_t i = 0; i < dex.strings.size(); i++) {
    if (dex.strings[i] == mutf8) return i;
  }
  dex.strings.push_back(mutf8);
  return static_cast<uint32_t>(dex.strings.size() - 1);
}

uint32_t intern_type(DexFile& dex, const std::string& descriptor) {
  uint32_t string_index = intern_string(dex, descriptor);
  for (uint32_t i = 0; i < dex.types.size(); i++) {
    if (dex.types[i] == string_index) return i;
  }
  dex.types.push_back(string_index);
  return static_cast<uint32_t>(dex.types.size() - 1);
}

uint32_t intern_proto(DexFile& dex, const std::string& return_type,
                      const std::vector<std::string>& param_types) {
  ProtoRef proto;
  proto.shorty_index = intern_string(dex, shorty_for(return_type, param_types));
  proto.return_type_index = intern_type(dex, return_type);
  for (const std::string& p : param_types) {
    proto.param_type_indices.push_back(intern_type(dex, p));
  }
  for (uint32_t i = 0; i < dex.protos.size(); i++) {
    if (dex.protos[i] == proto) return i;
  }
  dex.protos.push_back(proto);
  return static_cast<uint32_t>(dex.protos.size() - 1);
}

uint32_t intern_method(DexFile& dex, const std::string& class_descriptor,
                       const std::string& name, const std::string& return_type,
                       const std::vector<std::string>& param_types) {
  MethodRef method;
  method.class_type_index = intern_type(dex, class_descriptor);
  method.proto_index = intern_proto(dex, return_type, param_types);
  method.name_index = intern_string(dex, name);
  for (uint32_t i = 0; i < dex.methods.size(); i++) {
    if (dex.methods[i] == method) return i;
  }
  dex.methods.push_back(method);
  return static_cast<uint32_t>(dex.methods.size() - 1);
}

Interner::Interner(DexFile& dex) : dex_(dex) {
  for (uint32_t i = 0; i < dex_.strings.size(); i++) strings_[dex_.strings[i]] = i;
  for (uint32_t i = 0; i < dex_.types.size(); i++) types_[dex_.types[i]] = i;
  for (uint32_t i = 0; i < dex_.protos.size(); i++) {
    const ProtoRef& p = dex_.protos[i];
    protos_[{p.return_type_index, p.param_type_indices}] = i;
  }
  for (uint32_t i = 0; i < dex_.methods.size(); i++) {
    const MethodRef& m = dex_.methods[i];
    methods_[{m.class_type_index, m.name_index, m.proto_index}] = i;
  }
}

uint32_t Interner::string(const std::string& mutf8) {
  auto it = strings_.find(mutf8);
  if (it != strings_.end()) return it->second;
  dex_.strings.push_back(mutf8);
  uint32_t index = static_cast<uint32_t>(dex_.strings.size() - 1);
  strings_[mutf8] = index;
  return index;
}

uint32_t Interner::type(const std::string& descriptor) {
  uint32_t string_index = string(descriptor);
  auto it = types_.find(string_index);
  if (it != types_.end()) return it->second;
  dex_.types.push_back(string_index);
  uint32_t index = static_cast<uint32_t>(dex_.types.size() - 1);
  types_[string_index] = index;
  return index;
}

uint32_t Interner::proto(const std::string& return_type,
                         const std::vector<std::string>& param_types) {
  uint32_t shorty_index = string(shorty_for(return_type, param_types));
  uint32_t return_index = type(return_type);
  std::vector<uint32_t> params;
  params.reserve(param_types.size());
  for (const std::string& p : param_types) params.push_back(type(p));
  auto key = std::make_pair(return_index, params);
  auto it = protos_.find(key);
  if (it != protos_.end()) return it->second;
  dex_.protos.push_back(ProtoRef{shorty_index, return_index, std::move(params)});
  uint32_t index = static_cast<uint32_t>(dex_.protos.size() - 1);
  protos_[key] = index;
  return index;
}

uint32_t Interner::method(const std::string& class_descriptor, const std::string& name,
                          const std::string& return_type,
                          const std::vector<std::string>& param_types) {
  uint32_t class_index = type(class_descriptor);
  uint32_t proto_index = proto(return_type, param_types);
  uint32_t name_index = string(name);
  auto key = std::make_tuple(class_index, name_index, proto_index);
  auto it = methods_.find(key);
  if (it != methods_.end()) return it->second;
  dex_.methods.push_back(MethodRef{class_index, proto_index, name_index});
  uint32_t index = static_cast<uint32_t>(dex_.methods.size() - 1);
  methods_[key] = index;
  return index;
}

namespace {

// Sorts one pool with a comparator over indices, returning old->new map.
std::vector<uint32_t> sort_permutation(size_t n,
                                       const std::function<bool(uint32_t, uint32_t)>& less) {
  std::vector<uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), less);
  std::vector<uint32_t> remap(n);
  for (uint32_t new_index = 0; new_index < n; new_index++) {
    remap[order[new_index]] = new_index;
  }
  return remap;
}

template <typename T>
void apply_permutation(std::vector<T>& pool, const std::vector<uint32_t>& remap) {
  std::vector<T> sorted(pool.size());
  for (uint32_t old_index = 0; old_index < pool.size(); old_index++) {
    sorted[remap[old_index]] = std::move(pool[old_index]);
  }
  pool = std::move(sorted);
}

void remap_code(CodeItem& code, const std::vector<uint32_t>& string_remap,
                const std::vector<uint32_t>& type_remap,
                const std::vector<uint32_t>& method_remap) {
  for (Instruction& insn : code.insns) {
    switch (opcode_info(insn.op).pool) {
      case PoolKind::String: insn.pool_index = string_remap[insn.pool_index]; break;
      case PoolKind::Type: insn.pool_index = type_remap[insn.pool_index]; break;
      case PoolKind::Method: insn.pool_index = method_remap[insn.pool_index]; break;
      case PoolKind::None: break;
    }
  }
  for (TryBlock& try_block : code.tries) {
    for (Handler& handler : try_block.handlers) {
      if (!handler.catch_all) handler.type_index = type_remap[handler.type_index];
    }
  }
}

}  // namespace

void normalize(DexFile& dex) {
  // Strings by UTF-16 code point order.
  std::vector<uint32_t> string_remap = sort_permutation(
      dex.strings.size(),
      [&](uint32_t a, uint32_t b) { return mutf8_less(dex.strings[a], dex.strings[b]); });
  apply_permutation(dex.strings, string_remap);

  for (uint32_t& t : dex.types) t = string_remap[t];

  // Types by descriptor string index.
  std::vector<uint32_t> type_remap = sort_permutation(
      dex.types.size(), [&](uint32_t a, uint32_t b) { return dex.types[a] < dex.types[b]; });
  apply_permutation(dex.types, type_remap);

  for (ProtoRef& proto : dex.protos) {
    proto.shorty_index = string_remap[proto.shorty_index];
    proto.return_type_index = type_remap[proto.return_type_index];
    for (uint32_t& t : proto.param_type_indices) t = type_remap[t];
  }

  // Protos by return type, then parameter list.
  std::vector<uint32_t> proto_remap = sort_permutation(
      dex.protos.size(), [&](uint32_t a, uint32_t b) {
        const ProtoRef& pa = dex.protos[a];
        const ProtoRef& pb = dex.protos[b];
        if (pa.return_type_index != pb.return_type_index) {
          return pa.return_type_index < pb.return_type_index;
        }
        return pa.param_type_indices < pb.param_type_indices;
      });
  apply_permutation(dex.protos, proto_remap);

  for (FieldRef& field : dex.fields) {
    field.class_type_index = type_remap[field.class_type_index];
    field.type_index = type_remap[field.type_index];
    field.name_index = string_remap[field.name_index];
  }

  // Fields by class, then name, then type.
  std::vector<uint32_t> field_remap = sort_permutation(
      dex.fields.size(), [&](uint32_t a, uint32_t b) {
        const FieldRef& fa = dex.fields[a];
        const FieldRef& fb = dex.fields[b];
        if (fa.class_type_index != fb.class_type_index) {
          return fa.class_type_index < fb.class_type_index;
        }
        if (fa.name_index != fb.name_index) return fa.name_index < fb.name_index;
        return fa.type_index < fb.type_index;
      });
  apply_permutation(dex.fields, field_remap);

  for (MethodRef& method : dex.methods) {
    method.class_type_index = type_remap[method.class_type_index];
    method.proto_index = proto_remap[method.proto_index];
    method.name_index = string_remap[method.name_index];
  }

  // Methods by class, then name, then proto.
  std::vector<uint32_t> method_remap = sort_permutation(
      dex.methods.size(), [&](uint32_t a, uint32_t b) {
        const MethodRef& ma = dex.methods[a];
        const MethodRef& mb = dex.methods[b];
        if (ma.class_type_index != mb.class_type_index) {
          return ma.class_type_index < mb.class_type_index;
        }
        if (ma.name_index != mb.name_index) return ma.name_index < mb.name_index;
        return ma.proto_index < mb.proto_index;
      });
  apply_permutation(dex.methods, method_remap);

  for (ClassDef& class_def : dex.class_defs) {
    class_def.type_index = type_remap[class_def.type_index];
    if (class_def.superclass_index != kNoIndex) {
      class_def.superclass_index = type_remap[class_def.superclass_index];
    }
    if (class_def.source_file_index != kNoIndex) {
      class_def.source_file_index = string_remap[class_def.source_file_index];
    }
    for (uint32_t& t : class_def.interfaces) t = type_remap[t];
    for (EncodedField& field : class_def.static_fields) {
      field.field_index = field_remap[field.field_index];
    }
    for (EncodedField& field : class_def.instance_fields) {
      field.field_index = field_remap[field.field_index];
    }
    for (auto* methods : {&class_def.direct_methods, &class_def.virtual_methods}) {
      for (EncodedMethod& method : *methods) {
        method.method_index = method_remap[method.method_index];
        if (method.code) {
          remap_code(*method.code, string_remap, type_remap, method_remap);
        }
      }
      std::sort(methods->begin(), methods->end(),
                [](const EncodedMethod& a, const EncodedMethod& b) {
                  return a.method_index < b.method_index;
                });
    }
    auto field_less = [](const EncodedField& a, const EncodedField& b) {
      return a.field_index < b.field_index;
    };
    std::sort(class_def.static_fields.begin(), class_def.static_fields.end(), field_less);
    std::sort(class_def.instance_fields.begin(), class_def.instance_fields.end(), field_less);
  }

  std::sort(dex.class_defs.begin(), dex.class_defs.end(),
            [](const ClassDef& a, const ClassDef& b) { return a.type_index < b.type_index; });
}

bool pools_sorted(const DexFile& dex) {
  for (size_t i = 1; i < dex.strings.size(); i++) {
    if (!mutf8_less(dex.strings[i - 1], dex.strings[i])) return false;
  }
  for (size_t i = 1; i < dex.types.size(); i++) {
    if (dex.types[i - 1] >= dex.types[i]) return false;
  }
  for (size_t i = 1; i < dex.protos.size(); i++) {
    const ProtoRef& a = dex.protos[i - 1];
    const ProtoRef& b = dex.protos[i];
    auto key = [](const ProtoRef& p) {
      return std::make_pair(p.return_type_index, p.param_type_indices);
    };
    if (!(key(a) < key(b))) return false;
  }
  for (size_t i = 1; i < dex.fields.size(); i++) {
    const FieldRef& a = dex.fields[i - 1];
    const FieldRef& b = dex.fields[i];
    auto key = [](const FieldRef& f) {
      return std::make_tuple(f.class_type_index, f.name_index, f.type_index);
    };
    if (!(key(a) < key(b))) return false;
  }
  for (size_t i = 1; i < dex.methods.size(); i++) {
    const MethodRef& a = dex.methods[i - 1];
    const MethodRef& b = dex.methods[i];
    auto key = [](const MethodRef& m) {
      return std::make_tuple(m.class_type_index, m.name_index, m.proto_index);
    };
    if (!(key(a) < key(b))) return false;
  }
  return true;
}

namespace {

void validate_code(const DexFile& dex, const CodeItem& code, const std::string& where) {
  if (code.ins_size > code.registers_size) {
    fail(ErrorKind::MalformedIndex, "ins_size exceeds registers_size in " + where);
  }
  uint32_t n = static_cast<uint32_t>(code.insns.size());
  for (const Instruction& insn : code.insns) {
    switch (opcode_info(insn.op).pool) {
      case PoolKind::String:
        if (insn.pool_index >= dex.strings.size()) {
          fail(ErrorKind::MalformedIndex, "string index out of range in " + where);
        }
        break;
      case PoolKind::Type:
        if (insn.pool_index >= dex.types.size()) {
          fail(ErrorKind::MalformedIndex, "type index out of range in " + where);
        }
        break;
      case PoolKind::Method:
        if (insn.pool_index >= dex.methods.size()) {
          fail(ErrorKind::MalformedIndex, "method index out of range in " + where);
        }
        break;
      case PoolKind::None:
        break;
    }
    if (insn.is_branch() && (insn.target < 0 || static_cast<uint32_t>(insn.target) >= n)) {
      fail(ErrorKind::MalformedIndex, "branch target out of range in " + where);
    }
  }
  for (const TryBlock& try_block : code.tries) {
    if (try_block.start >= try_block.end || try_block.end > n) {
      fail(ErrorKind::MalformedIndex, "try range out of bounds in " + where);
    }
    if (try_block.handlers.empty()) {
      fail(ErrorKind::MalformedIndex, "try block without handlers in " + where);
    }
    for (size_t h = 0; h < try_block.handlers.size(); h++) {
      const Handler& handler = try_block.handlers[h];
      if (handler.catch_all && h + 1 != try_block.handlers.size()) {
        fail(ErrorKind::MalformedIndex, "catch-all handler not last in " + where);
      }
      if (!handler.catch_all && handler.type_index >= dex.types.size()) {
        fail(ErrorKind::MalformedIndex, "handler type out of range in " + where);
      }
      if (handler.target >= n) {
        fail(ErrorKind::MalformedIndex, "handler target out of range in " + where);
      }
    }
  }
}

}  // namespace

void validate_indices(const DexFile& dex) {
  for (uint32_t t : dex.types) {
    if (t >= dex.strings.size()) fail(ErrorKind::MalformedIndex, "type descriptor index");
  }
  for (const ProtoRef& proto : dex.protos) {
    if (proto.shorty_index >= dex.strings.size() ||
        proto.return_type_index >= dex.types.size()) {
      fail(ErrorKind::MalformedIndex, "proto reference");
    }
    for (uint32_t t : proto.param_type_indices) {
      if (t >= dex.types.size()) fail(ErrorKind::MalformedIndex, "proto parameter type");
    }
  }
  for (const FieldRef& field : dex.fields) {
    if (field.class_type_index >= dex.types.size() || field.type_index >= dex.types.size() ||
        field.name_index >= dex.strings.size()) {
      fail(ErrorKind::MalformedIndex, "field reference");
    }
  }
  for (const MethodRef& method : dex.methods) {
    if (method.class_type_index >= dex.types.size() ||
        method.proto_index >= dex.protos.size() ||
        method.name_index >= dex.strings.size()) {
      fail(ErrorKind::MalformedIndex, "method reference");
    }
  }
  for (const ClassDef& class_def : dex.class_defs) {
    if (class_def.type_index >= dex.types.size()) {
      fail(ErrorKind::MalformedIndex, "class type index");
    }
    if (class_def.superclass_index != kNoIndex &&
        class_def.superclass_index >= dex.types.size()) {
      fail(ErrorKind::MalformedIndex, "superclass index");
    }
    if (class_def.source_file_index != kNoIndex &&
        class_def.source_file_index >= dex.strings.size()) {
      fail(ErrorKind::MalformedIndex, "source file index");
    }
    for (uint32_t t : class_def.interfaces) {
      if (t >= dex.types.size()) fail(ErrorKind::MalformedIndex, "interface index");
    }
    for (const auto* fields : {&class_def.static_fields, &class_def.instance_fields}) {
      for (const EncodedField& field : *fields) {
        if (field.field_index >= dex.fields.size()) {
          fail(ErrorKind::MalformedIndex, "encoded field index");
        }
      }
    }
    std::string descriptor = dex.type_descriptor(class_def.type_index);
    for (const auto* methods : {&class_def.direct_methods, &class_def.virtual_methods}) {
      for (const EncodedMethod& method : *methods) {
        if (method.method_index >= dex.methods.size()) {
          fail(ErrorKind::MalformedIndex, "encoded method index");
        }
        if (method.code) {
          validate_code(dex, *method.code,
                        method_signature(dex, method.method_index));
        }
      }
    }
  }
}

std::vector<TrySite> find_try_blocks(const DexFile& dex,
                                     const std::vector<std::string>& package_prefixes) {
  std::vector<TrySite> sites;
  if (package_prefixes.empty()) return sites;
  for (uint32_t c = 0; c < dex.class_defs.size(); c++) {
    const ClassDef& class_def = dex.class_defs[c];
    std::string package = package_of_descriptor(dex.type_descriptor(class_def.type_index));
    bool matched = std::any_of(package_prefixes.begin(), package_prefixes.end(),
                               [&](const std::string& prefix) {
                                 return package_matches(package, prefix);
                               });
    if (!matched) continue;
    for (const auto* methods : {&class_def.direct_methods, &class_def.virtual_methods}) {
      for (const EncodedMethod& method : *methods) {
        if (!method.code) continue;
        for (uint32_t t = 0; t < method.code->tries.size(); t++) {
          sites.push_back(TrySite{c, method.method_index, t, method.code->tries[t]});
        }
      }
    }
  }
  return sites;
}

std::vector<CallSite> find_protected_invocations(const DexFile& dex,
                                                 const std::set<std::string>& keys) {
  std::vector<CallSite> sites;
  if (keys.empty()) return sites;
  for (uint32_t c = 0; c < dex.class_defs.size(); c++) {
    const ClassDef& class_def = dex.class_defs[c];
    for (const auto* methods : {&class_def.direct_methods, &class_def.virtual_methods}) {
      for (const EncodedMethod& method : *methods) {
        if (!method.code) continue;
        const std::vector<Instruction>& insns = method.code->insns;
        for (uint32_t i = 0; i < insns.size(); i++) {
          if (!insns[i].is_invoke()) continue;
          std::string key = method_signature(dex, insns[i].pool_index);
          if (keys.count(key)) {
            sites.push_back(CallSite{c, method.method_index, i, insns[i].pool_index, key});
          }
        }
      }
    }
  }
  return sites;
}

size_t estimate_model_size(const DexFile& dex) {
  size_t total = sizeof(DexFile);
  for (const std::string& s : dex.strings) total += s.size() + 32;
  total += dex.types.size() * sizeof(uint32_t);
  for (const ProtoRef& proto : dex.protos) {
    total += sizeof(ProtoRef) + proto.param_type_indices.size() * sizeof(uint32_t);
  }
  total += dex.fields.size() * sizeof(FieldRef);
  total += dex.methods.size() * sizeof(MethodRef);
  for (const ClassDef& class_def : dex.class_defs) {
    total += sizeof(ClassDef);
    total += (class_def.static_fields.size() + class_def.instance_fields.size()) *
             sizeof(EncodedField);
    for (const auto* methods : {&class_def.direct_methods, &class_def.virtual_methods}) {
      for (const EncodedMethod& method : *methods) {
        total += sizeof(EncodedMethod);
        if (method.code) {
          total += sizeof(CodeItem);
          total += method.code->insns.size() * sizeof(Instruction);
          total += method.code->opaque_units.size() * sizeof(uint16_t);
          total += method.code->debug_info.size();
          for (const TryBlock& try_block : method.code->tries) {
            total += sizeof(TryBlock) + try_block.handlers.size() * sizeof(Handler);
          }
        }
      }
    }
  }
  return total;
}

}  // namespace dexweaver

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

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dexweaver/dex_model.hpp"
#include "dexweaver/microasm.hpp"

namespace dexweaver::testutil {

inline std::string fixture_path(const std::string& name) {
  return std::string(DEXWEAVER_FIXTURE_DIR) + "/" + name;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline Bytes read_bytes(const std::string& path) {
  std::string s = read_text(path);
  return Bytes(s.begin(), s.end());
}

inline void write_bytes(const std::string& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

inline DexFile load_fixture(const std::string& name) {
  return assemble(read_text(fixture_path(name)));
}

inline std::vector<std::string> fixture_sources() {
  std::vector<std::string> names;
  for (const auto& entry :
       std::filesystem::directory_iterator(DEXWEAVER_FIXTURE_DIR)) {
    if (entry.path().extension() == ".mdsm") names.push_back(entry.path().filename());
  }
  std::sort(names.begin(), names.end());
  return names;
}

// Independent oracle: a naive scan counting invoke instructions whose callee
// signature (rebuilt here from the pools, not via the library helper) is in
// `keys`. Deliberately separate from find_protected_invocations.
inline size_t brute_force_invocation_count(const DexFile& dex,
                                           const std::set<std::string>& keys) {
  size_t count = 0;
  for (const ClassDef& class_def : dex.class_defs) {
    for (const auto* methods : {&class_def.direct_methods, &class_def.virtual_methods}) {
      for (const EncodedMethod& method : *methods) {
        if (!method.code) continue;
        for (const Instruction& insn : method.code->insns) {
          if (insn.op != Opcode::InvokeStatic && insn.op != Opcode::InvokeVirtual &&
              insn.op != Opcode::InvokeDirect) {
            continue;
          }
          const MethodRef& ref = dex.methods[insn.pool_index];
          const ProtoRef& proto = dex.protos[ref.proto_index];
          std::string sig = dex.strings[dex.types[ref.class_type_index]];
          sig += "->";
          sig += dex.strings[ref.name_index];
          sig += "(";
          for (uint32_t t : proto.param_type_indices) sig += dex.strings[dex.types[t]];
          sig += ")";
          sig += dex.strings[dex.types[proto.return_type_index]];
          if (keys.count(sig)) count++;
        }
      }
    }
  }
  return count;
}

inline const ClassDef* class_by_descriptor(const DexFile& dex, const std::string& descriptor) {
  for (const ClassDef& class_def : dex.class_defs) {
    if (dex.type_descriptor(class_def.type_index) == descriptor) return &class_def;
  }
  return nullptr;
}

}  // namespace dexweaver::testutil

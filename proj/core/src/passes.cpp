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

#include "dexweaver/passes.hpp"

#include <algorithm>

namespace dexweaver {

namespace {

constexpr const char* kRuntimeException = "Ljava/lang/RuntimeException;";

uint16_t register_field_limit(const Instruction& insn) {
  return opcode_info(insn.op).regs4bit ? 15 : 255;
}

// Parameter registers occupy the highest numbers; growing the frame by
// extra_regs renumbers every reference to them.
void renumber_parameters(CodeItem& code, uint16_t extra_regs, const std::string& where) {
  if (extra_regs == 0) return;
  if (static_cast<uint32_t>(code.registers_size) + extra_regs > 0xffff) {
    fail(ErrorKind::RegisterPressure, "register frame overflow in " + where);
  }
  uint16_t param_base = code.registers_size - code.ins_size;
  for (Instruction& insn : code.insns) {
    for (uint8_t r = 0; r < insn.reg_count; r++) {
      if (insn.regs[r] >= param_base) {
        uint32_t renumbered = insn.regs[r] + extra_regs;
        if (renumbered > register_field_limit(insn)) {
          fail(ErrorKind::RegisterPressure,
               "parameter register v" + std::to_string(insn.regs[r]) +
                   " renumbered to v" + std::to_string(renumbered) +
                   " no longer fits its field in " + where);
        }
        insn.regs[r] = static_cast<uint16_t>(renumbered);
      }
    }
  }
  code.registers_size = static_cast<uint16_t>(code.registers_size + extra_regs);
}

}  // namespace

void splice_code(CodeItem& code, uint32_t pos, uint32_t remove_count,
                 const std::vector<Instruction>& injected, uint16_t extra_regs,
                 const std::string& where) {
  if (injected.empty() && remove_count == 0 && extra_regs == 0) return;

  if (code.has_opaque()) {
    fail(ErrorKind::UnsupportedRegion,
         "body of " + where + " contains opaque units that relocation cannot move");
  }
  uint32_t n = static_cast<uint32_t>(code.insns.size());
  if (pos > n || pos + remove_count > n) {
    fail(ErrorKind::MalformedIndex, "splice point out of range in " + where);
  }

  renumber_parameters(code, extra_regs, where);
  for (const Instruction& insn : injected) check_register_widths(insn, where);

  int64_t delta = static_cast<int64_t>(injected.size()) - remove_count;
  uint32_t removed_end = pos + remove_count;

  auto shift_target = [&](uint32_t target) -> uint32_t {
    if (target >= removed_end) return static_cast<uint32_t>(target + delta);
    if (target >= pos) return pos;  // pointed into the removed region
    return target;
  };

  for (uint32_t i = 0; i < n; i++) {
    if (i >= pos && i < removed_end) continue;
    Instruction& insn = code.insns[i];
    if (insn.is_branch()) {
      insn.target = static_cast<int32_t>(shift_target(static_cast<uint32_t>(insn.target)));
    }
  }
  for (TryBlock& try_block : code.tries) {
    if (try_block.end <= pos) {
      // entirely before the splice
    } else if (pos >= try_block.start) {
      // Range contains the splice point (inclusive at the start, so code
      // injected at a try's first instruction stays covered): it widens.
      if (removed_end > try_block.end) {
        fail(ErrorKind::UnsupportedRegion, "splice crosses a try boundary in " + where);
      }
      try_block.end = static_cast<uint32_t>(try_block.end + delta);
    } else {
      // Splice strictly before the range.
      if (removed_end > try_block.start) {
        fail(ErrorKind::UnsupportedRegion, "splice crosses a try boundary in " + where);
      }
      try_block.start = static_cast<uint32_t>(try_block.start + delta);
      try_block.end = static_cast<uint32_t>(try_block.end + delta);
    }
    for (Handler& handler : try_block.handlers) {
      handler.target = shift_target(handler.target);
    }
  }

  code.insns.erase(code.insns.begin() + pos, code.insns.begin() + removed_end);
  code.insns.insert(code.insns.begin() + pos, injected.begin(), injected.end());

  for (const Instruction& insn : injected) {
    if (insn.is_invoke()) {
      code.outs_size = std::max<uint16_t>(code.outs_size, insn.reg_count);
    }
  }
}

CodeItem relocate(const CodeItem& code, uint32_t insert_at,
                  const std::vector<Instruction>& injected, uint16_t extra_regs) {
  CodeItem out = code;
  splice_code(out, insert_at, 0, injected, extra_regs, "relocate");
  return out;
}

namespace {

// Both passes grow the frame once per method and need the fresh registers to
// satisfy every encoding field they appear in. Check before mutating or
// interning anything so a skipped method leaves the file untouched.
void precheck_method(const CodeItem& code, uint16_t extra_regs, uint16_t fresh_limit,
                     const std::string& where) {
  if (code.has_opaque()) {
    fail(ErrorKind::UnsupportedRegion,
         "body of " + where + " contains opaque units that relocation cannot move");
  }
  if (static_cast<uint32_t>(code.registers_size) + extra_regs > 0xffff) {
    fail(ErrorKind::RegisterPressure, "register frame overflow in " + where);
  }
  uint16_t param_base = code.registers_size - code.ins_size;
  for (const Instruction& insn : code.insns) {
    for (uint8_t r = 0; r < insn.reg_count; r++) {
      if (insn.regs[r] >= param_base &&
          insn.regs[r] + extra_regs > register_field_limit(insn)) {
        fail(ErrorKind::RegisterPressure,
             "parameter register v" + std::to_string(insn.regs[r]) +
                 " renumbered to v" + std::to_string(insn.regs[r] + extra_regs) +
                 " no longer fits its field in " + where);
      }
    }
  }
  if (param_base > fresh_limit) {
    fail(ErrorKind::RegisterPressure,
         "fresh register v" + std::to_string(param_base) + " exceeds the 4-bit field in " +
             where);
  }
}

bool class_matches_packages(const DexFile& dex, const ClassDef& class_def,
                            const std::vector<std::string>& prefixes) {
  std::string package = package_of_descriptor(dex.type_descriptor(class_def.type_index));
  return std::any_of(prefixes.begin(), prefixes.end(), [&](const std::string& prefix) {
    return package_matches(package, prefix);
  });
}

}  // namespace

std::pair<DexFile, InstrumentationReport> neutralize_ads(const DexFile& dex,
                                                         const AdConfig& cfg) {
  for (const std::string& prefix : cfg.ad_packages) {
    if (prefix.empty()) {
      fail(ErrorKind::SyntaxError, "empty package prefix in ad configuration");
    }
  }

  DexFile out = dex;
  InstrumentationReport report;
  size_t strings_before = out.strings.size();
  size_t types_before = out.types.size();
  size_t methods_before = out.methods.size();

  for (ClassDef& class_def : out.class_defs) {
    if (!class_matches_packages(out, class_def, cfg.ad_packages)) continue;
    for (auto* methods : {&class_def.direct_methods, &class_def.virtual_methods}) {
      for (EncodedMethod& method : *methods) {
        if (!method.code || method.code->tries.empty()) continue;
        std::string where = method_signature(out, method.method_index);
        try {
          // The fresh register appears in invoke-direct, a 4-bit field.
          precheck_method(*method.code, 1, 15, where);
        } catch (const Error& e) {
          report.skipped.push_back({where, e.name()});
          report.n_sites_skipped += static_cast<uint32_t>(method.code->tries.size());
          continue;
        }

        CodeItem code = *method.code;
        uint16_t fresh = code.registers_size - code.ins_size;
        splice_code(code, 0, 0, {}, 1, where);

        // Later tries first, so earlier starts stay valid while splicing.
        std::vector<size_t> order(code.tries.size());
        for (size_t i = 0; i < order.size(); i++) order[i] = i;
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
          return code.tries[a].start > code.tries[b].start;
        });
        for (size_t t : order) {
          const TryBlock& try_block = code.tries[t];
          const Handler& first = try_block.handlers.front();
          uint32_t exception_type = first.catch_all
                                        ? intern_type(out, kRuntimeException)
                                        : first.type_index;
          uint32_t ctor = intern_method(out, out.type_descriptor(exception_type), "<init>",
                                        "V", {});
          std::vector<Instruction> injected = {
              make_new_instance(fresh, exception_type),
              make_invoke(Opcode::InvokeDirect, {fresh}, ctor),
              make_throw(fresh),
          };
          splice_code(code, try_block.start, 0, injected, 0, where);
          report.n_try_neutralized++;
        }

        method.code = std::move(code);
        report.registers_grown.emplace_back(where, 1);
      }
    }
  }

  bool pools_grew = out.strings.size() != strings_before ||
                    out.types.size() != types_before ||
                    out.methods.size() != methods_before;
  if (pools_grew) normalize(out);
  return {std::move(out), std::move(report)};
}

namespace {

void validate_weave_config(const DexFile& dex, const WeaveConfig& cfg) {
  for (const auto& [key, perms] : cfg.map.entries) {
    if (key.empty() || key[0] != 'L' || key.find("->") == std::string::npos ||
        key.find('(') == std::string::npos || perms.empty()) {
      fail(ErrorKind::SyntaxError, "degenerate permission map entry: " + key);
    }
  }
  for (const std::string& descriptor : {cfg.monitor_class, cfg.stub_class}) {
    if (descriptor.size() < 3 || descriptor.front() != 'L' || descriptor.back() != ';') {
      fail(ErrorKind::SyntaxError, "bad monitor/stub descriptor: " + descriptor);
    }
    for (const ClassDef& class_def : dex.class_defs) {
      if (dex.type_descriptor(class_def.type_index) == descriptor) {
        fail(ErrorKind::SyntaxError,
             "monitor/stub descriptor collides with an application class: " + descriptor);
      }
    }
  }
  if (cfg.monitor_class == cfg.stub_class) {
    fail(ErrorKind::SyntaxError, "monitor and stub classes must be distinct");
  }
}

// Splits "Lapi/Gps;->getLocation(I)I" back into pieces for stub synthesis.
struct CalleePieces {
  std::string class_descriptor;
  std::string name;
  std::vector<std::string> params;
  std::string return_type;
};

CalleePieces callee_pieces(const DexFile& dex, uint32_t method_index) {
  const MethodRef& ref = dex.methods[method_index];
  CalleePieces pieces;
  pieces.class_descriptor = dex.type_descriptor(ref.class_type_index);
  pieces.name = dex.string_at(ref.name_index);
  const ProtoRef& proto = dex.protos[ref.proto_index];
  pieces.return_type = dex.type_descriptor(proto.return_type_index);
  for (uint32_t t : proto.param_type_indices) {
    pieces.params.push_back(dex.type_descriptor(t));
  }
  return pieces;
}

}  // namespace

std::pair<DexFile, InstrumentationReport> weave_permissions(const DexFile& dex,
                                                            const WeaveConfig& cfg) {
  validate_weave_config(dex, cfg);

  DexFile out = dex;
  InstrumentationReport report;
  std::set<std::string> keys = cfg.map.keys();
  std::set<uint32_t> stub_methods;
  uint32_t monitor_method = 0;
  bool monitor_interned = false;

  for (ClassDef& class_def : out.class_defs) {
    for (auto* methods : {&class_def.direct_methods, &class_def.virtual_methods}) {
      for (EncodedMethod& method : *methods) {
        if (!method.code) continue;
        std::vector<uint32_t> sites;
        for (uint32_t i = 0; i < method.code->insns.size(); i++) {
          const Instruction& insn = method.code->insns[i];
          if (insn.is_invoke() && keys.count(method_signature(out, insn.pool_index))) {
            sites.push_back(i);
          }
        }
        if (sites.empty()) continue;

        std::string where = method_signature(out, method.method_index);
        try {
          // vK lands in invoke-static's 4-bit field; vB stays in 8-bit ones.
          precheck_method(*method.code, 2, 15, where);
        } catch (const Error& e) {
          report.skipped.push_back({where, e.name()});
          report.n_sites_skipped += static_cast<uint32_t>(sites.size());
          continue;
        }

        CodeItem code = *method.code;
        uint16_t key_reg = code.registers_size - code.ins_size;
        uint16_t bool_reg = static_cast<uint16_t>(key_reg + 1);
        splice_code(code, 0, 0, {}, 2, where);

        if (!monitor_interned) {
          monitor_method = intern_method(out, cfg.monitor_class, kPolicyAcceptsName, "Z",
                                         {"Ljava/lang/String;"});
          monitor_interned = true;
        }

        // Rewrite later sites first so earlier indices stay valid.
        for (auto it = sites.rbegin(); it != sites.rend(); ++it) {
          uint32_t pos = *it;
          Instruction original = code.insns[pos];
          std::optional<Instruction> move_result;
          if (pos + 1 < code.insns.size() &&
              (code.insns[pos + 1].op == Opcode::MoveResult ||
               code.insns[pos + 1].op == Opcode::MoveResultObject)) {
            move_result = code.insns[pos + 1];
          }

          CalleePieces pieces = callee_pieces(out, original.pool_index);
          std::string key = method_signature(out, original.pool_index);
          uint32_t key_string = intern_string(out, key);

          std::vector<std::string> stub_params = pieces.params;
          if (original.op != Opcode::InvokeStatic) {
            stub_params.insert(stub_params.begin(), pieces.class_descriptor);
          }
          uint32_t stub_method = intern_method(out, cfg.stub_class, pieces.name,
                                               pieces.return_type, stub_params);
          stub_methods.insert(stub_method);

          std::vector<uint16_t> args(original.regs.begin(),
                                     original.regs.begin() + original.reg_count);
          uint32_t len = move_result ? 9 : 7;
          uint32_t stub_at = pos + (move_result ? 7 : 6);
          uint32_t end_at = pos + len;

          std::vector<Instruction> wrapper;
          wrapper.push_back(make_const_string(key_reg, key_string));
          wrapper.push_back(make_invoke(Opcode::InvokeStatic, {key_reg}, monitor_method));
          wrapper.push_back(make_move_result(Opcode::MoveResult, bool_reg));
          wrapper.push_back(make_if_eqz(bool_reg, static_cast<int32_t>(stub_at)));
          wrapper.push_back(original);
          if (move_result) wrapper.push_back(*move_result);
          wrapper.push_back(make_goto(static_cast<int32_t>(end_at)));
          wrapper.push_back(make_invoke(Opcode::InvokeStatic, args, stub_method));
          if (move_result) wrapper.push_back(*move_result);

          splice_code(code, pos, move_result ? 2 : 1, wrapper, 0, where);
          report.n_wrapped++;
        }

        method.code = std::move(code);
        report.registers_grown.emplace_back(where, 2);
      }
    }
  }

  if (report.n_wrapped > 0) {
    ClassDef monitor_def;
    monitor_def.type_index = intern_type(out, cfg.monitor_class);
    monitor_def.access_flags = kAccPublic | kAccFinal;
    monitor_def.superclass_index = intern_type(out, "Ljava/lang/Object;");
    monitor_def.direct_methods.push_back(
        EncodedMethod{monitor_method, kAccPublic | kAccStatic | kAccNative, std::nullopt});
    out.class_defs.push_back(std::move(monitor_def));

    ClassDef stub_def;
    stub_def.type_index = intern_type(out, cfg.stub_class);
    stub_def.access_flags = kAccPublic | kAccFinal;
    stub_def.superclass_index = intern_type(out, "Ljava/lang/Object;");
    for (uint32_t method_index : stub_methods) {
      stub_def.direct_methods.push_back(
          EncodedMethod{method_index, kAccPublic | kAccStatic | kAccNative, std::nullopt});
    }
    out.class_defs.push_back(std::move(stub_def));

    normalize(out);
  }
  return {std::move(out), std::move(report)};
}

}  // namespace dexweaver

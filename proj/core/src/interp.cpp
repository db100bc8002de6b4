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

#include "dexweaver/interp.hpp"

namespace dexweaver {

namespace {

constexpr size_t kMaxFrameDepth = 256;

struct MethodEntry {
  const EncodedMethod* method;
  std::string class_descriptor;
};

struct Machine {
  const DexFile& dex;
  ApiEnvironment& env;
  uint64_t step_budget;
  uint64_t steps = 0;
  uint32_t next_ref_id = 1;
  std::vector<StepEntry> step_log;
  std::map<std::string, MethodEntry> method_table;
};

struct FrameResult {
  enum class Kind { Returned, Threw, Budget };
  Kind kind = Kind::Returned;
  std::optional<Value> value;
  std::string exception_type;
};

FrameResult returned(std::optional<Value> value) {
  return FrameResult{FrameResult::Kind::Returned, std::move(value), ""};
}

FrameResult threw(std::string type) {
  return FrameResult{FrameResult::Kind::Threw, std::nullopt, std::move(type)};
}

char return_shape(const DexFile& dex, uint32_t method_index) {
  const MethodRef& ref = dex.methods[method_index];
  const std::string& descriptor =
      dex.type_descriptor(dex.protos[ref.proto_index].return_type_index);
  char c = descriptor[0];
  return (c == 'L' || c == '[') ? 'L' : c;
}

std::optional<Value> fake_default(char shape) {
  switch (shape) {
    case 'V': return std::nullopt;
    case 'L': return Value::make_null();
    default: return Value::make_int(0);  // all integral shapes
  }
}

FrameResult run_method(Machine& machine, const EncodedMethod& method,
                       std::vector<Value> args, size_t depth);

// Handles one invoke instruction; a null result in `out` means void.
FrameResult dispatch_invoke(Machine& machine, const Instruction& insn,
                            const std::vector<Value>& registers, size_t depth,
                            std::optional<Value>& out) {
  uint32_t callee = insn.pool_index;
  const MethodRef& ref = machine.dex.methods[callee];
  std::string class_descriptor = machine.dex.type_descriptor(ref.class_type_index);
  std::string name = machine.dex.string_at(ref.name_index);
  std::string signature = method_signature(machine.dex, callee);

  std::vector<Value> args;
  for (uint8_t a = 0; a < insn.reg_count; a++) args.push_back(registers[insn.regs[a]]);

  if (class_descriptor == machine.env.monitor_class && name == "policyAccepts") {
    // policyAccepts(String)Z: consult the policy hook with the method key.
    std::string key = args.empty() || args[0].kind != Value::Kind::Text ? "" : args[0].text;
    bool allowed = machine.env.policy_hook ? machine.env.policy_hook(key) : true;
    out = Value::make_int(allowed ? 1 : 0);
    return returned(out);
  }
  if (class_descriptor == machine.env.stub_class) {
    machine.env.stub_trace.push_back({signature, args});
    out = fake_default(return_shape(machine.dex, callee));
    return returned(out);
  }
  auto binding = machine.env.bindings.find(signature);
  if (binding != machine.env.bindings.end()) {
    machine.env.call_trace.push_back({signature, args});
    char shape = return_shape(machine.dex, callee);
    out = shape == 'V' ? std::nullopt : std::make_optional(binding->second);
    return returned(out);
  }
  auto defined = machine.method_table.find(signature);
  if (defined != machine.method_table.end() && defined->second.method->code) {
    FrameResult result = run_method(machine, *defined->second.method, std::move(args), depth + 1);
    if (result.kind == FrameResult::Kind::Returned) {
      out = result.value;
    }
    return result;
  }
  if (name == "<init>") {
    // Nullary construction of exception (and other) instances is a no-op;
    // the instance already exists from new-instance.
    out = std::nullopt;
    return returned(std::nullopt);
  }
  return threw("unbound-method: " + signature);
}

FrameResult run_method(Machine& machine, const EncodedMethod& method,
                       std::vector<Value> args, size_t depth) {
  if (depth > kMaxFrameDepth) return threw("stack-overflow");
  const CodeItem& code = *method.code;
  if (args.size() != code.ins_size) {
    fail(ErrorKind::ArityMismatch,
         method_signature(machine.dex, method.method_index) + " expects " +
             std::to_string(code.ins_size) + " argument registers, got " +
             std::to_string(args.size()));
  }

  std::vector<Value> registers(code.registers_size);
  for (size_t i = 0; i < args.size(); i++) {
    registers[code.registers_size - code.ins_size + i] = std::move(args[i]);
  }

  std::optional<Value> last_result;
  uint32_t pc = 0;

  // Transfers control to a matching handler or reports an unwind.
  auto handle_throw = [&](const std::string& type, uint32_t at) -> std::optional<FrameResult> {
    for (const TryBlock& try_block : code.tries) {
      if (at < try_block.start || at >= try_block.end) continue;
      for (const Handler& handler : try_block.handlers) {
        if (handler.catch_all ||
            machine.dex.type_descriptor(handler.type_index) == type) {
          pc = handler.target;
          return std::nullopt;  // handled here
        }
      }
    }
    return threw(type);
  };

  for (;;) {
    if (pc >= code.insns.size()) return threw("fell-off-method-end");
    if (machine.steps >= machine.step_budget) {
      return FrameResult{FrameResult::Kind::Budget, std::nullopt, ""};
    }
    machine.steps++;
    machine.step_log.push_back({method.method_index, pc});
    const Instruction& insn = code.insns[pc];
    switch (insn.op) {
      case Opcode::Nop:
        pc++;
        break;
      case Opcode::Move:
      case Opcode::MoveObject:
        registers[insn.regs[0]] = registers[insn.regs[1]];
        pc++;
        break;
      case Opcode::MoveResult:
      case Opcode::MoveResultObject:
        if (!last_result) return threw("missing-result");
        registers[insn.regs[0]] = *last_result;
        last_result.reset();
        pc++;
        break;
      case Opcode::ReturnVoid:
        return returned(std::nullopt);
      case Opcode::Return:
      case Opcode::ReturnObject:
        return returned(registers[insn.regs[0]]);
      case Opcode::Const4:
      case Opcode::Const16:
        registers[insn.regs[0]] = Value::make_int(insn.literal);
        pc++;
        break;
      case Opcode::ConstString:
        registers[insn.regs[0]] =
            Value::make_text(mutf8_to_utf8(machine.dex.string_at(insn.pool_index)));
        pc++;
        break;
      case Opcode::NewInstance:
        registers[insn.regs[0]] = Value::make_ref(
            machine.next_ref_id++, machine.dex.type_descriptor(insn.pool_index));
        pc++;
        break;
      case Opcode::Throw: {
        const Value& thrown = registers[insn.regs[0]];
        if (thrown.kind != Value::Kind::Ref) return threw("null-throw");
        if (auto unwound = handle_throw(thrown.ref_type, pc)) return *unwound;
        break;  // pc moved to the handler
      }
      case Opcode::Goto:
        pc = static_cast<uint32_t>(insn.target);
        break;
      case Opcode::IfEqz:
        pc = registers[insn.regs[0]].is_zero_or_null() ? static_cast<uint32_t>(insn.target)
                                                       : pc + 1;
        break;
      case Opcode::InvokeVirtual:
      case Opcode::InvokeDirect:
      case Opcode::InvokeStatic: {
        std::optional<Value> result;
        FrameResult callee = dispatch_invoke(machine, insn, registers, depth, result);
        if (callee.kind == FrameResult::Kind::Budget) return callee;
        if (callee.kind == FrameResult::Kind::Threw) {
          if (auto unwound = handle_throw(callee.exception_type, pc)) return *unwound;
          break;  // caught here
        }
        last_result = result;
        pc++;
        break;
      }
      case Opcode::Opaque:
        fail(ErrorKind::UnsupportedOpcode,
             "opaque instruction reached in " +
                 method_signature(machine.dex, method.method_index));
    }
  }
}

}  // namespace

ExecResult execute(const DexFile& dex, const std::string& entry,
                   const std::vector<Value>& args, ApiEnvironment& env,
                   uint64_t step_budget) {
  Machine machine{dex, env, step_budget, 0, 1, {}, {}};
  for (const ClassDef& class_def : dex.class_defs) {
    std::string descriptor = dex.type_descriptor(class_def.type_index);
    for (const auto* methods : {&class_def.direct_methods, &class_def.virtual_methods}) {
      for (const EncodedMethod& method : *methods) {
        machine.method_table[method_signature(dex, method.method_index)] =
            MethodEntry{&method, descriptor};
      }
    }
  }

  auto it = machine.method_table.find(entry);
  if (it == machine.method_table.end() || !it->second.method->code) {
    fail(ErrorKind::UnknownEntry, "no executable method " + entry);
  }

  env.call_trace.clear();
  env.stub_trace.clear();

  FrameResult frame = run_method(machine, *it->second.method, args, 0);

  ExecResult result;
  switch (frame.kind) {
    case FrameResult::Kind::Returned:
      result.outcome = ExecResult::Outcome::Returned;
      result.value = frame.value;
      break;
    case FrameResult::Kind::Threw:
      result.outcome = ExecResult::Outcome::Uncaught;
      result.exception_type = frame.exception_type;
      break;
    case FrameResult::Kind::Budget:
      result.outcome = ExecResult::Outcome::BudgetExhausted;
      break;
  }
  result.steps = machine.steps;
  result.call_trace = env.call_trace;
  result.stub_trace = env.stub_trace;
  result.step_log = std::move(machine.step_log);
  return result;
}

}  // namespace dexweaver

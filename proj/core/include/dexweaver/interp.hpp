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

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dexweaver/dex_model.hpp"

namespace dexweaver {

// Interpreter values are tagged scalars: integrals, text, reference handles
// and null. No heap model beyond exception instances and opaque handles.
struct Value {
  enum class Kind { Int, Text, Ref, Null };
  Kind kind = Kind::Null;
  int32_t i = 0;
  std::string text;
  uint32_t ref_id = 0;
  std::string ref_type;  // descriptor of the referenced instance

  static Value make_int(int32_t v) { return Value{Kind::Int, v, "", 0, ""}; }
  static Value make_text(std::string s) { return Value{Kind::Text, 0, std::move(s), 0, ""}; }
  static Value make_ref(uint32_t id, std::string type) {
    return Value{Kind::Ref, 0, "", id, std::move(type)};
  }
  static Value make_null() { return Value{}; }

  bool is_zero_or_null() const {
    return kind == Kind::Null || (kind == Kind::Int && i == 0);
  }

  bool operator==(const Value&) const = default;
};

struct TraceEntry {
  std::string method;  // full signature key
  std::vector<Value> args;

  bool operator==(const TraceEntry&) const = default;
};

// Scripted surroundings for a run: API bindings, the policy decision hook
// consulted by the woven monitor, and where the monitor/stub classes live.
// Protected calls that actually execute land in call_trace; stub executions
// land in stub_trace, never in call_trace.
struct ApiEnvironment {
  std::map<std::string, Value> bindings;  // signature -> scripted return value
  std::function<bool(const std::string& method_key)> policy_hook;  // null = allow
  std::string monitor_class = "Lzz/irm/Monitor;";
  std::string stub_class = "Lzz/irm/Stub;";

  std::vector<TraceEntry> call_trace;
  std::vector<TraceEntry> stub_trace;
};

struct StepEntry {
  uint32_t method_index;  // method_ids index of the executing method
  uint32_t insn_index;

  bool operator==(const StepEntry&) const = default;
};

struct ExecResult {
  enum class Outcome { Returned, Uncaught, BudgetExhausted };
  Outcome outcome = Outcome::Returned;
  std::optional<Value> value;     // absent for void returns
  std::string exception_type;     // descriptor for Uncaught
  uint64_t steps = 0;
  std::vector<TraceEntry> call_trace;
  std::vector<TraceEntry> stub_trace;
  std::vector<StepEntry> step_log;  // every executed instruction, in order
};

constexpr uint64_t kDefaultStepBudget = 100000;

// Deterministic small-step execution of `entry` with `args`. Throws of type
// T transfer to the innermost enclosing try whose handler matches exactly or
// is a catch-all, otherwise unwind to the caller; exhausted budgets are an
// outcome, not an error. Traces in `env` are reset at entry and copied into
// the result.
ExecResult execute(const DexFile& dex, const std::string& entry,
                   const std::vector<Value>& args, ApiEnvironment& env,
                   uint64_t step_budget = kDefaultStepBudget);

}  // namespace dexweaver

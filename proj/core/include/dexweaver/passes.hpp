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

#include <string>
#include <utility>
#include <vector>

#include "dexweaver/dex_model.hpp"
#include "dexweaver/policy.hpp"

namespace dexweaver {

struct AdConfig {
  std::vector<std::string> ad_packages;  // dotted package prefixes
};

struct WeaveConfig {
  PermissionMap map;
  std::string monitor_class = "Lzz/irm/Monitor;";
  std::string stub_class = "Lzz/irm/Stub;";
};

constexpr const char* kPolicyAcceptsName = "policyAccepts";

struct SkippedMethod {
  std::string method;  // full signature
  std::string reason;  // error name
};

struct InstrumentationReport {
  uint32_t n_wrapped = 0;          // wrapped call sites
  uint32_t n_try_neutralized = 0;  // injected throw sequences
  uint32_t n_sites_skipped = 0;    // candidate sites lost to skipped methods
  std::vector<SkippedMethod> skipped;
  std::vector<std::pair<std::string, uint16_t>> registers_grown;  // method -> extra regs

  uint32_t n_skipped() const { return static_cast<uint32_t>(skipped.size()); }
};

// Grows the frame by extra_regs (renumbering parameter registers, which
// occupy the highest numbers), then inserts `injected` before the
// instruction at insert_at. Branch targets, try ranges and handler addresses
// at or after the insertion shift; try ranges containing it widen. Injected
// instructions must reference only fresh registers or already-renumbered
// ones, with branch targets expressed in post-insertion indices.
CodeItem relocate(const CodeItem& code, uint32_t insert_at,
                  const std::vector<Instruction>& injected, uint16_t extra_regs);

// In-place splice: replaces remove_count instructions at `pos` with
// `injected`, adjusting targets/tries the same way relocate does.
void splice_code(CodeItem& code, uint32_t pos, uint32_t remove_count,
                 const std::vector<Instruction>& injected, uint16_t extra_regs,
                 const std::string& where);

// Injects `new-instance vF, T; invoke-direct {vF}, T-><init>()V; throw vF`
// at the start of every try range in classes under cfg.ad_packages, inside
// the widened range, where T is the first handler's exception type
// (java.lang.RuntimeException for a leading catch-all). Methods that cannot
// be relocated are skipped and recorded; other classes are untouched.
std::pair<DexFile, InstrumentationReport> neutralize_ads(const DexFile& dex,
                                                         const AdConfig& cfg);

// Wraps every call site whose callee is a key of cfg.map with a policy check
// that either runs the original invoke or a static stub with an explicit
// receiver slot, preserving any following move-result on both branches.
// Monitor and Stub classes are appended with bodiless methods the
// interpreter environment resolves.
std::pair<DexFile, InstrumentationReport> weave_permissions(const DexFile& dex,
                                                            const WeaveConfig& cfg);

}  // namespace dexweaver

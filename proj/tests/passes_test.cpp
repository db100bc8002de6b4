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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dexweaver/dex_io.hpp"
#include "dexweaver/passes.hpp"
#include "test_util.hpp"

using namespace dexweaver;
using namespace dexweaver::testutil;

namespace {

PermissionMap gps_map() {
  PermissionMap map;
  map.entries["Lapi/Gps;->getLocation()I"] = {"GPS"};
  map.entries["Lapi/Gps;->getOwner()Ljava/lang/String;"] = {"GPS"};
  return map;
}

const CodeItem& method_code(const DexFile& dex, const std::string& signature) {
  for (const ClassDef& c : dex.class_defs) {
    for (const auto* ms : {&c.direct_methods, &c.virtual_methods}) {
      for (const EncodedMethod& m : *ms) {
        if (method_signature(dex, m.method_index) == signature) {
          REQUIRE(m.code.has_value());
          return *m.code;
        }
      }
    }
  }
  REQUIRE(false);
  throw std::runtime_error("unreachable");
}

size_t count_occurrences(const std::string& text, const std::string& needle) {
  size_t count = 0;
  size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    count++;
    pos += needle.size();
  }
  return count;
}

}  // namespace

TEST_CASE("relocate with no injection and no growth is the identity") {
  DexFile dex = load_fixture("params.mdsm");
  const CodeItem& code = method_code(dex, "Lapp/Params;->pick(I)I");
  CodeItem out = relocate(code, 2, {}, 0);
  CHECK(out == code);
}

TEST_CASE("relocate renumbers parameters and shifts targets by the injected width") {
  DexFile dex = load_fixture("params.mdsm");
  const CodeItem& code = method_code(dex, "Lapp/Params;->pick(I)I");
  // pick(I)I: [0] const/4 v0,7  [1] if-eqz v3,L0  [2] return v0
  //           [3] L0: const/4 v1,2  [4] return v1
  REQUIRE(code.registers_size == 4);
  REQUIRE(code.ins_size == 1);
  REQUIRE(code.insns[1].op == Opcode::IfEqz);
  REQUIRE(code.insns[1].regs[0] == 3);
  REQUIRE(code.insns[1].target == 3);
  uint32_t old_target_units = code.unit_offsets()[3];

  // Inject 3 code units (const/16 = 2, nop = 1) before L0 with one extra
  // register.
  std::vector<Instruction> injected = {make_const16(3, 11), make_nop()};
  CodeItem out = relocate(code, 3, injected, 1);

  CHECK(out.registers_size == 5);
  CHECK(out.insns[1].op == Opcode::IfEqz);
  CHECK(out.insns[1].regs[0] == 4);  // parameter v3 renumbered to v4
  CHECK(out.insns[1].target == 5);   // two instructions inserted before L0
  uint32_t new_target_units = out.unit_offsets()[5];
  CHECK(new_target_units - old_target_units == 3);  // shifted by 3 code units

  // Cross-check via serialize + disassemble.
  DexFile mutated = dex;
  for (ClassDef& c : mutated.class_defs) {
    for (EncodedMethod& m : c.direct_methods) {
      if (method_signature(mutated, m.method_index) == "Lapp/Params;->pick(I)I") {
        m.code = out;
      }
    }
  }
  std::string text = disassemble(parse_dex(write_dex(mutated)));
  CHECK(text.find("if-eqz v4") != std::string::npos);
}

TEST_CASE("relocate fails with RegisterPressure when a parameter leaves its field") {
  DexFile dex = load_fixture("pressure.mdsm");
  const CodeItem& code = method_code(dex, "Lapp/Pressure;->use(I)I");
  // move v0, v15 is a 4-bit format; v15 + 1 = v16 does not fit.
  try {
    relocate(code, 0, {}, 1);
    FAIL("expected RegisterPressure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::RegisterPressure);
  }
}

TEST_CASE("relocate refuses bodies with opaque units") {
  CodeItem code;
  code.registers_size = 1;
  Instruction opaque;
  opaque.op = Opcode::Opaque;
  opaque.opaque_units = 1;
  code.opaque_units.push_back(0x0121);
  code.insns.push_back(opaque);
  code.insns.push_back(make_return_void());
  try {
    relocate(code, 0, {make_nop()}, 0);
    FAIL("expected UnsupportedRegion");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedRegion);
  }
  // But the zero-injection identity is still fine.
  CHECK(relocate(code, 0, {}, 0) == code);
}

TEST_CASE("neutralize_ads injects a throw inside every configured try block") {
  DexFile dex = load_fixture("ads.mdsm");
  AdConfig cfg;
  cfg.ad_packages = {"com.ads"};
  auto [out, report] = neutralize_ads(dex, cfg);

  CHECK(report.n_try_neutralized == 2);
  CHECK(report.n_skipped() == 0);
  CHECK(report.registers_grown.size() == 2);

  const CodeItem& fetch = method_code(out, "Lcom/ads/x/Banner;->fetch()I");
  const TryBlock& t = fetch.tries[0];
  // Injection sits at the (widened) range start: new-instance, invoke, throw.
  CHECK(fetch.insns[t.start].op == Opcode::NewInstance);
  CHECK(out.type_descriptor(fetch.insns[t.start].pool_index) == "Ljava/io/IOException;");
  CHECK(fetch.insns[t.start + 1].op == Opcode::InvokeDirect);
  CHECK(fetch.insns[t.start + 2].op == Opcode::Throw);
  CHECK(t.end - t.start >= 5);  // three injected + two original instructions

  // The result is a valid file.
  DexFile reparsed = parse_dex(write_dex(out));
  CHECK(structurally_equal(reparsed, out));
}

TEST_CASE("neutralize_ads with no prefixes is the identity") {
  DexFile dex = load_fixture("ads.mdsm");
  auto [out, report] = neutralize_ads(dex, AdConfig{});
  CHECK(report.n_try_neutralized == 0);
  CHECK(structurally_equal(out, dex));
}

TEST_CASE("catch-all first handler injects java.lang.RuntimeException") {
  DexFile dex = load_fixture("ads_catchall.mdsm");
  AdConfig cfg;
  cfg.ad_packages = {"com.ads"};
  auto [out, report] = neutralize_ads(dex, cfg);
  CHECK(report.n_try_neutralized == 1);
  const CodeItem& show = method_code(out, "Lcom/ads/y/Pop;->show()I");
  const TryBlock& t = show.tries[0];
  CHECK(out.type_descriptor(show.insns[t.start].pool_index) ==
        "Ljava/lang/RuntimeException;");
}

TEST_CASE("neutralize_ads leaves classes outside the configured packages bit-identical") {
  DexFile dex = load_fixture("ads.mdsm");
  AdConfig cfg;
  cfg.ad_packages = {"com.ads"};
  auto [out, report] = neutralize_ads(dex, cfg);
  // The fixture predeclares the exception constructor, so pools must not
  // grow and untouched classes keep their exact content.
  CHECK(dex.strings == out.strings);
  CHECK(dex.types == out.types);
  CHECK(dex.methods == out.methods);
  const ClassDef* before = class_by_descriptor(dex, "Lcom/app/Main;");
  const ClassDef* after = class_by_descriptor(out, "Lcom/app/Main;");
  REQUIRE(before != nullptr);
  REQUIRE(after != nullptr);
  CHECK(*before == *after);
}

TEST_CASE("neutralize_ads interns missing constructors and renormalizes pools") {
  // adsense.mdsm declares no exception constructor, so the pass must grow
  // the pools and re-sort them.
  DexFile dex = load_fixture("adsense.mdsm");
  size_t strings_before = dex.strings.size();
  AdConfig cfg;
  cfg.ad_packages = {"com.adsense"};
  auto [out, report] = neutralize_ads(dex, cfg);
  CHECK(report.n_try_neutralized == 1);
  CHECK(out.strings.size() > strings_before);  // "<init>" was interned
  CHECK(pools_sorted(out));
  validate_indices(out);
  DexFile reparsed = parse_dex(write_dex(out));
  CHECK(structurally_equal(reparsed, out));
}

TEST_CASE("weave_permissions wraps every mapped site") {
  DexFile dex = load_fixture("gps.mdsm");
  WeaveConfig cfg;
  cfg.map = gps_map();
  auto [out, report] = weave_permissions(dex, cfg);

  CHECK(report.n_wrapped == 3);
  CHECK(report.n_skipped() == 0);
  std::string text = disassemble(out);
  CHECK(count_occurrences(text, "policyAccepts") >= 3);
  size_t call_sites = count_occurrences(text, "Lzz/irm/Monitor;->policyAccepts");
  CHECK(call_sites == 3);

  // Count law against the independent scan on the input.
  CHECK(report.n_wrapped + report.n_sites_skipped ==
        brute_force_invocation_count(dex, cfg.map.keys()));

  // Monitor and Stub classes are appended, bodiless.
  const ClassDef* monitor = class_by_descriptor(out, "Lzz/irm/Monitor;");
  REQUIRE(monitor != nullptr);
  REQUIRE(monitor->direct_methods.size() == 1);
  CHECK(!monitor->direct_methods[0].code.has_value());
  CHECK((monitor->direct_methods[0].access_flags & kAccNative) != 0);
  const ClassDef* stub = class_by_descriptor(out, "Lzz/irm/Stub;");
  REQUIRE(stub != nullptr);
  CHECK(stub->direct_methods.size() == 1);  // one distinct wrapped callee

  DexFile reparsed = parse_dex(write_dex(out));
  CHECK(structurally_equal(reparsed, out));
  CHECK(pools_sorted(out));
}

TEST_CASE("weave_permissions with an empty map is the identity without monitor classes") {
  DexFile dex = load_fixture("gps.mdsm");
  WeaveConfig cfg;  // empty map
  auto [out, report] = weave_permissions(dex, cfg);
  CHECK(report.n_wrapped == 0);
  CHECK(structurally_equal(out, dex));
  CHECK(class_by_descriptor(out, "Lzz/irm/Monitor;") == nullptr);
  CHECK(class_by_descriptor(out, "Lzz/irm/Stub;") == nullptr);
}

TEST_CASE("weave preserves a following move-result on both branches") {
  DexFile dex = load_fixture("gps_virtual.mdsm");
  WeaveConfig cfg;
  cfg.map = gps_map();
  auto [out, report] = weave_permissions(dex, cfg);
  CHECK(report.n_wrapped == 1);

  const CodeItem& main = method_code(out, "Lmain/Virt;->main()I");
  size_t move_results = 0;
  for (const Instruction& insn : main.insns) {
    if (insn.op == Opcode::MoveResult && insn.regs[0] == 1) move_results++;
  }
  CHECK(move_results == 2);  // original branch and stub branch

  // The stub for a virtual callee takes the receiver explicitly.
  const ClassDef* stub = class_by_descriptor(out, "Lzz/irm/Stub;");
  REQUIRE(stub != nullptr);
  std::string stub_sig = method_signature(out, stub->direct_methods[0].method_index);
  CHECK(stub_sig == "Lzz/irm/Stub;->getLocation(Lapi/Gps;)I");
}

TEST_CASE("weave skips methods under register pressure and continues") {
  DexFile dex = load_fixture("mixed.mdsm");
  WeaveConfig cfg;
  cfg.map = gps_map();
  auto [out, report] = weave_permissions(dex, cfg);
  CHECK(report.n_wrapped == 1);
  CHECK(report.n_skipped() == 1);
  CHECK(report.n_sites_skipped == 1);
  CHECK(report.skipped[0].reason == std::string("RegisterPressure"));
  CHECK(report.n_wrapped + report.n_sites_skipped ==
        brute_force_invocation_count(dex, cfg.map.keys()));
  // The skipped method is untouched.
  const CodeItem& bad = method_code(out, "Lapp/Mixed;->bad(I)I");
  CHECK(bad.registers_size == 16);
}

TEST_CASE("weave where every method fails leaves the file structurally equal") {
  DexFile dex = load_fixture("pressure.mdsm");
  WeaveConfig cfg;
  cfg.map = gps_map();
  auto [out, report] = weave_permissions(dex, cfg);
  CHECK(report.n_wrapped == 0);
  CHECK(report.n_skipped() == 1);
  CHECK(structurally_equal(out, dex));
}

TEST_CASE("weave keeps untouched classes' code unchanged") {
  DexFile dex = load_fixture("gps.mdsm");
  WeaveConfig cfg;
  cfg.map = gps_map();
  auto [out, report] = weave_permissions(dex, cfg);
  const ClassDef* before = class_by_descriptor(dex, "Lmain/Aux;");
  const ClassDef* after = class_by_descriptor(out, "Lmain/Aux;");
  REQUIRE(before != nullptr);
  REQUIRE(after != nullptr);
  CHECK(before->direct_methods[0].code == after->direct_methods[0].code);
}

TEST_CASE("weave config validation") {
  DexFile dex = load_fixture("gps.mdsm");
  WeaveConfig bad_key;
  bad_key.map.entries["not-a-signature"] = {"GPS"};
  CHECK_THROWS_AS(weave_permissions(dex, bad_key), Error);

  WeaveConfig clash;
  clash.map = gps_map();
  clash.monitor_class = "Lmain/Main;";
  CHECK_THROWS_AS(weave_permissions(dex, clash), Error);
}

TEST_CASE("both passes compose on one file") {
  DexFile dex = load_fixture("ads.mdsm");
  AdConfig ad_cfg;
  ad_cfg.ad_packages = {"com.ads"};
  auto [neutralized, ad_report] = neutralize_ads(dex, ad_cfg);
  CHECK(ad_report.n_try_neutralized == 2);

  WeaveConfig weave_cfg;
  weave_cfg.map.entries["Lcom/ads/x/Net;->httpGet()I"] = {"INTERNET"};
  auto [woven, weave_report] = weave_permissions(neutralized, weave_cfg);
  CHECK(weave_report.n_wrapped == 2);  // both (now dead) ad-code call sites

  DexFile reparsed = parse_dex(write_dex(woven));
  CHECK(structurally_equal(reparsed, woven));
  CHECK(pools_sorted(woven));
}

TEST_CASE("wrapped call inside a try keeps the range covering it") {
  DexFile dex = load_fixture("weave_in_try.mdsm");
  WeaveConfig cfg;
  cfg.map = gps_map();
  auto [out, report] = weave_permissions(dex, cfg);
  CHECK(report.n_wrapped == 1);
  const CodeItem& main = method_code(out, "Lapp/TryWeave;->main()I");
  REQUIRE(main.tries.size() == 1);
  const TryBlock& t = main.tries[0];
  // The whole wrapper (policy check, both branches) sits inside the range.
  bool covers_monitor_call = false;
  for (uint32_t i = t.start; i < t.end; i++) {
    if (main.insns[i].op == Opcode::InvokeStatic &&
        method_signature(out, main.insns[i].pool_index)
                .find("policyAccepts") != std::string::npos) {
      covers_monitor_call = true;
    }
  }
  CHECK(covers_monitor_call);
  DexFile reparsed = parse_dex(write_dex(out));
  CHECK(structurally_equal(reparsed, out));
}

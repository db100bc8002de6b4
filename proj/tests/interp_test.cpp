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

#include "dexweaver/interp.hpp"
#include "dexweaver/passes.hpp"
#include "test_util.hpp"

using namespace dexweaver;
using namespace dexweaver::testutil;

namespace {

ApiEnvironment gps_env() {
  ApiEnvironment env;
  env.bindings["Lapi/Gps;->getLocation()I"] = Value::make_int(42);
  env.bindings["Lapi/Gps;->getOwner()Ljava/lang/String;"] = Value::make_text("zoe");
  env.bindings["Lapi/Log;->note()V"] = Value::make_int(0);
  return env;
}

WeaveConfig gps_weave() {
  WeaveConfig cfg;
  cfg.map.entries["Lapi/Gps;->getLocation()I"] = {"GPS"};
  cfg.map.entries["Lapi/Gps;->getOwner()Ljava/lang/String;"] = {"GPS"};
  return cfg;
}

}  // namespace

TEST_CASE("gps main returns the bound value and traces one protected call") {
  DexFile dex = load_fixture("gps.mdsm");
  ApiEnvironment env = gps_env();
  ExecResult result = execute(dex, "Lmain/Main;->main()I", {}, env);
  REQUIRE(result.outcome == ExecResult::Outcome::Returned);
  REQUIRE(result.value.has_value());
  CHECK(*result.value == Value::make_int(42));
  REQUIRE(result.call_trace.size() == 1);
  CHECK(result.call_trace[0].method == "Lapi/Gps;->getLocation()I");
  CHECK(result.stub_trace.empty());
  CHECK(result.steps == 4);  // invoke, move-result, if-eqz, return
}

TEST_CASE("woven gps under a full-grant policy matches the original run") {
  DexFile dex = load_fixture("gps.mdsm");
  auto [woven, report] = weave_permissions(dex, gps_weave());
  REQUIRE(report.n_wrapped == 3);

  ApiEnvironment original_env = gps_env();
  ExecResult original = execute(dex, "Lmain/Main;->main()I", {}, original_env);

  ApiEnvironment woven_env = gps_env();
  woven_env.policy_hook = [](const std::string&) { return true; };
  ExecResult instrumented = execute(woven, "Lmain/Main;->main()I", {}, woven_env);

  CHECK(instrumented.outcome == original.outcome);
  CHECK(instrumented.value == original.value);
  CHECK(instrumented.call_trace == original.call_trace);
  CHECK(instrumented.stub_trace.empty());
}

TEST_CASE("woven gps under an empty policy returns the fake default and logs the stub") {
  DexFile dex = load_fixture("gps.mdsm");
  auto [woven, report] = weave_permissions(dex, gps_weave());

  ApiEnvironment env = gps_env();
  env.policy_hook = [](const std::string&) { return false; };
  ExecResult result = execute(woven, "Lmain/Main;->main()I", {}, env);

  REQUIRE(result.outcome == ExecResult::Outcome::Returned);
  CHECK(*result.value == Value::make_int(0));  // integral fake default
  CHECK(result.call_trace.empty());
  REQUIRE(result.stub_trace.size() == 1);
  CHECK(result.stub_trace[0].method.find("getLocation") != std::string::npos);
}

TEST_CASE("denied object-returning call yields null") {
  DexFile dex = load_fixture("deny_default.mdsm");
  auto [woven, report] = weave_permissions(dex, gps_weave());
  REQUIRE(report.n_wrapped == 1);

  ApiEnvironment env = gps_env();
  env.policy_hook = [](const std::string&) { return false; };
  ExecResult result = execute(woven, "Lapp/Deny;->main()I", {}, env);
  REQUIRE(result.outcome == ExecResult::Outcome::Returned);
  CHECK(*result.value == Value::make_int(0));  // the null branch was taken
  CHECK(result.call_trace.empty());
  CHECK(result.stub_trace.size() == 1);
}

TEST_CASE("handler matching is exact-type first, then catch-all") {
  DexFile dex = load_fixture("multi_handler.mdsm");
  ApiEnvironment env;
  auto run = [&](const char* entry) {
    ExecResult r = execute(dex, entry, {}, env);
    REQUIRE(r.outcome == ExecResult::Outcome::Returned);
    return r.value->i;
  };
  CHECK(run("Lapp/Multi;->io()I") == 1);
  CHECK(run("Lapp/Multi;->rt()I") == 2);
  CHECK(run("Lapp/Multi;->other()I") == 3);  // only the catch-all matches
}

TEST_CASE("uncaught exceptions unwind to the caller's handler") {
  DexFile dex = load_fixture("nested_call.mdsm");
  ApiEnvironment env;
  ExecResult result = execute(dex, "Lapp/Nested;->main()I", {}, env);
  REQUIRE(result.outcome == ExecResult::Outcome::Returned);
  CHECK(result.value->i == -4);
}

TEST_CASE("exception escaping every frame is an uncaught outcome") {
  DexFile dex = load_fixture("nested_call.mdsm");
  ApiEnvironment env;
  ExecResult result = execute(dex, "Lapp/Nested;->inner()I", {}, env);
  REQUIRE(result.outcome == ExecResult::Outcome::Uncaught);
  CHECK(result.exception_type == "Ljava/io/IOException;");
}

TEST_CASE("step budget converts nontermination into an outcome") {
  DexFile dex = load_fixture("loops.mdsm");
  ApiEnvironment env;
  ExecResult spin = execute(dex, "Lapp/Loops;->spin()I", {}, env, 1000);
  CHECK(spin.outcome == ExecResult::Outcome::BudgetExhausted);
  CHECK(spin.steps == 1000);

  ExecResult bounded = execute(dex, "Lapp/Loops;->bounded()I", {}, env, 1000);
  REQUIRE(bounded.outcome == ExecResult::Outcome::Returned);
  CHECK(bounded.value->i == 3);
}

TEST_CASE("identical inputs give identical results") {
  DexFile dex = load_fixture("gps.mdsm");
  ApiEnvironment env1 = gps_env();
  ApiEnvironment env2 = gps_env();
  ExecResult a = execute(dex, "Lmain/Main;->main()I", {}, env1);
  ExecResult b = execute(dex, "Lmain/Main;->main()I", {}, env2);
  CHECK(a.outcome == b.outcome);
  CHECK(a.value == b.value);
  CHECK(a.steps == b.steps);
  CHECK(a.call_trace == b.call_trace);
  CHECK(a.stub_trace == b.stub_trace);
  CHECK(a.step_log == b.step_log);
}

TEST_CASE("unknown entry and arity mismatches are errors") {
  DexFile dex = load_fixture("gps.mdsm");
  ApiEnvironment env;
  try {
    execute(dex, "Lno/Such;->method()V", {}, env);
    FAIL("expected UnknownEntry");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownEntry);
  }
  try {
    execute(dex, "Lmain/Main;->main()I", {Value::make_int(1)}, env);
    FAIL("expected ArityMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ArityMismatch);
  }
}

TEST_CASE("arguments land in the highest registers") {
  DexFile dex = load_fixture("branchy.mdsm");
  ApiEnvironment env;
  ExecResult zero = execute(dex, "Lapp/Branchy;->pick(I)I", {Value::make_int(0)}, env);
  CHECK(zero.value->i == 3);
  ExecResult nonzero = execute(dex, "Lapp/Branchy;->pick(I)I", {Value::make_int(9)}, env);
  CHECK(nonzero.value->i == 2);
}

TEST_CASE("executing an opaque instruction is an UnsupportedOpcode error") {
  DexFile dex = load_fixture("minimal.mdsm");
  CodeItem& code = *dex.class_defs[0].direct_methods[0].code;
  Instruction opaque;
  opaque.op = Opcode::Opaque;
  opaque.opaque_units = 1;
  code.opaque_units.push_back(0x0121);
  code.insns.insert(code.insns.begin(), opaque);
  ApiEnvironment env;
  try {
    execute(dex, "Lapp/Minimal;->run()V", {}, env);
    FAIL("expected UnsupportedOpcode");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedOpcode);
  }
}

TEST_CASE("virtual methods with bodies dispatch with the receiver in the frame") {
  DexFile dex = assemble(
      ".class public La/Box;\n"
      ".method public get(I)I\n"
      "    .registers 3\n"
      "    move v0, v2\n"  // second argument register
      "    return v0\n"
      ".end method\n"
      ".method public static main()I\n"
      "    .registers 3\n"
      "    new-instance v0, La/Box;\n"
      "    invoke-direct {v0}, La/Box;-><init>()V\n"
      "    const/4 v1, 5\n"
      "    invoke-virtual {v0, v1}, La/Box;->get(I)I\n"
      "    move-result v2\n"
      "    return v2\n"
      ".end method\n");
  ApiEnvironment env;
  ExecResult result = execute(dex, "La/Box;->main()I", {}, env);
  REQUIRE(result.outcome == ExecResult::Outcome::Returned);
  CHECK(result.value->i == 5);
}

TEST_CASE("call trace and stub trace stay disjoint per wrapped call") {
  DexFile dex = load_fixture("gps.mdsm");
  auto [woven, report] = weave_permissions(dex, gps_weave());
  ApiEnvironment env = gps_env();
  bool allow = true;
  env.policy_hook = [&](const std::string&) { return allow; };
  ExecResult helper = execute(woven, "Lmain/Main;->helper()I", {}, env);
  REQUIRE(helper.outcome == ExecResult::Outcome::Returned);
  CHECK(helper.call_trace.size() == 3);  // two getLocation + note
  CHECK(helper.stub_trace.empty());

  allow = false;
  ExecResult denied = execute(woven, "Lmain/Main;->helper()I", {}, env);
  CHECK(denied.call_trace.size() == 1);  // only the unmapped Log.note survives
  CHECK(denied.stub_trace.size() == 2);
}

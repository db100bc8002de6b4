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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "dexweaver/dex_io.hpp"
#include "dexweaver/signing.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace dexweaver;
using namespace dexweaver::testutil;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("dexweaver_cli_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

// Returns the child's exit code; stdout/stderr land in `log`.
int run_cli(const std::string& args, const std::string& log) {
  std::string command = std::string(DEXWEAVER_BIN) + " " + args + " >" + log + " 2>&1";
  int status = std::system(command.c_str());
  if (status == -1) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) { return read_text(path); }

void make_keystore(const std::string& path) {
  std::ofstream out(path);
  out << "{ \"seed\": 7 }\n";
}

std::string make_apk(const TempDir& dir, const std::string& fixture) {
  Archive archive;
  std::string manifest = "<manifest package=\"cli\"/>";
  archive.entries.push_back({"AndroidManifest.xml", Bytes(manifest.begin(), manifest.end())});
  Bytes apk = repack(archive, write_dex(load_fixture(fixture)));
  std::string path = dir / (fixture + ".apk");
  write_bytes(path, apk);
  return path;
}

}  // namespace

TEST_CASE("asm/disasm round trip through the binary") {
  TempDir dir;
  std::string dex = dir / "out.dex";
  std::string log = dir / "log.txt";
  CHECK(run_cli("asm " + fixture_path("gps.mdsm") + " -o " + dex, log) == 0);
  std::string listing = dir / "listing.mdsm";
  CHECK(run_cli("disasm " + dex + " -o " + listing, log) == 0);
  std::string dex2 = dir / "again.dex";
  CHECK(run_cli("asm " + listing + " -o " + dex2, log) == 0);
  CHECK(read_bytes(dex) == read_bytes(dex2));
}

TEST_CASE("pipeline with both passes produces a verifiable apk and a report") {
  TempDir dir;
  std::string log = dir / "log.txt";
  std::string apk = make_apk(dir, "gps.mdsm");
  std::string ks = dir / "ks.json";
  make_keystore(ks);

  int exit_code = run_cli("pipeline " + apk + " -o " + (dir / "out") + " --map " +
                              fixture_path("map.json") + " --ad-packages com.ads" +
                              " --keystore " + ks,
                          log);
  CHECK(exit_code == 0);

  Bytes out_apk = read_bytes(dir / "out/out.apk");
  CHECK(verify_apk(out_apk).status == VerifyResult::Status::Verified);

  std::string report = slurp(dir / "out/report.json");
  CHECK(report.find("\"n_wrapped\": 3") != std::string::npos);
  CHECK(report.find("\"n_try_neutralized\": 0") != std::string::npos);
}

TEST_CASE("pipeline with both passes disabled re-serializes the dex unchanged") {
  TempDir dir;
  std::string log = dir / "log.txt";
  std::string apk = make_apk(dir, "gps.mdsm");
  std::string ks = dir / "ks.json";
  make_keystore(ks);

  int exit_code = run_cli("pipeline " + apk + " -o " + (dir / "out") + " --map " +
                              fixture_path("map.json") + " --no-weave --no-adremove" +
                              " --keystore " + ks,
                          log);
  CHECK(exit_code == 0);

  Archive out = unpack(read_bytes(dir / "out/out.apk"));
  DexFile result = parse_dex(*out.classes_dex());
  CHECK(structurally_equal(result, load_fixture("gps.mdsm")));
}

TEST_CASE("pipeline exits 2 on partial instrumentation") {
  TempDir dir;
  std::string log = dir / "log.txt";
  std::string apk = make_apk(dir, "mixed.mdsm");
  std::string ks = dir / "ks.json";
  make_keystore(ks);
  int exit_code = run_cli("pipeline " + apk + " -o " + (dir / "out") + " --map " +
                              fixture_path("map.json") + " --keystore " + ks,
                          log);
  CHECK(exit_code == 2);
  CHECK(verify_apk(read_bytes(dir / "out/out.apk")).status ==
        VerifyResult::Status::Verified);
}

TEST_CASE("pipeline exits 1 with a diagnostic naming a missing keystore") {
  TempDir dir;
  std::string log = dir / "log.txt";
  std::string apk = make_apk(dir, "gps.mdsm");
  std::string missing = dir / "nope.json";
  int exit_code =
      run_cli("pipeline " + apk + " -o " + (dir / "out") + " --keystore " + missing, log);
  CHECK(exit_code == 1);
  CHECK(slurp(log).find(missing) != std::string::npos);
}

TEST_CASE("pipeline exits 1 when a stage fails") {
  TempDir dir;
  std::string log = dir / "log.txt";
  std::string apk = make_apk(dir, "pressure.mdsm");
  std::string ks = dir / "ks.json";
  make_keystore(ks);
  int exit_code = run_cli("pipeline " + apk + " -o " + (dir / "out") + " --map " +
                              fixture_path("map.json") + " --keystore " + ks,
                          log);
  CHECK(exit_code == 1);
  CHECK(slurp(log).find("RegisterPressure") != std::string::npos);
}

TEST_CASE("sign and verify subcommands agree") {
  TempDir dir;
  std::string log = dir / "log.txt";
  std::string apk = make_apk(dir, "minimal.mdsm");
  std::string ks = dir / "ks.json";
  make_keystore(ks);
  std::string out = dir / "signed.apk";
  CHECK(run_cli("sign " + apk + " --keystore " + ks + " -o " + out, log) == 0);
  CHECK(run_cli("verify " + out, log) == 0);
  CHECK(slurp(log).find("Verified") != std::string::npos);
  CHECK(run_cli("verify " + apk, log) == 1);
  CHECK(slurp(log).find("Unsigned") != std::string::npos);
}

TEST_CASE("run subcommand executes woven code under a policy") {
  TempDir dir;
  std::string log = dir / "log.txt";
  std::string dex = dir / "gps.dex";
  CHECK(run_cli("asm " + fixture_path("gps.mdsm") + " -o " + dex, log) == 0);
  std::string woven = dir / "woven.dex";
  CHECK(run_cli("weave " + dex + " --map " + fixture_path("map.json") + " -o " + woven,
                log) == 0);

  std::string trace = dir / "trace.json";
  int exit_code = run_cli("run " + woven + " --entry \"Lmain/Main;->main()I\" --env " +
                              fixture_path("env_gps.json") + " --policy " +
                              fixture_path("policy_empty.json") + " --map " +
                              fixture_path("map.json") + " --app app --trace " + trace,
                          log);
  CHECK(exit_code == 0);
  std::string text = slurp(trace);
  CHECK(text.find("\"value\": 0") != std::string::npos);
  CHECK(text.find("stub_trace") != std::string::npos);
  CHECK(text.find("Lzz/irm/Stub;->getLocation()I") != std::string::npos);
}

TEST_CASE("adremove subcommand reports neutralization counts") {
  TempDir dir;
  std::string log = dir / "log.txt";
  std::string dex = dir / "ads.dex";
  CHECK(run_cli("asm " + fixture_path("ads.mdsm") + " -o " + dex, log) == 0);
  std::string out = dir / "clean.dex";
  std::string report = dir / "report.json";
  CHECK(run_cli("adremove " + dex + " --packages com.ads,com.adsense -o " + out +
                    " --report " + report,
                log) == 0);
  CHECK(slurp(report).find("\"n_try_neutralized\": 2") != std::string::npos);
}

TEST_CASE("bench subcommand writes the per-stage CSV") {
  TempDir dir;
  std::string log = dir / "log.txt";
  std::string corpus = dir / "corpus";
  std::string csv = dir / "bench.csv";
  int exit_code = run_cli("bench --corpus " + corpus + " --synthesize 10,20 --csv " + csv,
                          log);
  CHECK(exit_code == 0);
  std::string text = slurp(csv);
  CHECK(text.find("app,dex_size_kib,stage,seconds,outcome") != std::string::npos);
  CHECK(text.find("gen_10kib,") != std::string::npos);
  CHECK(text.find(",parse,") != std::string::npos);
  CHECK(text.find(",sign,") != std::string::npos);
  std::string summary = slurp(log);
  CHECK(summary.find("2/2 (100%)") != std::string::npos);
}

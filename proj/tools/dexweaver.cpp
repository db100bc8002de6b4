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

#include <openssl/pem.h>
#include <openssl/x509.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "dexweaver/bench.hpp"
#include "dexweaver/dex_io.hpp"
#include "dexweaver/interp.hpp"
#include "dexweaver/microasm.hpp"
#include "dexweaver/passes.hpp"
#include "dexweaver/policy.hpp"
#include "dexweaver/signing.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dexweaver;

namespace {

int log_level() {
  static int level = [] {
    const char* env = std::getenv("DEXWEAVER_LOG");
    if (!env) return 1;
    std::string v(env);
    if (v == "quiet") return 0;
    if (v == "debug") return 2;
    return 1;
  }();
  return level;
}

void log_info(const std::string& message) {
  if (log_level() >= 2) std::cerr << "dexweaver: " << message << "\n";
}

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::TruncatedFile, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  std::string s = buffer.str();
  return Bytes(s.begin(), s.end());
}

std::string read_file_text(const std::string& path) {
  Bytes bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_file(const std::string& path, BytesView bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::TruncatedFile, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

void write_file_text(const std::string& path, const std::string& text) {
  write_file(path, BytesView(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream stream(text);
  while (std::getline(stream, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

json report_to_json(const InstrumentationReport& report) {
  json j;
  j["n_wrapped"] = report.n_wrapped;
  j["n_try_neutralized"] = report.n_try_neutralized;
  j["n_skipped"] = report.n_skipped();
  j["n_sites_skipped"] = report.n_sites_skipped;
  j["skipped"] = json::array();
  for (const SkippedMethod& skip : report.skipped) {
    j["skipped"].push_back({{"method", skip.method}, {"reason", skip.reason}});
  }
  j["registers_grown"] = json::object();
  for (const auto& [method, grown] : report.registers_grown) {
    j["registers_grown"][method] = grown;
  }
  return j;
}

json record_to_json(const BenchRecord& record) {
  json j;
  j["app"] = record.app;
  j["dex_size_kib"] = record.dex_size_kib;
  j["stages"] = json::object();
  for (Stage stage : kAllStages) {
    const auto& result = record.stage(stage);
    if (!result) continue;
    j["stages"][stage_name(stage)] = {{"seconds", result->seconds},
                                      {"outcome", result->outcome}};
  }
  return j;
}

Value value_from_json(const json& j) {
  if (j.is_null()) return Value::make_null();
  if (j.is_string()) return Value::make_text(j.get<std::string>());
  if (j.is_boolean()) return Value::make_int(j.get<bool>() ? 1 : 0);
  if (j.is_number_integer()) return Value::make_int(j.get<int32_t>());
  fail(ErrorKind::SyntaxError, "environment values must be int, string, bool or null");
}

json value_to_json(const Value& value) {
  switch (value.kind) {
    case Value::Kind::Int: return value.i;
    case Value::Kind::Text: return value.text;
    case Value::Kind::Null: return nullptr;
    case Value::Kind::Ref:
      return json{{"ref", value.ref_id}, {"type", value.ref_type}};
  }
  return nullptr;
}

json trace_to_json(const std::vector<TraceEntry>& trace) {
  json out = json::array();
  for (const TraceEntry& entry : trace) {
    json args = json::array();
    for (const Value& arg : entry.args) args.push_back(value_to_json(arg));
    out.push_back({{"method", entry.method}, {"args", args}});
  }
  return out;
}

int cmd_asm(const std::string& input, const std::string& output) {
  DexFile dex = assemble(read_file_text(input));
  write_file(output, write_dex(dex));
  log_info("assembled " + input + " -> " + output);
  return 0;
}

int cmd_disasm(const std::string& input, const std::string& output) {
  Bytes bytes = read_file(input);
  DexFile dex = parse_dex(bytes);
  std::string text = disassemble(dex);
  if (output.empty()) {
    std::cout << text;
  } else {
    write_file_text(output, text);
  }
  return 0;
}

int cmd_adremove(const std::string& input, const std::string& output,
                 const std::string& packages, const std::string& report_path) {
  AdConfig cfg;
  cfg.ad_packages = split_csv(packages);
  Bytes bytes = read_file(input);
  auto [dex, report] = neutralize_ads(parse_dex(bytes), cfg);
  write_file(output, write_dex(dex));
  if (!report_path.empty()) {
    write_file_text(report_path, report_to_json(report).dump(2) + "\n");
  }
  std::cout << "neutralized " << report.n_try_neutralized << " try block(s), skipped "
            << report.n_skipped() << " method(s)\n";
  return report.n_skipped() > 0 ? 2 : 0;
}

int cmd_weave(const std::string& input, const std::string& output,
              const std::string& map_path, const std::string& report_path,
              const std::string& monitor_class, const std::string& stub_class) {
  WeaveConfig cfg;
  cfg.map = load_permission_map(map_path);
  if (!monitor_class.empty()) cfg.monitor_class = monitor_class;
  if (!stub_class.empty()) cfg.stub_class = stub_class;
  Bytes bytes = read_file(input);
  auto [dex, report] = weave_permissions(parse_dex(bytes), cfg);
  write_file(output, write_dex(dex));
  if (!report_path.empty()) {
    write_file_text(report_path, report_to_json(report).dump(2) + "\n");
  }
  std::cout << "wrapped " << report.n_wrapped << " call site(s), skipped "
            << report.n_skipped() << " method(s)\n";
  return report.n_skipped() > 0 ? 2 : 0;
}

int cmd_run(const std::string& input, const std::string& entry, const std::string& args_csv,
            const std::string& env_path, const std::string& policy_path,
            const std::string& map_path, const std::string& app,
            const std::string& trace_path, uint64_t budget) {
  Bytes bytes = read_file(input);
  DexFile dex = parse_dex(bytes);

  ApiEnvironment env;
  if (!env_path.empty()) {
    json doc = json::parse(read_file_text(env_path));
    if (doc.contains("bindings")) {
      for (auto& [sig, value] : doc["bindings"].items()) {
        env.bindings[sig] = value_from_json(value);
      }
    }
    if (doc.contains("monitor_class")) env.monitor_class = doc["monitor_class"];
    if (doc.contains("stub_class")) env.stub_class = doc["stub_class"];
  }
  if (!policy_path.empty()) {
    Policy policy = load_policy(policy_path);
    PermissionMap map = map_path.empty() ? PermissionMap{} : load_permission_map(map_path);
    env.policy_hook = [policy, map, app](const std::string& key) {
      return policy_accepts(policy, map, app, key).allowed;
    };
  }

  std::vector<Value> args;
  for (const std::string& a : split_csv(args_csv)) {
    args.push_back(Value::make_int(static_cast<int32_t>(std::stol(a))));
  }

  ExecResult result = execute(dex, entry, args, env, budget);

  json out;
  switch (result.outcome) {
    case ExecResult::Outcome::Returned:
      out["outcome"] = "returned";
      out["value"] = result.value ? value_to_json(*result.value) : json(nullptr);
      break;
    case ExecResult::Outcome::Uncaught:
      out["outcome"] = "uncaught";
      out["exception"] = result.exception_type;
      break;
    case ExecResult::Outcome::BudgetExhausted:
      out["outcome"] = "budget-exceeded";
      break;
  }
  out["steps"] = result.steps;
  out["call_trace"] = trace_to_json(result.call_trace);
  out["stub_trace"] = trace_to_json(result.stub_trace);
  std::string text = out.dump(2) + "\n";
  if (trace_path.empty()) {
    std::cout << text;
  } else {
    write_file_text(trace_path, text);
    std::cout << out["outcome"].get<std::string>() << "\n";
  }
  return result.outcome == ExecResult::Outcome::Returned ? 0 : 1;
}

int cmd_repack(const std::string& input, const std::string& dex_path,
               const std::string& output) {
  Bytes apk = read_file(input);
  Archive archive = unpack(apk);
  Bytes dex_bytes = dex_path.empty() ? *archive.classes_dex() : read_file(dex_path);
  write_file(output, repack(archive, dex_bytes));
  return 0;
}

int cmd_sign(const std::string& input, const std::string& keystore,
             const std::string& output) {
  if (!fs::exists(keystore)) {
    fail(ErrorKind::CryptoFailure, "keystore path does not exist: " + keystore);
  }
  SigningIdentity identity = load_keystore(keystore);
  write_file(output, sign_apk(read_file(input), identity));
  return 0;
}

int cmd_verify(const std::string& input, const std::string& cert_path) {
  Bytes apk = read_file(input);
  VerifyResult result;
  if (cert_path.empty()) {
    result = verify_apk(apk);
  } else {
    std::string pem = read_file_text(cert_path);
    BIO* bio = BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size()));
    X509* cert = PEM_read_bio_X509(bio, nullptr, nullptr, nullptr);
    BIO_free(bio);
    if (!cert) fail(ErrorKind::CryptoFailure, "bad certificate PEM: " + cert_path);
    result = verify_apk(apk, cert);
    X509_free(cert);
  }
  std::cout << verify_status_name(result.status);
  if (!result.detail.empty()) std::cout << ": " << result.detail;
  std::cout << "\n";
  return result.verified() ? 0 : 1;
}

struct PipelineCli {
  std::string input;
  std::string outdir;
  std::string ad_packages;
  std::string map_path;
  std::string policy_path;
  std::string keystore;
  std::string report_path;
  bool no_adremove = false;
  bool no_weave = false;
  uint64_t budget_mib = 0;
};

int cmd_pipeline(const PipelineCli& cli) {
  if (!fs::exists(cli.input)) {
    fail(ErrorKind::TruncatedFile, "input does not exist: " + cli.input);
  }
  if (cli.keystore.empty() || !fs::exists(cli.keystore)) {
    fail(ErrorKind::CryptoFailure, "keystore path does not exist: " + cli.keystore);
  }
  if (!cli.policy_path.empty() && !fs::exists(cli.policy_path)) {
    fail(ErrorKind::SyntaxError, "policy path does not exist: " + cli.policy_path);
  }

  PipelineOptions options;
  options.adremove_enabled = !cli.no_adremove && !cli.ad_packages.empty();
  options.ad_config.ad_packages = split_csv(cli.ad_packages);
  options.weave_enabled = !cli.no_weave && !cli.map_path.empty();
  if (options.weave_enabled) {
    options.weave_config.map = load_permission_map(cli.map_path);
  }
  SigningIdentity identity = load_keystore(cli.keystore);
  options.identity = &identity;

  std::optional<MemoryBudget> budget;
  if (cli.budget_mib > 0) budget = MemoryBudget{cli.budget_mib};

  fs::create_directories(cli.outdir);
  std::string app = fs::path(cli.input).stem().string();

  PipelineArtifacts artifacts;
  BenchRecord record = run_pipeline(app, read_file(cli.input), options, budget, &artifacts);

  json report;
  report["instrumentation"] = {{"adremove", report_to_json(artifacts.adremove_report)},
                               {"weave", report_to_json(artifacts.weave_report)}};
  report["bench"] = record_to_json(record);
  std::string report_path = cli.report_path.empty()
                                ? (fs::path(cli.outdir) / "report.json").string()
                                : cli.report_path;
  write_file_text(report_path, report.dump(2) + "\n");

  if (!record.all_ok()) {
    for (Stage stage : kAllStages) {
      const auto& result = record.stage(stage);
      if (result && !result->ok()) {
        std::cerr << "dexweaver: stage " << stage_name(stage) << " failed: "
                  << result->outcome << "\n";
        break;
      }
      if (!result) break;
    }
    return 1;
  }

  std::string out_apk = (fs::path(cli.outdir) / "out.apk").string();
  write_file(out_apk, artifacts.signed_apk);
  std::cout << "pipeline ok: " << out_apk << " (wrapped "
            << artifacts.weave_report.n_wrapped << ", neutralized "
            << artifacts.adremove_report.n_try_neutralized << ")\n";

  uint32_t skipped = artifacts.adremove_report.n_skipped() +
                     artifacts.weave_report.n_skipped();
  return skipped > 0 ? 2 : 0;
}

struct BenchCli {
  std::string corpus;
  uint64_t budget_mib = 0;
  std::string csv_path;
  std::string summary_csv;
  std::string synthesize;
  std::string ad_packages;
  std::string map_path;
  std::string keystore;
};

int cmd_bench(const BenchCli& cli) {
  fs::create_directories(cli.corpus);
  for (const std::string& size_text : split_csv(cli.synthesize)) {
    size_t kib = static_cast<size_t>(std::stoul(size_text));
    std::string path =
        (fs::path(cli.corpus) / ("gen_" + std::to_string(kib) + "kib.apk")).string();
    write_file(path, generate_synthetic_apk(kib * 1024));
    log_info("synthesized " + path);
  }

  PipelineOptions options;
  options.adremove_enabled = !cli.ad_packages.empty();
  options.ad_config.ad_packages = split_csv(cli.ad_packages);
  options.weave_enabled = !cli.map_path.empty();
  if (options.weave_enabled) options.weave_config.map = load_permission_map(cli.map_path);
  SigningIdentity identity =
      cli.keystore.empty() ? generate_identity(1) : load_keystore(cli.keystore);
  options.identity = &identity;

  std::optional<MemoryBudget> budget;
  if (cli.budget_mib > 0) budget = MemoryBudget{cli.budget_mib};

  std::vector<fs::path> apps;
  for (const auto& entry : fs::directory_iterator(cli.corpus)) {
    if (entry.path().extension() == ".apk") apps.push_back(entry.path());
  }
  std::sort(apps.begin(), apps.end());
  if (apps.empty()) {
    std::cerr << "dexweaver: no .apk files in " << cli.corpus << "\n";
  }

  std::vector<BenchRecord> records;
  for (const fs::path& app : apps) {
    Bytes apk = read_file(app.string());
    std::string name = app.stem().string();
    run_pipeline(name, apk, options, budget);  // warm-up, discarded
    records.push_back(run_pipeline(name, apk, options, budget));
    log_info("benchmarked " + name);
  }

  if (!cli.csv_path.empty()) write_file_text(cli.csv_path, records_to_csv(records));
  BenchSummary summary = summarize(records);
  if (!cli.summary_csv.empty()) write_file_text(cli.summary_csv, summary.to_csv());
  std::cout << summary.to_text();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dexweaver: Dalvik bytecode instrumentation toolchain"};
  app.require_subcommand(1);

  auto* asm_cmd = app.add_subcommand("asm", "assemble .mdsm source into a DEX file");
  std::string asm_in, asm_out;
  asm_cmd->add_option("input", asm_in, "source file")->required();
  asm_cmd->add_option("-o,--output", asm_out, "output DEX path")->required();

  auto* disasm_cmd = app.add_subcommand("disasm", "disassemble a DEX file");
  std::string disasm_in, disasm_out;
  disasm_cmd->add_option("input", disasm_in, "DEX file")->required();
  disasm_cmd->add_option("-o,--output", disasm_out, "output path (stdout if omitted)");

  auto* ad_cmd = app.add_subcommand("adremove", "neutralize ad-package try blocks");
  std::string ad_in, ad_out, ad_packages, ad_report;
  ad_cmd->add_option("input", ad_in, "DEX file")->required();
  ad_cmd->add_option("-o,--output", ad_out, "output DEX path")->required();
  ad_cmd->add_option("--packages", ad_packages, "comma-separated package prefixes")
      ->required();
  ad_cmd->add_option("--report", ad_report, "write the pass report as JSON");

  auto* weave_cmd = app.add_subcommand("weave", "weave the permission policy monitor");
  std::string weave_in, weave_out, weave_map, weave_report, weave_monitor, weave_stub;
  weave_cmd->add_option("input", weave_in, "DEX file")->required();
  weave_cmd->add_option("-o,--output", weave_out, "output DEX path")->required();
  weave_cmd->add_option("--map", weave_map, "permission map JSON")->required();
  weave_cmd->add_option("--report", weave_report, "write the pass report as JSON");
  weave_cmd->add_option("--monitor-class", weave_monitor, "monitor type descriptor");
  weave_cmd->add_option("--stub-class", weave_stub, "stub type descriptor");

  auto* run_cmd = app.add_subcommand("run", "interpret a method");
  std::string run_in, run_entry, run_args, run_env, run_policy, run_map, run_trace;
  std::string run_app = "app";
  uint64_t run_budget = kDefaultStepBudget;
  run_cmd->add_option("input", run_in, "DEX file")->required();
  run_cmd->add_option("--entry", run_entry, "method signature")->required();
  run_cmd->add_option("--args", run_args, "comma-separated integer arguments");
  run_cmd->add_option("--env", run_env, "API environment JSON");
  run_cmd->add_option("--policy", run_policy, "policy JSON");
  run_cmd->add_option("--map", run_map, "permission map JSON");
  run_cmd->add_option("--app", run_app, "application id for policy decisions");
  run_cmd->add_option("--trace", run_trace, "write the execution trace JSON here");
  run_cmd->add_option("--budget", run_budget, "step budget");

  auto* repack_cmd = app.add_subcommand("repack", "rebuild an apk around a new classes.dex");
  std::string repack_in, repack_dex, repack_out;
  repack_cmd->add_option("input", repack_in, "apk file")->required();
  repack_cmd->add_option("--dex", repack_dex,
                         "replacement classes.dex (defaults to the existing one)");
  repack_cmd->add_option("-o,--output", repack_out, "output apk path")->required();

  auto* sign_cmd = app.add_subcommand("sign", "v1-sign an apk");
  std::string sign_in, sign_ks, sign_out;
  sign_cmd->add_option("input", sign_in, "apk file")->required();
  sign_cmd->add_option("--keystore", sign_ks, "keystore JSON")->required();
  sign_cmd->add_option("-o,--output", sign_out, "output apk path")->required();

  auto* verify_cmd = app.add_subcommand("verify", "verify an apk's v1 signature");
  std::string verify_in, verify_cert;
  verify_cmd->add_option("input", verify_in, "apk file")->required();
  verify_cmd->add_option("--cert", verify_cert, "trusted certificate PEM");

  auto* pipe_cmd = app.add_subcommand("pipeline", "full unpack->instrument->sign pipeline");
  PipelineCli pipe;
  pipe_cmd->add_option("input", pipe.input, "apk file")->required();
  pipe_cmd->add_option("-o,--outdir", pipe.outdir, "output directory")->required();
  pipe_cmd->add_option("--ad-packages", pipe.ad_packages, "ad package prefixes");
  pipe_cmd->add_option("--map", pipe.map_path, "permission map JSON");
  pipe_cmd->add_option("--policy", pipe.policy_path,
                       "policy JSON (recorded; wrapping covers all mapped calls)");
  pipe_cmd->add_option("--keystore", pipe.keystore, "keystore JSON")->required();
  pipe_cmd->add_option("--report", pipe.report_path, "report JSON path");
  pipe_cmd->add_flag("--no-adremove", pipe.no_adremove, "disable the ad pass");
  pipe_cmd->add_flag("--no-weave", pipe.no_weave, "disable the weave pass");
  pipe_cmd->add_option("--budget-mib", pipe.budget_mib, "memory budget in MiB");

  auto* bench_cmd = app.add_subcommand("bench", "time the pipeline over a corpus");
  BenchCli bench;
  bench_cmd->add_option("--corpus", bench.corpus, "directory of .apk files")->required();
  bench_cmd->add_option("--budget-mib", bench.budget_mib, "memory budget in MiB");
  bench_cmd->add_option("--csv", bench.csv_path, "raw per-stage CSV output");
  bench_cmd->add_option("--summary-csv", bench.summary_csv, "summary CSV output");
  bench_cmd->add_option("--synthesize", bench.synthesize,
                        "comma-separated KiB sizes of synthetic apps to generate");
  bench_cmd->add_option("--ad-packages", bench.ad_packages, "ad package prefixes");
  bench_cmd->add_option("--map", bench.map_path, "permission map JSON");
  bench_cmd->add_option("--keystore", bench.keystore, "keystore JSON (seeded default)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (asm_cmd->parsed()) return cmd_asm(asm_in, asm_out);
    if (disasm_cmd->parsed()) return cmd_disasm(disasm_in, disasm_out);
    if (ad_cmd->parsed()) return cmd_adremove(ad_in, ad_out, ad_packages, ad_report);
    if (weave_cmd->parsed()) {
      return cmd_weave(weave_in, weave_out, weave_map, weave_report, weave_monitor,
                       weave_stub);
    }
    if (run_cmd->parsed()) {
      return cmd_run(run_in, run_entry, run_args, run_env, run_policy, run_map, run_app,
                     run_trace, run_budget);
    }
    if (repack_cmd->parsed()) return cmd_repack(repack_in, repack_dex, repack_out);
    if (sign_cmd->parsed()) return cmd_sign(sign_in, sign_ks, sign_out);
    if (verify_cmd->parsed()) return cmd_verify(verify_in, verify_cert);
    if (pipe_cmd->parsed()) return cmd_pipeline(pipe);
    if (bench_cmd->parsed()) return cmd_bench(bench);
  } catch (const Error& e) {
    std::cerr << "dexweaver: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "dexweaver: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

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

#include <benchmark/benchmark.h>

#include <sstream>

#include "dexweaver/bench.hpp"
#include "dexweaver/dex_io.hpp"
#include "dexweaver/microasm.hpp"
#include "dexweaver/passes.hpp"

using namespace dexweaver;

namespace {

// A class with `methods` methods, each containing one wrapped call site and
// one try block, so both passes have real work per method.
DexFile instrumentation_target(int methods) {
  std::ostringstream src;
  src << ".class public Lcom/ads/gen/Work;\n";
  for (int i = 0; i < methods; i++) {
    src << ".method public static m" << i << "()I\n"
        << "    .registers 2\n"
        << "T" << i << "s:\n"
        << "    invoke-static {}, Lapi/Gps;->getLocation()I\n"
        << "    move-result v0\n"
        << "T" << i << "e:\n"
        << "    return v0\n"
        << "H" << i << ":\n"
        << "    const/4 v0, -1\n"
        << "    return v0\n"
        << "    .try T" << i << "s T" << i << "e catch Ljava/io/IOException; H" << i << "\n"
        << ".end method\n";
  }
  return assemble(src.str());
}

WeaveConfig weave_config() {
  WeaveConfig cfg;
  cfg.map.entries["Lapi/Gps;->getLocation()I"] = {"GPS"};
  return cfg;
}

}  // namespace

static void BM_ParseDex(benchmark::State& state) {
  Bytes dex = generate_synthetic_dex(static_cast<size_t>(state.range(0)) * 1024);
  for (auto _ : state) {
    DexFile parsed = parse_dex(dex);
    benchmark::DoNotOptimize(parsed);
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * dex.size()));
}
BENCHMARK(BM_ParseDex)->Arg(10)->Arg(100)->Arg(500)->Arg(2000);

static void BM_WriteDex(benchmark::State& state) {
  DexFile dex = parse_dex(generate_synthetic_dex(static_cast<size_t>(state.range(0)) * 1024));
  for (auto _ : state) {
    Bytes bytes = write_dex(dex);
    benchmark::DoNotOptimize(bytes);
  }
}
BENCHMARK(BM_WriteDex)->Arg(10)->Arg(100)->Arg(500);

static void BM_NeutralizeAds(benchmark::State& state) {
  DexFile dex = instrumentation_target(static_cast<int>(state.range(0)));
  AdConfig cfg;
  cfg.ad_packages = {"com.ads"};
  for (auto _ : state) {
    auto result = neutralize_ads(dex, cfg);
    benchmark::DoNotOptimize(result);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_NeutralizeAds)->Arg(8)->Arg(64)->Arg(256);

static void BM_WeavePermissions(benchmark::State& state) {
  DexFile dex = instrumentation_target(static_cast<int>(state.range(0)));
  WeaveConfig cfg = weave_config();
  for (auto _ : state) {
    auto result = weave_permissions(dex, cfg);
    benchmark::DoNotOptimize(result);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_WeavePermissions)->Arg(8)->Arg(64)->Arg(256);

static void BM_Repack(benchmark::State& state) {
  Bytes dex = generate_synthetic_dex(static_cast<size_t>(state.range(0)) * 1024);
  Archive archive;
  std::string manifest = "<manifest/>";
  archive.entries.push_back({"AndroidManifest.xml", Bytes(manifest.begin(), manifest.end())});
  for (auto _ : state) {
    Bytes apk = repack(archive, dex);
    benchmark::DoNotOptimize(apk);
  }
}
BENCHMARK(BM_Repack)->Arg(100)->Arg(1000);

static void BM_SignApk(benchmark::State& state) {
  SigningIdentity identity = generate_identity(1);
  Bytes apk = generate_synthetic_apk(static_cast<size_t>(state.range(0)) * 1024);
  for (auto _ : state) {
    Bytes signed_apk = sign_apk(apk, identity);
    benchmark::DoNotOptimize(signed_apk);
  }
}
BENCHMARK(BM_SignApk)->Arg(100)->Arg(1000);

static void BM_FullPipeline(benchmark::State& state) {
  SigningIdentity identity = generate_identity(1);
  PipelineOptions options;
  options.identity = &identity;
  options.adremove_enabled = true;
  options.ad_config.ad_packages = {"com.ads"};
  options.weave_enabled = true;
  options.weave_config = weave_config();
  Bytes apk = generate_synthetic_apk(static_cast<size_t>(state.range(0)) * 1024);
  for (auto _ : state) {
    BenchRecord record = run_pipeline("bench", apk, options);
    benchmark::DoNotOptimize(record);
  }
}
BENCHMARK(BM_FullPipeline)->Arg(100)->Arg(500);

BENCHMARK_MAIN();

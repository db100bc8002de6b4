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

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dexweaver/archive.hpp"
#include "dexweaver/passes.hpp"
#include "dexweaver/signing.hpp"

namespace dexweaver {

// Pipeline stages in execution order. Unpacking is accounted to the parse
// stage; its cost is dominated by classes.dex anyway.
enum class Stage { Parse, Instrument, Write, Repack, Sign };
constexpr std::array<Stage, 5> kAllStages = {Stage::Parse, Stage::Instrument, Stage::Write,
                                             Stage::Repack, Stage::Sign};
const char* stage_name(Stage stage);

struct StageResult {
  double seconds = 0;
  std::string outcome;  // "ok" or an error name

  bool ok() const { return outcome == "ok"; }
};

// Per-application accounting: once a stage fails, later stages stay absent.
struct BenchRecord {
  std::string app;
  double dex_size_kib = 0;
  std::array<std::optional<StageResult>, 5> stages;

  const std::optional<StageResult>& stage(Stage s) const {
    return stages[static_cast<size_t>(s)];
  }
  bool all_ok() const;
  double total_seconds() const;  // sum over recorded stages
};

// Emulates a constrained-device heap: the parser and passes fail with
// BudgetExceeded when their tracked working set passes the ceiling.
struct MemoryBudget {
  size_t ceiling_mib = 0;

  size_t ceiling_bytes() const { return ceiling_mib * 1024 * 1024; }
};

struct PipelineOptions {
  bool adremove_enabled = false;
  AdConfig ad_config;
  bool weave_enabled = false;
  WeaveConfig weave_config;
  const SigningIdentity* identity = nullptr;  // required for the sign stage
};

// What the pipeline produced, for callers that want more than timings.
struct PipelineArtifacts {
  Bytes signed_apk;
  InstrumentationReport adremove_report;
  InstrumentationReport weave_report;
};

// unpack -> parse -> (adremove, weave) -> write -> repack -> sign, timing
// each stage; a stage error is captured in the record, never thrown. With a
// budget, parse and instrument fail with BudgetExceeded when the model
// working set exceeds the ceiling.
BenchRecord run_pipeline(const std::string& app, BytesView apk_bytes,
                         const PipelineOptions& options,
                         const std::optional<MemoryBudget>& budget = std::nullopt,
                         PipelineArtifacts* artifacts = nullptr);

struct LinearFit {
  double slope = 0;           // seconds per KiB
  double intercept = 0;       // seconds
  double residual_stderr = 0;

  double predict(double x) const { return slope * x + intercept; }
};

// Ordinary least squares over (size KiB, seconds) samples. Needs at least
// two samples with distinct x.
LinearFit fit_linear(const std::vector<std::pair<double, double>>& samples);

struct StageStats {
  double min_s = 0, avg_s = 0, median_s = 0, max_s = 0;
  uint32_t ok_count = 0;
  uint32_t total = 0;
  bool has_times = false;
};

struct BenchSummary {
  std::array<StageStats, 5> per_stage;
  StageStats end_to_end;  // records where every stage succeeded

  std::string to_text() const;  // aligned table
  std::string to_csv() const;
};

BenchSummary summarize(const std::vector<BenchRecord>& records);

// Raw rows, one per executed stage: app, dex_size_kib, stage, seconds, outcome.
std::string records_to_csv(const std::vector<BenchRecord>& records);

// Valid DEX of at least target_bytes, built by replicating small method
// bodies across generated classes.
Bytes generate_synthetic_dex(size_t target_bytes);

// Wraps a synthetic DEX in a minimal application package.
Bytes generate_synthetic_apk(size_t dex_target_bytes);

}  // namespace dexweaver

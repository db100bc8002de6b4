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

#include "dexweaver/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "dexweaver/dex_io.hpp"

namespace dexweaver {

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::Parse: return "parse";
    case Stage::Instrument: return "instrument";
    case Stage::Write: return "write";
    case Stage::Repack: return "repack";
    case Stage::Sign: return "sign";
  }
  return "?";
}

bool BenchRecord::all_ok() const {
  return std::all_of(stages.begin(), stages.end(),
                     [](const std::optional<StageResult>& s) { return s && s->ok(); });
}

double BenchRecord::total_seconds() const {
  double total = 0;
  for (const auto& stage : stages) {
    if (stage) total += stage->seconds;
  }
  return total;
}

namespace {

class StageTimer {
 public:
  StageTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void set_stage(BenchRecord& record, Stage stage, double seconds, std::string outcome) {
  record.stages[static_cast<size_t>(stage)] = StageResult{seconds, std::move(outcome)};
}

}  // namespace

BenchRecord run_pipeline(const std::string& app, BytesView apk_bytes,
                         const PipelineOptions& options,
                         const std::optional<MemoryBudget>& budget,
                         PipelineArtifacts* artifacts) {
  BenchRecord record;
  record.app = app;

  Archive archive;
  DexFile dex;
  {
    StageTimer timer;
    try {
      archive = unpack(apk_bytes);
      const Bytes* dex_bytes = archive.classes_dex();
      record.dex_size_kib = static_cast<double>(dex_bytes->size()) / 1024.0;
      if (budget) {
        MemoryGauge gauge(budget->ceiling_bytes());
        dex = parse_dex(*dex_bytes, &gauge);
      } else {
        dex = parse_dex(*dex_bytes);
      }
      set_stage(record, Stage::Parse, timer.seconds(), "ok");
    } catch (const Error& e) {
      set_stage(record, Stage::Parse, timer.seconds(), e.name());
      return record;
    }
  }

  {
    StageTimer timer;
    try {
      InstrumentationReport ad_report;
      InstrumentationReport weave_report;
      if (options.adremove_enabled) {
        auto [next, report] = neutralize_ads(dex, options.ad_config);
        dex = std::move(next);
        ad_report = std::move(report);
      }
      if (options.weave_enabled) {
        auto [next, report] = weave_permissions(dex, options.weave_config);
        dex = std::move(next);
        weave_report = std::move(report);
      }
      if (budget && estimate_model_size(dex) > budget->ceiling_bytes()) {
        fail(ErrorKind::BudgetExceeded, "instrumented model exceeds the memory ceiling");
      }
      uint32_t succeeded = ad_report.n_try_neutralized + weave_report.n_wrapped;
      uint32_t skipped = ad_report.n_skipped() + weave_report.n_skipped();
      if (skipped > 0 && succeeded == 0) {
        // Nothing could be instrumented; surface the first refusal.
        const std::string& reason = !ad_report.skipped.empty()
                                        ? ad_report.skipped.front().reason
                                        : weave_report.skipped.front().reason;
        set_stage(record, Stage::Instrument, timer.seconds(), reason);
        return record;
      }
      if (artifacts) {
        artifacts->adremove_report = std::move(ad_report);
        artifacts->weave_report = std::move(weave_report);
      }
      set_stage(record, Stage::Instrument, timer.seconds(), "ok");
    } catch (const Error& e) {
      set_stage(record, Stage::Instrument, timer.seconds(), e.name());
      return record;
    }
  }

  Bytes new_dex;
  {
    StageTimer timer;
    try {
      new_dex = write_dex(dex);
      set_stage(record, Stage::Write, timer.seconds(), "ok");
    } catch (const Error& e) {
      set_stage(record, Stage::Write, timer.seconds(), e.name());
      return record;
    }
  }

  Bytes repacked;
  {
    StageTimer timer;
    try {
      repacked = repack(archive, new_dex);
      set_stage(record, Stage::Repack, timer.seconds(), "ok");
    } catch (const Error& e) {
      set_stage(record, Stage::Repack, timer.seconds(), e.name());
      return record;
    }
  }

  {
    StageTimer timer;
    try {
      if (!options.identity) fail(ErrorKind::CryptoFailure, "no signing identity configured");
      Bytes signed_apk = sign_apk(repacked, *options.identity);
      if (artifacts) artifacts->signed_apk = std::move(signed_apk);
      set_stage(record, Stage::Sign, timer.seconds(), "ok");
    } catch (const Error& e) {
      set_stage(record, Stage::Sign, timer.seconds(), e.name());
      return record;
    }
  }
  return record;
}

LinearFit fit_linear(const std::vector<std::pair<double, double>>& samples) {
  if (samples.size() < 2) {
    fail(ErrorKind::DegenerateSamples, "need at least two samples");
  }
  double x_mean = 0, y_mean = 0;
  for (const auto& [x, y] : samples) {
    x_mean += x;
    y_mean += y;
  }
  x_mean /= static_cast<double>(samples.size());
  y_mean /= static_cast<double>(samples.size());

  double sxx = 0, sxy = 0;
  for (const auto& [x, y] : samples) {
    sxx += (x - x_mean) * (x - x_mean);
    sxy += (x - x_mean) * (y - y_mean);
  }
  if (sxx == 0) fail(ErrorKind::DegenerateSamples, "all sample sizes are identical");

  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = y_mean - fit.slope * x_mean;
  if (samples.size() > 2) {
    double ssr = 0;
    for (const auto& [x, y] : samples) {
      double r = y - fit.predict(x);
      ssr += r * r;
    }
    fit.residual_stderr = std::sqrt(ssr / static_cast<double>(samples.size() - 2));
  }
  return fit;
}

namespace {

StageStats stats_of(std::vector<double> times, uint32_t ok_count, uint32_t total) {
  StageStats stats;
  stats.ok_count = ok_count;
  stats.total = total;
  if (times.empty()) return stats;
  stats.has_times = true;
  std::sort(times.begin(), times.end());
  stats.min_s = times.front();
  stats.max_s = times.back();
  double sum = 0;
  for (double t : times) sum += t;
  stats.avg_s = sum / static_cast<double>(times.size());
  size_t n = times.size();
  stats.median_s = n % 2 == 1 ? times[n / 2] : (times[n / 2 - 1] + times[n / 2]) / 2.0;
  return stats;
}

std::string format_seconds(double s, bool present) {
  if (!present) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", s);
  return buf;
}

std::string format_success(uint32_t ok, uint32_t total) {
  if (total == 0) return "0/0 (0%)";
  int percent = static_cast<int>(std::lround(100.0 * ok / total));
  std::ostringstream out;
  out << ok << "/" << total << " (" << percent << "%)";
  return out.str();
}

}  // namespace

BenchSummary summarize(const std::vector<BenchRecord>& records) {
  BenchSummary summary;
  for (Stage stage : kAllStages) {
    std::vector<double> times;
    uint32_t ok = 0;
    for (const BenchRecord& record : records) {
      const auto& result = record.stage(stage);
      if (result) times.push_back(result->seconds);
      if (result && result->ok()) ok++;
    }
    summary.per_stage[static_cast<size_t>(stage)] =
        stats_of(std::move(times), ok, static_cast<uint32_t>(records.size()));
  }
  std::vector<double> totals;
  uint32_t all_ok = 0;
  for (const BenchRecord& record : records) {
    if (record.all_ok()) {
      totals.push_back(record.total_seconds());
      all_ok++;
    }
  }
  summary.end_to_end = stats_of(std::move(totals), all_ok,
                                static_cast<uint32_t>(records.size()));
  return summary;
}

std::string BenchSummary::to_text() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-12s %12s %12s %12s %12s  %s\n", "Stage",
                "Min. Time (s)", "Avg. Time (s)", "Median (s)", "Max. Time (s)", "Apps");
  out << line;
  auto row = [&](const char* name, const StageStats& stats) {
    std::snprintf(line, sizeof(line), "%-12s %12s %12s %12s %12s  %s\n", name,
                  format_seconds(stats.min_s, stats.has_times).c_str(),
                  format_seconds(stats.avg_s, stats.has_times).c_str(),
                  format_seconds(stats.median_s, stats.has_times).c_str(),
                  format_seconds(stats.max_s, stats.has_times).c_str(),
                  format_success(stats.ok_count, stats.total).c_str());
    out << line;
  };
  for (Stage stage : kAllStages) {
    row(stage_name(stage), per_stage[static_cast<size_t>(stage)]);
  }
  row("all-stages", end_to_end);
  return out.str();
}

std::string BenchSummary::to_csv() const {
  std::ostringstream out;
  out << "stage,min_s,avg_s,median_s,max_s,ok,total\n";
  auto row = [&](const char* name, const StageStats& stats) {
    char line[160];
    std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f,%.6f,%u,%u\n", name, stats.min_s,
                  stats.avg_s, stats.median_s, stats.max_s, stats.ok_count, stats.total);
    out << line;
  };
  for (Stage stage : kAllStages) {
    row(stage_name(stage), per_stage[static_cast<size_t>(stage)]);
  }
  row("all-stages", end_to_end);
  return out.str();
}

std::string records_to_csv(const std::vector<BenchRecord>& records) {
  std::ostringstream out;
  out << "app,dex_size_kib,stage,seconds,outcome\n";
  for (const BenchRecord& record : records) {
    for (Stage stage : kAllStages) {
      const auto& result = record.stage(stage);
      if (!result) continue;
      char line[256];
      std::snprintf(line, sizeof(line), "%s,%.3f,%s,%.6f,%s\n", record.app.c_str(),
                    record.dex_size_kib, stage_name(stage), result->seconds,
                    result->outcome.c_str());
      out << line;
    }
  }
  return out.str();
}

Bytes generate_synthetic_dex(size_t target_bytes) {
  // Bytes per replicated method, measured once and corrected below.
  size_t per_method_guess = 60;
  size_t method_count = std::max<size_t>(1, target_bytes / per_method_guess);

  for (int attempt = 0; attempt < 6; attempt++) {
    DexFile dex;
    Interner interner(dex);
    interner.type("Ljava/lang/Object;");
    constexpr size_t kMethodsPerClass = 64;
    size_t class_count = (method_count + kMethodsPerClass - 1) / kMethodsPerClass;
    size_t emitted = 0;
    for (size_t c = 0; c < class_count; c++) {
      char class_name[32];
      std::snprintf(class_name, sizeof(class_name), "Lgen/C%05zu;", c);
      ClassDef class_def;
      class_def.type_index = interner.type(class_name);
      class_def.access_flags = kAccPublic;
      class_def.superclass_index = interner.type("Ljava/lang/Object;");
      for (size_t m = 0; m < kMethodsPerClass && emitted < method_count; m++, emitted++) {
        char method_name[32];
        std::snprintf(method_name, sizeof(method_name), "m%06zu", emitted);
        EncodedMethod method;
        method.method_index = interner.method(class_name, method_name, "I", {});
        method.access_flags = kAccPublic | kAccStatic;
        CodeItem code;
        code.registers_size = 2;
        code.ins_size = 0;
        code.outs_size = 0;
        code.insns.push_back(make_const16(0, static_cast<int16_t>(emitted & 0x7fff)));
        code.insns.push_back(make_const16(1, static_cast<int16_t>((emitted >> 4) & 0x7fff)));
        code.insns.push_back(make_move(Opcode::Move, 0, 1));
        code.insns.push_back(make_nop());
        code.insns.push_back(make_return(Opcode::Return, 0));
        method.code = std::move(code);
        class_def.direct_methods.push_back(std::move(method));
      }
      dex.class_defs.push_back(std::move(class_def));
    }
    normalize(dex);
    Bytes bytes = write_dex(dex);
    if (bytes.size() >= target_bytes) return bytes;
    // Undershot: rescale using the measured per-method cost.
    double per_method = static_cast<double>(bytes.size()) / static_cast<double>(method_count);
    method_count = static_cast<size_t>(static_cast<double>(target_bytes) / per_method * 1.02) + 8;
  }
  fail(ErrorKind::LayoutOverflow, "synthetic generator failed to reach the target size");
}

Bytes generate_synthetic_apk(size_t dex_target_bytes) {
  Archive archive;
  std::string manifest = "<manifest package=\"gen.app\"/>";
  archive.entries.push_back(
      {"AndroidManifest.xml", Bytes(manifest.begin(), manifest.end())});
  Bytes asset(2048);
  for (size_t i = 0; i < asset.size(); i++) asset[i] = static_cast<uint8_t>(i * 31 + 7);
  archive.entries.push_back({"assets/data.bin", std::move(asset)});
  return repack(archive, generate_synthetic_dex(dex_target_bytes));
}

}  // namespace dexweaver

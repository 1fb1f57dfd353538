#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "hfl/federation.hpp"
#include "hfl/latency.hpp"

namespace hfl {

inline constexpr const char* kCodeVersion = "0.1.0";

struct ClusterMetricsRow {
  int cluster_id = 0;
  std::string scope;  // "global_test" | "cluster_local_test"
  Scalar accuracy = 0.0;
  Scalar precision = 0.0;
  Scalar recall = 0.0;
  Scalar f1 = 0.0;
};

struct RunArtifacts {
  nlohmann::json config_echo;
  std::uint64_t seed = 0;
  const ModelSpec* spec = nullptr;
  const TrainingRun* run = nullptr;
  const FeatureMatrix* test = nullptr;
  std::vector<ClusterMetricsRow> cluster_metrics;
  TimingReport timing;
};

// Writes the experiment directory:
//   metrics_rounds.csv  confusion.csv  roc_class_<k>.csv  cluster_metrics.csv
//   timing.csv  timing.txt  run_manifest.json  round_log.txt  params_final.bin
// Re-running with the same config and seed reproduces every file byte for
// byte; measured wall-clock times are deliberately not persisted.
void emit_report(const std::string& out_dir, const RunArtifacts& artifacts);

// 17-significant-digit formatting shared by all report writers.
std::string format_scalar(Scalar v);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace hfl

#pragma once

#include <string>
#include <vector>

#include "hfl/config.hpp"
#include "hfl/report.hpp"

namespace hfl {

// Ready-to-train dataset: scaled train/test matrices plus the non-IID client
// partition. The CSV path fits imputation, encoding, and scaling strictly on
// the training rows and replays them frozen on the test rows.
struct PreparedData {
  FeatureMatrix train;
  FeatureMatrix test;
  PartitionPlan plan;
  Index width = 0;
  Index classes = 0;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

void write_prepared(const std::string& dir, const PreparedData& data);
PreparedData load_prepared(const std::string& dir);

// Analytical timing for the configured topology without touching any data:
// training rows split evenly over clients, test rows over clusters in
// proportion to their client counts, payloads of 64-bit model parameters.
TimingReport latency_from_config(const ExperimentConfig& cfg,
                                 bool standard_model = false);

struct TrainOutputs {
  PreparedData data;
  ModelSpec spec;
  TrainingRun run;
  TimingReport timing;
  std::vector<ClusterMetricsRow> cluster_metrics;
};

TrainOutputs train_experiment(const ExperimentConfig& cfg);

// Writes prepared caches, reports, parameters, and the manifest under
// cfg.out_dir. Deleting the directory and re-running reproduces every byte.
void write_experiment(const ExperimentConfig& cfg, const TrainOutputs& out);

}  // namespace hfl

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hfl/data.hpp"
#include "hfl/federation.hpp"
#include "hfl/latency.hpp"
#include "hfl/model.hpp"

namespace hfl {

struct SyntheticSpec {
  Index classes = 4;
  Index features = 20;
  Index rows = 2000;
  Scalar separation = 4.0;
};

struct CsvSpec {
  std::string path;
  DatasetSchema schema;
};

struct ClusterConfig {
  std::string hardware_name;
  Scalar cpu_ghz = 0.0;
  Scalar ram_gb = 0.0;
  int clients = 0;
  Scalar uplink_mbps = 12.5;
  std::optional<Scalar> train_rate;  // default: clock-scaled base rate
  std::optional<Scalar> infer_rate;
};

struct ModelConfig {
  Index conv_filters = 16;
  std::vector<Index> block_widths = {32, 32};
  Index kernel = 3;
  Scalar dropout = 0.1;
};

struct LatencyConfig {
  Scalar base_rate_samples_per_s = 200.0;
  Scalar base_clock_ghz = 1.2;
  ServerProfile server;
  AggTimeMode agg_time_mode = AggTimeMode::literal;
  PayloadMode payload_mode = PayloadMode::average;
};

// Fully resolved experiment description. Every run_manifest echoes one of
// these; re-running the echo reproduces the experiment byte for byte.
struct ExperimentConfig {
  std::uint64_t seed = 42;
  std::string out_dir = "runs/exp";
  bool use_synthetic = true;
  SyntheticSpec synthetic;
  std::optional<CsvSpec> csv;
  Scaling scaling = Scaling::zscore;
  Scalar split_fraction = 0.8;
  Scalar gamma = 0.6;
  std::vector<ClusterConfig> clusters;
  ModelConfig model;
  TrainingHyperparams train;
  LatencyConfig latency;

  static ExperimentConfig preset(const std::string& name);  // "desk" | "paper"
  // Overlays a JSON document on `base`; unknown keys are rejected.
  static ExperimentConfig from_json(const nlohmann::json& doc,
                                    ExperimentConfig base = preset("desk"));
  static ExperimentConfig load(const std::string& path,
                               ExperimentConfig base = preset("desk"));
  nlohmann::json to_json() const;

  void validate() const;
  Index num_clients() const;
  Index feature_width() const;
  Index num_classes() const;
  ClusterTopology topology() const;  // resolved rates, ids 0..N-1
  ModelSpec model_spec() const;
  ModelSpec standard_model_spec() const;  // ds blocks as standard conv
};

}  // namespace hfl

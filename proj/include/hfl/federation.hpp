#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hfl/data.hpp"
#include "hfl/latency.hpp"
#include "hfl/loss.hpp"
#include "hfl/metrics.hpp"
#include "hfl/model.hpp"
#include "hfl/optimizer.hpp"

namespace hfl {

struct ClusterInfo {
  int id = 0;
  HardwareProfile hardware;
  LinkProfile link;
  std::vector<int> clients;
};

// Clients grouped by hardware. Client ids are dense 0..N-1 so they index the
// partition plan directly.
struct ClusterTopology {
  std::vector<ClusterInfo> clusters;

  Index num_clients() const;
  int cluster_of(int client_id) const;
  void validate() const;
  // additionally checks ids cover 0..N-1 and the plan matches
  void validate_with(const PartitionPlan& plan, Index train_rows) const;
};

struct TrainingHyperparams {
  int rounds = 10;
  int epochs = 5;
  Index batch_size = 128;
  Scalar learning_rate = 1e-3;
  HybridLossConfig loss;
  OptimizerKind optimizer = OptimizerKind::adam;
  bool persist_optimizer = false;  // keep Adam moments across rounds
  AggTimeMode agg_time_mode = AggTimeMode::literal;
  PayloadMode payload_mode = PayloadMode::average;

  void validate() const;
};

struct ClientState {
  int id = 0;
  int cluster_id = 0;
  std::vector<Index> rows;  // indices into the training matrix
  ModelParameters params;
  OptimizerState opt;
  int epochs_run = 0;
};

struct RoundLog {
  struct ClientTrace {
    int client_id = 0;
    int cluster_id = 0;
    std::vector<Scalar> epoch_loss;
  };
  int round = 0;
  std::vector<ClientTrace> clients;
  std::vector<std::pair<int, std::uint64_t>> cluster_checksums;
  std::uint64_t global_checksum = 0;
  Scalar wall_clock_s = 0.0;      // measured; kept out of persisted reports
  Scalar simulated_round_s = 0.0; // analytical time-per-round
};

// Mini-batch optimization over the client's rows. Batch order, dropout, and
// Gumbel noise all derive from `seed`; returns the mean loss per epoch.
std::vector<Scalar> local_train(ClientState& client, const ModelSpec& spec,
                                const FeatureMatrix& train, int epochs,
                                Index batch_size, const HybridLossConfig& loss_cfg,
                                std::uint64_t seed);

// Size-weighted average: sum_i (sizes[i]/total) * models[i].
ModelParameters aggregate_weighted(const std::vector<const ModelParameters*>& models,
                                   const std::vector<Index>& sizes);
ModelParameters aggregate_intra_cluster(
    const std::vector<std::pair<const ModelParameters*, Index>>& members);
ModelParameters aggregate_inter_cluster(
    const std::vector<std::pair<const ModelParameters*, Index>>& clusters);

// Deterministic: the member with the smallest client id.
int select_cluster_head(const ClusterInfo& cluster);

struct RoundResult {
  ModelParameters params;  // w(t+1)
  RoundLog log;
  std::vector<ModelParameters> client_params;   // post-training, client order
  std::vector<ModelParameters> cluster_params;  // per-cluster aggregates
};

// One synchronous cycle: broadcast, local training on every client, weighted
// aggregation at each cluster head, weighted aggregation at the server.
// `client_optimizers`, when given, holds one state per client that survives
// across rounds; otherwise every client starts the round from a fresh state.
RoundResult run_round(const ModelSpec& spec, const ModelParameters& global,
                      const ClusterTopology& topology, const FeatureMatrix& train,
                      const PartitionPlan& plan, const TrainingHyperparams& hyper,
                      int round_index, std::uint64_t master_seed,
                      std::vector<OptimizerState>* client_optimizers = nullptr);

struct RoundEvaluation {
  ConfusionMatrix cm;
  MetricsSummary summary;
};

RoundEvaluation evaluate_model(const ModelSpec& spec, const ModelParameters& params,
                               const FeatureMatrix& test, Index num_classes);

// Chunked inference helper; returns {rows, num_classes} logits.
Tensor predict_logits(const ModelSpec& spec, const ModelParameters& params,
                      const FeatureMatrix& data, Index chunk = 256);

struct TrainingRun {
  ModelParameters final_params;
  std::vector<RoundLog> rounds;
  std::vector<RoundEvaluation> evaluations;      // per round, on test data
  std::vector<ModelParameters> final_cluster_params;
};

TrainingRun run_training(const ModelSpec& spec, const ClusterTopology& topology,
                         const FeatureMatrix& train, const FeatureMatrix& test,
                         const PartitionPlan& plan, const TrainingHyperparams& hyper,
                         std::uint64_t master_seed);

}  // namespace hfl

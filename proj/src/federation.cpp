#include "hfl/federation.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

namespace hfl {

Index ClusterTopology::num_clients() const {
  Index n = 0;
  for (const auto& c : clusters) n += static_cast<Index>(c.clients.size());
  return n;
}

int ClusterTopology::cluster_of(int client_id) const {
  for (const auto& c : clusters)
    for (int id : c.clients)
      if (id == client_id) return c.id;
  throw ProtocolError("client " + std::to_string(client_id) +
                      " is in no cluster");
}

void ClusterTopology::validate() const {
  if (clusters.empty()) throw ValidationError("topology has no clusters");
  std::vector<int> ids;
  for (const auto& c : clusters) {
    if (c.clients.empty())
      throw ValidationError("cluster " + std::to_string(c.id) + " is empty");
    c.hardware.validate();
    c.link.validate();
    ids.insert(ids.end(), c.clients.begin(), c.clients.end());
  }
  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 1; i < ids.size(); ++i)
    if (ids[i] == ids[i - 1])
      throw ValidationError("client " + std::to_string(ids[i]) +
                            " appears in more than one cluster");
}

void ClusterTopology::validate_with(const PartitionPlan& plan,
                                    Index train_rows) const {
  validate();
  const Index n = num_clients();
  if (n != plan.num_clients())
    throw ValidationError("topology has " + std::to_string(n) +
                          " clients, partition has " +
                          std::to_string(plan.num_clients()));
  for (const auto& c : clusters)
    for (int id : c.clients)
      if (id < 0 || id >= n)
        throw ValidationError("client id " + std::to_string(id) +
                              " outside 0.." + std::to_string(n - 1));
  plan.validate(train_rows);
  Index covered = 0;
  for (const auto& rows : plan.client_rows)
    covered += static_cast<Index>(rows.size());
  if (covered != train_rows)
    throw ValidationError("partition covers " + std::to_string(covered) +
                          " of " + std::to_string(train_rows) + " rows");
}

void TrainingHyperparams::validate() const {
  if (rounds < 0) throw ValidationError("rounds must be >= 0");
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (!(learning_rate >= 0.0))
    throw ValidationError("learning rate must be >= 0");
  loss.validate();
}

std::vector<Scalar> local_train(ClientState& client, const ModelSpec& spec,
                                const FeatureMatrix& train, int epochs,
                                Index batch_size, const HybridLossConfig& loss_cfg,
                                std::uint64_t seed) {
  if (client.rows.empty())
    throw ProtocolError("client " + std::to_string(client.id) +
                        " holds no training rows");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  loss_cfg.validate();

  const FeatureMatrix local = train.select(client.rows);
  const Index n = local.rows();
  const Index width = local.width();
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::vector<Scalar> trajectory;
  trajectory.reserve(epochs);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(seed, "batch-order", epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    Scalar epoch_loss = 0.0;
    Index batch_index = 0;
    for (Index start = 0; start < n; start += batch_size, ++batch_index) {
      const Index b = std::min(batch_size, n - start);
      Tensor xb({b, width});
      std::vector<Index> yb(b);
      for (Index i = 0; i < b; ++i) {
        const Index row = order[start + i];
        xb.values.segment(i * width, width) =
            local.X.values.segment(row * width, width);
        yb[i] = local.y[row];
      }
      const std::uint64_t batch_seed =
          derive_seed(seed, "batch", epoch, batch_index);
      ForwardTrace trace;
      Tensor logits = forward(spec, client.params, xb, /*training=*/true,
                              batch_seed, &trace);
      LossResult res = hybrid_loss(logits, yb, loss_cfg, batch_seed);
      ModelParameters grads =
          backward(spec, client.params, trace, res.dlogits);
      optimizer_step(client.params, grads, client.opt);
      epoch_loss += res.loss * static_cast<Scalar>(b);
    }
    trajectory.push_back(epoch_loss / static_cast<Scalar>(n));
  }
  client.epochs_run += epochs;
  return trajectory;
}

ModelParameters aggregate_weighted(
    const std::vector<const ModelParameters*>& models,
    const std::vector<Index>& sizes) {
  if (models.empty())
    throw ValidationError("aggregation needs >= 1 member");
  if (models.size() != sizes.size())
    throw StructuralError("model/size count mismatch");
  Index total = 0;
  for (Index s : sizes) {
    if (s <= 0) throw ValidationError("aggregation weight sizes must be > 0");
    total += s;
  }
  for (const auto* m : models)
    require_congruent(*models.front(), *m, "aggregation members");

  ModelParameters out = zeros_like(*models.front());
  out.round = models.front()->round;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const Scalar w = static_cast<Scalar>(sizes[i]) / static_cast<Scalar>(total);
    for (std::size_t e = 0; e < out.entries.size(); ++e) {
      out.entries[e].weights.values += w * models[i]->entries[e].weights.values;
      out.entries[e].biases.values += w * models[i]->entries[e].biases.values;
    }
  }
  return out;
}

namespace {

ModelParameters aggregate_pairs(
    const std::vector<std::pair<const ModelParameters*, Index>>& members) {
  std::vector<const ModelParameters*> models;
  std::vector<Index> sizes;
  models.reserve(members.size());
  sizes.reserve(members.size());
  for (const auto& [m, s] : members) {
    models.push_back(m);
    sizes.push_back(s);
  }
  return aggregate_weighted(models, sizes);
}

}  // namespace

ModelParameters aggregate_intra_cluster(
    const std::vector<std::pair<const ModelParameters*, Index>>& members) {
  return aggregate_pairs(members);
}

ModelParameters aggregate_inter_cluster(
    const std::vector<std::pair<const ModelParameters*, Index>>& clusters) {
  return aggregate_pairs(clusters);
}

int select_cluster_head(const ClusterInfo& cluster) {
  if (cluster.clients.empty())
    throw ValidationError("cluster " + std::to_string(cluster.id) +
                          " has no members to head");
  return *std::min_element(cluster.clients.begin(), cluster.clients.end());
}

RoundResult run_round(const ModelSpec& spec, const ModelParameters& global,
                      const ClusterTopology& topology, const FeatureMatrix& train,
                      const PartitionPlan& plan, const TrainingHyperparams& hyper,
                      int round_index, std::uint64_t master_seed,
                      std::vector<OptimizerState>* client_optimizers) {
  hyper.validate();
  topology.validate_with(plan, train.rows());
  const auto wall_start = std::chrono::steady_clock::now();

  RoundResult result;
  result.log.round = round_index;
  result.client_params.resize(plan.num_clients());

  std::vector<std::pair<const ModelParameters*, Index>> cluster_aggregates;
  std::vector<Index> cluster_sizes;
  std::vector<ClusterTiming> timings;

  for (const auto& cluster : topology.clusters) {
    // the head only coordinates; it trains like any other member
    select_cluster_head(cluster);
    std::vector<std::pair<const ModelParameters*, Index>> members;
    std::vector<Scalar> member_times;
    Index cluster_size = 0;

    for (int client_id : cluster.clients) {
      ClientState client;
      client.id = client_id;
      client.cluster_id = cluster.id;
      client.rows = plan.client_rows[client_id];
      client.params = global;  // broadcast w(t)
      client.params.round = static_cast<std::uint32_t>(round_index);
      if (client_optimizers) {
        client.opt = (*client_optimizers)[client_id];
        if (!congruent(client.opt.first_moment, client.params))
          client.opt.reset(client.params);
      } else {
        client.opt.kind = hyper.optimizer;
        client.opt.learning_rate = hyper.learning_rate;
        client.opt.reset(client.params);
      }

      const std::uint64_t client_seed = derive_seed(
          master_seed, "client-train", static_cast<std::uint64_t>(round_index),
          static_cast<std::uint64_t>(client_id));
      std::vector<Scalar> losses;
      try {
        losses = local_train(client, spec, train, hyper.epochs,
                             hyper.batch_size, hyper.loss, client_seed);
      } catch (const std::exception& e) {
        throw ProtocolError("round " + std::to_string(round_index) +
                            ", local training of client " +
                            std::to_string(client_id) + ": " + e.what());
      }
      result.log.clients.push_back({client_id, cluster.id, std::move(losses)});
      if (client_optimizers) (*client_optimizers)[client_id] = client.opt;

      const Index size = static_cast<Index>(client.rows.size());
      cluster_size += size;
      member_times.push_back(local_training_time(
          size, cluster.hardware.train_rate, hyper.epochs));
      result.client_params[client_id] = std::move(client.params);
      members.emplace_back(&result.client_params[client_id], size);
    }

    ModelParameters aggregated;
    try {
      aggregated = aggregate_intra_cluster(members);
    } catch (const std::exception& e) {
      throw ProtocolError("round " + std::to_string(round_index) +
                          ", intra-cluster aggregation of cluster " +
                          std::to_string(cluster.id) + ": " + e.what());
    }
    result.log.cluster_checksums.emplace_back(cluster.id, checksum(aggregated));
    result.cluster_params.push_back(std::move(aggregated));
    cluster_sizes.push_back(cluster_size);

    ClusterTiming t;
    t.cluster_id = cluster.id;
    t.t_local_s = *std::max_element(member_times.begin(), member_times.end());
    t.t_intra_s = intra_cluster_aggregation_time(
        member_times, static_cast<Index>(member_times.size()),
        hyper.agg_time_mode);
    std::vector<Scalar> payloads(cluster.clients.size(),
                                 model_payload_mbits(param_count(spec)));
    t.t_comm_s = cluster_communication_time(payloads, cluster.link.uplink_mbps,
                                            hyper.payload_mode);
    timings.push_back(t);
  }

  std::vector<std::pair<const ModelParameters*, Index>> cluster_pairs;
  for (std::size_t i = 0; i < result.cluster_params.size(); ++i)
    cluster_pairs.emplace_back(&result.cluster_params[i], cluster_sizes[i]);
  try {
    result.params = aggregate_inter_cluster(cluster_pairs);
  } catch (const std::exception& e) {
    throw ProtocolError("round " + std::to_string(round_index) +
                        ", inter-cluster aggregation: " + std::string(e.what()));
  }
  result.params.round = static_cast<std::uint32_t>(round_index + 1);
  result.log.global_checksum = checksum(result.params);
  result.log.simulated_round_s = time_per_round(timings);
  result.log.wall_clock_s =
      std::chrono::duration<Scalar>(std::chrono::steady_clock::now() -
                                    wall_start)
          .count();
  return result;
}

Tensor predict_logits(const ModelSpec& spec, const ModelParameters& params,
                      const FeatureMatrix& data, Index chunk) {
  const Index n = data.rows(), width = data.width();
  Tensor logits({std::max<Index>(n, 1), spec.num_classes});
  if (n == 0) throw ValidationError("cannot predict on an empty matrix");
  for (Index start = 0; start < n; start += chunk) {
    const Index b = std::min(chunk, n - start);
    Tensor xb({b, width});
    xb.values = data.X.values.segment(start * width, b * width);
    Tensor out = forward(spec, params, xb);
    logits.values.segment(start * spec.num_classes, b * spec.num_classes) =
        out.values;
  }
  return logits;
}

RoundEvaluation evaluate_model(const ModelSpec& spec,
                               const ModelParameters& params,
                               const FeatureMatrix& test, Index num_classes) {
  Tensor logits = predict_logits(spec, params, test);
  RoundEvaluation eval;
  eval.cm = confusion(test.y, argmax_predictions(logits), num_classes);
  eval.summary = metrics(eval.cm);
  return eval;
}

TrainingRun run_training(const ModelSpec& spec, const ClusterTopology& topology,
                         const FeatureMatrix& train, const FeatureMatrix& test,
                         const PartitionPlan& plan, const TrainingHyperparams& hyper,
                         std::uint64_t master_seed) {
  hyper.validate();
  if (hyper.rounds < 1) throw ValidationError("training needs >= 1 round");
  topology.validate_with(plan, train.rows());

  TrainingRun run;
  ModelParameters params =
      init_parameters(spec, derive_seed(master_seed, "global-init"));
  params.round = 0;

  std::vector<OptimizerState> persistent;
  if (hyper.persist_optimizer) {
    persistent.resize(plan.num_clients());
    for (auto& opt : persistent) {
      opt.kind = hyper.optimizer;
      opt.learning_rate = hyper.learning_rate;
      opt.reset(params);
    }
  }

  for (int t = 0; t < hyper.rounds; ++t) {
    RoundResult round =
        run_round(spec, params, topology, train, plan, hyper, t, master_seed,
                  hyper.persist_optimizer ? &persistent : nullptr);
    params = std::move(round.params);
    run.rounds.push_back(std::move(round.log));
    run.evaluations.push_back(
        evaluate_model(spec, params, test, spec.num_classes));
    if (t + 1 == hyper.rounds)
      run.final_cluster_params = std::move(round.cluster_params);
  }
  run.final_params = std::move(params);
  return run;
}

}  // namespace hfl

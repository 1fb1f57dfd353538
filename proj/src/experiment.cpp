#include "hfl/experiment.hpp"

#include <filesystem>
#include <fstream>

#include "hfl/parameters.hpp"

namespace hfl {

using nlohmann::json;

PreparedData prepare_data(const ExperimentConfig& cfg) {
  cfg.validate();
  PreparedData data;
  data.width = cfg.feature_width();
  data.classes = cfg.num_classes();

  if (cfg.use_synthetic) {
    FeatureMatrix all = generate_synthetic(cfg.synthetic.classes,
                                           cfg.synthetic.features,
                                           cfg.synthetic.rows,
                                           cfg.synthetic.separation, cfg.seed);
    auto [train_raw, test_raw] =
        split_train_test(all, data.classes, cfg.split_fraction, cfg.seed);
    data.train = fit_matrix_scaler(train_raw, cfg.scaling);
    data.test = apply_matrix_scaler(test_raw, *data.train.scaler);
  } else {
    RawTable table = load_csv(cfg.csv->path, cfg.csv->schema);
    auto y = map_labels(table, cfg.csv->schema);
    auto [train_idx, test_idx] = stratified_split_indices(
        y, data.classes, cfg.split_fraction, cfg.seed);
    RawTable train_table = select_rows(table, cfg.csv->schema, train_idx);
    RawTable test_table = select_rows(table, cfg.csv->schema, test_idx);
    data.train = preprocess(train_table, cfg.csv->schema, cfg.scaling);
    data.test =
        apply_preprocessor(test_table, cfg.csv->schema, *data.train.scaler);
  }

  data.plan = partition_non_iid(data.train, cfg.num_clients(), cfg.gamma,
                                derive_seed(cfg.seed, "train-partition"));
  return data;
}

namespace {

json scaler_to_json(const PreprocessorState& s) {
  json doc;
  doc["scaling"] = s.scaling == Scaling::minmax ? "minmax" : "zscore";
  json cols = json::array();
  for (const auto& c : s.columns)
    cols.push_back({{"impute", c.impute},
                    {"categories", c.categories},
                    {"a", c.a},
                    {"b", c.b}});
  doc["columns"] = std::move(cols);
  return doc;
}

void save_matrix(const std::string& path, const FeatureMatrix& m) {
  Tensor y({std::max<Index>(m.rows(), 1)});
  y.shape = {m.rows()};
  y.values = Vector(m.rows());
  for (Index i = 0; i < m.rows(); ++i)
    y.values[i] = static_cast<Scalar>(m.y[i]);
  save_tensors(path, {{"X", &m.X}, {"y", &y}});
}

FeatureMatrix load_matrix(const std::string& path) {
  auto tensors = load_tensors(path);
  FeatureMatrix m;
  for (auto& [name, t] : tensors) {
    if (name == "X") m.X = std::move(t);
    else if (name == "y") {
      m.y.resize(t.size());
      for (Index i = 0; i < t.size(); ++i)
        m.y[i] = static_cast<Index>(t.values[i]);
    } else {
      throw IoError(path + ": unexpected tensor '" + name + "'");
    }
  }
  if (m.X.rank() != 2 || static_cast<Index>(m.y.size()) != m.X.dim(0))
    throw IoError(path + ": malformed feature matrix cache");
  return m;
}

}  // namespace

void write_prepared(const std::string& dir, const PreparedData& data) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());

  save_matrix(dir + "/train.bin", data.train);
  save_matrix(dir + "/test.bin", data.test);

  json meta = {{"width", data.width}, {"classes", data.classes}};
  write_text_file(dir + "/meta.json", meta.dump(2) + "\n");
  if (data.train.scaler)
    write_text_file(dir + "/scaler.json",
                    scaler_to_json(*data.train.scaler).dump(2) + "\n");

  json partition;
  partition["gamma"] = data.plan.gamma;
  partition["seed"] = data.plan.seed;
  partition["clients"] = json::array();
  for (const auto& rows : data.plan.client_rows)
    partition["clients"].push_back(rows);
  write_text_file(dir + "/partition.json", partition.dump(2) + "\n");
}

PreparedData load_prepared(const std::string& dir) {
  PreparedData data;
  data.train = load_matrix(dir + "/train.bin");
  data.test = load_matrix(dir + "/test.bin");

  std::ifstream meta_f(dir + "/meta.json");
  if (!meta_f) throw IoError("cannot open " + dir + "/meta.json");
  json meta = json::parse(meta_f);
  data.width = meta.at("width").get<Index>();
  data.classes = meta.at("classes").get<Index>();

  std::ifstream part_f(dir + "/partition.json");
  if (!part_f) throw IoError("cannot open " + dir + "/partition.json");
  json partition = json::parse(part_f);
  data.plan.gamma = partition.at("gamma").get<Scalar>();
  data.plan.seed = partition.at("seed").get<std::uint64_t>();
  for (const auto& rows : partition.at("clients"))
    data.plan.client_rows.push_back(rows.get<std::vector<Index>>());
  data.plan.validate(data.train.rows());
  return data;
}

namespace {

// Largest-remainder apportionment of `total` into shares proportional to
// `weights`; shares sum exactly to total.
std::vector<Index> apportion(Index total, const std::vector<Index>& weights) {
  Index weight_sum = 0;
  for (Index w : weights) weight_sum += w;
  std::vector<Index> shares(weights.size(), 0);
  std::vector<std::pair<Scalar, std::size_t>> remainders;
  Index assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const Scalar exact = static_cast<Scalar>(total) *
                         static_cast<Scalar>(weights[i]) /
                         static_cast<Scalar>(weight_sum);
    shares[i] = static_cast<Index>(exact);
    assigned += shares[i];
    remainders.emplace_back(-(exact - static_cast<Scalar>(shares[i])), i);
  }
  std::sort(remainders.begin(), remainders.end());
  for (Index r = 0; r < total - assigned; ++r)
    shares[remainders[static_cast<std::size_t>(r) % remainders.size()].second] += 1;
  return shares;
}

std::vector<ClusterLoad> config_loads(const ExperimentConfig& cfg,
                                      const ClusterTopology& topo,
                                      const std::vector<Index>& client_samples,
                                      Index test_rows) {
  std::vector<Index> cluster_clients;
  for (const auto& c : topo.clusters)
    cluster_clients.push_back(static_cast<Index>(c.clients.size()));
  const std::vector<Index> test_share = apportion(test_rows, cluster_clients);

  std::vector<ClusterLoad> loads;
  for (std::size_t i = 0; i < topo.clusters.size(); ++i) {
    const auto& c = topo.clusters[i];
    ClusterLoad load;
    load.cluster_id = c.id;
    for (int id : c.clients) load.client_samples.push_back(client_samples[id]);
    load.train_rate = c.hardware.train_rate;
    load.infer_rate = c.hardware.infer_rate;
    load.uplink_mbps = c.link.uplink_mbps;
    load.test_inputs = test_share[i];
    load.test_payload_mbits = static_cast<Scalar>(test_share[i]) *
                              static_cast<Scalar>(cfg.feature_width()) * 64.0 /
                              1e6;
    loads.push_back(std::move(load));
  }
  return loads;
}

Index dataset_rows(const ExperimentConfig& cfg) {
  if (cfg.use_synthetic) return cfg.synthetic.rows;
  return load_csv(cfg.csv->path, cfg.csv->schema).rows;
}

}  // namespace

TimingReport latency_from_config(const ExperimentConfig& cfg,
                                 bool standard_model) {
  cfg.validate();
  const ClusterTopology topo = cfg.topology();
  const Index n = cfg.num_clients();
  const Index rows = dataset_rows(cfg);
  const Index train_rows = static_cast<Index>(
      std::llround(cfg.split_fraction * static_cast<Scalar>(rows)));
  const std::vector<Index> per_client =
      apportion(train_rows, std::vector<Index>(n, 1));
  const ModelSpec spec =
      standard_model ? cfg.standard_model_spec() : cfg.model_spec();
  return build_timing_report(
      config_loads(cfg, topo, per_client, rows - train_rows), cfg.train.epochs,
      param_count(spec), cfg.latency.server, cfg.latency.agg_time_mode,
      cfg.latency.payload_mode);
}

TrainOutputs train_experiment(const ExperimentConfig& cfg) {
  TrainOutputs out;
  out.data = prepare_data(cfg);
  out.spec = cfg.model_spec();
  const ClusterTopology topo = cfg.topology();

  out.run = run_training(out.spec, topo, out.data.train, out.data.test,
                         out.data.plan, cfg.train, cfg.seed);

  out.timing = build_timing_report(
      config_loads(cfg, topo, out.data.plan.client_sizes(),
                   out.data.test.rows()),
      cfg.train.epochs, param_count(out.spec), cfg.latency.server,
      cfg.latency.agg_time_mode, cfg.latency.payload_mode);

  // Final-round cluster models scored on the global test set and, when the
  // test set is large enough to partition, on per-cluster local test slices.
  std::vector<std::vector<Index>> local_rows(topo.clusters.size());
  bool have_local = true;
  try {
    PartitionPlan test_plan =
        partition_non_iid(out.data.test, cfg.num_clients(), cfg.gamma,
                          derive_seed(cfg.seed, "test-partition"));
    for (std::size_t i = 0; i < topo.clusters.size(); ++i) {
      for (int id : topo.clusters[i].clients) {
        const auto& rows = test_plan.client_rows[id];
        local_rows[i].insert(local_rows[i].end(), rows.begin(), rows.end());
      }
      std::sort(local_rows[i].begin(), local_rows[i].end());
    }
  } catch (const ValidationError&) {
    have_local = false;
  }

  for (std::size_t i = 0; i < out.run.final_cluster_params.size(); ++i) {
    const auto& w_c = out.run.final_cluster_params[i];
    const int cluster_id = topo.clusters[i].id;
    RoundEvaluation global_eval =
        evaluate_model(out.spec, w_c, out.data.test, out.data.classes);
    out.cluster_metrics.push_back(
        {cluster_id, "global_test", global_eval.summary.overall_accuracy,
         global_eval.summary.macro.precision, global_eval.summary.macro.recall,
         global_eval.summary.macro.f1});
    if (!have_local) continue;
    FeatureMatrix local = out.data.test.select(local_rows[i]);
    if (local.rows() == 0) continue;
    RoundEvaluation local_eval =
        evaluate_model(out.spec, w_c, local, out.data.classes);
    out.cluster_metrics.push_back(
        {cluster_id, "cluster_local_test",
         local_eval.summary.overall_accuracy,
         local_eval.summary.macro.precision, local_eval.summary.macro.recall,
         local_eval.summary.macro.f1});
  }
  return out;
}

void write_experiment(const ExperimentConfig& cfg, const TrainOutputs& out) {
  write_prepared(cfg.out_dir + "/prepared", out.data);
  RunArtifacts artifacts;
  artifacts.config_echo = cfg.to_json();
  artifacts.seed = cfg.seed;
  artifacts.spec = &out.spec;
  artifacts.run = &out.run;
  artifacts.test = &out.data.test;
  artifacts.cluster_metrics = out.cluster_metrics;
  artifacts.timing = out.timing;
  emit_report(cfg.out_dir, artifacts);
}

}  // namespace hfl

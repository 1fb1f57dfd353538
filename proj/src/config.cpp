#include "hfl/config.hpp"

#include <fstream>

namespace hfl {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!obj.is_object())
    throw ValidationError("config section '" + where + "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) { ok = true; break; }
    if (!ok)
      throw ValidationError("unknown config key '" + where + "." + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

Scaling parse_scaling(const std::string& s) {
  if (s == "minmax") return Scaling::minmax;
  if (s == "zscore") return Scaling::zscore;
  throw ValidationError("scaling must be 'minmax' or 'zscore', got '" + s + "'");
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw ValidationError("optimizer must be 'adam' or 'sgd', got '" + s + "'");
}

GumbelMode parse_gumbel_mode(const std::string& s) {
  if (s == "stochastic") return GumbelMode::stochastic;
  if (s == "deterministic") return GumbelMode::deterministic;
  throw ValidationError("gumbel_mode must be 'stochastic' or 'deterministic'");
}

AggTimeMode parse_agg_mode(const std::string& s) {
  if (s == "literal") return AggTimeMode::literal;
  if (s == "max") return AggTimeMode::max_only;
  throw ValidationError("aggregation_time must be 'literal' or 'max'");
}

PayloadMode parse_payload_mode(const std::string& s) {
  if (s == "average") return PayloadMode::average;
  if (s == "worst") return PayloadMode::worst_case;
  throw ValidationError("comm_payload must be 'average' or 'worst'");
}

DatasetSchema parse_schema(const json& obj) {
  check_keys(obj, {"path", "label_column", "classes", "columns"}, "dataset.csv");
  DatasetSchema schema;
  read(obj, "label_column", schema.label_column);
  if (obj.contains("classes"))
    schema.class_names = obj.at("classes").get<std::vector<std::string>>();
  if (obj.contains("columns")) {
    for (const auto& col : obj.at("columns")) {
      check_keys(col, {"name", "kind"}, "dataset.csv.columns[]");
      DatasetSchema::Column c;
      read(col, "name", c.name);
      std::string kind = "numeric";
      read(col, "kind", kind);
      if (kind == "numeric") c.kind = ColumnKind::numeric;
      else if (kind == "categorical") c.kind = ColumnKind::categorical;
      else throw ValidationError("column kind must be 'numeric' or 'categorical'");
      schema.features.push_back(std::move(c));
    }
  }
  return schema;
}

}  // namespace

ExperimentConfig ExperimentConfig::preset(const std::string& name) {
  ExperimentConfig cfg;
  // Pi-class cluster mix: 2 + 3 + 5 clients at 1.2/1.5/1.8 GHz
  cfg.clusters = {
      {"Raspberry Pi 3 Model B", 1.2, 1.0, 2, 12.5, {}, {}},
      {"Raspberry Pi 4 Model B", 1.5, 4.0, 3, 12.5, {}, {}},
      {"Raspberry Pi 400", 1.8, 8.0, 5, 12.5, {}, {}},
  };
  if (name == "desk") {
    cfg.train.rounds = 10;
    cfg.train.epochs = 5;
    cfg.out_dir = "runs/desk";
    return cfg;
  }
  if (name == "paper") {
    cfg.train.rounds = 10;
    cfg.train.epochs = 50;
    cfg.out_dir = "runs/paper";
    return cfg;
  }
  throw ValidationError("unknown preset '" + name + "' (use 'desk' or 'paper')");
}

ExperimentConfig ExperimentConfig::from_json(const json& doc,
                                             ExperimentConfig cfg) {
  check_keys(doc,
             {"seed", "out_dir", "dataset", "preprocess", "split", "partition",
              "topology", "model", "train", "latency"},
             "config");
  read(doc, "seed", cfg.seed);
  read(doc, "out_dir", cfg.out_dir);

  if (doc.contains("dataset")) {
    const auto& ds = doc.at("dataset");
    check_keys(ds, {"type", "synthetic", "csv"}, "dataset");
    std::string type = cfg.use_synthetic ? "synthetic" : "csv";
    read(ds, "type", type);
    if (type == "synthetic") cfg.use_synthetic = true;
    else if (type == "csv") cfg.use_synthetic = false;
    else throw ValidationError("dataset.type must be 'synthetic' or 'csv'");
    if (ds.contains("synthetic")) {
      const auto& sy = ds.at("synthetic");
      check_keys(sy, {"classes", "features", "rows", "separation"},
                 "dataset.synthetic");
      read(sy, "classes", cfg.synthetic.classes);
      read(sy, "features", cfg.synthetic.features);
      read(sy, "rows", cfg.synthetic.rows);
      read(sy, "separation", cfg.synthetic.separation);
    }
    if (ds.contains("csv")) {
      CsvSpec spec;
      spec.schema = parse_schema(ds.at("csv"));
      read(ds.at("csv"), "path", spec.path);
      cfg.csv = std::move(spec);
    }
  }

  if (doc.contains("preprocess")) {
    check_keys(doc.at("preprocess"), {"scaling"}, "preprocess");
    std::string s;
    read(doc.at("preprocess"), "scaling", s);
    if (!s.empty()) cfg.scaling = parse_scaling(s);
  }
  if (doc.contains("split")) {
    check_keys(doc.at("split"), {"fraction"}, "split");
    read(doc.at("split"), "fraction", cfg.split_fraction);
  }
  if (doc.contains("partition")) {
    check_keys(doc.at("partition"), {"gamma"}, "partition");
    read(doc.at("partition"), "gamma", cfg.gamma);
  }

  if (doc.contains("topology")) {
    check_keys(doc.at("topology"), {"clusters"}, "topology");
    if (doc.at("topology").contains("clusters")) {
      cfg.clusters.clear();
      for (const auto& c : doc.at("topology").at("clusters")) {
        check_keys(c,
                   {"name", "cpu_ghz", "ram_gb", "clients", "uplink_mbps",
                    "train_rate", "infer_rate"},
                   "topology.clusters[]");
        ClusterConfig cc;
        read(c, "name", cc.hardware_name);
        read(c, "cpu_ghz", cc.cpu_ghz);
        read(c, "ram_gb", cc.ram_gb);
        read(c, "clients", cc.clients);
        read(c, "uplink_mbps", cc.uplink_mbps);
        if (c.contains("train_rate")) cc.train_rate = c.at("train_rate").get<Scalar>();
        if (c.contains("infer_rate")) cc.infer_rate = c.at("infer_rate").get<Scalar>();
        cfg.clusters.push_back(std::move(cc));
      }
    }
  }

  if (doc.contains("model")) {
    const auto& m = doc.at("model");
    check_keys(m, {"conv_filters", "block_widths", "kernel", "dropout"}, "model");
    read(m, "conv_filters", cfg.model.conv_filters);
    if (m.contains("block_widths"))
      cfg.model.block_widths = m.at("block_widths").get<std::vector<Index>>();
    read(m, "kernel", cfg.model.kernel);
    read(m, "dropout", cfg.model.dropout);
  }

  if (doc.contains("train")) {
    const auto& t = doc.at("train");
    check_keys(t,
               {"rounds", "epochs", "batch_size", "learning_rate", "alpha",
                "temperature", "optimizer", "gumbel_mode"},
               "train");
    read(t, "rounds", cfg.train.rounds);
    read(t, "epochs", cfg.train.epochs);
    read(t, "batch_size", cfg.train.batch_size);
    read(t, "learning_rate", cfg.train.learning_rate);
    read(t, "alpha", cfg.train.loss.alpha);
    read(t, "temperature", cfg.train.loss.temperature);
    if (t.contains("optimizer"))
      cfg.train.optimizer = parse_optimizer(t.at("optimizer").get<std::string>());
    if (t.contains("gumbel_mode"))
      cfg.train.loss.mode = parse_gumbel_mode(t.at("gumbel_mode").get<std::string>());
  }

  if (doc.contains("latency")) {
    const auto& l = doc.at("latency");
    check_keys(l,
               {"base_rate_samples_per_s", "base_clock_ghz",
                "server_bandwidth_mbps", "server_params_per_s",
                "aggregation_time", "comm_payload"},
               "latency");
    read(l, "base_rate_samples_per_s", cfg.latency.base_rate_samples_per_s);
    read(l, "base_clock_ghz", cfg.latency.base_clock_ghz);
    read(l, "server_bandwidth_mbps", cfg.latency.server.bandwidth_mbps);
    read(l, "server_params_per_s", cfg.latency.server.params_per_second);
    if (l.contains("aggregation_time"))
      cfg.latency.agg_time_mode =
          parse_agg_mode(l.at("aggregation_time").get<std::string>());
    if (l.contains("comm_payload"))
      cfg.latency.payload_mode =
          parse_payload_mode(l.at("comm_payload").get<std::string>());
  }

  cfg.train.agg_time_mode = cfg.latency.agg_time_mode;
  cfg.train.payload_mode = cfg.latency.payload_mode;
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path,
                                        ExperimentConfig base) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open config file " + path);
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path + ": " + e.what());
  }
  return from_json(doc, std::move(base));
}

json ExperimentConfig::to_json() const {
  json doc;
  doc["seed"] = seed;
  doc["out_dir"] = out_dir;
  doc["dataset"]["type"] = use_synthetic ? "synthetic" : "csv";
  doc["dataset"]["synthetic"] = {{"classes", synthetic.classes},
                                 {"features", synthetic.features},
                                 {"rows", synthetic.rows},
                                 {"separation", synthetic.separation}};
  if (csv) {
    json cols = json::array();
    for (const auto& c : csv->schema.features)
      cols.push_back({{"name", c.name},
                      {"kind", c.kind == ColumnKind::numeric ? "numeric"
                                                             : "categorical"}});
    doc["dataset"]["csv"] = {{"path", csv->path},
                             {"label_column", csv->schema.label_column},
                             {"classes", csv->schema.class_names},
                             {"columns", cols}};
  }
  doc["preprocess"]["scaling"] = scaling == Scaling::minmax ? "minmax" : "zscore";
  doc["split"]["fraction"] = split_fraction;
  doc["partition"]["gamma"] = gamma;
  json cl = json::array();
  for (const auto& c : clusters) {
    json e = {{"name", c.hardware_name}, {"cpu_ghz", c.cpu_ghz},
              {"ram_gb", c.ram_gb},     {"clients", c.clients},
              {"uplink_mbps", c.uplink_mbps}};
    if (c.train_rate) e["train_rate"] = *c.train_rate;
    if (c.infer_rate) e["infer_rate"] = *c.infer_rate;
    cl.push_back(std::move(e));
  }
  doc["topology"]["clusters"] = std::move(cl);
  doc["model"] = {{"conv_filters", model.conv_filters},
                  {"block_widths", model.block_widths},
                  {"kernel", model.kernel},
                  {"dropout", model.dropout}};
  doc["train"] = {
      {"rounds", train.rounds},
      {"epochs", train.epochs},
      {"batch_size", train.batch_size},
      {"learning_rate", train.learning_rate},
      {"alpha", train.loss.alpha},
      {"temperature", train.loss.temperature},
      {"optimizer", train.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
      {"gumbel_mode", train.loss.mode == GumbelMode::stochastic
                          ? "stochastic"
                          : "deterministic"}};
  doc["latency"] = {
      {"base_rate_samples_per_s", latency.base_rate_samples_per_s},
      {"base_clock_ghz", latency.base_clock_ghz},
      {"server_bandwidth_mbps", latency.server.bandwidth_mbps},
      {"server_params_per_s", latency.server.params_per_second},
      {"aggregation_time",
       latency.agg_time_mode == AggTimeMode::literal ? "literal" : "max"},
      {"comm_payload",
       latency.payload_mode == PayloadMode::average ? "average" : "worst"}};
  return doc;
}

void ExperimentConfig::validate() const {
  if (out_dir.empty()) throw ValidationError("out_dir must be set");
  if (clusters.empty()) throw ValidationError("topology needs >= 1 cluster");
  for (const auto& c : clusters) {
    if (c.clients < 1)
      throw ValidationError("cluster '" + c.hardware_name +
                            "' needs >= 1 client");
    if (!(c.cpu_ghz > 0.0) && !c.train_rate)
      throw ValidationError("cluster '" + c.hardware_name +
                            "' needs cpu_ghz or an explicit train_rate");
    if (!(c.uplink_mbps > 0.0))
      throw ValidationError("cluster uplink bandwidth must be > 0");
  }
  if (use_synthetic) {
    if (synthetic.classes < 2 || synthetic.features < 1 || synthetic.rows < 1)
      throw ValidationError("synthetic spec needs classes >= 2, features >= 1, rows >= 1");
    if (synthetic.separation < 0.0)
      throw ValidationError("synthetic separation must be >= 0");
  } else {
    if (!csv) throw ValidationError("dataset.type is 'csv' but no csv block given");
    if (csv->path.empty()) throw ValidationError("dataset.csv.path must be set");
    csv->schema.validate();
  }
  if (!(split_fraction > 0.0 && split_fraction < 1.0))
    throw ValidationError("split fraction must lie in (0,1)");
  if (!(gamma > 0.0)) throw ValidationError("partition gamma must be > 0");
  if (model.conv_filters < 1 || model.kernel < 1 || model.kernel % 2 == 0)
    throw ValidationError("model needs conv_filters >= 1 and an odd kernel");
  if (model.dropout < 0.0 || model.dropout >= 1.0)
    throw ValidationError("model dropout must lie in [0,1)");
  for (Index w : model.block_widths)
    if (w < 1) throw ValidationError("block widths must be positive");
  train.validate();
  latency.server.validate();
  if (!(latency.base_rate_samples_per_s > 0.0) ||
      !(latency.base_clock_ghz > 0.0))
    throw ValidationError("latency base rate and base clock must be > 0");
}

Index ExperimentConfig::num_clients() const {
  Index n = 0;
  for (const auto& c : clusters) n += c.clients;
  return n;
}

Index ExperimentConfig::feature_width() const {
  return use_synthetic ? synthetic.features
                       : static_cast<Index>(csv->schema.features.size());
}

Index ExperimentConfig::num_classes() const {
  return use_synthetic ? synthetic.classes : csv->schema.num_classes();
}

ClusterTopology ExperimentConfig::topology() const {
  ClusterTopology topo;
  int next_client = 0;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const auto& c = clusters[i];
    ClusterInfo info;
    info.id = static_cast<int>(i);
    info.hardware.name = c.hardware_name;
    info.hardware.cpu_ghz = c.cpu_ghz;
    info.hardware.ram_gb = c.ram_gb;
    info.hardware.train_rate =
        c.train_rate ? *c.train_rate
                     : clock_scaled_rate(c.cpu_ghz,
                                         latency.base_rate_samples_per_s,
                                         latency.base_clock_ghz);
    info.hardware.infer_rate =
        c.infer_rate ? *c.infer_rate
                     : clock_scaled_rate(c.cpu_ghz,
                                         latency.base_rate_samples_per_s,
                                         latency.base_clock_ghz);
    info.link.uplink_mbps = c.uplink_mbps;
    for (int k = 0; k < c.clients; ++k) info.clients.push_back(next_client++);
    topo.clusters.push_back(std::move(info));
  }
  topo.validate();
  return topo;
}

ModelSpec ExperimentConfig::model_spec() const {
  return default_classifier_spec(feature_width(), num_classes(), model.dropout,
                                 model.conv_filters, model.block_widths,
                                 model.kernel);
}

ModelSpec ExperimentConfig::standard_model_spec() const {
  return standard_conv_classifier_spec(feature_width(), num_classes(),
                                       model.dropout, model.conv_filters,
                                       model.block_widths, model.kernel);
}

}  // namespace hfl

#include "hfl/latency.hpp"

#include <algorithm>
#include <sstream>

namespace hfl {

void HardwareProfile::validate() const {
  if (!(train_rate > 0.0) || !(infer_rate > 0.0))
    throw ValidationError("hardware profile '" + name +
                          "': rates must be > 0");
}

void LinkProfile::validate() const {
  if (!(uplink_mbps > 0.0))
    throw ValidationError("link bandwidth must be > 0");
  if (payload_mbits < 0.0) throw ValidationError("payload must be >= 0");
}

void ServerProfile::validate() const {
  if (!(bandwidth_mbps > 0.0))
    throw ValidationError("server bandwidth must be > 0");
  if (!(params_per_second > 0.0))
    throw ValidationError("server processing speed must be > 0");
}

Scalar clock_scaled_rate(Scalar cpu_ghz, Scalar base_rate, Scalar base_ghz) {
  if (!(cpu_ghz > 0.0) || !(base_rate > 0.0) || !(base_ghz > 0.0))
    throw ValidationError("clock-scaled rate needs positive inputs");
  return base_rate * cpu_ghz / base_ghz;
}

Scalar model_payload_mbits(std::int64_t parameters) {
  if (parameters < 0) throw ValidationError("negative parameter count");
  return static_cast<Scalar>(parameters) * 64.0 / 1e6;
}

Scalar local_training_time(Index samples, Scalar rate, int epochs) {
  if (!(rate > 0.0)) throw ValidationError("training rate must be > 0");
  if (samples < 0) throw ValidationError("negative sample count");
  if (epochs < 0) throw ValidationError("negative epoch count");
  return static_cast<Scalar>(samples) / rate * static_cast<Scalar>(epochs);
}

Scalar intra_cluster_aggregation_time(const std::vector<Scalar>& client_times,
                                      Index n_clients, AggTimeMode mode) {
  if (client_times.empty())
    throw ValidationError("intra-cluster aggregation needs >= 1 client time");
  if (n_clients != static_cast<Index>(client_times.size()))
    throw ValidationError("client count " + std::to_string(n_clients) +
                          " does not match " +
                          std::to_string(client_times.size()) + " times");
  const Scalar barrier =
      *std::max_element(client_times.begin(), client_times.end());
  return mode == AggTimeMode::literal
             ? static_cast<Scalar>(n_clients) * barrier
             : barrier;
}

Scalar communication_time(Scalar payload_mbits, Scalar bandwidth_mbps) {
  if (!(bandwidth_mbps > 0.0))
    throw ValidationError("bandwidth must be > 0");
  if (payload_mbits < 0.0) throw ValidationError("payload must be >= 0");
  return payload_mbits / bandwidth_mbps;
}

Scalar cluster_communication_time(const std::vector<Scalar>& client_payloads,
                                  Scalar bandwidth_mbps, PayloadMode mode) {
  if (client_payloads.empty())
    throw ValidationError("cluster communication needs >= 1 payload");
  Scalar payload;
  if (mode == PayloadMode::worst_case) {
    payload = *std::max_element(client_payloads.begin(), client_payloads.end());
  } else {
    payload = 0.0;
    for (Scalar p : client_payloads) payload += p;
    payload /= static_cast<Scalar>(client_payloads.size());
  }
  return communication_time(payload, bandwidth_mbps);
}

ServerTime server_time(Scalar total_payload_mbits, Scalar server_bandwidth_mbps,
                       std::int64_t parameters, Scalar params_per_second) {
  if (!(server_bandwidth_mbps > 0.0))
    throw ValidationError("server bandwidth must be > 0");
  if (!(params_per_second > 0.0))
    throw ValidationError("server processing speed must be > 0");
  if (total_payload_mbits < 0.0)
    throw ValidationError("total payload must be >= 0");
  if (parameters < 0) throw ValidationError("negative parameter count");
  ServerTime t;
  t.t_agg = total_payload_mbits / server_bandwidth_mbps;
  t.t_update = static_cast<Scalar>(parameters) / params_per_second;
  t.total = t.t_agg + t.t_update;
  return t;
}

Scalar total_training_time(const std::vector<ClusterTiming>& clusters,
                           Scalar server_total_s) {
  if (clusters.empty())
    throw ValidationError("training time needs >= 1 cluster");
  Scalar worst = 0.0;
  for (const auto& c : clusters) worst = std::max(worst, c.sum());
  return worst + server_total_s;
}

Scalar time_per_round(const std::vector<ClusterTiming>& clusters) {
  if (clusters.empty())
    throw ValidationError("time per round needs >= 1 cluster");
  Scalar total = 0.0;
  for (const auto& c : clusters) total += c.sum();
  return total;
}

Scalar testing_latency_ms(const std::vector<TestLoad>& clusters) {
  Scalar total_s = 0.0;
  for (const auto& c : clusters) {
    if (!(c.infer_rate > 0.0))
      throw ValidationError("inference rate must be > 0");
    total_s += static_cast<Scalar>(c.inputs) / c.infer_rate +
               communication_time(c.payload_mbits, c.bandwidth_mbps);
  }
  return total_s * 1000.0;
}

TimingReport build_timing_report(const std::vector<ClusterLoad>& loads,
                                 int epochs, std::int64_t model_parameters,
                                 const ServerProfile& server,
                                 AggTimeMode agg_mode, PayloadMode payload_mode) {
  if (loads.empty()) throw ValidationError("timing report needs >= 1 cluster");
  server.validate();

  TimingReport report;
  const Scalar upload = model_payload_mbits(model_parameters);
  Scalar total_payload = 0.0;
  std::vector<TestLoad> test_loads;

  for (const auto& load : loads) {
    if (load.client_samples.empty())
      throw ValidationError("cluster " + std::to_string(load.cluster_id) +
                            " has no clients");
    std::vector<Scalar> times;
    times.reserve(load.client_samples.size());
    for (Index samples : load.client_samples)
      times.push_back(local_training_time(samples, load.train_rate, epochs));

    ClusterTiming t;
    t.cluster_id = load.cluster_id;
    t.t_local_s = *std::max_element(times.begin(), times.end());
    t.t_intra_s = intra_cluster_aggregation_time(
        times, static_cast<Index>(times.size()), agg_mode);
    // every member uploads the same model, so average == worst case here
    std::vector<Scalar> payloads(load.client_samples.size(), upload);
    t.t_comm_s =
        cluster_communication_time(payloads, load.uplink_mbps, payload_mode);
    report.clusters.push_back(t);

    total_payload += upload;  // one aggregated model per cluster head
    test_loads.push_back({load.test_inputs, load.infer_rate,
                          load.test_payload_mbits, load.uplink_mbps});
  }

  const ServerTime st = server_time(total_payload, server.bandwidth_mbps,
                                    model_parameters, server.params_per_second);
  report.t_server_agg_s = st.t_agg;
  report.t_server_update_s = st.t_update;
  report.total_training_s = total_training_time(report.clusters, st.total);
  report.testing_latency_ms = testing_latency_ms(test_loads);
  report.time_per_round_s = time_per_round(report.clusters);
  return report;
}

namespace {

std::string num(Scalar v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string timing_report_text(const TimingReport& report) {
  std::ostringstream os;
  for (const auto& c : report.clusters) {
    os << "cluster_id: " << c.cluster_id << "\n";
    os << "t_local_s: " << num(c.t_local_s) << "\n";
    os << "t_intra_s: " << num(c.t_intra_s) << "\n";
    os << "t_comm_s: " << num(c.t_comm_s) << "\n";
  }
  os << "t_server_agg_s: " << num(report.t_server_agg_s) << "\n";
  os << "t_server_update_s: " << num(report.t_server_update_s) << "\n";
  os << "total_training_s: " << num(report.total_training_s) << "\n";
  os << "testing_latency_ms: " << num(report.testing_latency_ms) << "\n";
  os << "time_per_round_s: " << num(report.time_per_round_s) << "\n";
  return os.str();
}

std::string timing_report_csv(const TimingReport& report) {
  std::ostringstream os;
  os << "cluster_id,t_local_s,t_intra_s,t_comm_s,t_server_agg_s,"
        "t_server_update_s,total_training_s,testing_latency_ms,"
        "time_per_round_s\n";
  for (const auto& c : report.clusters) {
    os << c.cluster_id << "," << num(c.t_local_s) << "," << num(c.t_intra_s)
       << "," << num(c.t_comm_s) << "," << num(report.t_server_agg_s) << ","
       << num(report.t_server_update_s) << "," << num(report.total_training_s)
       << "," << num(report.testing_latency_ms) << ","
       << num(report.time_per_round_s) << "\n";
  }
  return os.str();
}

}  // namespace hfl

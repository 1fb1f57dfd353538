#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hfl/common.hpp"
#include "hfl/tensor.hpp"

namespace hfl {

// Per-device capability figures. Rates are in samples/second; the server
// speed is in parameters/second.
struct HardwareProfile {
  std::string name;
  Scalar cpu_ghz = 0.0;
  Scalar ram_gb = 0.0;
  Scalar train_rate = 0.0;
  Scalar infer_rate = 0.0;

  void validate() const;
};

struct LinkProfile {
  Scalar uplink_mbps = 12.5;   // megabits/second
  Scalar payload_mbits = 0.0;  // model or test-input payload, megabits

  void validate() const;
};

struct ServerProfile {
  Scalar bandwidth_mbps = 12.5;
  Scalar params_per_second = 1e6;

  void validate() const;
};

// Intra-cluster aggregation cost: taken literally as N_clients * max(times),
// or max(times) alone for sensitivity analysis.
enum class AggTimeMode { literal, max_only };

// Per-cluster upload cost across member payloads.
enum class PayloadMode { average, worst_case };

// Rates scale with CPU clock from a configurable base (default 200 samples/s
// at 1.2 GHz).
Scalar clock_scaled_rate(Scalar cpu_ghz, Scalar base_rate = 200.0,
                         Scalar base_ghz = 1.2);

// Model size on the wire: parameters * 64 bits, in megabits.
Scalar model_payload_mbits(std::int64_t parameters);

Scalar local_training_time(Index samples, Scalar rate, int epochs = 1);
Scalar intra_cluster_aggregation_time(const std::vector<Scalar>& client_times,
                                      Index n_clients,
                                      AggTimeMode mode = AggTimeMode::literal);
Scalar communication_time(Scalar payload_mbits, Scalar bandwidth_mbps);
Scalar cluster_communication_time(const std::vector<Scalar>& client_payloads,
                                  Scalar bandwidth_mbps, PayloadMode mode);

struct ServerTime {
  Scalar t_agg = 0.0;     // total payload / server bandwidth
  Scalar t_update = 0.0;  // parameters / server speed
  Scalar total = 0.0;
};
ServerTime server_time(Scalar total_payload_mbits, Scalar server_bandwidth_mbps,
                       std::int64_t parameters, Scalar params_per_second);

struct ClusterTiming {
  int cluster_id = 0;
  Scalar t_local_s = 0.0;  // straggler: max over member clients
  Scalar t_intra_s = 0.0;
  Scalar t_comm_s = 0.0;

  Scalar sum() const { return t_local_s + t_intra_s + t_comm_s; }
};

// max over clusters of (local + intra + comm), plus server time
Scalar total_training_time(const std::vector<ClusterTiming>& clusters,
                           Scalar server_total_s);
// sum over clusters of (local + intra + comm)
Scalar time_per_round(const std::vector<ClusterTiming>& clusters);

struct TestLoad {
  Index inputs = 0;
  Scalar infer_rate = 0.0;
  Scalar payload_mbits = 0.0;
  Scalar bandwidth_mbps = 0.0;
};
// sum over clusters of (inputs/rate + payload/bandwidth), in milliseconds
Scalar testing_latency_ms(const std::vector<TestLoad>& clusters);

struct TimingReport {
  std::vector<ClusterTiming> clusters;
  Scalar t_server_agg_s = 0.0;
  Scalar t_server_update_s = 0.0;
  Scalar total_training_s = 0.0;
  Scalar testing_latency_ms = 0.0;
  Scalar time_per_round_s = 0.0;
};

// Everything the analytical model needs about one cluster.
struct ClusterLoad {
  int cluster_id = 0;
  std::vector<Index> client_samples;  // |D_ic| per member
  Scalar train_rate = 0.0;
  Scalar infer_rate = 0.0;
  Scalar uplink_mbps = 12.5;
  Index test_inputs = 0;
  Scalar test_payload_mbits = 0.0;
};

TimingReport build_timing_report(const std::vector<ClusterLoad>& loads,
                                 int epochs, std::int64_t model_parameters,
                                 const ServerProfile& server,
                                 AggTimeMode agg_mode = AggTimeMode::literal,
                                 PayloadMode payload_mode = PayloadMode::average);

// Structured text document with stable key names, and a flat CSV row layout.
std::string timing_report_text(const TimingReport& report);
std::string timing_report_csv(const TimingReport& report);

}  // namespace hfl

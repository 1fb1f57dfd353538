#include "hfl/report.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hfl/loss.hpp"
#include "hfl/parameters.hpp"

namespace hfl {

std::string format_scalar(Scalar v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << content;
  if (!f) throw IoError("short write to " + path);
}

namespace {

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

std::string metrics_rounds_csv(const TrainingRun& run) {
  std::ostringstream os;
  os << "round,overall_accuracy,macro_precision,macro_recall,macro_f1,"
        "macro_tpr,macro_fpr\n";
  for (std::size_t t = 0; t < run.evaluations.size(); ++t) {
    const auto& m = run.evaluations[t].summary;
    os << t << "," << format_scalar(m.overall_accuracy) << ","
       << format_scalar(m.macro.precision) << ","
       << format_scalar(m.macro.recall) << "," << format_scalar(m.macro.f1)
       << "," << format_scalar(m.macro.tpr) << ","
       << format_scalar(m.macro.fpr) << "\n";
  }
  return os.str();
}

std::string confusion_csv(const TrainingRun& run) {
  std::ostringstream os;
  os << "round,true_class,predicted_class,count\n";
  for (std::size_t t = 0; t < run.evaluations.size(); ++t) {
    const auto& cm = run.evaluations[t].cm;
    for (Index i = 0; i < cm.num_classes; ++i)
      for (Index j = 0; j < cm.num_classes; ++j)
        os << t << "," << i << "," << j << "," << cm.at(i, j) << "\n";
  }
  return os.str();
}

std::string roc_csv(const RocCurve& curve) {
  std::ostringstream os;
  os << "threshold,fpr,tpr,auc\n";
  for (const auto& p : curve.points)
    os << format_scalar(p.threshold) << "," << format_scalar(p.fpr) << ","
       << format_scalar(p.tpr) << "," << format_scalar(curve.auc) << "\n";
  return os.str();
}

std::string cluster_metrics_csv(const std::vector<ClusterMetricsRow>& rows) {
  std::ostringstream os;
  os << "cluster_id,scope,accuracy,macro_precision,macro_recall,macro_f1\n";
  for (const auto& r : rows)
    os << r.cluster_id << "," << r.scope << "," << format_scalar(r.accuracy)
       << "," << format_scalar(r.precision) << "," << format_scalar(r.recall)
       << "," << format_scalar(r.f1) << "\n";
  return os.str();
}

std::string round_log_text(const TrainingRun& run) {
  std::ostringstream os;
  for (const auto& log : run.rounds) {
    for (const auto& c : log.clients)
      for (std::size_t e = 0; e < c.epoch_loss.size(); ++e)
        os << "round=" << log.round << " cluster_id=" << c.cluster_id
           << " client_id=" << c.client_id << " epoch=" << e
           << " loss=" << format_scalar(c.epoch_loss[e]) << "\n";
    for (const auto& [cluster_id, sum] : log.cluster_checksums)
      os << "round=" << log.round << " cluster_id=" << cluster_id
         << " checksum=" << hex64(sum) << "\n";
    os << "round=" << log.round << " checksum=" << hex64(log.global_checksum)
       << " simulated_round_s=" << format_scalar(log.simulated_round_s) << "\n";
  }
  return os.str();
}

}  // namespace

void emit_report(const std::string& out_dir, const RunArtifacts& a) {
  if (!a.run || !a.spec || !a.test)
    throw ProtocolError("emit_report needs a completed run");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  const auto path = [&](const std::string& name) { return out_dir + "/" + name; };

  write_text_file(path("metrics_rounds.csv"), metrics_rounds_csv(*a.run));
  write_text_file(path("confusion.csv"), confusion_csv(*a.run));
  write_text_file(path("cluster_metrics.csv"),
                  cluster_metrics_csv(a.cluster_metrics));
  write_text_file(path("timing.csv"), timing_report_csv(a.timing));
  write_text_file(path("timing.txt"), timing_report_text(a.timing));
  write_text_file(path("round_log.txt"), round_log_text(*a.run));

  // final-round one-vs-rest ROC per class from softmax scores
  Tensor scores =
      softmax(predict_logits(*a.spec, a.run->final_params, *a.test));
  const Index K = a.spec->num_classes;
  for (Index k = 0; k < K; ++k) {
    std::vector<Scalar> class_scores(a.test->rows());
    for (Index i = 0; i < a.test->rows(); ++i)
      class_scores[i] = scores.values[i * K + k];
    RocCurve curve = roc(class_scores, a.test->y, k);
    write_text_file(path("roc_class_" + std::to_string(k) + ".csv"),
                    roc_csv(curve));
  }

  save_parameters(path("params_final.bin"), a.run->final_params);

  nlohmann::json manifest;
  manifest["config"] = a.config_echo;
  manifest["seed"] = a.seed;
  manifest["code_version"] = kCodeVersion;
  manifest["rounds_completed"] = a.run->rounds.size();
  manifest["final_checksum"] = hex64(checksum(a.run->final_params));
  write_text_file(path("run_manifest.json"), manifest.dump(2) + "\n");
}

}  // namespace hfl

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hfl/experiment.hpp"
#include "hfl/gradcheck.hpp"
#include "hfl/parameters.hpp"
#include "hfl/report.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string preset = "desk";
  std::string out_override;
  std::uint64_t seed = 0;
  bool seed_set = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config (JSON)");
    cmd->add_option("--preset", preset, "base preset: desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--out", out_override, "output directory override");
    cmd->add_option("--seed", seed, "master seed override")
        ->each([this](const std::string&) { seed_set = true; });
  }

  hfl::ExperimentConfig resolve() const {
    hfl::ExperimentConfig cfg = hfl::ExperimentConfig::preset(preset);
    if (!config_path.empty())
      cfg = hfl::ExperimentConfig::load(config_path, std::move(cfg));
    if (seed_set) cfg.seed = seed;
    if (!out_override.empty()) cfg.out_dir = out_override;
    cfg.validate();
    return cfg;
  }
};

void print_summary(const hfl::ExperimentConfig& cfg,
                   const hfl::TrainOutputs& out) {
  const auto& last = out.run.evaluations.back().summary;
  std::cout << "final_overall_accuracy=" << hfl::format_scalar(last.overall_accuracy)
            << "\n";
  std::cout << "final_macro_f1=" << hfl::format_scalar(last.macro.f1) << "\n";
  std::cout << "total_training_s="
            << hfl::format_scalar(out.timing.total_training_s) << "\n";
  std::cout << "testing_latency_ms="
            << hfl::format_scalar(out.timing.testing_latency_ms) << "\n";
  std::cout << "time_per_round_s="
            << hfl::format_scalar(out.timing.time_per_round_s) << "\n";
  std::cout << "out_dir=" << cfg.out_dir << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"cluster-based hierarchical federated learning simulator"};
  app.require_subcommand(1);

  CommonOpts prepare_opts, train_opts, evaluate_opts, latency_opts;
  std::string evaluate_params;
  bool latency_compare = false;
  std::uint64_t gradcheck_seed = 1;
  bool gradcheck_fault = false;

  auto* prepare = app.add_subcommand(
      "prepare", "ingest or generate the dataset, split, scale, partition");
  prepare_opts.attach(prepare);

  auto* train = app.add_subcommand(
      "train", "run federated training and write the experiment reports");
  train_opts.attach(train);

  auto* evaluate = app.add_subcommand(
      "evaluate", "score saved parameters on the prepared test split");
  evaluate_opts.attach(evaluate);
  evaluate->add_option("--params", evaluate_params,
                       "parameter file (default <out>/params_final.bin)");

  auto* latency = app.add_subcommand(
      "latency", "analytical timing for the configured topology, no training");
  latency_opts.attach(latency);
  latency->add_flag("--compare", latency_compare,
                    "also report the standard-convolution model");

  auto* gradcheck = app.add_subcommand(
      "gradcheck", "finite-difference check of every layer kind and the loss");
  gradcheck->add_option("--seed", gradcheck_seed, "check seed");
  gradcheck->add_flag("--inject-fault", gradcheck_fault,
                      "corrupt one gradient to exercise the failure path")
      ->group("");  // hidden test hook

  CLI11_PARSE(app, argc, argv);

  if (prepare->parsed()) {
    const auto cfg = prepare_opts.resolve();
    const auto data = hfl::prepare_data(cfg);
    hfl::write_prepared(cfg.out_dir + "/prepared", data);
    std::cout << "rows_train=" << data.train.rows() << "\n";
    std::cout << "rows_test=" << data.test.rows() << "\n";
    std::cout << "clients=" << data.plan.num_clients() << "\n";
    std::cout << "out_dir=" << cfg.out_dir << "\n";
    return 0;
  }

  if (train->parsed()) {
    const auto cfg = train_opts.resolve();
    const auto out = hfl::train_experiment(cfg);
    hfl::write_experiment(cfg, out);
    print_summary(cfg, out);
    return 0;
  }

  if (evaluate->parsed()) {
    const auto cfg = evaluate_opts.resolve();
    const auto data = hfl::load_prepared(cfg.out_dir + "/prepared");
    const std::string params_path = evaluate_params.empty()
                                        ? cfg.out_dir + "/params_final.bin"
                                        : evaluate_params;
    const auto params = hfl::load_parameters(params_path);
    const auto spec = cfg.model_spec();
    const auto eval =
        hfl::evaluate_model(spec, params, data.test, data.classes);
    std::cout << "overall_accuracy="
              << hfl::format_scalar(eval.summary.overall_accuracy) << "\n";
    for (std::size_t k = 0; k < eval.summary.per_class.size(); ++k) {
      const auto& m = eval.summary.per_class[k];
      std::cout << "class=" << k << " precision=" << hfl::format_scalar(m.precision)
                << " recall=" << hfl::format_scalar(m.recall)
                << " f1=" << hfl::format_scalar(m.f1)
                << " fpr=" << hfl::format_scalar(m.fpr) << "\n";
    }
    std::cout << "macro_f1=" << hfl::format_scalar(eval.summary.macro.f1) << "\n";
    return 0;
  }

  if (latency->parsed()) {
    const auto cfg = latency_opts.resolve();
    const auto report = hfl::latency_from_config(cfg, false);
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw hfl::IoError("cannot create " + cfg.out_dir);
    hfl::write_text_file(cfg.out_dir + "/timing.txt",
                         hfl::timing_report_text(report));
    hfl::write_text_file(cfg.out_dir + "/timing.csv",
                         hfl::timing_report_csv(report));
    std::cout << "model=lightweight params=" << param_count(cfg.model_spec())
              << "\n";
    std::cout << hfl::timing_report_text(report);
    if (latency_compare) {
      const auto heavy = hfl::latency_from_config(cfg, true);
      std::cout << "model=standard_conv params="
                << param_count(cfg.standard_model_spec()) << "\n";
      std::cout << hfl::timing_report_text(heavy);
    }
    return 0;
  }

  if (gradcheck->parsed()) {
    const auto results =
        hfl::standard_gradient_checks(gradcheck_seed, 3, 1e-3, gradcheck_fault);
    bool all_pass = true;
    for (const auto& r : results) {
      std::cout << (r.pass ? "PASS" : "FAIL") << " " << r.name
                << " max_rel_err=" << hfl::format_scalar(r.max_rel_err) << "\n";
      all_pass = all_pass && r.pass;
    }
    if (!all_pass) {
      std::cerr << "gradient check failed\n";
      return 2;
    }
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const hfl::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const hfl::IngestionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

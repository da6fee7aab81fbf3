// Command-line front end for the dispatching toolkit: heuristic rollouts,
// REINFORCE training, evaluation, imitation, policy transfer, state ablation
// and manifest-driven reruns.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmd/experiment.hpp"

namespace {

dmd::ExperimentSpec base_spec(const std::string& config_path, const std::string& objective,
                              const std::string& out_dir, uint64_t seed) {
  dmd::ExperimentSpec spec;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw dmd::ParseError("cannot open config file: " + config_path);
    nlohmann::json j;
    in >> j;
    if (j.contains("shop")) {
      spec = dmd::experiment_from_json(j);
    } else {
      spec.shop = dmd::shop_config_from_json(j);
    }
  }
  if (!objective.empty()) spec.shop.objective = dmd::parse_objective(objective);
  if (!out_dir.empty()) spec.out_dir = out_dir;
  spec.train_seeds.insert(spec.train_seeds.begin(), seed);
  return spec;
}

void print_metrics(const dmd::MetricsRow& m) {
  std::cout << "total_discounted_reward=" << dmd::fmt_double(m.total_discounted_reward)
            << " avg_lateness=" << dmd::fmt_double(m.avg_lateness)
            << " avg_tardiness=" << dmd::fmt_double(m.avg_tardiness)
            << " jobs_completed=" << m.jobs_completed << " jobs_dropped=" << m.jobs_dropped
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shop-floor dispatching: policy-gradient training and policy transfer"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", objective, dispatcher = "edf", checkpoint,
              manifest_path, spec_path;
  uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "shop config or experiment spec (JSON)");
    cmd->add_option("--seed", seed, "base seed");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--objective", objective, "lateness|tardiness");
  };

  auto* simulate = app.add_subcommand("simulate", "roll out a heuristic dispatcher");
  add_common(simulate);
  simulate->add_option("--dispatcher", dispatcher, "edf|lst|random");

  auto* train = app.add_subcommand("train", "train a dispatcher with REINFORCE");
  add_common(train);
  int iters = -1, batch = -1;
  double lr = -1.0;
  std::string mask;
  train->add_option("--iters", iters, "training iterations");
  train->add_option("--batch", batch, "trajectories per batch");
  train->add_option("--lr", lr, "learning rate");
  train->add_option("--mask", mask, "state variant: proc+slack|proc|slack");

  auto* evaluate = app.add_subcommand("evaluate", "evaluate a dispatcher on held-out seeds");
  add_common(evaluate);
  evaluate->add_option("--dispatcher", dispatcher, "edf|lst|random or 'policy'");
  evaluate->add_option("--checkpoint", checkpoint, "policy checkpoint (JSON)");

  auto* imitate = app.add_subcommand("imitate", "train the neural imitation hyper-heuristic");
  add_common(imitate);
  std::string teacher = "edf";
  int samples = 2000;
  imitate->add_option("--teacher", teacher, "edf|lst|random");
  imitate->add_option("--samples", samples, "labeled decisions to collect");

  auto* transfer = app.add_subcommand("transfer", "run the policy-transfer pipeline");
  add_common(transfer);

  auto* ablate = app.add_subcommand("ablate", "state-representation ablation");
  add_common(ablate);

  auto* report = app.add_subcommand("report", "re-run an experiment from its manifest");
  report->add_option("--manifest", manifest_path, "manifest.json of a previous run")->required();
  report->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      auto spec = base_spec(config_path, objective, out_dir, seed);
      dmd::Dispatcher d{dmd::parse_heuristic(dispatcher), dmd::StateMask::ProcSlack};
      auto result = dmd::rollout(d, spec.shop, seed);
      std::filesystem::create_directories(spec.out_dir);
      dmd::write_trajectory_log_csv(
          (std::filesystem::path(spec.out_dir) / "trajectory.csv").string(), result.log);
      print_metrics(result.metrics);
    } else if (train->parsed()) {
      auto spec = base_spec(config_path, objective, out_dir, seed);
      spec.dispatcher = "reinforce";
      if (iters > 0) spec.reinforce.iterations = iters;
      if (batch > 0) spec.reinforce.batch = batch;
      if (lr >= 0.0) spec.reinforce.lr = lr;
      if (!mask.empty()) spec.reinforce.mask = dmd::parse_state_mask(mask);
      auto out = dmd::run_experiment(spec);
      print_metrics(out.metrics);
    } else if (evaluate->parsed()) {
      auto spec = base_spec(config_path, objective, out_dir, seed);
      dmd::Dispatcher d;
      if (!checkpoint.empty() || dispatcher == "policy") {
        if (checkpoint.empty())
          throw dmd::ParseError("evaluate: --checkpoint required for a policy dispatcher");
        d.impl = dmd::load_policy(checkpoint);
      } else {
        d.impl = dmd::parse_heuristic(dispatcher);
      }
      auto metrics = dmd::evaluate_policy(d, spec.shop, dmd::eval_seeds(spec));
      std::filesystem::create_directories(spec.out_dir);
      dmd::write_metrics_csv((std::filesystem::path(spec.out_dir) / "metrics.csv").string(),
                             dispatcher, metrics);
      print_metrics(metrics);
    } else if (imitate->parsed()) {
      auto spec = base_spec(config_path, objective, out_dir, seed);
      spec.dispatcher = "imitation";
      spec.imitation_teacher = dmd::parse_heuristic(teacher);
      spec.imitation_samples = samples;
      auto out = dmd::run_experiment(spec);
      print_metrics(out.metrics);
    } else if (transfer->parsed()) {
      auto spec = base_spec(config_path, objective, out_dir, seed);
      spec.dispatcher = "transfer";
      auto out = dmd::run_experiment(spec);
      print_metrics(out.metrics);
    } else if (ablate->parsed()) {
      auto spec = base_spec(config_path, objective, out_dir, seed);
      auto curves = dmd::ablate_state(spec, {"proc+slack", "proc", "slack"});
      std::filesystem::create_directories(spec.out_dir);
      std::vector<std::pair<std::string, const dmd::TrainReport*>> refs;
      for (const auto& [name, rep] : curves) refs.emplace_back(name, &rep);
      dmd::write_learning_curve_csv(
          (std::filesystem::path(spec.out_dir) / "learning_curve.csv").string(), refs);
      std::cout << "wrote " << spec.out_dir << "/learning_curve.csv\n";
    } else if (report->parsed()) {
      auto spec = dmd::load_spec_file(manifest_path);
      if (!out_dir.empty()) spec.out_dir = out_dir;
      auto out = dmd::run_experiment(spec);
      print_metrics(out.metrics);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

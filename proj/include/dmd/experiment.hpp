#pragma once

// Reproducible experiment harness: experiment specs, seeded evaluation of any
// dispatcher, metric computation, and CSV/JSON reporting.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmd/config_io.hpp"
#include "dmd/heuristics.hpp"
#include "dmd/policy.hpp"
#include "dmd/reinforce.hpp"
#include "dmd/sim.hpp"
#include "dmd/state_codec.hpp"
#include "dmd/transfer.hpp"

namespace dmd {

// shortest round-trippable decimal form, locale-independent
inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct MetricsRow {
  double total_discounted_reward = 0.0;  // drop penalties included
  double avg_lateness = 0.0;             // completed jobs only
  double avg_tardiness = 0.0;
  double jobs_completed = 0.0;
  double jobs_dropped = 0.0;
};

// A dispatcher is either a rule or a trained policy evaluated greedily.
struct Dispatcher {
  std::variant<HeuristicKind, PolicyParams> impl;
  StateMask mask = StateMask::ProcSlack;
};

struct TrajectoryLogRow {
  long t = 0;
  int action = 0;
  double reward = 0.0;
  bool dropped = false;
};

struct RolloutResult {
  MetricsRow metrics;
  std::vector<TrajectoryLogRow> log;
};

inline RolloutResult rollout(const Dispatcher& dispatcher, const ShopConfig& cfg,
                             uint64_t seed) {
  ShopEnv env(cfg, seed);
  Rng rule_rng(seed, "dispatch-rule");
  Rng dummy(0);
  RolloutResult out;
  std::vector<double> rewards;
  for (int t = 0; t < cfg.traj_len; ++t) {
    const long dropped_before = env.state().dropped;
    std::vector<int> actions;
    while (true) {
      Action a;
      if (std::holds_alternative<HeuristicKind>(dispatcher.impl)) {
        a = heuristic_action(std::get<HeuristicKind>(dispatcher.impl), env, rule_rng);
      } else {
        StateMatrix s = encode_state(env.state(), cfg);
        apply_state_mask(s, cfg, dispatcher.mask);
        a = select_action(forward(std::get<PolicyParams>(dispatcher.impl), s),
                          SelectMode::Greedy, dummy);
      }
      actions.push_back(a.v);
      if (env.apply_action(a).ends_phase()) break;
    }
    const double r = env.advance_time();
    rewards.push_back(r);
    const bool dropped = env.state().dropped > dropped_before;
    for (size_t i = 0; i < actions.size(); ++i) {
      const bool last = i + 1 == actions.size();
      out.log.push_back({t, actions[i], last ? r : 0.0, last && dropped});
    }
  }
  out.metrics.total_discounted_reward = discounted_returns(rewards, cfg.gamma)[0];
  Trajectory acct;
  finish_accounting(acct, env.state());
  out.metrics.avg_lateness = acct.avg_lateness;
  out.metrics.avg_tardiness = acct.avg_tardiness;
  out.metrics.jobs_completed = static_cast<double>(acct.completed);
  out.metrics.jobs_dropped = static_cast<double>(acct.dropped);
  return out;
}

// Mean metrics over one rollout per held-out seed.
inline MetricsRow evaluate_policy(const Dispatcher& dispatcher, const ShopConfig& cfg,
                                  const std::vector<uint64_t>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("evaluate_policy: no evaluation seeds");
  MetricsRow mean;
  for (uint64_t seed : seeds) {
    const MetricsRow m = rollout(dispatcher, cfg, seed).metrics;
    mean.total_discounted_reward += m.total_discounted_reward;
    mean.avg_lateness += m.avg_lateness;
    mean.avg_tardiness += m.avg_tardiness;
    mean.jobs_completed += m.jobs_completed;
    mean.jobs_dropped += m.jobs_dropped;
  }
  const double k = static_cast<double>(seeds.size());
  mean.total_discounted_reward /= k;
  mean.avg_lateness /= k;
  mean.avg_tardiness /= k;
  mean.jobs_completed /= k;
  mean.jobs_dropped /= k;
  return mean;
}

struct ExperimentSpec {
  ShopConfig shop;
  std::string dispatcher = "edf";  // edf | lst | random | imitation | reinforce | transfer
  int eval_trajectories = 10;
  std::vector<uint64_t> train_seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<uint64_t> test_seeds = {100, 101, 102, 103, 104, 105, 106, 107, 108, 109};
  std::string out_dir = "out";

  ReinforceOptions reinforce;
  HeuristicKind imitation_teacher = HeuristicKind::EDF;
  int imitation_samples = 2000;
  ImitationOptions imitation;

  std::optional<ShopConfig> transfer_target;
  TransferOptions transfer;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline nlohmann::json to_json(const ReinforceOptions& o) {
  std::string mask = o.mask == StateMask::ProcSlack ? "proc+slack"
                     : o.mask == StateMask::ProcOnly ? "proc"
                                                     : "slack";
  return {{"iterations", o.iterations}, {"batch", o.batch},   {"lr", o.lr},
          {"mask", mask},               {"hidden", o.hidden}, {"checkpoint_every", o.checkpoint_every}};
}

inline ReinforceOptions reinforce_from_json(const nlohmann::json& j) {
  ReinforceOptions o;
  if (j.contains("iterations")) o.iterations = j.at("iterations").get<int>();
  if (j.contains("batch")) o.batch = j.at("batch").get<int>();
  if (j.contains("lr")) o.lr = j.at("lr").get<double>();
  if (j.contains("mask")) o.mask = parse_state_mask(j.at("mask").get<std::string>());
  if (j.contains("hidden")) o.hidden = j.at("hidden").get<std::vector<int>>();
  if (j.contains("checkpoint_every")) o.checkpoint_every = j.at("checkpoint_every").get<int>();
  return o;
}

inline nlohmann::json to_json(const AlignmentConfig& c) {
  return {{"mu", c.mu},
          {"k", c.k},
          {"d_share", c.d_share},
          {"source_samples", c.source_samples},
          {"target_samples", c.target_samples}};
}

inline AlignmentConfig alignment_from_json(const nlohmann::json& j) {
  AlignmentConfig c;
  if (j.contains("mu")) c.mu = j.at("mu").get<double>();
  if (j.contains("k")) c.k = j.at("k").get<int>();
  if (j.contains("d_share")) c.d_share = j.at("d_share").get<int>();
  if (j.contains("source_samples")) c.source_samples = j.at("source_samples").get<int>();
  if (j.contains("target_samples")) c.target_samples = j.at("target_samples").get<int>();
  return c;
}

inline nlohmann::json to_json(const ExperimentSpec& s) {
  nlohmann::json j;
  j["shop"] = to_json(s.shop);
  j["dispatcher"] = s.dispatcher;
  j["eval_trajectories"] = s.eval_trajectories;
  j["train_seeds"] = s.train_seeds;
  j["test_seeds"] = s.test_seeds;
  j["out_dir"] = s.out_dir;
  j["reinforce"] = to_json(s.reinforce);
  j["imitation"] = {{"teacher", s.imitation_teacher == HeuristicKind::EDF   ? "edf"
                                : s.imitation_teacher == HeuristicKind::LST ? "lst"
                                                                            : "random"},
                    {"samples", s.imitation_samples},
                    {"epochs", s.imitation.epochs},
                    {"lr", s.imitation.lr}};
  if (s.transfer_target.has_value()) {
    j["transfer"] = {{"target_shop", to_json(*s.transfer_target)},
                     {"alignment", to_json(s.transfer.alignment)},
                     {"source_episodes", s.transfer.source_episodes},
                     {"force_identity_map", s.transfer.force_identity_map},
                     {"fine_tune", to_json(s.transfer.fine_tune)},
                     {"recovery_epochs", s.transfer.recovery.epochs},
                     {"recovery_lr", s.transfer.recovery.lr}};
  }
  return j;
}

inline ExperimentSpec experiment_from_json(const nlohmann::json& j) {
  ExperimentSpec s;
  try {
    if (j.contains("shop")) s.shop = shop_config_from_json(j.at("shop"));
    if (j.contains("dispatcher")) s.dispatcher = j.at("dispatcher").get<std::string>();
    if (s.dispatcher != "edf" && s.dispatcher != "lst" && s.dispatcher != "random" &&
        s.dispatcher != "imitation" && s.dispatcher != "reinforce" && s.dispatcher != "transfer")
      throw ParseError("field 'dispatcher': unknown kind '" + s.dispatcher + "'");
    if (j.contains("eval_trajectories"))
      s.eval_trajectories = j.at("eval_trajectories").get<int>();
    if (j.contains("train_seeds")) s.train_seeds = j.at("train_seeds").get<std::vector<uint64_t>>();
    if (j.contains("test_seeds")) s.test_seeds = j.at("test_seeds").get<std::vector<uint64_t>>();
    if (j.contains("out_dir")) s.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("reinforce")) s.reinforce = reinforce_from_json(j.at("reinforce"));
    if (j.contains("imitation")) {
      const auto& ji = j.at("imitation");
      if (ji.contains("teacher"))
        s.imitation_teacher = parse_heuristic(ji.at("teacher").get<std::string>());
      if (ji.contains("samples")) s.imitation_samples = ji.at("samples").get<int>();
      if (ji.contains("epochs")) s.imitation.epochs = ji.at("epochs").get<int>();
      if (ji.contains("lr")) s.imitation.lr = ji.at("lr").get<double>();
    }
    if (j.contains("transfer")) {
      const auto& jt = j.at("transfer");
      if (!jt.contains("target_shop"))
        throw ParseError("field 'transfer.target_shop': required for transfer experiments");
      s.transfer_target = shop_config_from_json(jt.at("target_shop"));
      if (jt.contains("alignment")) s.transfer.alignment = alignment_from_json(jt.at("alignment"));
      if (jt.contains("source_episodes"))
        s.transfer.source_episodes = jt.at("source_episodes").get<int>();
      if (jt.contains("force_identity_map"))
        s.transfer.force_identity_map = jt.at("force_identity_map").get<bool>();
      if (jt.contains("fine_tune")) s.transfer.fine_tune = reinforce_from_json(jt.at("fine_tune"));
      if (jt.contains("recovery_epochs"))
        s.transfer.recovery.epochs = jt.at("recovery_epochs").get<int>();
      if (jt.contains("recovery_lr")) s.transfer.recovery.lr = jt.at("recovery_lr").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed experiment spec: ") + e.what());
  }
  if (s.train_seeds.empty()) {
    s.train_seeds.resize(10);
    std::iota(s.train_seeds.begin(), s.train_seeds.end(), 0);
  }
  if (s.test_seeds.empty()) {
    s.test_seeds.resize(10);
    std::iota(s.test_seeds.begin(), s.test_seeds.end(), 100);
  }
  if (s.eval_trajectories < 1) throw ParseError("field 'eval_trajectories': must be >= 1");
  if (s.dispatcher == "transfer" && !s.transfer_target.has_value())
    throw ParseError("field 'transfer.target_shop': required for transfer experiments");
  return s;
}

inline std::vector<uint64_t> eval_seeds(const ExperimentSpec& spec) {
  std::vector<uint64_t> seeds = spec.test_seeds;
  if (static_cast<int>(seeds.size()) > spec.eval_trajectories)
    seeds.resize(spec.eval_trajectories);
  while (static_cast<int>(seeds.size()) < spec.eval_trajectories)
    seeds.push_back(seeds.back() + 1);
  return seeds;
}

inline uint64_t config_hash(const nlohmann::json& j) {
  return hash_name(j.dump());  // FNV-1a over the canonical dump
}

inline void write_metrics_csv(const std::string& path, const std::string& dispatcher,
                              const MetricsRow& m) {
  std::ofstream out(path);
  out << "dispatcher,total_discounted_reward,avg_lateness,avg_tardiness,jobs_completed,jobs_dropped\n";
  out << dispatcher << ',' << fmt_double(m.total_discounted_reward) << ','
      << fmt_double(m.avg_lateness) << ',' << fmt_double(m.avg_tardiness) << ','
      << fmt_double(m.jobs_completed) << ',' << fmt_double(m.jobs_dropped) << '\n';
}

inline void write_learning_curve_csv(const std::string& path,
                                     const std::vector<std::pair<std::string, const TrainReport*>>&
                                         curves) {
  std::ofstream out(path);
  out << "curve,iteration,mean_discounted_reward,mean_lateness,mean_tardiness,loss\n";
  for (const auto& [name, report] : curves) {
    for (const auto& row : report->rows) {
      out << name << ',' << row.iteration << ',' << fmt_double(row.mean_discounted_reward) << ','
          << fmt_double(row.mean_lateness) << ',' << fmt_double(row.mean_tardiness) << ','
          << fmt_double(row.loss) << '\n';
    }
  }
}

inline void write_trajectory_log_csv(const std::string& path,
                                     const std::vector<TrajectoryLogRow>& log) {
  std::ofstream out(path);
  out << "t,action,reward,dropped_flag\n";
  for (const auto& row : log)
    out << row.t << ',' << row.action << ',' << fmt_double(row.reward) << ','
        << (row.dropped ? 1 : 0) << '\n';
}

inline constexpr const char* kArtifactVersion = "1.0.0";

struct ExperimentOutputs {
  MetricsRow metrics;
  std::filesystem::path dir;
};

// Trains (when the dispatcher needs it), evaluates on the held-out seeds, and
// writes metrics.csv, learning_curve.csv and a manifest that pins everything
// needed to reproduce the run byte-for-byte.
inline ExperimentOutputs run_experiment(const ExperimentSpec& spec) {
  std::filesystem::create_directories(spec.out_dir);
  const uint64_t base_seed = spec.train_seeds.front();

  Dispatcher dispatcher;
  std::vector<std::pair<std::string, const TrainReport*>> curves;
  TrainReport train_report;
  TransferResult transfer_result;

  if (spec.dispatcher == "edf" || spec.dispatcher == "lst" || spec.dispatcher == "random") {
    dispatcher.impl = parse_heuristic(spec.dispatcher);
  } else if (spec.dispatcher == "imitation") {
    dispatcher.impl = train_imitation(spec.imitation_teacher, spec.shop, spec.imitation_samples,
                                      base_seed, spec.imitation);
  } else if (spec.dispatcher == "reinforce") {
    auto [params, report] = train_reinforce(spec.shop, spec.reinforce, base_seed);
    dispatcher.impl = std::move(params);
    dispatcher.mask = spec.reinforce.mask;
    train_report = std::move(report);
    curves.emplace_back("train", &train_report);
    save_policy(std::get<PolicyParams>(dispatcher.impl),
                (std::filesystem::path(spec.out_dir) / "policy.json").string());
  } else if (spec.dispatcher == "transfer") {
    if (!spec.transfer_target.has_value())
      throw ParseError("transfer experiment requires transfer.target_shop");
    auto [source_params, source_report] = train_reinforce(spec.shop, spec.reinforce, base_seed);
    transfer_result = transfer_pipeline(source_params, spec.shop, *spec.transfer_target,
                                        spec.transfer, base_seed);
    dispatcher.impl = transfer_result.fine_tuned;
    curves.emplace_back("transfer", &transfer_result.transfer_report);
    curves.emplace_back("scratch", &transfer_result.scratch_report);
    save_policy(transfer_result.fine_tuned,
                (std::filesystem::path(spec.out_dir) / "policy.json").string());
  }

  const ShopConfig& eval_cfg =
      spec.dispatcher == "transfer" ? *spec.transfer_target : spec.shop;
  ExperimentOutputs out;
  out.dir = spec.out_dir;
  out.metrics = evaluate_policy(dispatcher, eval_cfg, eval_seeds(spec));

  write_metrics_csv((out.dir / "metrics.csv").string(), spec.dispatcher, out.metrics);
  write_learning_curve_csv((out.dir / "learning_curve.csv").string(), curves);

  nlohmann::json manifest;
  manifest["spec"] = to_json(spec);
  manifest["config_hash"] = config_hash(manifest["spec"]);
  manifest["seeds"] = {{"train", spec.train_seeds}, {"test", spec.test_seeds}};
  manifest["version"] = kArtifactVersion;
  std::ofstream mf((out.dir / "manifest.json").string());
  mf << manifest.dump(2) << '\n';
  return out;
}

inline ExperimentSpec load_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open spec file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid JSON in ") + path + ": " + e.what());
  }
  // a manifest embeds the spec under "spec"; accept both layouts
  if (j.contains("spec")) j = j.at("spec");
  return experiment_from_json(j);
}

// State-representation ablation: trains the same configuration under each
// requested masking variant and reports the learning curves side by side.
inline std::vector<std::pair<std::string, TrainReport>> ablate_state(
    const ExperimentSpec& spec, const std::vector<std::string>& variants) {
  std::vector<std::pair<std::string, TrainReport>> out;
  for (const auto& variant : variants) {
    ReinforceOptions opt = spec.reinforce;
    opt.mask = parse_state_mask(variant);
    auto [params, report] = train_reinforce(spec.shop, opt, spec.train_seeds.front());
    (void)params;
    out.emplace_back(variant, std::move(report));
  }
  return out;
}

}  // namespace dmd

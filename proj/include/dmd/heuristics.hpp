#pragma once

// Rule-based dispatchers (earliest-due-first, least-slack-time, random) and
// the neural imitation hyper-heuristic trained on their decisions.

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmd/policy.hpp"
#include "dmd/sim.hpp"

namespace dmd {

enum class HeuristicKind { EDF, LST, Random };

inline HeuristicKind parse_heuristic(const std::string& name) {
  if (name == "edf") return HeuristicKind::EDF;
  if (name == "lst") return HeuristicKind::LST;
  if (name == "random") return HeuristicKind::Random;
  throw std::invalid_argument("unknown heuristic: " + name);
}

// One dispatching decision: among occupied slots whose job fits a contiguous
// free block, EDF picks minimal due time, LST minimal slack, Random a uniform
// choice. Ties go to the lowest slot index; no fitting job means Void.
inline Action heuristic_action(HeuristicKind kind, const ShopEnv& env, Rng& rng) {
  const ShopState& s = env.state();
  const int n = env.config().n;
  std::vector<int> fitting;
  for (int i = 0; i < n; ++i)
    if (s.slots[i].has_value() && env.job_fits(*s.slots[i])) fitting.push_back(i);
  if (fitting.empty()) return Action::Void();

  if (kind == HeuristicKind::Random)
    return Action::Slot(fitting[rng.uniform_int(0, static_cast<int>(fitting.size()) - 1)] + 1);

  int best = -1;
  long best_key = std::numeric_limits<long>::max();
  for (int i : fitting) {
    const JobSpec& job = *s.slots[i];
    const long key = kind == HeuristicKind::EDF ? job.due_time : slack_of(job, s.clock);
    if (key < best_key) {
      best_key = key;
      best = i;
    }
  }
  return Action::Slot(best + 1);
}

struct ImitationOptions {
  int epochs = 60;
  double lr = 0.01;
  int batch_size = 32;
  std::vector<int> hidden = {128, 64};
};

// Rolls out the heuristic, logging (encoded state, action) at every decision,
// and trains the policy network on the pairs.
inline std::vector<LabeledState> collect_heuristic_dataset(HeuristicKind kind,
                                                           const ShopConfig& cfg,
                                                           int samples, uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("collect_heuristic_dataset: samples must be >= 1");
  std::vector<LabeledState> dataset;
  uint64_t episode = 0;
  while (static_cast<int>(dataset.size()) < samples) {
    ShopEnv env(cfg, splitmix64(seed ^ splitmix64(episode++)));
    Rng choice_rng(seed, "heuristic-choice-" + std::to_string(episode));
    for (int t = 0; t < cfg.traj_len && static_cast<int>(dataset.size()) < samples; ++t) {
      while (static_cast<int>(dataset.size()) < samples) {
        Action a = heuristic_action(kind, env, choice_rng);
        dataset.push_back({encode_state(env.state(), cfg).flat(), a.v});
        if (env.apply_action(a).ends_phase()) break;
      }
      env.advance_time();
    }
  }
  return dataset;
}

inline PolicyParams train_imitation(HeuristicKind kind, const ShopConfig& cfg, int samples,
                                    uint64_t seed, const ImitationOptions& opt = {}) {
  auto dataset = collect_heuristic_dataset(kind, cfg, samples, seed);
  std::vector<int> dims = {state_dim(cfg)};
  dims.insert(dims.end(), opt.hidden.begin(), opt.hidden.end());
  dims.push_back(cfg.n + 1);
  PolicyParams params = init_params(dims, seed);
  train_supervised(params, dataset, opt.epochs, opt.lr, opt.batch_size, seed);
  return params;
}

}  // namespace dmd

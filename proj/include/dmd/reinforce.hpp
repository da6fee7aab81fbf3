#pragma once

// REINFORCE training loop: batched trajectory collection, discounted returns
// indexed by environment time, a per-time-step mean-return baseline, and
// gradient-ascent updates on log pi(a|s) * (R_t - b_t).

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmd/policy.hpp"
#include "dmd/sim.hpp"
#include "dmd/state_codec.hpp"

namespace dmd {

struct DecisionRecord {
  long env_time = 0;
  std::vector<double> state;  // flattened, mask already applied
  int action = 0;
  double log_prob = 0.0;
  bool phase_end = false;  // Void or Invalid terminator
};

struct Trajectory {
  int id = 0;
  uint64_t policy_version = 0;
  std::vector<DecisionRecord> decisions;
  std::vector<double> rewards;  // one per environment step
  double avg_lateness = 0.0;    // completed jobs only
  double avg_tardiness = 0.0;
  long completed = 0;
  long dropped = 0;
};

inline void finish_accounting(Trajectory& traj, const ShopState& s) {
  traj.completed = static_cast<long>(s.completed.size());
  traj.dropped = s.dropped;
  double lat = 0.0, tard = 0.0;
  for (const auto& job : s.completed) {
    auto [l, ta] = lateness_tardiness(job.completion, job.due);
    lat += static_cast<double>(l);
    tard += static_cast<double>(ta);
  }
  if (traj.completed > 0) {
    traj.avg_lateness = lat / traj.completed;
    traj.avg_tardiness = tard / traj.completed;
  }
}

inline std::vector<Trajectory> collect_trajectories(const ShopConfig& cfg,
                                                    const PolicyParams& params, int batch,
                                                    uint64_t seed,
                                                    StateMask mask = StateMask::ProcSlack) {
  if (batch < 1) throw std::invalid_argument("collect_trajectories: batch must be >= 1");
  std::vector<Trajectory> out;
  out.reserve(batch);
  for (int i = 0; i < batch; ++i) {
    Trajectory traj;
    traj.id = i;
    traj.policy_version = params.version;
    ShopEnv env(cfg, splitmix64(seed ^ splitmix64(static_cast<uint64_t>(i))));
    Rng action_rng(seed, "actions-" + std::to_string(i));
    for (int t = 0; t < cfg.traj_len; ++t) {
      while (true) {
        StateMatrix s = encode_state(env.state(), cfg);
        apply_state_mask(s, cfg, mask);
        auto probs = forward(params, s);
        Action a = select_action(probs, SelectMode::Sample, action_rng);
        const bool ends = env.apply_action(a).ends_phase();
        traj.decisions.push_back(
            {t, s.flat(), a.v, std::log(std::max(probs[a.v], 1e-300)), ends});
        if (ends) break;
      }
      traj.rewards.push_back(env.advance_time());
    }
    finish_accounting(traj, env.state());
    out.push_back(std::move(traj));
  }
  return out;
}

// R_t = r_t + gamma * R_{t+1}
inline std::vector<double> discounted_returns(const std::vector<double>& rewards,
                                              double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("discounted_returns: gamma must be in (0,1]");
  std::vector<double> r(rewards.size());
  double acc = 0.0;
  for (int t = static_cast<int>(rewards.size()) - 1; t >= 0; --t) {
    acc = rewards[t] + gamma * acc;
    r[t] = acc;
  }
  return r;
}

// b_t = mean over trajectories of R_t
inline std::vector<double> compute_baselines(const std::vector<std::vector<double>>& returns) {
  if (returns.empty()) throw std::invalid_argument("compute_baselines: empty batch");
  size_t len = 0;
  for (const auto& r : returns) len = std::max(len, r.size());
  std::vector<double> b(len, 0.0);
  std::vector<int> count(len, 0);
  for (const auto& r : returns)
    for (size_t t = 0; t < r.size(); ++t) {
      b[t] += r[t];
      ++count[t];
    }
  for (size_t t = 0; t < len; ++t) b[t] /= count[t];
  return b;
}

// One policy-gradient ascent step over the batch. The batch must have been
// collected under the current parameters. Returns the surrogate loss
// -mean(log pi * advantage).
inline double policy_gradient_update(PolicyParams& params,
                                     const std::vector<Trajectory>& batch, double gamma,
                                     double lr) {
  if (batch.empty()) throw std::invalid_argument("policy_gradient_update: empty batch");
  for (const auto& traj : batch)
    if (traj.policy_version != params.version)
      throw std::invalid_argument(
          "policy_gradient_update: stale batch (parameters changed since collection)");

  // Everything is accumulated in trajectory-id order so that permuting the
  // batch cannot change the floating-point result.
  std::vector<int> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return batch[a].id < batch[b].id; });

  std::vector<std::vector<double>> returns(batch.size());
  std::vector<std::vector<double>> ordered;
  ordered.reserve(batch.size());
  for (int idx : order) {
    returns[idx] = discounted_returns(batch[idx].rewards, gamma);
    ordered.push_back(returns[idx]);
  }
  const std::vector<double> baseline = compute_baselines(ordered);

  Gradients total = Gradients::zeros_like(params);
  double surrogate = 0.0;
  size_t records = 0;
  for (const auto& traj : batch) records += traj.decisions.size();
  for (int idx : order) {
    const Trajectory& traj = batch[idx];
    const auto& r = returns[idx];
    Gradients local = Gradients::zeros_like(params);
    for (const auto& rec : traj.decisions) {
      const double adv = r[rec.env_time] - baseline[rec.env_time];
      if (adv == 0.0) continue;
      ForwardCache cache;
      forward(params, rec.state, &cache);
      local.add_scaled(grad_log_prob(params, cache, rec.action), adv);
      surrogate += rec.log_prob * adv;
    }
    total.add_scaled(local, 1.0 / records);
  }
  clip_gradient(total);
  apply_gradient(params, total, lr);  // ascent
  return -surrogate / records;
}

struct ReinforceOptions {
  int iterations = 500;
  int batch = 10;
  double lr = 1e-3;
  StateMask mask = StateMask::ProcSlack;
  std::vector<int> hidden = {128, 64};
  int checkpoint_every = 0;          // 0 disables
  std::string checkpoint_dir;
};

struct TrainReportRow {
  int iteration = 0;
  double mean_discounted_reward = 0.0;
  double mean_lateness = 0.0;
  double mean_tardiness = 0.0;
  double loss = 0.0;
  double wall_clock_s = 0.0;
};

struct TrainReport {
  std::vector<TrainReportRow> rows;
};

inline TrainReportRow summarize_batch(const std::vector<Trajectory>& batch, double gamma) {
  TrainReportRow row;
  for (const auto& traj : batch) {
    row.mean_discounted_reward += discounted_returns(traj.rewards, gamma)[0];
    row.mean_lateness += traj.avg_lateness;
    row.mean_tardiness += traj.avg_tardiness;
  }
  row.mean_discounted_reward /= batch.size();
  row.mean_lateness /= batch.size();
  row.mean_tardiness /= batch.size();
  return row;
}

inline std::pair<PolicyParams, TrainReport> train_reinforce(const ShopConfig& cfg,
                                                            const ReinforceOptions& opt,
                                                            uint64_t seed,
                                                            PolicyParams* warm_start = nullptr) {
  PolicyParams params;
  if (warm_start) {
    params = *warm_start;
  } else {
    std::vector<int> dims = {state_dim(cfg)};
    dims.insert(dims.end(), opt.hidden.begin(), opt.hidden.end());
    dims.push_back(cfg.n + 1);
    params = init_params(dims, seed);
  }

  TrainReport report;
  const auto start = std::chrono::steady_clock::now();
  for (int it = 0; it < opt.iterations; ++it) {
    const uint64_t iter_seed = splitmix64(seed ^ splitmix64(0x10000ULL + it));
    auto batch = collect_trajectories(cfg, params, opt.batch, iter_seed, opt.mask);
    TrainReportRow row = summarize_batch(batch, cfg.gamma);
    row.iteration = it;
    row.loss = policy_gradient_update(params, batch, cfg.gamma, opt.lr);
    row.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.rows.push_back(row);
    if (opt.checkpoint_every > 0 && !opt.checkpoint_dir.empty() &&
        (it + 1) % opt.checkpoint_every == 0) {
      save_policy(params, opt.checkpoint_dir + "/checkpoint_" + std::to_string(it + 1) + ".json");
    }
  }
  return {std::move(params), std::move(report)};
}

}  // namespace dmd

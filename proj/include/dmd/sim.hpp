#pragma once

// Discrete-time single-machine shop floor: stochastic job arrivals, a T-step
// schedule horizon the dispatcher fills ahead of time, a fixed set of visible
// job slots plus a FIFO backlog, and lateness/tardiness penalties accrued per
// processing step.

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmd/rng.hpp"

namespace dmd {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct JobSpec {
  int id = 0;
  long arrival_time = 0;
  int proc_time = 1;   // p, >= 1
  long due_time = 0;   // d, may precede arrival + p (negative slack is legal)
};

// slack = d - t_curr - p
inline long slack_of(const JobSpec& job, long t_curr) {
  return job.due_time - t_curr - job.proc_time;
}

// lateness L = |c - d|, tardiness TA = max(c - d, 0)
inline std::pair<long, long> lateness_tardiness(long c, long d) {
  const long diff = c - d;
  return {std::labs(diff), diff > 0 ? diff : 0};
}

enum class Objective { Lateness, Tardiness };

struct IntRange {
  int lo = 0;
  int hi = 0;
};

struct ShopConfig {
  int T = 15;  // schedule lookahead
  int Z = 5;   // slack array length
  int n = 10;  // job slots
  int m = 60;  // backlog capacity
  double lambda = 0.5;
  double p_small = 0.8;
  IntRange short_range{1, 2};
  IntRange long_range{6, 10};
  double p_urgent = 0.5;
  IntRange urgent_slack_range{1, 5};
  IntRange nonurgent_slack_range{5, 10};
  double drop_penalty = -10.0;
  double gamma = 0.99;
  int traj_len = 100;
  Objective objective = Objective::Lateness;

  void validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("ShopConfig: " + msg); };
    if (T < 1) fail("T must be positive");
    if (Z < 1) fail("Z must be positive");
    if (n < 1) fail("n must be positive");
    if (m < 1) fail("m must be positive");
    if (!(lambda > 0.0 && lambda < 1.0)) fail("lambda must be in (0,1)");
    if (p_small < 0.0 || p_small > 1.0) fail("p_small must be in [0,1]");
    if (p_urgent < 0.0 || p_urgent > 1.0) fail("p_urgent must be in [0,1]");
    if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must be in (0,1]");
    if (traj_len < 1) fail("traj_len must be positive");
    for (const auto& [name, r] :
         {std::pair<const char*, IntRange>{"short_range", short_range},
          {"long_range", long_range},
          {"urgent_slack_range", urgent_slack_range},
          {"nonurgent_slack_range", nonurgent_slack_range}}) {
      if (r.lo > r.hi) fail(std::string(name) + " lower bound exceeds upper bound");
    }
    if (short_range.lo < 1 || long_range.lo < 1) fail("job lengths must be >= 1");
    // the encoder cannot represent p > T, so forbid generating such jobs
    if (short_range.hi > T || long_range.hi > T) fail("job length ranges must stay within T");
  }
};

// Action 0 is Void; 1..n selects a job slot.
struct Action {
  int v = 0;
  static Action Void() { return {0}; }
  static Action Slot(int i) { return {i}; }
  bool is_void() const { return v == 0; }
  int slot() const { return v; }  // 1-based
  bool operator==(const Action&) const = default;
};

struct DispatchOutcome {
  enum class Kind { Void, Scheduled, Invalid };
  Kind kind = Kind::Void;
  long completion = 0;  // valid for Scheduled
  bool ends_phase() const { return kind != Kind::Scheduled; }
};

struct CompletedJob {
  int id = 0;
  long completion = 0;
  long due = 0;
  int proc = 1;
};

struct ShopState {
  long clock = 0;
  std::vector<int> schedule;                  // length T, job id or -1
  std::vector<std::optional<JobSpec>> slots;  // length n
  std::deque<JobSpec> backlog;                // <= m, FIFO
  std::map<int, long> committed;              // scheduled job id -> completion step
  std::map<int, JobSpec> scheduled_jobs;      // specs of jobs on the schedule
  std::vector<CompletedJob> completed;
  long arrived = 0;
  long dropped = 0;
  int next_job_id = 0;
};

// Per-step reward for the job currently on the machine (schedule cell 0):
// -L/p or -TA/p, using the completion committed at scheduling time. Summed
// over the job's p processing steps this telescopes to -L (resp. -TA).
inline double step_reward(const ShopState& state, const ShopConfig& cfg) {
  if (state.schedule.empty() || state.schedule[0] < 0) return 0.0;
  const int id = state.schedule[0];
  const JobSpec& job = state.scheduled_jobs.at(id);
  const long c = state.committed.at(id);
  auto [lat, tard] = lateness_tardiness(c, job.due_time);
  const long cost = cfg.objective == Objective::Lateness ? lat : tard;
  return -static_cast<double>(cost) / job.proc_time;
}

class ShopEnv {
 public:
  ShopEnv(const ShopConfig& cfg, uint64_t seed)
      : cfg_(cfg),
        arrivals_(seed, "arrivals"),
        attributes_(seed, "attributes"),
        placement_(seed, "placement") {
    cfg_.validate();
    state_.schedule.assign(cfg_.T, -1);
    state_.slots.assign(cfg_.n, std::nullopt);
  }

  const ShopConfig& config() const { return cfg_; }
  const ShopState& state() const { return state_; }

  // Schedules the job in slot `a` into the earliest contiguous free block of
  // the horizon. Void and non-fitting/empty-slot selections leave the state
  // untouched and terminate the selection phase.
  DispatchOutcome apply_action(Action a) {
    if (a.is_void()) return {DispatchOutcome::Kind::Void, 0};
    if (a.slot() < 1 || a.slot() > cfg_.n)
      throw std::invalid_argument("apply_action: slot index out of range");
    auto& slot = state_.slots[a.slot() - 1];
    if (!slot.has_value()) return {DispatchOutcome::Kind::Invalid, 0};
    const int p = slot->proc_time;
    const int start = find_free_block(p);
    if (start < 0) return {DispatchOutcome::Kind::Invalid, 0};
    const long c = state_.clock + start + p;
    for (int i = start; i < start + p; ++i) state_.schedule[i] = slot->id;
    state_.committed[slot->id] = c;
    state_.scheduled_jobs[slot->id] = *slot;
    slot.reset();
    return {DispatchOutcome::Kind::Scheduled, c};
  }

  // Advances one time step: accrue the processing reward, complete a job
  // whose block ends, shift the horizon, draw an arrival, promote the backlog
  // head, tick the clock. Returns the step reward (drop penalty included).
  double advance_time() {
    double reward = step_reward(state_, cfg_);

    if (state_.schedule[0] >= 0) {
      const int id = state_.schedule[0];
      const bool block_ends = cfg_.T == 1 || state_.schedule[1] != id;
      if (block_ends) {
        const JobSpec& job = state_.scheduled_jobs.at(id);
        state_.completed.push_back({id, state_.committed.at(id), job.due_time, job.proc_time});
        state_.committed.erase(id);
        state_.scheduled_jobs.erase(id);
      }
    }

    state_.schedule.erase(state_.schedule.begin());
    state_.schedule.push_back(-1);

    if (arrivals_.bernoulli(cfg_.lambda)) {
      JobSpec job = sample_job();
      ++state_.arrived;
      const int slot = pick_empty_slot();
      if (slot >= 0) {
        state_.slots[slot] = job;
      } else if (static_cast<int>(state_.backlog.size()) < cfg_.m) {
        state_.backlog.push_back(job);
      } else {
        ++state_.dropped;
        reward += cfg_.drop_penalty;
      }
    }

    if (!state_.backlog.empty()) {
      const int slot = pick_empty_slot();
      if (slot >= 0) {
        state_.slots[slot] = state_.backlog.front();
        state_.backlog.pop_front();
      }
    }

    ++state_.clock;
    return reward;
  }

  // earliest start of a contiguous free run of length p, or -1
  int find_free_block(int p) const {
    int run = 0;
    for (int i = 0; i < cfg_.T; ++i) {
      run = state_.schedule[i] < 0 ? run + 1 : 0;
      if (run >= p) return i - p + 1;
    }
    return -1;
  }

  bool job_fits(const JobSpec& job) const { return find_free_block(job.proc_time) >= 0; }

 private:
  JobSpec sample_job() {
    const bool small = attributes_.bernoulli(cfg_.p_small);
    const IntRange& len = small ? cfg_.short_range : cfg_.long_range;
    const int p = attributes_.uniform_int(len.lo, len.hi);
    const bool urgent = attributes_.bernoulli(cfg_.p_urgent);
    const IntRange& sl = urgent ? cfg_.urgent_slack_range : cfg_.nonurgent_slack_range;
    const int slack = attributes_.uniform_int(sl.lo, sl.hi);
    JobSpec job;
    job.id = state_.next_job_id++;
    job.arrival_time = state_.clock + 1;  // visible from the next decision point
    job.proc_time = p;
    job.due_time = job.arrival_time + p + slack;
    return job;
  }

  int pick_empty_slot() {
    std::vector<int> empty;
    for (int i = 0; i < cfg_.n; ++i)
      if (!state_.slots[i].has_value()) empty.push_back(i);
    if (empty.empty()) return -1;
    return empty[placement_.uniform_int(0, static_cast<int>(empty.size()) - 1)];
  }

  ShopConfig cfg_;
  ShopState state_;
  Rng arrivals_;
  Rng attributes_;
  Rng placement_;
};

// jobs in flight + finished + dropped must account for every arrival
inline bool conserves_jobs(const ShopState& s) {
  long in_slots = 0;
  for (const auto& slot : s.slots) in_slots += slot.has_value() ? 1 : 0;
  const long total = in_slots + static_cast<long>(s.backlog.size()) +
                     static_cast<long>(s.committed.size()) +
                     static_cast<long>(s.completed.size()) + s.dropped;
  return total == s.arrived;
}

}  // namespace dmd

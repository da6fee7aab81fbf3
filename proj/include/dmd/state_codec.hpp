#pragma once

// 2-D observation encoding of the shop state: one machine-occupancy column,
// one column per job slot (processing cells stacked above slack cells) and
// backlog fill columns, padded to a (T+Z) x (1+n+ceil(m/T)) matrix with
// entries in {-1, 0, 1}.

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmd/sim.hpp"

namespace dmd {

struct StateMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  StateMatrix() = default;
  StateMatrix(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

  // row-major flattening, shared with the policy input layout
  const std::vector<double>& flat() const { return v; }

  bool operator==(const StateMatrix&) const = default;
};

inline int state_width(const ShopConfig& cfg) {
  return 1 + cfg.n + (cfg.m + cfg.T - 1) / cfg.T;
}
inline int state_height(const ShopConfig& cfg) { return cfg.T + cfg.Z; }
inline int state_dim(const ShopConfig& cfg) { return state_width(cfg) * state_height(cfg); }

inline StateMatrix encode_state(const ShopState& state, const ShopConfig& cfg) {
  if (static_cast<int>(state.schedule.size()) != cfg.T ||
      static_cast<int>(state.slots.size()) != cfg.n)
    throw std::invalid_argument("encode_state: state does not match config dimensions");

  StateMatrix s(state_height(cfg), state_width(cfg));

  for (int r = 0; r < cfg.T; ++r)
    if (state.schedule[r] >= 0) s.at(r, 0) = 1.0;

  for (int j = 0; j < cfg.n; ++j) {
    if (!state.slots[j].has_value()) continue;
    const JobSpec& job = *state.slots[j];
    if (job.proc_time > cfg.T)
      throw std::invalid_argument("encode_state: job length exceeds horizon T");
    for (int r = 0; r < job.proc_time; ++r) s.at(r, 1 + j) = 1.0;
    const long slack = slack_of(job, state.clock);
    if (slack > 0) {
      const int count = static_cast<int>(std::min<long>(slack, cfg.Z));
      for (int r = 0; r < count; ++r) s.at(cfg.T + r, 1 + j) = 1.0;
    } else if (slack < 0) {
      const int count = static_cast<int>(std::min<long>(-slack, cfg.Z));
      for (int r = 0; r < count; ++r) s.at(cfg.T + r, 1 + j) = -1.0;
    }
  }

  // backlog jobs as ones, column-major, T usable cells per column
  const int count = static_cast<int>(state.backlog.size());
  for (int i = 0; i < count; ++i) {
    const int col = 1 + cfg.n + i / cfg.T;
    const int row = i % cfg.T;
    s.at(row, col) = 1.0;
  }
  return s;
}

// Copy with job-slot column `a` (1-based) zeroed; used by action recovery.
inline StateMatrix remove_job_columns(const StateMatrix& s, int a, const ShopConfig& cfg) {
  if (a < 1 || a > cfg.n) throw std::invalid_argument("remove_job_columns: slot out of range");
  if (s.rows != state_height(cfg) || s.cols != state_width(cfg))
    throw std::invalid_argument("remove_job_columns: matrix does not match config");
  StateMatrix out = s;
  for (int r = 0; r < s.rows; ++r) out.at(r, a) = 0.0;
  return out;
}

// State-representation ablation variants.
enum class StateMask { ProcSlack, ProcOnly, SlackOnly };

inline StateMask parse_state_mask(const std::string& name) {
  if (name == "proc+slack") return StateMask::ProcSlack;
  if (name == "proc") return StateMask::ProcOnly;
  if (name == "slack") return StateMask::SlackOnly;
  throw std::invalid_argument("unknown state mask variant: " + name);
}

// Zeroes the processing or slack cells of the job-slot columns; the machine
// column and backlog columns are always retained.
inline void apply_state_mask(StateMatrix& s, const ShopConfig& cfg, StateMask mask) {
  if (mask == StateMask::ProcSlack) return;
  const int row_begin = mask == StateMask::ProcOnly ? cfg.T : 0;
  const int row_end = mask == StateMask::ProcOnly ? cfg.T + cfg.Z : cfg.T;
  for (int j = 1; j <= cfg.n; ++j)
    for (int r = row_begin; r < row_end; ++r) s.at(r, j) = 0.0;
}

inline std::string to_csv(const StateMatrix& s) {
  std::ostringstream out;
  for (int r = 0; r < s.rows; ++r) {
    for (int c = 0; c < s.cols; ++c) {
      if (c) out << ',';
      out << s.at(r, c);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace dmd

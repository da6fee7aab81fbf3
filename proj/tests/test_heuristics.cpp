#include <catch2/catch_amalgamated.hpp>

#include "dmd/heuristics.hpp"
#include "dmd/rng.hpp"
#include "dmd/sim.hpp"

using namespace dmd;

namespace {

ShopConfig small_config() {
  ShopConfig cfg;
  cfg.T = 8;
  cfg.Z = 3;
  cfg.n = 5;
  cfg.m = 10;
  cfg.long_range = {4, 6};
  cfg.traj_len = 50;
  return cfg;
}

// env with handcrafted slots, empty schedule
ShopEnv env_with_slots(const ShopConfig& cfg, const std::vector<JobSpec>& jobs) {
  ShopEnv env(cfg, 0);
  ShopState& s = const_cast<ShopState&>(env.state());
  for (size_t i = 0; i < jobs.size(); ++i) s.slots[i] = jobs[i];
  return env;
}

// fraction of held-out states where the greedy network agrees with the rule
double heldout_agreement(HeuristicKind kind, const ShopConfig& cfg, const PolicyParams& params,
                         int samples, uint64_t seed) {
  auto heldout = collect_heuristic_dataset(kind, cfg, samples, seed);
  Rng dummy(0);
  int agree = 0;
  for (const auto& ex : heldout)
    if (select_action(forward(params, ex.state), SelectMode::Greedy, dummy).v == ex.action)
      ++agree;
  return static_cast<double>(agree) / heldout.size();
}

}  // namespace

TEST_CASE("EDF picks the earliest due date") {
  ShopConfig cfg = small_config();
  auto env = env_with_slots(cfg, {JobSpec{1, 0, 2, 5}, JobSpec{2, 0, 2, 3}, JobSpec{3, 0, 2, 9}});
  Rng rng(0);
  CHECK(heuristic_action(HeuristicKind::EDF, env, rng) == Action::Slot(2));
}

TEST_CASE("LST picks the least slack") {
  ShopConfig cfg = small_config();
  // slacks: 5-2=3... use due times so slacks are {2, -1}
  auto env = env_with_slots(cfg, {JobSpec{1, 0, 2, 4}, JobSpec{2, 0, 3, 2}});
  Rng rng(0);
  CHECK(heuristic_action(HeuristicKind::LST, env, rng) == Action::Slot(2));
}

TEST_CASE("empty queue yields Void for every rule") {
  ShopConfig cfg = small_config();
  ShopEnv env(cfg, 0);
  Rng rng(0);
  CHECK(heuristic_action(HeuristicKind::EDF, env, rng).is_void());
  CHECK(heuristic_action(HeuristicKind::LST, env, rng).is_void());
  CHECK(heuristic_action(HeuristicKind::Random, env, rng).is_void());
}

TEST_CASE("a single fitting job is chosen by all rules") {
  ShopConfig cfg = small_config();
  auto env = env_with_slots(cfg, {JobSpec{1, 0, 2, 7}});
  Rng rng(0);
  CHECK(heuristic_action(HeuristicKind::EDF, env, rng) == Action::Slot(1));
  CHECK(heuristic_action(HeuristicKind::LST, env, rng) == Action::Slot(1));
  CHECK(heuristic_action(HeuristicKind::Random, env, rng) == Action::Slot(1));
}

TEST_CASE("ties break to the lowest slot index") {
  ShopConfig cfg = small_config();
  auto env = env_with_slots(cfg, {JobSpec{1, 0, 2, 5}, JobSpec{2, 0, 2, 5}});
  Rng rng(0);
  CHECK(heuristic_action(HeuristicKind::EDF, env, rng) == Action::Slot(1));
  CHECK(heuristic_action(HeuristicKind::LST, env, rng) == Action::Slot(1));
}

TEST_CASE("LST is invariant to shifting all due dates") {
  ShopConfig cfg = small_config();
  auto env1 = env_with_slots(cfg, {JobSpec{1, 0, 2, 4}, JobSpec{2, 0, 5, 9}, JobSpec{3, 0, 1, 2}});
  auto env2 = env_with_slots(cfg, {JobSpec{1, 0, 2, 14}, JobSpec{2, 0, 5, 19}, JobSpec{3, 0, 1, 12}});
  Rng rng(0);
  CHECK(heuristic_action(HeuristicKind::LST, env1, rng) ==
        heuristic_action(HeuristicKind::LST, env2, rng));
}

TEST_CASE("rules never select empty or non-fitting slots") {
  ShopConfig cfg = small_config();
  for (auto kind : {HeuristicKind::EDF, HeuristicKind::LST, HeuristicKind::Random}) {
    ShopEnv env(cfg, 17);
    Rng rng(17, "h");
    for (int t = 0; t < 200; ++t) {
      while (true) {
        Action a = heuristic_action(kind, env, rng);
        if (a.is_void()) break;
        CHECK(env.state().slots[a.slot() - 1].has_value());
        auto outcome = env.apply_action(a);
        CHECK(outcome.kind == DispatchOutcome::Kind::Scheduled);
        if (outcome.ends_phase()) break;
      }
      env.advance_time();
    }
  }
}

TEST_CASE("imitating EDF reaches high held-out agreement") {
  ShopConfig cfg = small_config();
  ImitationOptions opt;
  opt.epochs = 80;
  PolicyParams params = train_imitation(HeuristicKind::EDF, cfg, 4000, 1, opt);
  CHECK(heldout_agreement(HeuristicKind::EDF, cfg, params, 600, 999) >= 0.90);
}

TEST_CASE("an all-Void dataset makes the network predict Void everywhere") {
  ShopConfig cfg = small_config();
  std::vector<LabeledState> data;
  Rng rng(3, "voids");
  for (int i = 0; i < 50; ++i) {
    std::vector<double> s(state_dim(cfg));
    for (double& v : s) v = rng.uniform_int(0, 1);
    data.push_back({s, 0});
  }
  auto params = init_params(default_policy_dims(cfg), 3);
  train_supervised(params, data, 50, 0.05);
  Rng dummy(0);
  for (int i = 0; i < 10; ++i) {
    std::vector<double> s(state_dim(cfg));
    for (double& v : s) v = rng.uniform_int(0, 1);
    CHECK(select_action(forward(params, s), SelectMode::Greedy, dummy).is_void());
  }
}

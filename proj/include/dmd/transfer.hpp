#pragma once

// Dispatching-policy transfer via manifold alignment: local-geometry weight
// construction, the joint Laplacian eigenproblem, the cross-space projection
// chi, state mapping, and action/policy recovery from state trajectories.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dmd/linalg.hpp"
#include "dmd/policy.hpp"
#include "dmd/reinforce.hpp"
#include "dmd/sim.hpp"
#include "dmd/state_codec.hpp"

namespace dmd {

using StateSample = std::vector<double>;

struct AlignmentConfig {
  double mu = 1.0;
  int k = 4;          // neighbor count; permutation search is k!, so k <= 6
  int d_share = 32;   // shared-space dimension
  int source_samples = 2000;
  int target_samples = 2000;

  void validate() const {
    if (mu < 0.0) throw std::invalid_argument("AlignmentConfig: mu must be >= 0");
    if (k < 2 || k > 6) throw std::invalid_argument("AlignmentConfig: k must be in [2,6]");
    if (d_share < 1) throw std::invalid_argument("AlignmentConfig: d_share must be >= 1");
    if (source_samples < k + 1 || target_samples < k + 1)
      throw std::invalid_argument("AlignmentConfig: need more samples than neighbors");
  }
};

struct AlignmentModel {
  Matrix alpha;  // source-dim x d_share
  Matrix beta;   // target-dim x d_share
  Matrix chi;    // target-dim x source-dim, chi = (beta^T)^dagger alpha^T
  AlignmentConfig cfg;
  double cost = 0.0;  // joint quadratic-form cost at the solution
  std::vector<double> eigenvalues;
};

namespace detail {

inline double euclid(const StateSample& a, const StateSample& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// indices of the k nearest neighbors of states[i], ascending distance,
// ties broken by index
inline std::vector<int> knn_indices(const std::vector<StateSample>& states, int i, int k) {
  std::vector<std::pair<double, int>> d;
  d.reserve(states.size() - 1);
  for (int j = 0; j < static_cast<int>(states.size()); ++j)
    if (j != i) d.emplace_back(euclid(states[i], states[j]), j);
  std::partial_sort(d.begin(), d.begin() + k, d.end());
  std::vector<int> out(k);
  for (int j = 0; j < k; ++j) out[j] = d[j].second;
  return out;
}

inline void parallel_for(int count, const std::function<void(int)>& body) {
  const int workers =
      std::min<int>(count, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (int i = w; i < count; i += workers) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace detail

// (k+1) x (k+1) pairwise-distance matrix of states[i] and its k nearest
// neighbors; row/column 0 is the state itself.
inline Matrix local_geometry(const std::vector<StateSample>& states, int i, int k) {
  if (static_cast<int>(states.size()) < k + 1)
    throw std::invalid_argument("local_geometry: need at least k+1 states");
  if (i < 0 || i >= static_cast<int>(states.size()))
    throw std::invalid_argument("local_geometry: index out of range");
  std::vector<const StateSample*> z;
  z.push_back(&states[i]);
  for (int j : detail::knn_indices(states, i, k)) z.push_back(&states[j]);
  Matrix r(k + 1, k + 1);
  for (int a = 0; a <= k; ++a)
    for (int b = a + 1; b <= k; ++b) {
      const double d = detail::euclid(*z[a], *z[b]);
      r(a, b) = d;
      r(b, a) = d;
    }
  return r;
}

// Minimum scaled Frobenius distance between two local-geometry matrices over
// all k! permutations of the neighbors (entry 0 stays fixed) and both scaling
// directions. A zero-trace denominator drops that direction's scaling.
inline double geometry_distance(const Matrix& rx, const Matrix& ry, int k) {
  if (rx.rows != k + 1 || rx.cols != k + 1 || ry.rows != k + 1 || ry.cols != k + 1)
    throw std::invalid_argument("geometry_distance: matrices must be (k+1)x(k+1)");
  const int n = k + 1;
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 1);
  Matrix ryh(n, n);
  double best = std::numeric_limits<double>::infinity();
  do {
    // permute the neighbors of ry; entry 0 stays fixed
    for (int a = 0; a < n; ++a) {
      const int pa = a == 0 ? 0 : perm[a - 1];
      for (int b = 0; b < n; ++b) ryh(a, b) = ry(pa, b == 0 ? 0 : perm[b - 1]);
    }
    double trxx = 0.0, tryy = 0.0, trxy = 0.0;
    for (size_t i = 0; i < rx.v.size(); ++i) {
      trxx += rx.v[i] * rx.v[i];
      tryy += ryh.v[i] * ryh.v[i];
      trxy += rx.v[i] * ryh.v[i];
    }
    const double w1 = trxx > 0.0 ? trxy / trxx : 0.0;
    const double w2 = tryy > 0.0 ? trxy / tryy : 0.0;
    double d1 = 0.0, d2 = 0.0;
    for (size_t i = 0; i < rx.v.size(); ++i) {
      const double e1 = ryh.v[i] - w1 * rx.v[i];
      const double e2 = rx.v[i] - w2 * ryh.v[i];
      d1 += e1 * e1;
      d2 += e2 * e2;
    }
    best = std::min({best, std::sqrt(d1), std::sqrt(d2)});
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

struct AlignmentWeights {
  Matrix w;   // cross-space, Nx x Ny
  Matrix wx;  // within source, Nx x Nx
  Matrix wy;  // within target, Ny x Ny
};

inline AlignmentWeights build_weights(const std::vector<StateSample>& xs,
                                      const std::vector<StateSample>& ys, int k) {
  const int nx = static_cast<int>(xs.size());
  const int ny = static_cast<int>(ys.size());
  if (nx < k + 1 || ny < k + 1)
    throw std::invalid_argument("build_weights: need at least k+1 samples per side");

  AlignmentWeights out;
  out.wx = Matrix(nx, nx);
  out.wy = Matrix(ny, ny);
  out.w = Matrix(nx, ny);

  for (int i = 0; i < nx; ++i) {
    out.wx(i, i) = 1.0;
    for (int j = i + 1; j < nx; ++j) {
      const double v = std::exp(-detail::euclid(xs[i], xs[j]));
      out.wx(i, j) = v;
      out.wx(j, i) = v;
    }
  }
  for (int i = 0; i < ny; ++i) {
    out.wy(i, i) = 1.0;
    for (int j = i + 1; j < ny; ++j) {
      const double v = std::exp(-detail::euclid(ys[i], ys[j]));
      out.wy(i, j) = v;
      out.wy(j, i) = v;
    }
  }

  std::vector<Matrix> rx(nx), ry(ny);
  detail::parallel_for(nx, [&](int i) { rx[i] = local_geometry(xs, i, k); });
  detail::parallel_for(ny, [&](int j) { ry[j] = local_geometry(ys, j, k); });
  detail::parallel_for(nx, [&](int i) {
    for (int j = 0; j < ny; ++j)
      out.w(i, j) = std::exp(-geometry_distance(rx[i], ry[j], k));
  });
  return out;
}

namespace detail {

// M diag(d) M^T
inline Matrix scaled_gram(const Matrix& m, const std::vector<double>& d) {
  Matrix out(m.rows, m.rows);
  for (int i = 0; i < m.rows; ++i) {
    for (int j = i; j < m.rows; ++j) {
      double s = 0.0;
      for (int c = 0; c < m.cols; ++c) s += m(i, c) * d[c] * m(j, c);
      out(i, j) = s;
      out(j, i) = s;
    }
  }
  return out;
}

inline Matrix columns_matrix(const std::vector<StateSample>& samples) {
  const int dim = static_cast<int>(samples[0].size());
  Matrix m(dim, static_cast<int>(samples.size()));
  for (int c = 0; c < m.cols; ++c) {
    if (static_cast<int>(samples[c].size()) != dim)
      throw std::invalid_argument("align: inconsistent sample dimensions");
    for (int r = 0; r < dim; ++r) m(r, c) = samples[c][r];
  }
  return m;
}

}  // namespace detail

// Joint manifold alignment of two state-sample sets. Assembles the blocked
// Laplacian cost, solves the generalized eigenproblem under the degree
// normalization, filters directions with no projected sample variance, and
// derives the cross-space map chi from the d_share kept eigenvectors.
inline AlignmentModel align(const std::vector<StateSample>& xs,
                            const std::vector<StateSample>& ys, const AlignmentConfig& cfg) {
  cfg.validate();
  if (xs.empty() || ys.empty()) throw std::invalid_argument("align: empty sample set");

  const AlignmentWeights wts = build_weights(xs, ys, cfg.k);
  const int nx = wts.w.rows, ny = wts.w.cols;
  const Matrix x = detail::columns_matrix(xs);
  const Matrix y = detail::columns_matrix(ys);
  const int dx = x.rows, dy = y.rows;
  const double mu = cfg.mu;

  std::vector<double> deg_x(nx, 0.0), deg_y(ny, 0.0);   // D_x, D_y diagonals
  std::vector<double> om1(nx, 0.0), om4(ny, 0.0);       // cross-term degrees
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nx; ++j) deg_x[i] += wts.wx(i, j);
  for (int i = 0; i < ny; ++i)
    for (int j = 0; j < ny; ++j) deg_y[i] += wts.wy(i, j);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      om1[i] += wts.w(i, j);
      om4[j] += wts.w(i, j);
    }

  // A = Z L Z^T assembled blockwise; the 0.5 factors of the within-space
  // terms cancel against the double-counted (i,j)/(j,i) sum, giving plain
  // Laplacian quadratic forms.
  Matrix lx(nx, nx), ly(ny, ny);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nx; ++j) lx(i, j) = (i == j ? deg_x[i] : 0.0) - wts.wx(i, j);
  for (int i = 0; i < ny; ++i)
    for (int j = 0; j < ny; ++j) ly(i, j) = (i == j ? deg_y[i] : 0.0) - wts.wy(i, j);

  const int dim = dx + dy;
  Matrix a(dim, dim);
  {
    Matrix top(nx, nx);  // L_x + mu * Omega_1
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < nx; ++j) top(i, j) = lx(i, j) + (i == j ? mu * om1[i] : 0.0);
    Matrix bot(ny, ny);  // L_y + mu * Omega_4
    for (int i = 0; i < ny; ++i)
      for (int j = 0; j < ny; ++j) bot(i, j) = ly(i, j) + (i == j ? mu * om4[i] : 0.0);
    const Matrix a11 = matmul(matmul(x, top), transpose(x));
    const Matrix a22 = matmul(matmul(y, bot), transpose(y));
    const Matrix a12 = matmul(matmul(x, wts.w), transpose(y));  // times -mu below
    for (int i = 0; i < dx; ++i)
      for (int j = 0; j < dx; ++j) a(i, j) = a11(i, j);
    for (int i = 0; i < dy; ++i)
      for (int j = 0; j < dy; ++j) a(dx + i, dx + j) = a22(i, j);
    for (int i = 0; i < dx; ++i)
      for (int j = 0; j < dy; ++j) {
        a(i, dx + j) = -mu * a12(i, j);
        a(dx + j, i) = -mu * a12(i, j);
      }
  }

  Matrix b(dim, dim);
  {
    std::vector<double> d1(nx), d4(ny);
    for (int i = 0; i < nx; ++i) d1[i] = deg_x[i] + mu * om1[i];
    for (int i = 0; i < ny; ++i) d4[i] = deg_y[i] + mu * om4[i];
    const Matrix b11 = detail::scaled_gram(x, d1);
    const Matrix b22 = detail::scaled_gram(y, d4);
    for (int i = 0; i < dx; ++i)
      for (int j = 0; j < dx; ++j) b(i, j) = b11(i, j);
    for (int i = 0; i < dy; ++i)
      for (int j = 0; j < dy; ++j) b(dx + i, dx + j) = b22(i, j);
  }

  auto pairs = sym_eig_smallest(a, b, dim);

  // Drop directions with essentially no projected sample variance (the
  // Laplacian's trivial near-constant eigenvectors) and directions whose
  // source and target projections anticorrelate under the cross weights;
  // the latter satisfy the eigenproblem but contradict the correspondence
  // term of the cost, and they corrupt the least-squares fit of chi.
  std::vector<int> kept;
  for (int e = 0; e < dim && static_cast<int>(kept.size()) < cfg.d_share; ++e) {
    const auto& vec = pairs[e].vector;
    std::vector<double> proj;
    proj.reserve(nx + ny);
    for (int c = 0; c < nx; ++c) {
      double s = 0.0;
      for (int r = 0; r < dx; ++r) s += vec[r] * x(r, c);
      proj.push_back(s);
    }
    for (int c = 0; c < ny; ++c) {
      double s = 0.0;
      for (int r = 0; r < dy; ++r) s += vec[dx + r] * y(r, c);
      proj.push_back(s);
    }
    double mean = 0.0;
    for (double v : proj) mean += v;
    mean /= proj.size();
    double var = 0.0;
    for (double v : proj) var += (v - mean) * (v - mean);
    var /= proj.size();
    if (var < 1e-10) continue;
    double cross = 0.0;
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < ny; ++j) cross += wts.w(i, j) * proj[i] * proj[nx + j];
    if (cross <= 0.0) continue;
    kept.push_back(e);
  }
  if (kept.empty()) throw NumericalError("align: all eigen-directions are degenerate");

  AlignmentModel model;
  model.cfg = cfg;
  const int d_share = static_cast<int>(kept.size());
  model.alpha = Matrix(dx, d_share);
  model.beta = Matrix(dy, d_share);
  for (int c = 0; c < d_share; ++c) {
    const auto& vec = pairs[kept[c]].vector;
    model.eigenvalues.push_back(pairs[kept[c]].value);
    for (int r = 0; r < dx; ++r) model.alpha(r, c) = vec[r];
    for (int r = 0; r < dy; ++r) model.beta(r, c) = vec[dx + r];
    // cost of this direction: phi^T A phi
    const auto av = matvec(a, vec);
    double q = 0.0;
    for (int r = 0; r < dim; ++r) q += vec[r] * av[r];
    model.cost += q;
  }
  model.chi = matmul(pinv(transpose(model.beta)), transpose(model.alpha));
  return model;
}

// s^y = chi s^x; optionally snapped to the {-1,0,1} lattice.
inline StateSample map_state(const AlignmentModel& model, const StateSample& sx,
                             bool quantize = false) {
  if (static_cast<int>(sx.size()) != model.chi.cols)
    throw std::invalid_argument("map_state: dimension mismatch");
  StateSample sy = matvec(model.chi, sx);
  if (quantize)
    for (double& v : sy) v = v < -0.5 ? -1.0 : (v > 0.5 ? 1.0 : 0.0);
  return sy;
}

// Infers the action taken between two consecutive encoded states: candidates
// are the unchanged previous state (Void) and the previous state with each
// nonempty job column removed; the nearest candidate to s_next wins. Ties go
// to Void, then the lowest slot index.
inline Action recover_action(const StateSample& s_prev, const StateSample& s_next,
                             const ShopConfig& cfg) {
  const int rows = state_height(cfg), cols = state_width(cfg);
  if (static_cast<int>(s_prev.size()) != rows * cols ||
      static_cast<int>(s_next.size()) != rows * cols)
    throw std::invalid_argument("recover_action: states do not match target geometry");

  auto sq_dist_removing = [&](int col) {
    // squared distance between (s_prev with column `col` zeroed) and s_next;
    // col < 0 removes nothing
    double s = 0.0;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const double prev = c == col ? 0.0 : s_prev[static_cast<size_t>(r) * cols + c];
        const double d = prev - s_next[static_cast<size_t>(r) * cols + c];
        s += d * d;
      }
    }
    return s;
  };

  int best_action = 0;
  double best = sq_dist_removing(-1);  // Void keeps the state
  for (int a2 = 1; a2 <= cfg.n; ++a2) {
    bool nonzero = false;
    for (int r = 0; r < rows && !nonzero; ++r)
      if (s_prev[static_cast<size_t>(r) * cols + a2] != 0.0) nonzero = true;
    if (!nonzero) continue;
    const double d = sq_dist_removing(a2);
    if (d < best) {
      best = d;
      best_action = a2;
    }
  }
  return {best_action};
}

struct RecoveryOptions {
  int epochs = 60;
  double lr = 0.01;
  int batch_size = 32;
  std::vector<int> hidden = {128, 64};
};

// Labels consecutive state pairs with recovered actions and trains the policy
// network on them.
inline PolicyParams recover_policy(const std::vector<std::vector<StateSample>>& trajectories,
                                   const ShopConfig& target_cfg, uint64_t seed,
                                   const RecoveryOptions& opt = {}) {
  if (trajectories.empty()) throw std::invalid_argument("recover_policy: empty input");
  std::vector<LabeledState> dataset;
  for (const auto& traj : trajectories)
    for (size_t t = 0; t + 1 < traj.size(); ++t)
      dataset.push_back({traj[t], recover_action(traj[t], traj[t + 1], target_cfg).v});
  if (dataset.empty())
    throw std::invalid_argument("recover_policy: trajectories yield no state pairs");

  std::vector<int> dims = {state_dim(target_cfg)};
  dims.insert(dims.end(), opt.hidden.begin(), opt.hidden.end());
  dims.push_back(target_cfg.n + 1);
  PolicyParams params = init_params(dims, seed);
  train_supervised(params, dataset, opt.epochs, opt.lr, opt.batch_size, seed);
  return params;
}

// Random-policy rollouts, so samples lie on the reachable state manifold.
inline std::vector<StateSample> sample_random_states(const ShopConfig& cfg, int count,
                                                     uint64_t seed) {
  std::vector<StateSample> out;
  out.reserve(count);
  uint64_t episode = 0;
  Rng action_rng(seed, "random-state-actions");
  while (static_cast<int>(out.size()) < count) {
    ShopEnv env(cfg, splitmix64(seed ^ splitmix64(0xABCDULL + episode++)));
    for (int t = 0; t < cfg.traj_len && static_cast<int>(out.size()) < count; ++t) {
      while (static_cast<int>(out.size()) < count) {
        out.push_back(encode_state(env.state(), cfg).flat());
        Action a{action_rng.uniform_int(0, cfg.n)};
        if (env.apply_action(a).ends_phase()) break;
      }
      env.advance_time();
    }
  }
  return out;
}

// Decision-state trajectories of a greedy policy rollout; one inner vector
// per episode, one state per decision point.
inline std::vector<std::vector<StateSample>> greedy_state_trajectories(
    const ShopConfig& cfg, const PolicyParams& params, int episodes, uint64_t seed) {
  std::vector<std::vector<StateSample>> out;
  Rng dummy(0);
  for (int e = 0; e < episodes; ++e) {
    std::vector<StateSample> traj;
    ShopEnv env(cfg, splitmix64(seed ^ splitmix64(0x5EEDULL + e)));
    for (int t = 0; t < cfg.traj_len; ++t) {
      while (true) {
        traj.push_back(encode_state(env.state(), cfg).flat());
        auto probs = forward(params, traj.back());
        Action a = select_action(probs, SelectMode::Greedy, dummy);
        if (env.apply_action(a).ends_phase()) break;
      }
      env.advance_time();
    }
    out.push_back(std::move(traj));
  }
  return out;
}

struct TransferOptions {
  AlignmentConfig alignment;
  RecoveryOptions recovery;
  ReinforceOptions fine_tune;  // iterations used for both transfer and scratch curves
  int source_episodes = 20;    // rollouts mapped into the target space
  bool force_identity_map = false;  // skip alignment when the spaces coincide
  bool run_scratch_baseline = true;
};

struct TransferResult {
  AlignmentModel model;
  PolicyParams recovered;    // pi^y before fine-tuning
  PolicyParams fine_tuned;   // pi^y* after REINFORCE in the target
  TrainReport transfer_report;
  TrainReport scratch_report;
};

// End-to-end policy transfer: sample states, align, map source rollouts,
// recover the target policy, fine-tune with REINFORCE, and (optionally) run a
// from-scratch comparison under the same settings.
inline TransferResult transfer_pipeline(const PolicyParams& source_policy,
                                        const ShopConfig& source_cfg,
                                        const ShopConfig& target_cfg,
                                        const TransferOptions& opt, uint64_t seed) {
  TransferResult result;

  if (opt.force_identity_map) {
    if (state_dim(source_cfg) != state_dim(target_cfg))
      throw std::invalid_argument("transfer_pipeline: identity map needs equal state dims");
    result.model.cfg = opt.alignment;
    const int d = state_dim(source_cfg);
    result.model.alpha = Matrix::identity(d);
    result.model.beta = Matrix::identity(d);
    result.model.chi = Matrix::identity(d);
  } else {
    auto xs = sample_random_states(source_cfg, opt.alignment.source_samples,
                                   splitmix64(seed ^ 0x11ULL));
    auto ys = sample_random_states(target_cfg, opt.alignment.target_samples,
                                   splitmix64(seed ^ 0x22ULL));
    result.model = align(xs, ys, opt.alignment);
  }

  auto source_trajs = greedy_state_trajectories(source_cfg, source_policy,
                                                opt.source_episodes, splitmix64(seed ^ 0x33ULL));
  std::vector<std::vector<StateSample>> target_trajs;
  target_trajs.reserve(source_trajs.size());
  for (const auto& traj : source_trajs) {
    std::vector<StateSample> mapped;
    mapped.reserve(traj.size());
    for (const auto& s : traj) mapped.push_back(map_state(result.model, s));
    target_trajs.push_back(std::move(mapped));
  }

  result.recovered = recover_policy(target_trajs, target_cfg, splitmix64(seed ^ 0x44ULL),
                                    opt.recovery);

  auto [tuned, report] = train_reinforce(target_cfg, opt.fine_tune,
                                         splitmix64(seed ^ 0x55ULL), &result.recovered);
  result.fine_tuned = std::move(tuned);
  result.transfer_report = std::move(report);

  if (opt.run_scratch_baseline) {
    auto [_, scratch] = train_reinforce(target_cfg, opt.fine_tune, splitmix64(seed ^ 0x55ULL));
    result.scratch_report = std::move(scratch);
  }
  return result;
}

}  // namespace dmd

#pragma once

// Feed-forward softmax dispatcher pi(a|s;theta) with hand-written
// forward/backward passes. The same gradient machinery backs both the
// policy-gradient updates and supervised (imitation / recovery) training.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmd/rng.hpp"
#include "dmd/sim.hpp"
#include "dmd/state_codec.hpp"

namespace dmd {

struct LayerParams {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;  // out
};

struct PolicyParams {
  std::vector<int> dims;  // input, hidden..., output (output = n+1 actions)
  std::vector<LayerParams> layers;
  uint64_t version = 0;  // bumped on every parameter update

  int input_dim() const { return dims.front(); }
  int action_count() const { return dims.back(); }
};

inline std::vector<int> default_policy_dims(const ShopConfig& cfg) {
  return {state_dim(cfg), 128, 64, cfg.n + 1};
}

// Uniform +-sqrt(6/fan_in) weights, zero biases; deterministic per seed.
inline PolicyParams init_params(const std::vector<int>& dims, uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("init_params: need at least two dims");
  for (int d : dims)
    if (d < 1) throw std::invalid_argument("init_params: dims must be positive");
  PolicyParams p;
  p.dims = dims;
  Rng rng(seed, "policy-init");
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    LayerParams layer;
    layer.in = dims[l];
    layer.out = dims[l + 1];
    layer.w.resize(static_cast<size_t>(layer.in) * layer.out);
    layer.b.assign(layer.out, 0.0);
    const double bound = std::sqrt(6.0 / layer.in);
    for (double& w : layer.w) w = (2.0 * rng.uniform() - 1.0) * bound;
    p.layers.push_back(std::move(layer));
  }
  return p;
}

struct ForwardCache {
  std::vector<std::vector<double>> activations;  // input, post-ReLU hiddens
  std::vector<double> probs;
};

inline std::vector<double> softmax(std::vector<double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& x : logits) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : logits) x /= sum;
  return logits;
}

inline std::vector<double> forward(const PolicyParams& p, const std::vector<double>& x,
                                   ForwardCache* cache = nullptr) {
  if (static_cast<int>(x.size()) != p.input_dim())
    throw std::invalid_argument("forward: input dimension mismatch");
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(x);
  }
  std::vector<double> a = x;
  for (size_t l = 0; l < p.layers.size(); ++l) {
    const LayerParams& layer = p.layers[l];
    std::vector<double> z(layer.out);
    for (int o = 0; o < layer.out; ++o) {
      double s = layer.b[o];
      const double* wrow = layer.w.data() + static_cast<size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) s += wrow[i] * a[i];
      z[o] = s;
    }
    const bool last = l + 1 == p.layers.size();
    if (!last) {
      for (double& s : z) s = std::max(s, 0.0);  // ReLU
      if (cache) cache->activations.push_back(z);
    }
    a = std::move(z);
  }
  a = softmax(std::move(a));
  if (cache) cache->probs = a;
  return a;
}

inline std::vector<double> forward(const PolicyParams& p, const StateMatrix& s,
                                   ForwardCache* cache = nullptr) {
  return forward(p, s.flat(), cache);
}

struct Gradients {
  std::vector<LayerParams> layers;  // same shapes, w/b hold gradients

  static Gradients zeros_like(const PolicyParams& p) {
    Gradients g;
    for (const auto& layer : p.layers) {
      LayerParams zl;
      zl.in = layer.in;
      zl.out = layer.out;
      zl.w.assign(layer.w.size(), 0.0);
      zl.b.assign(layer.b.size(), 0.0);
      g.layers.push_back(std::move(zl));
    }
    return g;
  }

  void add_scaled(const Gradients& other, double scale) {
    for (size_t l = 0; l < layers.size(); ++l) {
      for (size_t i = 0; i < layers[l].w.size(); ++i)
        layers[l].w[i] += scale * other.layers[l].w[i];
      for (size_t i = 0; i < layers[l].b.size(); ++i)
        layers[l].b[i] += scale * other.layers[l].b[i];
    }
  }

  void scale(double s) {
    for (auto& layer : layers) {
      for (double& w : layer.w) w *= s;
      for (double& b : layer.b) b *= s;
    }
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& layer : layers) {
      for (double w : layer.w) s += w * w;
      for (double b : layer.b) s += b * b;
    }
    return s;
  }
};

// Backpropagates d(loss)/d(logits) through the network.
inline Gradients backward(const PolicyParams& p, const ForwardCache& cache,
                          std::vector<double> dlogits) {
  Gradients g = Gradients::zeros_like(p);
  std::vector<double> delta = std::move(dlogits);
  for (int l = static_cast<int>(p.layers.size()) - 1; l >= 0; --l) {
    const LayerParams& layer = p.layers[l];
    const std::vector<double>& input = cache.activations[l];
    LayerParams& gl = g.layers[l];
    for (int o = 0; o < layer.out; ++o) {
      gl.b[o] = delta[o];
      double* grow = gl.w.data() + static_cast<size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) grow[i] = delta[o] * input[i];
    }
    if (l > 0) {
      std::vector<double> prev(layer.in, 0.0);
      for (int o = 0; o < layer.out; ++o) {
        const double* wrow = layer.w.data() + static_cast<size_t>(o) * layer.in;
        for (int i = 0; i < layer.in; ++i) prev[i] += wrow[i] * delta[o];
      }
      // ReLU gate: the cached activation is the post-ReLU value
      for (int i = 0; i < layer.in; ++i)
        if (input[i] <= 0.0) prev[i] = 0.0;
      delta = std::move(prev);
    }
  }
  return g;
}

// Gradient of log pi(a|s;theta); dlogits = onehot(a) - probs.
inline Gradients grad_log_prob(const PolicyParams& p, const ForwardCache& cache, int action) {
  std::vector<double> dlogits(cache.probs.size());
  for (size_t i = 0; i < dlogits.size(); ++i)
    dlogits[i] = (static_cast<int>(i) == action ? 1.0 : 0.0) - cache.probs[i];
  return backward(p, cache, std::move(dlogits));
}

enum class SelectMode { Sample, Greedy };

inline Action select_action(const std::vector<double>& probs, SelectMode mode, Rng& rng) {
  if (probs.empty()) throw std::invalid_argument("select_action: empty distribution");
  if (mode == SelectMode::Greedy) {
    int best = 0;
    for (size_t i = 1; i < probs.size(); ++i)
      if (probs[i] > probs[best]) best = static_cast<int>(i);  // lowest index wins ties
    return {best};
  }
  return {rng.categorical(probs)};
}

constexpr double kGradClipNorm = 5.0;

inline void clip_gradient(Gradients& g, double max_norm = kGradClipNorm) {
  const double norm = std::sqrt(g.squared_norm());
  if (norm > max_norm) g.scale(max_norm / norm);
}

inline void apply_gradient(PolicyParams& p, const Gradients& g, double step) {
  for (size_t l = 0; l < p.layers.size(); ++l) {
    for (size_t i = 0; i < p.layers[l].w.size(); ++i)
      p.layers[l].w[i] += step * g.layers[l].w[i];
    for (size_t i = 0; i < p.layers[l].b.size(); ++i)
      p.layers[l].b[i] += step * g.layers[l].b[i];
  }
  ++p.version;
}

struct LabeledState {
  std::vector<double> state;
  int action = 0;
};

struct SupervisedReport {
  double final_loss = 0.0;
  double final_accuracy = 0.0;
  int epochs = 0;
};

// Mini-batch gradient descent on mean cross-entropy.
inline SupervisedReport train_supervised(PolicyParams& p,
                                         const std::vector<LabeledState>& dataset,
                                         int epochs, double lr, int batch_size = 32,
                                         uint64_t seed = 0) {
  if (dataset.empty()) throw std::invalid_argument("train_supervised: empty dataset");
  for (const auto& ex : dataset)
    if (ex.action < 0 || ex.action >= p.action_count())
      throw std::invalid_argument("train_supervised: label outside action space");
  if (batch_size < 1) throw std::invalid_argument("train_supervised: bad batch size");

  Rng shuffle_rng(seed, "supervised-shuffle");
  std::vector<int> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  SupervisedReport report;
  report.epochs = epochs;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    // Fisher-Yates with our portable rng
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_int(0, i)]);
    for (size_t start = 0; start < order.size(); start += batch_size) {
      const size_t end = std::min(order.size(), start + batch_size);
      Gradients g = Gradients::zeros_like(p);
      for (size_t idx = start; idx < end; ++idx) {
        const LabeledState& ex = dataset[order[idx]];
        ForwardCache cache;
        forward(p, ex.state, &cache);
        // descent on CE == ascent on log-prob
        g.add_scaled(grad_log_prob(p, cache, ex.action), 1.0 / (end - start));
      }
      clip_gradient(g);
      apply_gradient(p, g, lr);
    }
  }

  double loss = 0.0;
  int correct = 0;
  Rng dummy(0);
  for (const auto& ex : dataset) {
    auto probs = forward(p, ex.state);
    loss -= std::log(std::max(probs[ex.action], 1e-300));
    if (select_action(probs, SelectMode::Greedy, dummy).v == ex.action) ++correct;
  }
  report.final_loss = loss / dataset.size();
  report.final_accuracy = static_cast<double>(correct) / dataset.size();
  return report;
}

// --- checkpoint serialization (versioned JSON) ---

inline nlohmann::json to_json(const PolicyParams& p) {
  nlohmann::json j;
  j["format"] = "dmd-policy";
  j["format_version"] = 1;
  j["dims"] = p.dims;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : p.layers) {
    layers.push_back({{"in", layer.in}, {"out", layer.out}, {"w", layer.w}, {"b", layer.b}});
  }
  j["layers"] = std::move(layers);
  return j;
}

inline PolicyParams policy_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "dmd-policy")
    throw std::invalid_argument("policy checkpoint: bad format tag");
  if (j.value("format_version", 0) != 1)
    throw std::invalid_argument("policy checkpoint: unsupported version");
  PolicyParams p;
  p.dims = j.at("dims").get<std::vector<int>>();
  for (const auto& jl : j.at("layers")) {
    LayerParams layer;
    layer.in = jl.at("in").get<int>();
    layer.out = jl.at("out").get<int>();
    layer.w = jl.at("w").get<std::vector<double>>();
    layer.b = jl.at("b").get<std::vector<double>>();
    if (layer.w.size() != static_cast<size_t>(layer.in) * layer.out ||
        layer.b.size() != static_cast<size_t>(layer.out))
      throw std::invalid_argument("policy checkpoint: inconsistent layer shapes");
    p.layers.push_back(std::move(layer));
  }
  if (p.layers.size() + 1 != p.dims.size())
    throw std::invalid_argument("policy checkpoint: dims/layers mismatch");
  return p;
}

inline void save_policy(const PolicyParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_policy: cannot open " + path);
  out << to_json(p).dump();
}

inline PolicyParams load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("load_policy: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return policy_from_json(j);
}

}  // namespace dmd

#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridsizer/diff/params.hpp"
#include "gridsizer/diff/tensor.hpp"
#include "gridsizer/nn/graph_input.hpp"

namespace gridsizer::nn {

struct NeuralSimConfig {
  int embed_dim = 512;
  int prop_steps = 5;
  bool use_position_aware = false;
  int anchor_count = 512;
  double dropout = 0.5;
  double drift_limit = 0.015;
  double bce_weight = 1.0;

  void validate() const;
  nlohmann::json to_json() const;
  static NeuralSimConfig from_json(const nlohmann::json& j);
};

// h: K x 2 drifts in the dataset's normalized scale; c: K x 2 probabilities
// that |drift| exceeds the limit. Rows run from story 1 to the roof.
struct SimPrediction {
  ad::Tensor h;
  ad::Tensor c;
};

// One training example: a sized graph and its normalized oracle drifts,
// row-major K x 2 (x, y).
struct SimExample {
  GraphInput graph;
  std::vector<double> drift;
};

// Dyadic anchor-set sizes 1, 2, 4, ... with a final set taking the remainder,
// `count` anchors in total. Nodes are drawn without replacement inside a set
// when the graph has at least `count` nodes, with replacement otherwise.
std::vector<std::vector<int>> sample_anchor_sets(int nodes, int count, std::mt19937_64& rng);

class NeuralSim {
 public:
  // Fresh Xavier-initialized model. `drift_scale` converts normalized drifts
  // back to drift ratios (drift = h * scale).
  NeuralSim(const NeuralSimConfig& cfg, double drift_scale, std::uint64_t seed);
  // Wraps loaded weights; checks the layout hash and required tensors.
  explicit NeuralSim(ad::ModelParams params);

  const NeuralSimConfig& config() const { return cfg_; }
  double drift_scale() const { return drift_scale_; }
  ad::ModelParams& params() { return params_; }
  const ad::ModelParams& params() const { return params_; }

  // Full pipeline on the graph's own (sized) features.
  SimPrediction forward(const GraphInput& g, bool training, std::mt19937_64& rng) const;
  // Same pipeline on caller-supplied features (e.g. section one-hots stitched
  // in with a gradient path), nodes x 19.
  SimPrediction forward(const GraphInput& g, const ad::Tensor& features, bool training,
                        std::mt19937_64& rng) const;
  // Eval-mode forward without recording gradients.
  SimPrediction predict(const GraphInput& g) const;

  // Stages, exposed for testing.
  ad::Tensor encode(const ad::Tensor& features) const;
  ad::Tensor propagate_step(const ad::Tensor& v, const GraphInput& g, bool training, std::mt19937_64& rng) const;
  ad::Tensor position_message(const ad::Tensor& v, const GraphInput& g, std::mt19937_64& rng) const;
  ad::Tensor story_pool(const ad::Tensor& v, const GraphInput& g) const;
  ad::Tensor structured_decode(const ad::Tensor& stories) const;

  // Training-time dropout override (linear decay schedules).
  void set_dropout(double p) { cfg_.dropout = p; }

  // Returns a copy of the parameters as constant leaves, so gradients flow
  // only into inputs.
  NeuralSim frozen() const;

 private:
  NeuralSimConfig cfg_;
  double drift_scale_ = 1.0;
  ad::ModelParams params_;
};

// Mean L1 over all story/direction entries plus w * mean BCE against labels
// |drift * scale| > lim.
ad::Tensor sim_loss(const SimPrediction& pred, const std::vector<double>& truth, double drift_scale,
                    double drift_limit, double bce_weight);

struct SimMetrics {
  double l1 = 0.0;                 // mean |h - truth| in normalized units
  double relative_accuracy = 0.0;  // 1 - mean(|h - truth| / (|truth| + 1e-6)), clamped to [0, 1]
  double classification_accuracy = 0.0;
  std::size_t entries = 0;
  nlohmann::json to_json() const;
};

SimMetrics evaluate(const NeuralSim& model, const std::vector<SimExample>& data);

struct SimTrainConfig {
  double lr = 1e-4;
  // Cosine decay from lr to lr_final over all steps; negative keeps lr fixed.
  double lr_final = -1.0;
  double weight_decay = 5e-4;
  int epochs = 5;
  bool decay_dropout = false;
  std::uint64_t seed = 0;
};

struct SimTrainReport {
  std::vector<double> step_loss;   // per training example, in visit order
  std::vector<double> epoch_loss;  // mean over each epoch
  SimMetrics train;
  SimMetrics validation;
  nlohmann::json to_json() const;
};

// Single-example batches, examples shuffled per epoch. `progress` is called
// after each epoch with (epoch, mean loss).
SimTrainReport train(NeuralSim& model, const std::vector<SimExample>& train_set,
                     const std::vector<SimExample>& validation_set, const SimTrainConfig& cfg,
                     const std::function<void(int, double)>& progress = {});

}  // namespace gridsizer::nn

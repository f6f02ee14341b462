#pragma once

#include <functional>
#include <random>
#include <vector>

#include <json.hpp>

#include "gridsizer/diff/params.hpp"
#include "gridsizer/diff/tensor.hpp"
#include "gridsizer/nn/graph_input.hpp"
#include "gridsizer/nn/neural_sim.hpp"
#include "gridsizer/structure/skeleton.hpp"

namespace gridsizer::nn {

struct SizerConfig {
  int embed_dim = 512;
  int prop_steps = 5;
  double dropout = 0.5;
  double tau = 1.0;
  double alpha = 0.6;  // target entropy ratio
  double drift_limit = 0.015;
  double w0 = 1.0;
  // Initial multipliers and dual step sizes for l_dr, l_var, l_H.
  double w1 = 1e3, gamma1 = 1e-1;
  double w2 = 1.0, gamma2 = 5e-4;
  double w3 = 1.0, gamma3 = 1e-3;

  void validate() const;
  nlohmann::json to_json() const;
  static SizerConfig from_json(const nlohmann::json& j);
};

enum class SampleMode { hard, soft };

// Rows follow GraphInput::bar_nodes (the ground is never sized).
struct SizingOutput {
  ad::Tensor y;       // B x 9 one-hot (hard) or soft sample
  ad::Tensor logits;  // B x 9 decoder logits, column rows masked beyond slot 4
  std::vector<int> index;       // sampled slot per bar
  std::vector<double> p_soft;   // B x 9 softmax(logits), row-major
  std::vector<int> best;        // argmax of p_soft per bar
};

class NeuralSizer {
 public:
  NeuralSizer(const SizerConfig& cfg, std::uint64_t seed);
  explicit NeuralSizer(ad::ModelParams params);

  const SizerConfig& config() const { return cfg_; }
  ad::ModelParams& params() { return params_; }
  const ad::ModelParams& params() const { return params_; }
  void set_dropout(double p) { cfg_.dropout = p; }

  // Expects the 10-wide unsized layout.
  SizingOutput forward(const GraphInput& g, bool training, SampleMode mode, std::mt19937_64& rng) const;
  // Eval-mode logits without gradients; argmax per bar in `best`.
  SizingOutput propose(const GraphInput& g) const;

 private:
  SizerConfig cfg_;
  ad::ModelParams params_;
};

// Writes the per-bar section rows into the T block of the 10-wide features,
// giving the surrogate's 19-wide layout; the ground row stays all -1.
ad::Tensor stitch_sections(const GraphInput& g, const ad::Tensor& y);

// Per-bar constant matrix M with sum(y * M) = mean bar mass in tonnes.
ad::Tensor mass_weights(const GraphInput& g);
double mass_objective(const GraphInput& g, const std::vector<int>& slots);

ad::Tensor drift_loss(const ad::Tensor& h, double drift_scale, double drift_limit);
double drift_loss(const std::vector<double>& drifts, double drift_limit);
ad::Tensor variety_loss(const ad::Tensor& y);
double variety_loss(const std::vector<int>& slots);
ad::Tensor entropy_loss(const ad::Tensor& logits, double alpha);

struct SizerLosses {
  ad::Tensor obj, l_dr, l_var, l_h;
};

SizerLosses sizer_losses(const SizingOutput& out, const SimPrediction& sim, const GraphInput& g,
                         double drift_scale, const SizerConfig& cfg);

struct DualWeights {
  double w1 = 0.0, w2 = 0.0, w3 = 0.0;
};

// w0 * obj + w1 * l_dr + w2 * l_var + w3 * |l_H|.
ad::Tensor primal_loss(const SizerLosses& l, double w0, const DualWeights& w);

// w_i <- max(0, w_i + gamma_i * l_i).
DualWeights dual_step(const DualWeights& w, double l_dr, double l_var, double l_h, const SizerConfig& cfg);

struct SizerTrainConfig {
  int epochs = 50000;
  int update_every = 5;
  double lr = 1e-4;
  bool decay_dropout = true;
  std::uint64_t seed = 0;
  skel::SkeletonConfig sampler;
};

struct SizerEpoch {
  double obj = 0.0, l_dr = 0.0, l_var = 0.0, l_h = 0.0, total = 0.0;
  DualWeights weights;
};

struct SizerTrainReport {
  std::vector<SizerEpoch> epochs;
  nlohmann::json to_json() const;
};

// Fresh skeleton per epoch from `sampler`; gradients accumulate over
// update_every epochs before one Adam step and one dual step.
SizerTrainReport train_sizer(NeuralSizer& sizer, const NeuralSim& surrogate, const SizerTrainConfig& cfg,
                             const std::function<void(int, const SizerEpoch&)>& progress = {});

// Argmax designs on fixed skeletons, checked by the frame oracle.
struct SizerEvaluation {
  double obj = 0.0;            // tonnes per bar
  double l_dr_oracle = 0.0;    // mean over skeletons
  double l_dr_surrogate = 0.0;
  double l_var = 0.0;
  double max_drift = 0.0;
  std::size_t designs = 0;
  // Per design, in skeleton order.
  std::vector<double> design_l_dr, design_max_drift, design_surrogate_max_drift;
  nlohmann::json to_json() const;
};

SizerEvaluation evaluate_sizer(const NeuralSizer& sizer, const NeuralSim& surrogate,
                               const std::vector<skel::Skeleton>& skeletons, double drift_limit);

// Section index per bar (skeleton order) from sizer slots.
std::vector<int> slots_to_sections(const GraphInput& g, const std::vector<int>& slots);

}  // namespace gridsizer::nn

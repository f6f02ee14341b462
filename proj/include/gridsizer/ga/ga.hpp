#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridsizer/frame/oracle.hpp"
#include "gridsizer/nn/graph_input.hpp"
#include "gridsizer/nn/neural_sim.hpp"
#include "gridsizer/structure/skeleton.hpp"

namespace gridsizer::ga {

// One section index per bar, within the bar's own sub-library.
using Chromosome = std::vector<int>;

class GAError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fixed weights of the GA fitness; no entropy term.
struct FitnessWeights {
  double w0 = 1.0;
  double w1 = 1e3;
  double w2 = 1.0;
  double drift_limit = 0.015;
};

struct Fitness {
  double loss = 0.0;
  double obj = 0.0;
  double l_dr = 0.0;
  double l_var = 0.0;
};

class Evaluator {
 public:
  explicit Evaluator(const skel::Skeleton& sk, FitnessWeights w);
  virtual ~Evaluator() = default;

  // Throws GAError naming `id` when the underlying evaluation fails.
  Fitness evaluate(const Chromosome& c, std::size_t id = 0) const;
  virtual std::string tag() const = 0;

  const nn::GraphInput& graph() const { return graph_; }
  const FitnessWeights& weights() const { return weights_; }
  // Sub-library size per bar.
  const std::vector<int>& limits() const { return limits_; }

 protected:
  virtual std::vector<double> drifts(const Chromosome& c) const = 0;
  skel::Skeleton skeleton_;

 private:
  FitnessWeights weights_;
  nn::GraphInput graph_;
  std::vector<int> limits_;
};

class OracleEvaluator : public Evaluator {
 public:
  OracleEvaluator(const skel::Skeleton& sk, FitnessWeights w, frame::LoadModel lm = {});
  std::string tag() const override { return "oracle"; }

 protected:
  std::vector<double> drifts(const Chromosome& c) const override;

 private:
  frame::LoadModel lm_;
};

class SurrogateEvaluator : public Evaluator {
 public:
  SurrogateEvaluator(const skel::Skeleton& sk, FitnessWeights w, const nn::NeuralSim& model);
  std::string tag() const override { return "surrogate"; }

 protected:
  std::vector<double> drifts(const Chromosome& c) const override;

 private:
  nn::NeuralSim model_;
};

enum class Crossover { uniform, single_point };

struct GAConfig {
  int population = 100;
  int elites = 5;
  double crossover_rate = 0.9;
  double mutation_rate = 0.01;
  int iterations = 1000;
  Crossover crossover = Crossover::uniform;
  int threads = 1;

  void validate() const;
  nlohmann::json to_json() const;
};

struct Individual {
  Chromosome genes;
  Fitness fitness;
};

// Binary tournament with replacement.
const Individual& tournament(const std::vector<Individual>& pop, std::mt19937_64& rng);
Chromosome crossover(const Chromosome& a, const Chromosome& b, Crossover kind, std::mt19937_64& rng);
// Each gene is redrawn uniformly from its whole sub-library with probability `rate`.
void mutate(Chromosome& c, const std::vector<int>& limits, double rate, std::mt19937_64& rng);

// Elites (lowest loss) are copied; the rest are children of two tournament
// winners, crossed with probability crossover_rate, then mutated.
std::vector<Chromosome> step(const std::vector<Individual>& evaluated, const std::vector<int>& limits,
                             const GAConfig& cfg, std::mt19937_64& rng);

enum class Seeding { random, best_seed, sampled_seeds };
std::string to_string(Seeding s);
Seeding seeding_from_string(const std::string& s);

// p_soft: bars x 9 row-major sizer probabilities (required unless random).
std::vector<Chromosome> seed_population(Seeding strategy, const std::vector<int>& limits, int size,
                                        const std::vector<double>* p_soft, std::mt19937_64& rng);

struct GARun {
  std::string evaluator;
  std::string seeding;
  std::uint64_t seed = 0;
  GAConfig config;
  std::string skeleton_hash;
  std::vector<double> trace;  // best loss at each iteration, trace[0] = initial population
  // Fitness terms of that iteration's best individual.
  std::vector<double> obj_trace, l_dr_trace, l_var_trace;
  Chromosome best;
  Fitness best_fitness;
  std::size_t evaluations = 0;  // evaluator calls after caching

  nlohmann::json to_json() const;
  static GARun from_json(const nlohmann::json& j);
};

GARun run(const Evaluator& ev, const GAConfig& cfg, std::vector<Chromosome> initial, std::uint64_t seed,
          const std::string& seeding = "random");

struct SeedingMetrics {
  std::optional<double> m1;  // undefined when the random run made no progress
  std::optional<double> m2;  // undefined when rand_end == 0
  // First iteration whose seeded best reaches rand_end (ties count: both
  // runs often settle on the same optimum); undefined when it never does.
  std::optional<int> m3;
  nlohmann::json to_json() const;
};

SeedingMetrics seeding_metrics(const std::vector<double>& random_trace, const std::vector<double>& seeded_trace);

// Stable fingerprint of a skeleton's geometry (used to pair compared runs).
std::string skeleton_hash(const skel::Skeleton& sk);

double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace gridsizer::ga

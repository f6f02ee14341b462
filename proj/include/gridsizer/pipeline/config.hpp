#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridsizer/ga/ga.hpp"
#include "gridsizer/nn/neural_sim.hpp"
#include "gridsizer/nn/neural_sizer.hpp"
#include "gridsizer/structure/skeleton.hpp"

namespace gridsizer::pipeline {

// Collects every validation problem before reporting.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

enum class Profile { desk, paper };
Profile profile_from_string(const std::string& s);
std::string to_string(Profile p);

enum class Scenario { high_safety, low_safety };
double drift_limit(Scenario s);

struct DatasetSection {
  int count = 400;
  int stories_min = 1;
  int stories_max = 3;
  double base_min = 60.0;
  double base_max = 400.0;
  std::uint64_t seed = 1;
  std::filesystem::path path;
};

struct SimSection {
  nn::NeuralSimConfig model;
  nn::SimTrainConfig train;
  std::filesystem::path weights;
  std::filesystem::path report;
};

struct SizerSection {
  nn::SizerConfig model;
  nn::SizerTrainConfig train;
  Scenario scenario = Scenario::high_safety;
  // Replaces the scenario's limit when set.
  std::optional<double> drift_limit_override;
  int eval_count = 50;
  std::uint64_t eval_seed = 900000;
  std::filesystem::path weights;
  std::filesystem::path report;
};

struct GASection {
  ga::GAConfig ga;
  std::string evaluator = "surrogate";
  std::string seeding = "random";
  std::vector<std::uint64_t> skeleton_seeds;
  int stories_min = 1;
  int stories_max = 3;
  double base_min = 60.0;
  double base_max = 160.0;
  std::filesystem::path out;
};

struct ServeSection {
  std::string host = "127.0.0.1";
  int port = 8080;
  bool oracle = false;  // default evaluator for /api/simulate
};

struct RunConfig {
  Profile profile = Profile::desk;
  std::uint64_t seed = 0;
  DatasetSection dataset;
  SimSection sim;
  SizerSection sizer;
  GASection ga;
  ServeSection serve;

  static RunConfig defaults(Profile p);
  // Profile defaults (from the file's `profile` key unless `profile` is
  // given) overlaid with the file's keys. Unknown keys are errors.
  static RunConfig load(const std::filesystem::path& path, std::optional<Profile> profile = std::nullopt);
  static RunConfig parse(const std::string& text, std::optional<Profile> profile = std::nullopt);

  void validate() const;  // throws ConfigError listing all problems
  skel::SkeletonConfig dataset_sampler() const;
  skel::SkeletonConfig ga_sampler() const;
  nlohmann::json to_json() const;
};

}  // namespace gridsizer::pipeline

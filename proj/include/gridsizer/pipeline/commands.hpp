#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridsizer/ga/ga.hpp"
#include "gridsizer/pipeline/config.hpp"
#include "gridsizer/pipeline/dataset.hpp"

namespace gridsizer::pipeline {

// Bad or missing command-line input; the CLI exits with code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exclusive marker held for the duration of a training command. Creation
// fails when the file already exists.
class LockFile {
 public:
  explicit LockFile(std::filesystem::path path);
  ~LockFile();
  LockFile(const LockFile&) = delete;
  LockFile& operator=(const LockFile&) = delete;

 private:
  std::filesystem::path path_;
};

// Writes the dataset and its split manifest; returns the header JSON.
nlohmann::json cmd_gen(const RunConfig& cfg, const std::filesystem::path& out, int threads, std::ostream& log);

// Metrics row in the layout of the surrogate comparison table: L1 x 1e4 in
// drift-ratio units, relative and classification accuracy in percent.
nlohmann::json metrics_row(const nn::SimMetrics& m, double drift_scale);

struct SimArtifacts {
  std::filesystem::path weights;
  std::filesystem::path report;  // empty: not written
};

// Trains on the train split, reports train/validation/test rows plus a
// per-story-count breakdown of the test split.
nlohmann::json cmd_train_sim(const RunConfig& cfg, const std::filesystem::path& dataset, const SimArtifacts& out,
                             std::ostream& log);

std::vector<skel::Skeleton> sizer_eval_skeletons(const RunConfig& cfg);

// Trains against a frozen surrogate and evaluates argmax designs with the
// oracle. Throws ad::FormatError when the surrogate's layout differs.
nlohmann::json cmd_train_sizer(const RunConfig& cfg, const std::filesystem::path& surrogate,
                               const SimArtifacts& out, std::ostream& log);

struct GAInputs {
  std::optional<std::filesystem::path> surrogate;  // required for the surrogate evaluator
  std::optional<std::filesystem::path> sizer;      // required for seeded strategies
};

ga::FitnessWeights fitness_weights(const RunConfig& cfg);

// One GA run per configured skeleton seed. Writes <out> (JSON artifact) and
// <out>.csv (iteration traces).
nlohmann::json cmd_ga(const RunConfig& cfg, const GAInputs& in, const std::filesystem::path& out, std::ostream& log);

// Seeding metrics of every artifact against the first one (the baseline),
// paired by skeleton hash. Writes <out> (JSON with per-skeleton rows,
// medians and plot series) and <out>.csv.
nlohmann::json compare_runs(const std::vector<nlohmann::json>& artifacts);
nlohmann::json cmd_compare(const std::vector<std::filesystem::path>& artifacts, const std::filesystem::path& out,
                           std::ostream& log);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace gridsizer::pipeline

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridsizer/frame/oracle.hpp"
#include "gridsizer/nn/neural_sim.hpp"
#include "gridsizer/structure/graph.hpp"
#include "gridsizer/structure/skeleton.hpp"

namespace gridsizer::pipeline {

inline constexpr const char* kDatasetFormat = "gridsizer-dataset/1";

// Fingerprint of the oracle's load model and solver revision.
std::string oracle_hash(const frame::LoadModel& lm = {});

struct DatasetHeader {
  std::string format = kDatasetFormat;
  std::size_t count = 0;
  double scale = 1.0;  // drift = normalized * scale
  std::uint64_t seed = 0;
  int stories_min = 1;
  int stories_max = 10;
  std::string oracle_hash;
  std::string layout_hash;
  std::size_t replaced = 0;  // skeletons skipped after oracle failures

  nlohmann::json to_json() const;
  static DatasetHeader from_json(const nlohmann::json& j);
};

struct DatasetRecord {
  std::uint64_t skeleton_seed = 0;
  std::uint64_t section_seed = 0;
  skel::StructuralGraph graph;   // sized, 19-wide
  std::vector<double> drift_x;   // normalized
  std::vector<double> drift_y;
  double mass = 0.0;             // lb

  nlohmann::json to_json() const;
  static DatasetRecord from_json(const nlohmann::json& j, const std::string& pointer = "");
};

struct Dataset {
  DatasetHeader header;
  std::vector<DatasetRecord> records;
};

struct Split {
  std::vector<std::size_t> train, validation, test;
  nlohmann::json to_json() const;
  static Split from_json(const nlohmann::json& j);
};

struct GenerateOptions {
  std::size_t count = 400;
  skel::SkeletonConfig sampler;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency
  frame::LoadModel loads;
};

// Record i uses skeleton seed derived from (seed, i); a failing oracle solve
// moves to the next derived seed. Output order is independent of threads.
Dataset generate_dataset(const GenerateOptions& opt);

// 80/10/10 shuffle split, deterministic in `seed`.
Split split_dataset(std::size_t count, std::uint64_t seed);

// JSONL: header line then one record per line; split manifest next to it
// at <path>.split.json.
void write_dataset(const Dataset& d, const std::filesystem::path& path, const Split& split);
Dataset read_dataset(const std::filesystem::path& path);
Split read_split(const std::filesystem::path& dataset_path);
std::filesystem::path split_path(const std::filesystem::path& dataset_path);

// Drifts are re-expressed in `target_scale` units when given (evaluating a
// model on a dataset normalized with a different scale).
std::vector<nn::SimExample> to_examples(const Dataset& d, const std::vector<std::size_t>& indices,
                                        std::optional<double> target_scale = std::nullopt);

}  // namespace gridsizer::pipeline

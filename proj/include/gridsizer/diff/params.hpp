#pragma once

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridsizer/diff/tensor.hpp"

namespace gridsizer::ad {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Named trainable tensors in insertion order plus the metadata needed to
// reproduce or validate a model: a version tag, free-form string attributes
// (config, layout hash, ...) and the RNG state used for dropout/Gumbel draws.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(std::string version) : version_(std::move(version)) {}

  // Registers a trainable leaf; names must be unique.
  Tensor& add(const std::string& name, Tensor t);
  // Xavier-uniform weight (fan_in x fan_out) and zero bias.
  Tensor& add_xavier(const std::string& name, int fan_in, int fan_out, std::mt19937_64& rng);
  Tensor& add_zeros(const std::string& name, int rows, int cols);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  std::size_t scalar_count() const;
  std::vector<Tensor> tensors() const;

  void zero_grad();
  // Multiply every accumulated gradient by s (for averaging over a batch).
  void scale_grad(double s);

  const std::string& version() const { return version_; }
  void set_version(std::string v) { version_ = std::move(v); }
  std::map<std::string, std::string>& attributes() { return attributes_; }
  const std::map<std::string, std::string>& attributes() const { return attributes_; }
  const std::string& rng_state() const { return rng_state_; }
  void set_rng_state(const std::mt19937_64& rng);
  void restore_rng(std::mt19937_64& rng) const;

  // Deep copy: fresh leaves with the same values and metadata.
  ModelParams clone() const;

  // Binary container: magic, format number, version tag, attributes, RNG
  // state, name table, shape table, little-endian float64 payload.
  void save(const std::filesystem::path& path) const;
  static ModelParams load(const std::filesystem::path& path);
  std::string to_bytes() const;
  static ModelParams from_bytes(const std::string& bytes);
  nlohmann::json to_json() const;

 private:
  std::string version_ = "unversioned";
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, std::string> attributes_;
  std::string rng_state_;
};

// Adam with decoupled weight decay.
struct AdamW {
  double lr = 1e-4;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  // Tensors without a gradient are treated as having a zero gradient.
  void step(ModelParams& params);
  long steps() const { return t_; }

 private:
  long t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

}  // namespace gridsizer::ad

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

#include "gridsizer/nn/neural_sim.hpp"
#include "gridsizer/nn/neural_sizer.hpp"
#include "gridsizer/pipeline/config.hpp"

namespace gridsizer::pipeline {

struct Response {
  int status = 200;
  nlohmann::json body;
};

// Pure request handlers over frozen models. Every body carries `hashes`
// (surrogate, sizer, config, oracle, layout). Errors: 400 with a JSON
// pointer for malformed input, 422 for structures that cannot be analysed
// (disconnected, mechanisms, graphs that are not grid skeletons), 503 when
// the sizer is not loaded.
class Service {
 public:
  Service(const nn::NeuralSim& surrogate, std::optional<nn::NeuralSizer> sizer, RunConfig cfg,
          std::string surrogate_hash, std::string sizer_hash);
  static Service load(const std::filesystem::path& surrogate, const std::optional<std::filesystem::path>& sizer,
                      const RunConfig& cfg);

  // POST /api/simulate {skeleton | graph, sections?, source?, drift_limit?}
  Response simulate(const nlohmann::json& request) const;
  // POST /api/size {skeleton | graph}
  Response size(const nlohmann::json& request) const;
  // GET /api/skeleton?seed=N&stories=K
  Response skeleton(const std::map<std::string, std::string>& query) const;
  // GET /api/sections
  Response sections() const;

  // Routes a raw request; `body` is parsed for POST routes.
  Response handle(const std::string& method, const std::string& path, const std::string& body,
                  const std::map<std::string, std::string>& query) const;

  const nlohmann::json& hashes() const { return hashes_; }
  double drift_limit() const { return cfg_.sizer.model.drift_limit; }

 private:
  Response finish(Response r) const;

  nn::NeuralSim surrogate_;
  std::optional<nn::NeuralSizer> sizer_;
  RunConfig cfg_;
  nlohmann::json hashes_;
};

// Blocks serving `service` on host:port.
void serve(const Service& service, const std::string& host, int port, std::ostream& log);

}  // namespace gridsizer::pipeline

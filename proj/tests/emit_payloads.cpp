// Writes one example of every JSON payload the tools produce, named
// <kind>.json, into the directory given as argv[1]. Everything is seeded, so
// the output is stable across runs.
#include <filesystem>
#include <iostream>
#include <sstream>

#include "gridsizer/diff/params.hpp"
#include "gridsizer/pipeline/commands.hpp"
#include "gridsizer/pipeline/config.hpp"
#include "gridsizer/pipeline/dataset.hpp"
#include "gridsizer/pipeline/service.hpp"
#include "gridsizer/structure/graph.hpp"
#include "gridsizer/structure/json_io.hpp"

using namespace gridsizer;
using namespace gridsizer::pipeline;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: emit_payloads <out-dir>\n";
    return 2;
  }
  const fs::path out = argv[1];
  fs::create_directories(out);
  const fs::path work = out / "work";
  fs::create_directories(work);
  auto put = [&](const std::string& kind, const nlohmann::json& j) { write_json(out / (kind + ".json"), j); };

  auto cfg = RunConfig::defaults(Profile::desk);
  cfg.dataset.count = 10;
  cfg.dataset.base_max = 110;
  cfg.sim.model.embed_dim = 8;
  cfg.sim.train.epochs = 1;
  cfg.sizer.model.embed_dim = 8;
  cfg.sizer.train.epochs = 2;
  cfg.sizer.eval_count = 2;
  cfg.ga.ga.population = 8;
  cfg.ga.ga.elites = 1;
  cfg.ga.ga.iterations = 4;
  cfg.ga.skeleton_seeds = {1, 2};
  cfg.ga.base_max = 90;
  std::ostringstream log;

  skel::SkeletonConfig sc;
  sc.stories_min = sc.stories_max = 2;
  sc.base_min = 60;
  sc.base_max = 90;
  auto sk = skel::sample_skeleton(3, sc);
  const auto sections = skel::assign_random_sections(sk, 4);
  put("skeleton", skel::skeleton_to_json(sk));
  put("graph", skel::graph_to_json(skel::to_graph(sk, sections)));

  put("dataset_header", cmd_gen(cfg, work / "d.jsonl", 1, log));
  const auto d = read_dataset(work / "d.jsonl");
  put("dataset_record", d.records.front().to_json());
  put("split", read_split(work / "d.jsonl").to_json());
  put("sim_report", cmd_train_sim(cfg, work / "d.jsonl", {work / "sim.gsw", ""}, log));
  put("sizer_report", cmd_train_sizer(cfg, work / "sim.gsw", {work / "sizer.gsw", ""}, log));

  const auto svc = Service::load(work / "sim.gsw", work / "sizer.gsw", cfg);
  nlohmann::json req = {{"skeleton", skel::skeleton_to_json(sk)}, {"sections", sections}, {"source", "oracle"}};
  put("simulate_request", req);
  put("simulate_response_oracle", svc.simulate(req).body);
  req["drift_limit"] = 1e-9;
  put("simulate_response_violations", svc.simulate(req).body);
  req.erase("drift_limit");
  req["source"] = "surrogate";
  put("simulate_response_surrogate", svc.simulate(req).body);
  put("size_request", {{"skeleton", skel::skeleton_to_json(sk)}});
  put("size_response", svc.size({{"skeleton", skel::skeleton_to_json(sk)}}).body);
  put("skeleton_response", svc.skeleton({{"seed", "5"}, {"stories", "2"}}).body);
  put("sections_response", svc.sections().body);
  req["sections"][0] = 42;
  put("error_400", svc.simulate(req).body);
  auto g = skel::to_graph(sk, sections);
  g.node_features[static_cast<std::size_t>(skel::aux_offset(g.feature_width) + 2)] += 1.0;
  put("error_422", svc.simulate({{"graph", skel::graph_to_json(g)}}).body);
  const auto no_sizer = Service::load(work / "sim.gsw", std::nullopt, cfg);
  put("error_503", no_sizer.size({{"skeleton", skel::skeleton_to_json(sk)}}).body);

  cfg.ga.evaluator = "oracle";
  const auto random = cmd_ga(cfg, {}, work / "ga_random.json", log);
  cfg.ga.seeding = "sampled_seeds";
  GAInputs in;
  in.sizer = work / "sizer.gsw";
  const auto seeded = cmd_ga(cfg, in, work / "ga_seeded.json", log);
  put("ga_artifact", seeded);
  put("compare", compare_runs({random, seeded}));
  put("config", cfg.to_json());
  fs::remove_all(work);
  return 0;
}

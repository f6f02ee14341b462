// gridsizer command-line entry point.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gridsizer/diff/params.hpp"
#include "gridsizer/pipeline/commands.hpp"
#include "gridsizer/pipeline/config.hpp"
#include "gridsizer/pipeline/service.hpp"
#include "gridsizer/util/allocator.hpp"

namespace gp = gridsizer::pipeline;

namespace {

struct Common {
  std::string config;
  std::string profile;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "config file (INI sections dataset/sim/sizer/ga/serve)");
  cmd->add_option("--profile", c.profile, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--seed", c.seed, "global seed for training and GA");
}

gp::RunConfig resolve(const Common& c) {
  std::optional<gp::Profile> p;
  if (!c.profile.empty()) p = gp::profile_from_string(c.profile);
  gp::RunConfig cfg = c.config.empty() ? gp::RunConfig::defaults(p.value_or(gp::Profile::desk))
                                       : gp::RunConfig::load(c.config, p);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  gridsizer::tune_allocator();
  CLI::App app{"gridsizer: surrogate-assisted cross-section sizing for grid steel frames"};
  app.require_subcommand(1);

  Common c;
  std::string out, dataset, surrogate, sizer, seeding, evaluator, host;
  std::string report;
  std::vector<std::string> runs;
  int threads = 0;
  int port = 0;
  int count = 0;
  bool oracle = false;

  auto* gen = app.add_subcommand("gen", "generate a JSONL dataset and its split manifest");
  add_common(gen, c);
  gen->add_option("--out", out, "dataset path (.jsonl)");
  gen->add_option("--count", count, "override dataset.count");
  gen->add_option("--threads", threads, "oracle worker threads (0 = all cores)");

  auto* tsim = app.add_subcommand("train-sim", "train the drift surrogate");
  add_common(tsim, c);
  tsim->add_option("--dataset", dataset, "dataset written by gen");
  tsim->add_option("--out", out, "weights path");
  tsim->add_option("--report", report, "report JSON path");

  auto* tsz = app.add_subcommand("train-sizer", "train the sizing network against a frozen surrogate");
  add_common(tsz, c);
  tsz->add_option("--surrogate", surrogate, "surrogate weights");
  tsz->add_option("--out", out, "weights path");
  tsz->add_option("--report", report, "report JSON path");

  auto* ga = app.add_subcommand("ga", "genetic-algorithm runs over the configured skeleton seeds");
  add_common(ga, c);
  ga->add_option("--surrogate", surrogate, "surrogate weights (surrogate evaluator)");
  ga->add_option("--sizer", sizer, "sizer weights (seeded strategies)");
  ga->add_option("--seeding", seeding, "random, best_seed or sampled_seeds");
  ga->add_option("--evaluator", evaluator, "surrogate or oracle");
  ga->add_option("--out", out, "run artifact path (.json)");

  auto* cmp = app.add_subcommand("compare", "seeding metrics of GA artifacts against the first (baseline)");
  cmp->add_option("runs", runs, "GA artifacts, baseline first")->required();
  cmp->add_option("--out", out, "comparison path (.json)");

  auto* srv = app.add_subcommand("serve", "HTTP API over frozen models");
  add_common(srv, c);
  srv->add_option("--surrogate", surrogate, "surrogate weights");
  srv->add_option("--sizer", sizer, "sizer weights");
  srv->add_option("--host", host, "bind address");
  srv->add_option("--port", port, "port");
  srv->add_flag("--oracle", oracle, "default /api/simulate to the frame oracle");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      auto cfg = resolve(c);
      if (count > 0) cfg.dataset.count = count;
      cfg.validate();
      gp::cmd_gen(cfg, out, threads, std::cout);
    } else if (*tsim) {
      gp::cmd_train_sim(resolve(c), dataset, {out, report}, std::cout);
    } else if (*tsz) {
      gp::cmd_train_sizer(resolve(c), surrogate, {out, report}, std::cout);
    } else if (*ga) {
      auto cfg = resolve(c);
      if (!seeding.empty()) cfg.ga.seeding = seeding;
      if (!evaluator.empty()) cfg.ga.evaluator = evaluator;
      cfg.validate();
      gp::GAInputs in;
      if (!surrogate.empty()) in.surrogate = surrogate;
      if (!sizer.empty()) in.sizer = sizer;
      gp::cmd_ga(cfg, in, out, std::cout);
    } else if (*cmp) {
      std::vector<std::filesystem::path> paths(runs.begin(), runs.end());
      gp::cmd_compare(paths, out, std::cout);
    } else if (*srv) {
      auto cfg = resolve(c);
      if (!host.empty()) cfg.serve.host = host;
      if (port > 0) cfg.serve.port = port;
      if (oracle) cfg.serve.oracle = true;
      cfg.validate();
      if (surrogate.empty()) throw gp::UsageError("--surrogate is required for serve");
      std::optional<std::filesystem::path> sz;
      if (!sizer.empty()) sz = sizer;
      const gp::Service service(gp::Service::load(surrogate, sz, cfg));
      gp::serve(service, cfg.serve.host, cfg.serve.port, std::cout);
    }
  } catch (const gp::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const gp::ConfigError& e) {
    std::cerr << "configuration errors:\n";
    for (const auto& p : e.problems()) std::cerr << "  " << p << "\n";
    return 2;
  } catch (const gridsizer::ad::FormatError& e) {
    std::cerr << "error: incompatible model: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include "gridsizer/pipeline/commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "gridsizer/nn/neural_sizer.hpp"
#include "gridsizer/util/hash.hpp"

namespace gridsizer::pipeline {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::string file_hash(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + p.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return hash_hex(bytes);
}

fs::path lock_path(const fs::path& weights) { return weights.string() + ".lock"; }

std::optional<double> median(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

LockFile::LockFile(fs::path path) : path_(std::move(path)) {
  ensure_parent(path_);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST)
      throw std::runtime_error("another training run holds " + path_.string() + " (remove it if stale)");
    throw std::runtime_error("cannot create lock " + path_.string() + ": " + std::strerror(errno));
  }
  const auto pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

LockFile::~LockFile() {
  std::error_code ec;
  fs::remove(path_, ec);
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  ensure_parent(path);
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

nlohmann::json cmd_gen(const RunConfig& cfg, const fs::path& out, int threads, std::ostream& log) {
  if (out.empty()) throw UsageError("--out is required for gen");
  const auto t0 = Clock::now();
  GenerateOptions opt;
  opt.count = static_cast<std::size_t>(cfg.dataset.count);
  opt.sampler = cfg.dataset_sampler();
  opt.seed = cfg.dataset.seed;
  opt.threads = threads;
  const auto d = generate_dataset(opt);
  write_dataset(d, out, split_dataset(d.records.size(), cfg.dataset.seed));
  log << "gen: " << d.records.size() << " records, scale " << d.header.scale << ", " << d.header.replaced
      << " skeleton(s) replaced after oracle failures, " << seconds_since(t0) << " s\n";
  return d.header.to_json();
}

nlohmann::json metrics_row(const nn::SimMetrics& m, double drift_scale) {
  return {{"l1_x1e4", m.l1 * drift_scale * 1e4},
          {"l1_normalized", m.l1},
          {"relative_accuracy", 100.0 * m.relative_accuracy},
          {"classification_accuracy", 100.0 * m.classification_accuracy},
          {"entries", m.entries}};
}

nlohmann::json cmd_train_sim(const RunConfig& cfg, const fs::path& dataset, const SimArtifacts& out,
                             std::ostream& log) {
  if (dataset.empty()) throw UsageError("--dataset is required for train-sim");
  if (out.weights.empty()) throw UsageError("--out is required for train-sim");
  LockFile lock(lock_path(out.weights));
  const auto t0 = Clock::now();
  const auto d = read_dataset(dataset);
  if (d.header.layout_hash != nn::layout_hash(skel::kFeatureWidthSized))
    throw ad::FormatError(dataset.string() + ": dataset feature layout " + d.header.layout_hash +
                          " does not match this build's " + nn::layout_hash(skel::kFeatureWidthSized));
  const auto split = read_split(dataset);
  const auto train_set = to_examples(d, split.train);
  const auto val_set = to_examples(d, split.validation);
  const auto test_set = to_examples(d, split.test);

  auto train_cfg = cfg.sim.train;
  train_cfg.seed = cfg.seed;
  nn::NeuralSim model(cfg.sim.model, d.header.scale, cfg.seed);
  log << "train-sim: " << train_set.size() << " train / " << val_set.size() << " validation / " << test_set.size()
      << " test graphs, " << model.params().scalar_count() << " parameters\n";
  const auto rep = nn::train(model, train_set, val_set, train_cfg, [&](int epoch, double loss) {
    log << "  epoch " << epoch + 1 << "/" << train_cfg.epochs << " loss " << loss << "\n" << std::flush;
  });
  model.params().attributes()["dataset_oracle_hash"] = d.header.oracle_hash;
  ensure_parent(out.weights);
  model.params().save(out.weights);

  const auto test = nn::evaluate(model, test_set);
  std::map<int, std::vector<std::size_t>> buckets;
  for (auto i : split.test) buckets[d.records[i].graph.story_count()].push_back(i);
  nlohmann::json by_stories = nlohmann::json::array();
  for (const auto& [k, idx] : buckets) {
    auto row = metrics_row(nn::evaluate(model, to_examples(d, idx)), d.header.scale);
    row["stories"] = k;
    row["graphs"] = idx.size();
    by_stories.push_back(row);
  }
  nlohmann::json report = {
      {"model", cfg.sim.model.use_position_aware ? "NeuralSim + PGNN" : "NeuralSim"},
      {"config", cfg.sim.model.to_json()},
      {"train", {{"lr", train_cfg.lr}, {"weight_decay", train_cfg.weight_decay}, {"epochs", train_cfg.epochs}}},
      {"dataset", {{"path", dataset.string()}, {"header", d.header.to_json()}}},
      {"epoch_loss", rep.epoch_loss},
      {"rows",
       {{{"split", "train"}, {"metrics", metrics_row(rep.train, d.header.scale)}},
        {{"split", "validation"}, {"metrics", metrics_row(rep.validation, d.header.scale)}},
        {{"split", "test"}, {"metrics", metrics_row(test, d.header.scale)}}}},
      {"test_by_stories", by_stories},
      {"weights", {{"path", out.weights.string()}, {"hash", file_hash(out.weights)}}},
      {"seconds", seconds_since(t0)}};
  if (!out.report.empty()) write_json(out.report, report);
  log << "train-sim: test relative accuracy " << 100.0 * test.relative_accuracy << " %, classification "
      << 100.0 * test.classification_accuracy << " %\n";
  return report;
}

std::vector<skel::Skeleton> sizer_eval_skeletons(const RunConfig& cfg) {
  std::vector<skel::Skeleton> out;
  for (int i = 0; i < cfg.sizer.eval_count; ++i)
    out.push_back(skel::sample_skeleton(cfg.sizer.eval_seed + static_cast<std::uint64_t>(i), cfg.sizer.train.sampler));
  return out;
}

nlohmann::json cmd_train_sizer(const RunConfig& cfg, const fs::path& surrogate, const SimArtifacts& out,
                               std::ostream& log) {
  if (surrogate.empty()) throw UsageError("--surrogate is required for train-sizer");
  if (out.weights.empty()) throw UsageError("--out is required for train-sizer");
  const auto t0 = Clock::now();
  nn::NeuralSim sim(ad::ModelParams::load(surrogate));
  LockFile lock(lock_path(out.weights));
  auto train_cfg = cfg.sizer.train;
  train_cfg.seed = cfg.seed;
  nn::NeuralSizer sizer(cfg.sizer.model, cfg.seed);
  log << "train-sizer: " << train_cfg.epochs << " epochs, " << sizer.params().scalar_count() << " parameters, lim "
      << cfg.sizer.model.drift_limit << "\n";
  const int every = std::max(1, train_cfg.epochs / 20);
  const auto rep = nn::train_sizer(sizer, sim, train_cfg, [&](int epoch, const nn::SizerEpoch& e) {
    if ((epoch + 1) % every == 0)
      log << "  epoch " << epoch + 1 << " obj " << e.obj << " l_dr " << e.l_dr << " l_var " << e.l_var << " l_H "
          << e.l_h << " w " << e.weights.w1 << "/" << e.weights.w2 << "/" << e.weights.w3 << "\n"
          << std::flush;
  });
  sizer.params().attributes()["surrogate_hash"] = file_hash(surrogate);
  ensure_parent(out.weights);
  sizer.params().save(out.weights);

  const auto ev = nn::evaluate_sizer(sizer, sim, sizer_eval_skeletons(cfg), cfg.sizer.model.drift_limit);
  nlohmann::json report = {
      {"scenario", cfg.sizer.scenario == Scenario::high_safety ? "high_safety" : "low_safety"},
      {"drift_limit", cfg.sizer.model.drift_limit},
      {"objective_weight", cfg.sizer.model.w0},
      {"mass_objective", ev.obj},
      {"drift_ratio_constraint", ev.l_dr_oracle},
      {"variety_constraint", ev.l_var},
      {"evaluation", ev.to_json()},
      {"eval_seeds", {cfg.sizer.eval_seed, cfg.sizer.eval_seed + static_cast<std::uint64_t>(cfg.sizer.eval_count) - 1}},
      {"config", cfg.sizer.model.to_json()},
      {"training", rep.to_json()},
      {"surrogate", {{"path", surrogate.string()}, {"hash", file_hash(surrogate)}}},
      {"weights", {{"path", out.weights.string()}, {"hash", file_hash(out.weights)}}},
      {"seconds", seconds_since(t0)}};
  if (!out.report.empty()) write_json(out.report, report);
  log << "train-sizer: mass " << ev.obj << " l_dr(oracle) " << ev.l_dr_oracle << " l_var " << ev.l_var
      << " max drift " << ev.max_drift << "\n";
  return report;
}

ga::FitnessWeights fitness_weights(const RunConfig& cfg) {
  ga::FitnessWeights w;
  w.w0 = cfg.sizer.model.w0;
  w.drift_limit = cfg.sizer.model.drift_limit;
  return w;
}

nlohmann::json cmd_ga(const RunConfig& cfg, const GAInputs& in, const fs::path& out, std::ostream& log) {
  if (out.empty()) throw UsageError("--out is required for ga");
  const auto seeding = ga::seeding_from_string(cfg.ga.seeding);
  std::optional<nn::NeuralSim> sim;
  std::optional<nn::NeuralSizer> sizer;
  nlohmann::json models = nlohmann::json::object();
  if (cfg.ga.evaluator == "surrogate") {
    if (!in.surrogate) throw UsageError("--surrogate is required for the surrogate evaluator");
    sim.emplace(ad::ModelParams::load(*in.surrogate));
    models["surrogate"] = file_hash(*in.surrogate);
  }
  if (seeding != ga::Seeding::random) {
    if (!in.sizer) throw UsageError("--sizer is required for seeding '" + cfg.ga.seeding + "'");
    sizer.emplace(ad::ModelParams::load(*in.sizer));
    models["sizer"] = file_hash(*in.sizer);
  }
  const auto w = fitness_weights(cfg);
  const auto t0 = Clock::now();
  nlohmann::json runs = nlohmann::json::array();
  for (auto s : cfg.ga.skeleton_seeds) {
    const auto sk = skel::sample_skeleton(s, cfg.ga_sampler());
    std::unique_ptr<ga::Evaluator> ev;
    if (sim)
      ev = std::make_unique<ga::SurrogateEvaluator>(sk, w, *sim);
    else
      ev = std::make_unique<ga::OracleEvaluator>(sk, w);
    std::vector<double> p_soft;
    if (sizer) p_soft = sizer->propose(ev->graph()).p_soft;
    std::mt19937_64 rng(mix(cfg.seed ^ mix(s)));
    auto initial = ga::seed_population(seeding, ev->limits(), cfg.ga.ga.population, sizer ? &p_soft : nullptr, rng);
    auto r = ga::run(*ev, cfg.ga.ga, std::move(initial), mix(cfg.seed + s), cfg.ga.seeding);
    r.skeleton_hash = ga::skeleton_hash(sk);
    auto j = r.to_json();
    j["skeleton_seed"] = s;
    j["bars"] = sk.bars.size();
    j["stories"] = sk.stories;
    runs.push_back(std::move(j));
    log << "ga: skeleton " << s << " (" << sk.bars.size() << " bars) " << cfg.ga.seeding << " start "
        << r.trace.front() << " end " << r.trace.back() << "\n"
        << std::flush;
  }
  nlohmann::json artifact = {{"format", "gridsizer-ga/1"},
                             {"seeding", cfg.ga.seeding},
                             {"evaluator", cfg.ga.evaluator},
                             {"models", models},
                             {"fitness",
                              {{"w0", w.w0}, {"w1", w.w1}, {"w2", w.w2}, {"drift_limit", w.drift_limit}}},
                             {"runs", runs},
                             {"seconds", seconds_since(t0)}};
  write_json(out, artifact);
  ensure_parent(out);
  std::ofstream csv(out.string() + ".csv");
  csv << "skeleton_seed,skeleton_hash,iteration,loss,objective,drift_constraint,variety_constraint\n";
  csv.precision(17);
  for (const auto& r : runs) {
    const auto trace = r.at("trace").get<std::vector<double>>();
    const auto& c = r.at("components");
    for (std::size_t t = 0; t < trace.size(); ++t)
      csv << r.at("skeleton_seed").get<std::uint64_t>() << ',' << r.at("skeleton_hash").get<std::string>() << ','
          << t << ',' << trace[t] << ',' << c.at("objective")[t].get<double>() << ','
          << c.at("drift_constraint")[t].get<double>() << ',' << c.at("variety_constraint")[t].get<double>() << '\n';
  }
  return artifact;
}

nlohmann::json compare_runs(const std::vector<nlohmann::json>& artifacts) {
  if (artifacts.empty()) throw UsageError("compare needs at least one artifact");
  const std::vector<std::pair<std::string, std::string>> columns = {{"loss", ""},
                                                                    {"objective", "objective"},
                                                                    {"drift_constraint", "drift_constraint"},
                                                                    {"variety_constraint", "variety_constraint"}};
  auto trace_of = [](const nlohmann::json& run, const std::string& component) {
    if (component.empty()) return run.at("trace").get<std::vector<double>>();
    return run.at("components").at(component).get<std::vector<double>>();
  };
  auto by_hash = [](const nlohmann::json& a) {
    std::map<std::string, nlohmann::json> m;
    for (const auto& r : a.at("runs")) {
      const auto h = r.at("skeleton_hash").get<std::string>();
      if (!m.emplace(h, r).second) throw std::runtime_error("artifact lists skeleton " + h + " twice");
    }
    return m;
  };
  const auto& base = artifacts.front();
  const auto base_runs = by_hash(base);
  std::set<std::string> base_keys;
  for (const auto& [h, r] : base_runs) base_keys.insert(h);

  nlohmann::json comparisons = nlohmann::json::array();
  nlohmann::json series = nlohmann::json::array();
  auto add_series = [&](const nlohmann::json& a) {
    std::vector<double> mean;
    std::size_t n = 0;
    for (const auto& r : a.at("runs")) {
      const auto t = r.at("trace").get<std::vector<double>>();
      if (mean.empty()) mean.assign(t.size(), 0.0);
      if (t.size() != mean.size()) throw std::runtime_error("runs in one artifact have different trace lengths");
      for (std::size_t i = 0; i < t.size(); ++i) mean[i] += t[i];
      ++n;
    }
    for (auto& v : mean) v /= static_cast<double>(std::max<std::size_t>(n, 1));
    series.push_back({{"strategy", a.at("seeding")}, {"evaluator", a.at("evaluator")}, {"mean_best_loss", mean}});
  };
  add_series(base);
  // A lone artifact is compared with itself.
  for (std::size_t k = artifacts.size() == 1 ? 0 : 1; k < artifacts.size(); ++k) {
    const auto& other = artifacts[k];
    if (k > 0) add_series(other);
    const auto runs = by_hash(other);
    std::set<std::string> keys;
    for (const auto& [h, r] : runs) keys.insert(h);
    if (keys != base_keys)
      throw std::runtime_error("artifact " + std::to_string(k) + " (" + other.at("seeding").get<std::string>() +
                               ") covers different skeletons than the baseline; skeleton hashes do not match");
    nlohmann::json rows = nlohmann::json::array();
    std::map<std::string, std::array<std::vector<double>, 3>> pooled;
    for (const auto& [h, r] : runs) {
      const auto& b = base_runs.at(h);
      nlohmann::json row = {{"skeleton_hash", h}, {"skeleton_seed", r.value("skeleton_seed", std::uint64_t{0})}};
      for (const auto& [name, comp] : columns) {
        const auto m = ga::seeding_metrics(trace_of(b, comp), trace_of(r, comp));
        row[name] = m.to_json();
        if (m.m1) pooled[name][0].push_back(*m.m1);
        if (m.m2) pooled[name][1].push_back(*m.m2);
        // Undefined M3 (never caught up) ranks above any iteration.
        pooled[name][2].push_back(m.m3 ? static_cast<double>(*m.m3) : HUGE_VAL);
      }
      rows.push_back(std::move(row));
    }
    nlohmann::json aggregate = nlohmann::json::object();
    for (const auto& [name, comp] : columns) {
      auto& p = pooled[name];
      auto m3 = median(p[2]);
      aggregate[name] = {{"M1", opt_json(median(p[0]))},
                         {"M2", opt_json(median(p[1]))},
                         {"M3", m3 && std::isfinite(*m3) ? nlohmann::json(*m3) : nlohmann::json(nullptr)},
                         {"M1_positive", std::count_if(p[0].begin(), p[0].end(), [](double v) { return v > 0.0; })},
                         {"skeletons", rows.size()}};
    }
    comparisons.push_back({{"baseline", base.at("seeding")},
                           {"strategy", other.at("seeding")},
                           {"evaluator", other.at("evaluator")},
                           {"per_skeleton", rows},
                           {"median", aggregate}});
  }
  return {{"format", "gridsizer-compare/1"}, {"comparisons", comparisons}, {"plot", series}};
}

nlohmann::json cmd_compare(const std::vector<fs::path>& paths, const fs::path& out, std::ostream& log) {
  if (paths.empty()) throw UsageError("--runs needs at least one GA artifact");
  if (out.empty()) throw UsageError("--out is required for compare");
  std::vector<nlohmann::json> artifacts;
  for (const auto& p : paths) artifacts.push_back(read_json(p));
  if (artifacts.front().at("seeding") != "random")
    log << "compare: warning: baseline " << paths.front() << " uses seeding "
        << artifacts.front().at("seeding").get<std::string>() << ", not random\n";
  auto result = compare_runs(artifacts);
  write_json(out, result);
  std::ofstream csv(out.string() + ".csv");
  csv << "strategy,skeleton_hash,column,M1,M2,M3\n";
  csv.precision(17);
  auto cell = [](const nlohmann::json& v) { return v.is_null() ? std::string() : v.dump(); };
  for (const auto& c : result.at("comparisons"))
    for (const auto& row : c.at("per_skeleton"))
      for (const auto* col : {"loss", "objective", "drift_constraint", "variety_constraint"})
        csv << c.at("strategy").get<std::string>() << ',' << row.at("skeleton_hash").get<std::string>() << ','
            << col << ',' << cell(row.at(col).at("M1")) << ',' << cell(row.at(col).at("M2")) << ','
            << cell(row.at(col).at("M3")) << '\n';
  for (const auto& c : result.at("comparisons")) {
    const auto& m = c.at("median").at("loss");
    log << "compare: " << c.at("strategy").get<std::string>() << " vs " << c.at("baseline").get<std::string>()
        << ": median M1 " << m.at("M1").dump() << " M2 " << m.at("M2").dump() << " M3 " << m.at("M3").dump()
        << ", M1 > 0 on " << m.at("M1_positive").get<long>() << "/" << m.at("skeletons").get<std::size_t>()
        << "\n";
  }
  return result;
}

}  // namespace gridsizer::pipeline

#include "gridsizer/pipeline/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace gridsizer::pipeline {

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& p : v) s += (s.empty() ? "" : "; ") + p;
  return s;
}

template <class T>
T parse_value(const std::string& s);

template <>
int parse_value<int>(const std::string& s) {
  std::size_t pos = 0;
  const int v = std::stoi(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("not an integer");
  return v;
}
template <>
std::uint64_t parse_value<std::uint64_t>(const std::string& s) {
  if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative seed");
  std::size_t pos = 0;
  const auto v = std::stoull(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("not an unsigned integer");
  return v;
}
template <>
double parse_value<double>(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("not a number");
  return v;
}
template <>
bool parse_value<bool>(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("not a boolean");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  // "a..b" range or comma-separated list.
  std::vector<std::uint64_t> out;
  if (auto dots = s.find(".."); dots != std::string::npos) {
    const auto a = parse_value<std::uint64_t>(s.substr(0, dots));
    const auto b = parse_value<std::uint64_t>(s.substr(dots + 2));
    if (b < a) throw std::invalid_argument("empty seed range");
    for (auto v = a; v <= b; ++v) out.push_back(v);
    return out;
  }
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_value<std::uint64_t>(item));
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

template <class T, class F>
Setter field(F access) {
  return [access](RunConfig& c, const std::string& v) { access(c) = parse_value<T>(v); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> m = {
      {"seed", field<std::uint64_t>([](RunConfig& c) -> auto& { return c.seed; })},
      {"profile", [](RunConfig&, const std::string& v) { profile_from_string(v); }},
      {"dataset.count", field<int>([](RunConfig& c) -> auto& { return c.dataset.count; })},
      {"dataset.stories_min", field<int>([](RunConfig& c) -> auto& { return c.dataset.stories_min; })},
      {"dataset.stories_max", field<int>([](RunConfig& c) -> auto& { return c.dataset.stories_max; })},
      {"dataset.base_min", field<double>([](RunConfig& c) -> auto& { return c.dataset.base_min; })},
      {"dataset.base_max", field<double>([](RunConfig& c) -> auto& { return c.dataset.base_max; })},
      {"dataset.seed", field<std::uint64_t>([](RunConfig& c) -> auto& { return c.dataset.seed; })},
      {"dataset.path", [](RunConfig& c, const std::string& v) { c.dataset.path = v; }},
      {"sim.embed_dim", field<int>([](RunConfig& c) -> auto& { return c.sim.model.embed_dim; })},
      {"sim.prop_steps", field<int>([](RunConfig& c) -> auto& { return c.sim.model.prop_steps; })},
      {"sim.position_aware", field<bool>([](RunConfig& c) -> auto& { return c.sim.model.use_position_aware; })},
      {"sim.anchor_count", field<int>([](RunConfig& c) -> auto& { return c.sim.model.anchor_count; })},
      {"sim.dropout", field<double>([](RunConfig& c) -> auto& { return c.sim.model.dropout; })},
      {"sim.decay_dropout", field<bool>([](RunConfig& c) -> auto& { return c.sim.train.decay_dropout; })},
      {"sim.drift_limit", field<double>([](RunConfig& c) -> auto& { return c.sim.model.drift_limit; })},
      {"sim.bce_weight", field<double>([](RunConfig& c) -> auto& { return c.sim.model.bce_weight; })},
      {"sim.lr", field<double>([](RunConfig& c) -> auto& { return c.sim.train.lr; })},
      {"sim.lr_final", field<double>([](RunConfig& c) -> auto& { return c.sim.train.lr_final; })},
      {"sim.weight_decay", field<double>([](RunConfig& c) -> auto& { return c.sim.train.weight_decay; })},
      {"sim.epochs", field<int>([](RunConfig& c) -> auto& { return c.sim.train.epochs; })},
      {"sim.weights", [](RunConfig& c, const std::string& v) { c.sim.weights = v; }},
      {"sim.report", [](RunConfig& c, const std::string& v) { c.sim.report = v; }},
      {"sizer.embed_dim", field<int>([](RunConfig& c) -> auto& { return c.sizer.model.embed_dim; })},
      {"sizer.prop_steps", field<int>([](RunConfig& c) -> auto& { return c.sizer.model.prop_steps; })},
      {"sizer.dropout", field<double>([](RunConfig& c) -> auto& { return c.sizer.model.dropout; })},
      {"sizer.alpha", field<double>([](RunConfig& c) -> auto& { return c.sizer.model.alpha; })},
      {"sizer.w0", field<double>([](RunConfig& c) -> auto& { return c.sizer.model.w0; })},
      {"sizer.w1", field<double>([](RunConfig& c) -> auto& { return c.sizer.model.w1; })},
      {"sizer.w2", field<double>([](RunConfig& c) -> auto& { return c.sizer.model.w2; })},
      {"sizer.w3", field<double>([](RunConfig& c) -> auto& { return c.sizer.model.w3; })},
      {"sizer.gamma1", field<double>([](RunConfig& c) -> auto& { return c.sizer.model.gamma1; })},
      {"sizer.gamma2", field<double>([](RunConfig& c) -> auto& { return c.sizer.model.gamma2; })},
      {"sizer.gamma3", field<double>([](RunConfig& c) -> auto& { return c.sizer.model.gamma3; })},
      {"sizer.scenario",
       [](RunConfig& c, const std::string& v) {
         if (v == "high_safety") c.sizer.scenario = Scenario::high_safety;
         else if (v == "low_safety") c.sizer.scenario = Scenario::low_safety;
         else throw std::invalid_argument("expected high_safety or low_safety");
       }},
      {"sizer.drift_limit",
       [](RunConfig& c, const std::string& v) { c.sizer.drift_limit_override = parse_value<double>(v); }},
      {"sizer.epochs", field<int>([](RunConfig& c) -> auto& { return c.sizer.train.epochs; })},
      {"sizer.update_every", field<int>([](RunConfig& c) -> auto& { return c.sizer.train.update_every; })},
      {"sizer.lr", field<double>([](RunConfig& c) -> auto& { return c.sizer.train.lr; })},
      {"sizer.stories_min", field<int>([](RunConfig& c) -> auto& { return c.sizer.train.sampler.stories_min; })},
      {"sizer.stories_max", field<int>([](RunConfig& c) -> auto& { return c.sizer.train.sampler.stories_max; })},
      {"sizer.base_min", field<double>([](RunConfig& c) -> auto& { return c.sizer.train.sampler.base_min; })},
      {"sizer.base_max", field<double>([](RunConfig& c) -> auto& { return c.sizer.train.sampler.base_max; })},
      {"sizer.eval_count", field<int>([](RunConfig& c) -> auto& { return c.sizer.eval_count; })},
      {"sizer.eval_seed", field<std::uint64_t>([](RunConfig& c) -> auto& { return c.sizer.eval_seed; })},
      {"sizer.weights", [](RunConfig& c, const std::string& v) { c.sizer.weights = v; }},
      {"sizer.report", [](RunConfig& c, const std::string& v) { c.sizer.report = v; }},
      {"ga.population", field<int>([](RunConfig& c) -> auto& { return c.ga.ga.population; })},
      {"ga.elites", field<int>([](RunConfig& c) -> auto& { return c.ga.ga.elites; })},
      {"ga.crossover_rate", field<double>([](RunConfig& c) -> auto& { return c.ga.ga.crossover_rate; })},
      {"ga.mutation_rate", field<double>([](RunConfig& c) -> auto& { return c.ga.ga.mutation_rate; })},
      {"ga.iterations", field<int>([](RunConfig& c) -> auto& { return c.ga.ga.iterations; })},
      {"ga.threads", field<int>([](RunConfig& c) -> auto& { return c.ga.ga.threads; })},
      {"ga.crossover",
       [](RunConfig& c, const std::string& v) {
         if (v == "uniform") c.ga.ga.crossover = ga::Crossover::uniform;
         else if (v == "single_point") c.ga.ga.crossover = ga::Crossover::single_point;
         else throw std::invalid_argument("expected uniform or single_point");
       }},
      {"ga.evaluator", [](RunConfig& c, const std::string& v) { c.ga.evaluator = v; }},
      {"ga.seeding", [](RunConfig& c, const std::string& v) { c.ga.seeding = v; }},
      {"ga.skeleton_seeds", [](RunConfig& c, const std::string& v) { c.ga.skeleton_seeds = parse_seed_list(v); }},
      {"ga.stories_min", field<int>([](RunConfig& c) -> auto& { return c.ga.stories_min; })},
      {"ga.stories_max", field<int>([](RunConfig& c) -> auto& { return c.ga.stories_max; })},
      {"ga.base_min", field<double>([](RunConfig& c) -> auto& { return c.ga.base_min; })},
      {"ga.base_max", field<double>([](RunConfig& c) -> auto& { return c.ga.base_max; })},
      {"ga.out", [](RunConfig& c, const std::string& v) { c.ga.out = v; }},
      {"serve.host", [](RunConfig& c, const std::string& v) { c.serve.host = v; }},
      {"serve.port", field<int>([](RunConfig& c) -> auto& { return c.serve.port; })},
      {"serve.oracle", field<bool>([](RunConfig& c) -> auto& { return c.serve.oracle; })},
  };
  return m;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error("invalid configuration: " + join(problems)), problems_(std::move(problems)) {}

Profile profile_from_string(const std::string& s) {
  if (s == "desk") return Profile::desk;
  if (s == "paper") return Profile::paper;
  throw std::invalid_argument("unknown profile '" + s + "' (desk, paper)");
}

std::string to_string(Profile p) { return p == Profile::desk ? "desk" : "paper"; }

double drift_limit(Scenario s) { return s == Scenario::high_safety ? 0.015 : 0.025; }

RunConfig RunConfig::defaults(Profile p) {
  RunConfig c;
  c.profile = p;
  c.sim.model.drift_limit = 0.015;
  c.sizer.train.sampler.base_min = 60.0;
  c.sizer.train.sampler.base_max = 400.0;
  if (p == Profile::paper) {
    c.dataset.count = 4000;
    c.dataset.stories_min = 1;
    c.dataset.stories_max = 10;
    c.sim.model.embed_dim = 512;
    c.sim.model.prop_steps = 5;
    c.sim.model.dropout = 0.5;
    c.sim.train.epochs = 5;
    c.sizer.model.embed_dim = 512;
    c.sizer.model.prop_steps = 5;
    c.sizer.train.epochs = 50000;
    c.sizer.train.sampler.stories_min = 1;
    c.sizer.train.sampler.stories_max = 10;
    c.sizer.eval_count = 500;
    c.ga.ga.iterations = 1000;
    c.ga.stories_min = 1;
    c.ga.stories_max = 10;
    c.ga.base_max = 400.0;
    for (std::uint64_t s = 1; s <= 20; ++s) c.ga.skeleton_seeds.push_back(s);
  } else {
    c.dataset.count = 400;
    c.dataset.stories_min = 1;
    c.dataset.stories_max = 3;
    c.sim.model.embed_dim = 64;
    c.sim.model.prop_steps = 2;
    c.sim.model.dropout = 0.0;
    c.sim.train.lr = 1e-3;
    c.sim.train.lr_final = 1e-5;
    c.sim.train.weight_decay = 5e-4;
    c.sim.train.epochs = 120;
    c.sizer.model.embed_dim = 64;
    c.sizer.model.prop_steps = 2;
    c.sizer.train.epochs = 2000;
    c.sizer.train.lr = 1e-3;
    c.sizer.train.sampler.stories_min = 1;
    c.sizer.train.sampler.stories_max = 3;
    c.sizer.eval_count = 50;
    c.ga.ga.iterations = 200;
    for (std::uint64_t s = 1; s <= 10; ++s) c.ga.skeleton_seeds.push_back(s);
  }
  c.sizer.model.drift_limit = drift_limit(c.sizer.scenario);
  return c;
}

RunConfig RunConfig::parse(const std::string& text, std::optional<Profile> profile) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError({"line " + std::to_string(e.line()) + ": " + e.message()});
  }
  std::vector<std::string> problems;
  Profile p = Profile::desk;
  if (profile) {
    p = *profile;
  } else if (auto v = tree.get_optional<std::string>("profile")) {
    try {
      p = profile_from_string(*v);
    } catch (const std::exception& e) {
      problems.push_back(std::string("profile: ") + e.what());
    }
  }
  RunConfig c = defaults(p);
  const auto& table = setters();
  auto apply = [&](const std::string& key, const std::string& value) {
    auto it = table.find(key);
    if (it == table.end()) {
      problems.push_back(key + ": unknown key");
      return;
    }
    try {
      it->second(c, value);
    } catch (const std::exception& e) {
      problems.push_back(key + ": invalid value '" + value + "' (" + e.what() + ")");
    }
  };
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      apply(name, node.data());
      continue;
    }
    for (const auto& [key, leaf] : node) apply(name + "." + key, leaf.data());
  }
  c.sizer.model.drift_limit = c.sizer.drift_limit_override.value_or(drift_limit(c.sizer.scenario));
  try {
    c.validate();
  } catch (const ConfigError& e) {
    problems.insert(problems.end(), e.problems().begin(), e.problems().end());
  }
  if (!problems.empty()) throw ConfigError(problems);
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path, std::optional<Profile> profile) {
  std::ifstream f(path);
  if (!f) throw ConfigError({"config: cannot read " + path.string()});
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), profile);
}

void RunConfig::validate() const {
  std::vector<std::string> problems;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) problems.push_back(msg);
  };
  auto nested = [&](const char* prefix, const std::function<void()>& f) {
    try {
      f();
    } catch (const std::exception& e) {
      problems.push_back(std::string(prefix) + ": " + e.what());
    }
  };
  check(dataset.count >= 10, "dataset.count: must be >= 10 (80/10/10 split)");
  check(dataset.stories_min >= 1 && dataset.stories_max <= 10 && dataset.stories_min <= dataset.stories_max,
        "dataset.stories_min/max: need 1 <= min <= max <= 10");
  nested("dataset", [&] { dataset_sampler().validate(); });
  nested("sim", [&] { sim.model.validate(); });
  check(sim.train.epochs >= 1, "sim.epochs: must be >= 1");
  check(sim.train.lr > 0.0, "sim.lr: must be > 0");
  check(sim.train.weight_decay >= 0.0, "sim.weight_decay: must be >= 0");
  nested("sizer", [&] { sizer.model.validate(); });
  nested("sizer", [&] { sizer.train.sampler.validate(); });
  check(sizer.train.epochs >= 1, "sizer.epochs: must be >= 1");
  check(sizer.train.update_every >= 1, "sizer.update_every: must be >= 1");
  check(sizer.train.lr > 0.0, "sizer.lr: must be > 0");
  check(!sizer.drift_limit_override || *sizer.drift_limit_override > 0.0, "sizer.drift_limit: must be > 0");
  check(sizer.eval_count >= 1, "sizer.eval_count: must be >= 1");
  nested("ga", [&] { ga.ga.validate(); });
  nested("ga", [&] { ga_sampler().validate(); });
  check(ga.evaluator == "surrogate" || ga.evaluator == "oracle", "ga.evaluator: expected surrogate or oracle");
  nested("ga.seeding", [&] { ga::seeding_from_string(ga.seeding); });
  check(!ga.skeleton_seeds.empty(), "ga.skeleton_seeds: at least one seed");
  check(serve.port > 0 && serve.port < 65536, "serve.port: must be in 1..65535");
  if (!problems.empty()) throw ConfigError(problems);
}

skel::SkeletonConfig RunConfig::dataset_sampler() const {
  skel::SkeletonConfig s;
  s.stories_min = dataset.stories_min;
  s.stories_max = dataset.stories_max;
  s.base_min = dataset.base_min;
  s.base_max = dataset.base_max;
  return s;
}

skel::SkeletonConfig RunConfig::ga_sampler() const {
  skel::SkeletonConfig s;
  s.stories_min = ga.stories_min;
  s.stories_max = ga.stories_max;
  s.base_min = ga.base_min;
  s.base_max = ga.base_max;
  return s;
}

nlohmann::json RunConfig::to_json() const {
  return {{"profile", to_string(profile)},
          {"seed", seed},
          {"dataset",
           {{"count", dataset.count},
            {"stories", {dataset.stories_min, dataset.stories_max}},
            {"base", {dataset.base_min, dataset.base_max}},
            {"seed", dataset.seed}}},
          {"sim",
           {{"model", sim.model.to_json()},
            {"lr", sim.train.lr},
            {"lr_final", sim.train.lr_final},
            {"weight_decay", sim.train.weight_decay},
            {"epochs", sim.train.epochs}}},
          {"sizer",
           {{"model", sizer.model.to_json()},
            {"scenario", sizer.scenario == Scenario::high_safety ? "high_safety" : "low_safety"},
            {"epochs", sizer.train.epochs},
            {"update_every", sizer.train.update_every},
            {"lr", sizer.train.lr},
            {"stories", {sizer.train.sampler.stories_min, sizer.train.sampler.stories_max}},
            {"eval_count", sizer.eval_count}}},
          {"ga",
           {{"config", ga.ga.to_json()},
            {"evaluator", ga.evaluator},
            {"seeding", ga.seeding},
            {"skeleton_seeds", ga.skeleton_seeds},
            {"stories", {ga.stories_min, ga.stories_max}},
            {"base", {ga.base_min, ga.base_max}}}}};
}

}  // namespace gridsizer::pipeline

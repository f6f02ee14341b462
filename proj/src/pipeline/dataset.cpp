#include "gridsizer/pipeline/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>

#include "gridsizer/nn/graph_input.hpp"
#include "gridsizer/structure/json_io.hpp"
#include "gridsizer/util/hash.hpp"

namespace gridsizer::pipeline {

namespace {

// splitmix64: decorrelates consecutive record seeds.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Raw {
  std::uint64_t skeleton_seed = 0, section_seed = 0;
  skel::StructuralGraph graph;
  frame::SimResult result;
  std::size_t attempts = 0;
};

Raw make_record(const GenerateOptions& opt, std::size_t index) {
  Raw r;
  for (std::uint64_t attempt = 0;; ++attempt) {
    r.skeleton_seed = mix(opt.seed * 0x100000001b3ULL + index * 1000003ULL + attempt);
    r.section_seed = mix(r.skeleton_seed);
    ++r.attempts;
    try {
      const auto sk = skel::sample_skeleton(r.skeleton_seed, opt.sampler);
      const auto sections = skel::assign_random_sections(sk, r.section_seed);
      r.result = frame::solve(sk, sections, opt.loads);
      r.graph = skel::to_graph(sk, sections);
      bool finite = true;
      for (double d : r.result.drift_x) finite &= std::isfinite(d);
      for (double d : r.result.drift_y) finite &= std::isfinite(d);
      if (finite) return r;
    } catch (const std::exception&) {
      if (attempt >= 100) throw;
    }
  }
}

}  // namespace

std::string oracle_hash(const frame::LoadModel& lm) {
  const nlohmann::json j = {{"solver", "frame-oracle/1 elf diaphragm"},
                            {"self_weight_factor", lm.self_weight_factor},
                            {"superimposed_dead", lm.superimposed_dead},
                            {"live", lm.live},
                            {"roof_live", lm.roof_live},
                            {"roof_dead", lm.roof_dead},
                            {"slab_dead", lm.slab_dead},
                            {"cladding", lm.cladding},
                            {"ss", lm.seismic.ss},
                            {"s1", lm.seismic.s1},
                            {"site_class", std::string(1, lm.seismic.site_class)},
                            {"mass_dead", lm.seismic.mass_dead},
                            {"mass_live", lm.seismic.mass_live},
                            {"mass_roof_live", lm.seismic.mass_roof_live},
                            {"response_modifier", lm.seismic.response_modifier},
                            {"importance", lm.seismic.importance}};
  return hash_hex(j.dump());
}

nlohmann::json DatasetHeader::to_json() const {
  return {{"format", format},           {"count", count},
          {"scale", scale},             {"seed", seed},
          {"stories", {stories_min, stories_max}},
          {"oracle_hash", oracle_hash}, {"layout_hash", layout_hash},
          {"replaced", replaced}};
}

DatasetHeader DatasetHeader::from_json(const nlohmann::json& j) {
  DatasetHeader h;
  h.format = j.at("format").get<std::string>();
  if (h.format != kDatasetFormat) throw std::runtime_error("unsupported dataset format '" + h.format + "'");
  h.count = j.at("count").get<std::size_t>();
  h.scale = j.at("scale").get<double>();
  h.seed = j.at("seed").get<std::uint64_t>();
  h.stories_min = j.at("stories").at(0).get<int>();
  h.stories_max = j.at("stories").at(1).get<int>();
  h.oracle_hash = j.at("oracle_hash").get<std::string>();
  h.layout_hash = j.at("layout_hash").get<std::string>();
  h.replaced = j.value("replaced", std::size_t{0});
  return h;
}

nlohmann::json DatasetRecord::to_json() const {
  return {{"skeleton_seed", skeleton_seed}, {"section_seed", section_seed}, {"graph", skel::graph_to_json(graph)},
          {"drift_x", drift_x},             {"drift_y", drift_y},           {"mass", mass}};
}

DatasetRecord DatasetRecord::from_json(const nlohmann::json& j, const std::string& pointer) {
  DatasetRecord r;
  auto need = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key)) throw skel::SchemaError(pointer + "/" + key, "missing");
    return j.at(key);
  };
  r.skeleton_seed = need("skeleton_seed").get<std::uint64_t>();
  r.section_seed = need("section_seed").get<std::uint64_t>();
  r.graph = skel::graph_from_json(need("graph"), pointer + "/graph");
  r.drift_x = need("drift_x").get<std::vector<double>>();
  r.drift_y = need("drift_y").get<std::vector<double>>();
  r.mass = need("mass").get<double>();
  if (r.drift_x.size() != static_cast<std::size_t>(r.graph.story_count()) || r.drift_y.size() != r.drift_x.size())
    throw skel::SchemaError(pointer + "/drift_x", "length does not match the story count");
  return r;
}

nlohmann::json Split::to_json() const {
  return {{"train", train}, {"validation", validation}, {"test", test}};
}

Split Split::from_json(const nlohmann::json& j) {
  return {j.at("train").get<std::vector<std::size_t>>(), j.at("validation").get<std::vector<std::size_t>>(),
          j.at("test").get<std::vector<std::size_t>>()};
}

Dataset generate_dataset(const GenerateOptions& opt) {
  opt.sampler.validate();
  if (opt.count == 0) throw std::invalid_argument("dataset count must be > 0");
  std::vector<Raw> raw(opt.count);
  unsigned threads = opt.threads > 0 ? static_cast<unsigned>(opt.threads) : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(opt.count));
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < opt.count; i += threads) raw[i] = make_record(opt, i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  Dataset d;
  d.header.count = opt.count;
  d.header.seed = opt.seed;
  d.header.stories_min = opt.sampler.stories_min;
  d.header.stories_max = opt.sampler.stories_max;
  d.header.oracle_hash = oracle_hash(opt.loads);
  d.header.layout_hash = nn::layout_hash(skel::kFeatureWidthSized);
  double scale = 0.0;
  for (const auto& r : raw) {
    d.header.replaced += r.attempts - 1;
    for (double v : r.result.drift_x) scale = std::max(scale, std::abs(v));
    for (double v : r.result.drift_y) scale = std::max(scale, std::abs(v));
  }
  d.header.scale = scale > 0.0 ? scale : 1.0;
  for (auto& r : raw) {
    DatasetRecord rec;
    rec.skeleton_seed = r.skeleton_seed;
    rec.section_seed = r.section_seed;
    rec.graph = std::move(r.graph);
    for (double v : r.result.drift_x) rec.drift_x.push_back(v / d.header.scale);
    for (double v : r.result.drift_y) rec.drift_y.push_back(v / d.header.scale);
    rec.mass = r.result.mass_total;
    d.records.push_back(std::move(rec));
  }
  return d;
}

Split split_dataset(std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t n_train = count * 8 / 10, n_val = count / 10;
  Split s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                      idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
  for (auto* part : {&s.train, &s.validation, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

std::filesystem::path split_path(const std::filesystem::path& dataset_path) {
  return dataset_path.string() + ".split.json";
}

void write_dataset(const Dataset& d, const std::filesystem::path& path, const Split& split) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << d.header.to_json().dump() << '\n';
    for (const auto& r : d.records) f << r.to_json().dump() << '\n';
    if (!f) throw std::runtime_error("write failed for " + path.string());
  }
  std::ofstream s(split_path(path), std::ios::binary);
  if (!s) throw std::runtime_error("cannot write " + split_path(path).string());
  s << split.to_json().dump(2) << '\n';
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open dataset " + path.string());
  Dataset d;
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(path.string() + ": empty dataset file");
  d.header = DatasetHeader::from_json(nlohmann::json::parse(line));
  std::size_t n = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    d.records.push_back(DatasetRecord::from_json(nlohmann::json::parse(line), "/" + std::to_string(n)));
    ++n;
  }
  if (d.records.size() != d.header.count)
    throw std::runtime_error(path.string() + ": header announces " + std::to_string(d.header.count) +
                             " records, found " + std::to_string(d.records.size()));
  return d;
}

Split read_split(const std::filesystem::path& dataset_path) {
  std::ifstream f(split_path(dataset_path));
  if (!f) throw std::runtime_error("cannot open split manifest " + split_path(dataset_path).string());
  return Split::from_json(nlohmann::json::parse(f));
}

std::vector<nn::SimExample> to_examples(const Dataset& d, const std::vector<std::size_t>& indices,
                                        std::optional<double> target_scale) {
  const double f = target_scale ? d.header.scale / *target_scale : 1.0;
  std::vector<nn::SimExample> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    const auto& r = d.records.at(i);
    nn::SimExample ex;
    ex.graph = nn::prepare_graph(r.graph);
    for (std::size_t k = 0; k < r.drift_x.size(); ++k) {
      ex.drift.push_back(r.drift_x[k] * f);
      ex.drift.push_back(r.drift_y[k] * f);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace gridsizer::pipeline

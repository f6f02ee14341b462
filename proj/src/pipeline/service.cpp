#include "gridsizer/pipeline/service.hpp"

#include <cmath>
#include <fstream>

#include <httplib.h>

#include "gridsizer/frame/frame_model.hpp"
#include "gridsizer/frame/oracle.hpp"
#include "gridsizer/frame/sections.hpp"
#include "gridsizer/nn/graph_input.hpp"
#include "gridsizer/pipeline/dataset.hpp"
#include "gridsizer/structure/json_io.hpp"
#include "gridsizer/util/hash.hpp"

namespace gridsizer::pipeline {

namespace fs = std::filesystem;

namespace {

// Input problems the caller can fix by editing the payload.
struct BadRequest {
  std::string pointer;
  std::string message;
};

Response error(int status, const std::string& message, const std::string& pointer = "") {
  nlohmann::json body = {{"error", message}};
  if (status == 400) body["pointer"] = pointer;
  return {status, std::move(body)};
}

std::string read_file_hash(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + p.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return hash_hex(bytes);
}

struct Design {
  skel::Skeleton skeleton;
  std::vector<int> sections;  // empty when the request carries none
};

// Exactly one of `skeleton` / `graph`; sections from the request, the
// skeleton's bars or a sized graph's T block, in that order.
Design read_design(const nlohmann::json& req, bool need_sections) {
  if (!req.is_object()) throw BadRequest{"", "request body must be a JSON object"};
  const bool has_sk = req.contains("skeleton"), has_g = req.contains("graph");
  if (has_sk == has_g) throw BadRequest{"", "send exactly one of \"skeleton\" or \"graph\""};
  Design d;
  std::vector<std::optional<int>> embedded;
  if (has_sk) {
    d.skeleton = skel::skeleton_from_json(req.at("skeleton"), "/skeleton");
    for (const auto& b : d.skeleton.bars) embedded.push_back(b.section);
  } else {
    const auto g = skel::graph_from_json(req.at("graph"), "/graph");
    for (const auto& b : skel::bars_from_graph(g)) embedded.push_back(b.section);
    d.skeleton = skel::skeleton_from_graph(g);
  }
  for (auto& b : d.skeleton.bars) b.section.reset();
  const auto n = d.skeleton.bars.size();
  if (req.contains("sections")) {
    const auto& s = req.at("sections");
    if (!s.is_array()) throw BadRequest{"/sections", "expected an array"};
    if (s.size() != n)
      throw BadRequest{"/sections", "expected " + std::to_string(n) + " entries (one per bar), got " +
                                        std::to_string(s.size())};
    for (std::size_t i = 0; i < n; ++i) {
      const auto ptr = "/sections/" + std::to_string(i);
      if (!s[i].is_number_integer()) throw BadRequest{ptr, "expected an integer"};
      const int v = s[i].get<int>();
      if (v < 0 || v >= skel::sections_for(d.skeleton.bars[i].kind))
        throw BadRequest{ptr, "section index " + std::to_string(v) + " out of range for a " +
                                  skel::to_string(d.skeleton.bars[i].kind)};
      d.sections.push_back(v);
    }
  } else if (need_sections) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!embedded[i])
        throw BadRequest{"/sections", "missing: bar " + std::to_string(i) + " has no section"};
      d.sections.push_back(*embedded[i]);
    }
  }
  return d;
}

}  // namespace

Service::Service(const nn::NeuralSim& surrogate, std::optional<nn::NeuralSizer> sizer, RunConfig cfg,
                 std::string surrogate_hash, std::string sizer_hash)
    : surrogate_(surrogate.frozen()), sizer_(std::move(sizer)), cfg_(std::move(cfg)) {
  hashes_ = {{"surrogate", surrogate_hash},
             {"sizer", sizer_ ? nlohmann::json(sizer_hash) : nlohmann::json(nullptr)},
             {"config", hash_hex(cfg_.to_json().dump())},
             {"oracle", oracle_hash()},
             {"layout", nn::layout_hash(skel::kFeatureWidthSized)}};
}

Service Service::load(const fs::path& surrogate, const std::optional<fs::path>& sizer, const RunConfig& cfg) {
  nn::NeuralSim sim(ad::ModelParams::load(surrogate));
  std::optional<nn::NeuralSizer> sz;
  std::string sz_hash;
  if (sizer) {
    sz.emplace(ad::ModelParams::load(*sizer));
    sz_hash = read_file_hash(*sizer);
  }
  return Service(sim, std::move(sz), cfg, read_file_hash(surrogate), sz_hash);
}

Response Service::finish(Response r) const {
  r.body["hashes"] = hashes_;
  return r;
}

Response Service::simulate(const nlohmann::json& req) const {
  try {
    auto d = read_design(req, true);
    std::string source = cfg_.serve.oracle ? "oracle" : "surrogate";
    if (req.contains("source")) {
      if (!req.at("source").is_string() || (req.at("source") != "oracle" && req.at("source") != "surrogate"))
        throw BadRequest{"/source", "expected \"surrogate\" or \"oracle\""};
      source = req.at("source").get<std::string>();
    }
    double lim = drift_limit();
    if (req.contains("drift_limit")) {
      if (!req.at("drift_limit").is_number() || req.at("drift_limit").get<double>() <= 0.0)
        throw BadRequest{"/drift_limit", "expected a positive number"};
      lim = req.at("drift_limit").get<double>();
    }
    std::vector<double> dx, dy;
    if (source == "oracle") {
      const auto res = frame::solve(d.skeleton, d.sections);
      dx = res.drift_x;
      dy = res.drift_y;
    } else {
      const auto g = nn::prepare_graph(skel::to_graph(d.skeleton, d.sections));
      const auto pred = surrogate_.predict(g);
      const auto& h = pred.h.values();
      for (int k = 0; k < pred.h.rows(); ++k) {
        dx.push_back(h[static_cast<std::size_t>(2 * k)] * surrogate_.drift_scale());
        dy.push_back(h[static_cast<std::size_t>(2 * k + 1)] * surrogate_.drift_scale());
      }
    }
    nlohmann::json violations = nlohmann::json::array();
    for (std::size_t k = 0; k < dx.size(); ++k) {
      if (std::abs(dx[k]) > lim) violations.push_back({{"story", k + 1}, {"direction", "x"}, {"drift", dx[k]}});
      if (std::abs(dy[k]) > lim) violations.push_back({{"story", k + 1}, {"direction", "y"}, {"drift", dy[k]}});
    }
    return finish({200,
                   {{"drift_x", dx},
                    {"drift_y", dy},
                    {"mass", frame::total_mass(d.skeleton, d.sections)},
                    {"drift_limit", lim},
                    {"violations", violations},
                    {"source", source}}});
  } catch (const BadRequest& e) {
    return finish(error(400, e.message, e.pointer));
  } catch (const skel::SchemaError& e) {
    return finish(error(400, e.what(), e.pointer()));
  } catch (const skel::SkeletonError& e) {
    return finish(error(422, std::string("infeasible structure: ") + e.what()));
  } catch (const frame::MechanismError& e) {
    return finish(error(422, std::string("infeasible structure: ") + e.what()));
  }
}

Response Service::size(const nlohmann::json& req) const {
  if (!sizer_) return finish(error(503, "no sizer weights loaded; start the service with --sizer"));
  try {
    const auto d = read_design(req, false);
    const auto g = nn::prepare_graph(skel::to_graph(d.skeleton));
    const auto out = sizer_->propose(g);
    const auto sections = nn::slots_to_sections(g, out.best);
    nlohmann::json p = nlohmann::json::array();
    for (std::size_t i = 0; i < out.best.size(); ++i)
      p.push_back(std::vector<double>(out.p_soft.begin() + static_cast<std::ptrdiff_t>(i * skel::kSectionSlots),
                                      out.p_soft.begin() + static_cast<std::ptrdiff_t>((i + 1) * skel::kSectionSlots)));
    return finish({200, {{"sections", sections}, {"p_soft", p}, {"mass", frame::total_mass(d.skeleton, sections)}}});
  } catch (const BadRequest& e) {
    return finish(error(400, e.message, e.pointer));
  } catch (const skel::SchemaError& e) {
    return finish(error(400, e.what(), e.pointer()));
  } catch (const skel::SkeletonError& e) {
    return finish(error(422, std::string("infeasible structure: ") + e.what()));
  }
}

Response Service::skeleton(const std::map<std::string, std::string>& query) const {
  auto number = [&](const std::string& key, long lo, long hi) -> std::optional<long> {
    auto it = query.find(key);
    if (it == query.end()) return std::nullopt;
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(it->second, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != it->second.size() || v < lo || v > hi)
      throw BadRequest{"/query/" + key, "expected an integer in " + std::to_string(lo) + ".." + std::to_string(hi)};
    return v;
  };
  try {
    const auto seed = number("seed", 0, std::numeric_limits<long>::max());
    if (!seed) throw BadRequest{"/query/seed", "missing required parameter"};
    auto sampler = cfg_.dataset_sampler();
    if (const auto k = number("stories", 1, 10)) sampler.stories_min = sampler.stories_max = static_cast<int>(*k);
    const auto sk = skel::sample_skeleton(static_cast<std::uint64_t>(*seed), sampler);
    return finish({200, {{"skeleton", skel::skeleton_to_json(sk)}, {"skeleton_hash", ga::skeleton_hash(sk)}}});
  } catch (const BadRequest& e) {
    return finish(error(400, e.message, e.pointer));
  }
}

Response Service::sections() const {
  auto list = [](std::span<const frame::Section> s) {
    nlohmann::json a = nlohmann::json::array();
    for (std::size_t i = 0; i < s.size(); ++i)
      a.push_back({{"index", i},
                   {"name", std::string(s[i].name)},
                   {"area_in2", s[i].area},
                   {"i_major_in4", s[i].i_major},
                   {"i_minor_in4", s[i].i_minor},
                   {"torsion_in4", s[i].torsion},
                   {"unit_weight_lb_ft", s[i].unit_weight}});
    return a;
  };
  return finish({200, {{"column", list(frame::column_sections())}, {"beam", list(frame::beam_sections())}}});
}

Response Service::handle(const std::string& method, const std::string& path, const std::string& body,
                         const std::map<std::string, std::string>& query) const {
  auto parse = [&](nlohmann::json& out) -> std::optional<Response> {
    try {
      out = nlohmann::json::parse(body);
      return std::nullopt;
    } catch (const nlohmann::json::parse_error& e) {
      return finish(error(400, std::string("body is not valid JSON: ") + e.what(), ""));
    }
  };
  const bool post = method == "POST", get = method == "GET";
  nlohmann::json req;
  if (path == "/api/simulate" || path == "/api/size") {
    if (!post) return finish(error(405, "use POST"));
    if (auto bad = parse(req)) return *bad;
    return path == "/api/simulate" ? simulate(req) : size(req);
  }
  if (path == "/api/skeleton") return get ? skeleton(query) : finish(error(405, "use GET"));
  if (path == "/api/sections") return get ? sections() : finish(error(405, "use GET"));
  return finish(error(404, "no route " + path));
}

void serve(const Service& service, const std::string& host, int port, std::ostream& log) {
  httplib::Server server;
  auto route = [&service](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query.emplace(k, v);
    const auto r = service.handle(req.method, req.path, req.body, query);
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(r.body.dump(), "application/json");
  };
  for (const auto* p : {"/api/simulate", "/api/size"}) server.Post(p, route);
  for (const auto* p : {"/api/skeleton", "/api/sections"}) server.Get(p, route);
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  log << "serving on http://" << host << ":" << port << " (" << service.hashes().dump() << ")\n" << std::flush;
  if (!server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace gridsizer::pipeline

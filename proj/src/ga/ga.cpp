#include "gridsizer/ga/ga.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include "gridsizer/diff/ops.hpp"
#include "gridsizer/nn/neural_sizer.hpp"
#include "gridsizer/structure/graph.hpp"
#include "gridsizer/structure/json_io.hpp"
#include "gridsizer/util/hash.hpp"

namespace gridsizer::ga {

Evaluator::Evaluator(const skel::Skeleton& sk, FitnessWeights w)
    : skeleton_(sk), weights_(w), graph_(nn::prepare_graph(skel::to_graph(sk))) {
  for (const auto& b : sk.bars) limits_.push_back(skel::sections_for(b.kind));
}

Fitness Evaluator::evaluate(const Chromosome& c, std::size_t id) const {
  if (c.size() != limits_.size())
    throw GAError("chromosome " + std::to_string(id) + ": " + std::to_string(c.size()) + " genes for " +
                  std::to_string(limits_.size()) + " bars");
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c[i] < 0 || c[i] >= limits_[i])
      throw GAError("chromosome " + std::to_string(id) + ": gene " + std::to_string(i) + " = " +
                    std::to_string(c[i]) + " outside its sub-library");
  Fitness f;
  try {
    f.l_dr = nn::drift_loss(drifts(c), weights_.drift_limit);
  } catch (const std::exception& e) {
    throw GAError("chromosome " + std::to_string(id) + ": " + tag() + " evaluation failed: " + e.what());
  }
  f.obj = nn::mass_objective(graph_, c);
  f.l_var = nn::variety_loss(c);
  f.loss = weights_.w0 * f.obj + weights_.w1 * f.l_dr + weights_.w2 * f.l_var;
  return f;
}

OracleEvaluator::OracleEvaluator(const skel::Skeleton& sk, FitnessWeights w, frame::LoadModel lm)
    : Evaluator(sk, w), lm_(lm) {}

std::vector<double> OracleEvaluator::drifts(const Chromosome& c) const {
  const auto r = frame::solve(skeleton_, c, lm_);
  std::vector<double> d(r.drift_x);
  d.insert(d.end(), r.drift_y.begin(), r.drift_y.end());
  return d;
}

SurrogateEvaluator::SurrogateEvaluator(const skel::Skeleton& sk, FitnessWeights w, const nn::NeuralSim& model)
    : Evaluator(sk, w), model_(model.frozen()) {}

std::vector<double> SurrogateEvaluator::drifts(const Chromosome& c) const {
  ad::NoGradGuard guard;
  std::vector<double> onehot(c.size() * skel::kSectionSlots, 0.0);
  for (std::size_t i = 0; i < c.size(); ++i) onehot[i * skel::kSectionSlots + static_cast<std::size_t>(c[i])] = 1.0;
  const auto y = ad::Tensor::from(std::move(onehot), static_cast<int>(c.size()), skel::kSectionSlots);
  std::mt19937_64 rng(0);
  const auto p = model_.forward(graph(), nn::stitch_sections(graph(), y), false, rng);
  std::vector<double> d(p.h.values());
  for (auto& x : d) x *= model_.drift_scale();
  return d;
}

void GAConfig::validate() const {
  if (population < 2) throw std::invalid_argument("population must be >= 2");
  if (elites < 0 || elites >= population) throw std::invalid_argument("elites must be in [0, population)");
  if (crossover_rate < 0.0 || crossover_rate > 1.0) throw std::invalid_argument("crossover_rate must be in [0, 1]");
  if (mutation_rate < 0.0 || mutation_rate > 1.0) throw std::invalid_argument("mutation_rate must be in [0, 1]");
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
}

nlohmann::json GAConfig::to_json() const {
  return {{"population", population},
          {"elites", elites},
          {"crossover_rate", crossover_rate},
          {"mutation_rate", mutation_rate},
          {"iterations", iterations},
          {"crossover", crossover == Crossover::uniform ? "uniform" : "single_point"}};
}

const Individual& tournament(const std::vector<Individual>& pop, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
  const auto& a = pop[pick(rng)];
  const auto& b = pop[pick(rng)];
  return b.fitness.loss < a.fitness.loss ? b : a;
}

Chromosome crossover(const Chromosome& a, const Chromosome& b, Crossover kind, std::mt19937_64& rng) {
  Chromosome child(a);
  if (kind == Crossover::uniform) {
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < child.size(); ++i)
      if (coin(rng)) child[i] = b[i];
  } else if (child.size() > 1) {
    const auto cut = static_cast<std::ptrdiff_t>(std::uniform_int_distribution<std::size_t>(1, child.size() - 1)(rng));
    std::copy(b.begin() + cut, b.end(), child.begin() + cut);
  }
  return child;
}

void mutate(Chromosome& c, const std::vector<int>& limits, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < c.size(); ++i)
    if (u(rng) < rate) c[i] = std::uniform_int_distribution<int>(0, limits[i] - 1)(rng);
}

std::vector<Chromosome> step(const std::vector<Individual>& evaluated, const std::vector<int>& limits,
                             const GAConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  if (evaluated.empty()) throw std::invalid_argument("cannot step an empty population");
  std::vector<std::size_t> order(evaluated.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return evaluated[a].fitness.loss < evaluated[b].fitness.loss;
  });
  std::vector<Chromosome> next;
  next.reserve(static_cast<std::size_t>(cfg.population));
  for (int e = 0; e < cfg.elites && e < static_cast<int>(order.size()); ++e)
    next.push_back(evaluated[order[static_cast<std::size_t>(e)]].genes);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  while (static_cast<int>(next.size()) < cfg.population) {
    const auto& a = tournament(evaluated, rng);
    const auto& b = tournament(evaluated, rng);
    auto child = u(rng) < cfg.crossover_rate ? crossover(a.genes, b.genes, cfg.crossover, rng) : a.genes;
    mutate(child, limits, cfg.mutation_rate, rng);
    next.push_back(std::move(child));
  }
  return next;
}

std::string to_string(Seeding s) {
  switch (s) {
    case Seeding::random: return "random";
    case Seeding::best_seed: return "best_seed";
    case Seeding::sampled_seeds: return "sampled_seeds";
  }
  return "random";
}

Seeding seeding_from_string(const std::string& s) {
  if (s == "random") return Seeding::random;
  if (s == "best_seed") return Seeding::best_seed;
  if (s == "sampled_seeds") return Seeding::sampled_seeds;
  throw std::invalid_argument("unknown seeding strategy '" + s + "' (random, best_seed, sampled_seeds)");
}

std::vector<Chromosome> seed_population(Seeding strategy, const std::vector<int>& limits, int size,
                                        const std::vector<double>* p_soft, std::mt19937_64& rng) {
  const std::size_t bars = limits.size();
  constexpr int slots = skel::kSectionSlots;
  if (strategy != Seeding::random) {
    if (!p_soft) throw GAError(to_string(strategy) + " seeding needs sizer probabilities");
    if (p_soft->size() != bars * slots)
      throw GAError("sizer probabilities cover " + std::to_string(p_soft->size() / slots) + " bars, skeleton has " +
                    std::to_string(bars));
  }
  // Probabilities restricted to each bar's own sub-library.
  auto row = [&](std::size_t i) {
    return std::vector<double>(p_soft->begin() + static_cast<std::ptrdiff_t>(i * slots),
                               p_soft->begin() + static_cast<std::ptrdiff_t>(i * slots + limits[i]));
  };
  std::vector<Chromosome> pop;
  switch (strategy) {
    case Seeding::random:
      for (int k = 0; k < size; ++k) {
        Chromosome c(bars);
        for (std::size_t i = 0; i < bars; ++i) c[i] = std::uniform_int_distribution<int>(0, limits[i] - 1)(rng);
        pop.push_back(std::move(c));
      }
      break;
    case Seeding::best_seed: {
      Chromosome c(bars);
      for (std::size_t i = 0; i < bars; ++i) {
        const auto r = row(i);
        c[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
      }
      pop.assign(static_cast<std::size_t>(size), c);
      break;
    }
    case Seeding::sampled_seeds: {
      std::vector<std::discrete_distribution<int>> dists;
      for (std::size_t i = 0; i < bars; ++i) {
        const auto r = row(i);
        dists.emplace_back(r.begin(), r.end());
      }
      for (int k = 0; k < size; ++k) {
        Chromosome c(bars);
        for (std::size_t i = 0; i < bars; ++i) c[i] = dists[i](rng);
        pop.push_back(std::move(c));
      }
      break;
    }
  }
  return pop;
}

namespace {

void evaluate_all(const Evaluator& ev, std::vector<Individual>& pop, std::vector<std::size_t> todo, int threads) {
  if (threads <= 1 || todo.size() < 2) {
    for (auto i : todo) pop[i].fitness = ev.evaluate(pop[i].genes, i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  {
    std::vector<std::jthread> workers;
    for (int t = 0; t < threads; ++t)
      workers.emplace_back([&, t] {
        try {
          for (std::size_t k = static_cast<std::size_t>(t); k < todo.size(); k += static_cast<std::size_t>(threads))
            pop[todo[k]].fitness = ev.evaluate(pop[todo[k]].genes, todo[k]);
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

GARun run(const Evaluator& ev, const GAConfig& cfg, std::vector<Chromosome> initial, std::uint64_t seed,
          const std::string& seeding) {
  cfg.validate();
  if (static_cast<int>(initial.size()) != cfg.population)
    throw GAError("initial population has " + std::to_string(initial.size()) + " chromosomes, expected " +
                  std::to_string(cfg.population));
  GARun out;
  out.evaluator = ev.tag();
  out.seeding = seeding;
  out.seed = seed;
  out.config = cfg;
  std::mt19937_64 rng(seed);
  std::map<Chromosome, Fitness> cache;
  std::vector<Individual> pop;
  for (auto& c : initial) pop.push_back({std::move(c), {}});
  for (int it = 0; it < cfg.iterations; ++it) {
    // Evaluate unique unseen chromosomes; the evaluator is pure.
    std::vector<std::size_t> todo;
    std::map<Chromosome, std::size_t> pending;
    for (std::size_t i = 0; i < pop.size(); ++i)
      if (!cache.count(pop[i].genes) && pending.emplace(pop[i].genes, i).second) todo.push_back(i);
    evaluate_all(ev, pop, todo, cfg.threads);
    out.evaluations += todo.size();
    for (auto i : todo) cache.emplace(pop[i].genes, pop[i].fitness);
    for (auto& ind : pop) ind.fitness = cache.at(ind.genes);

    const auto best = std::min_element(pop.begin(), pop.end(), [](const Individual& a, const Individual& b) {
      return a.fitness.loss < b.fitness.loss;
    });
    out.trace.push_back(best->fitness.loss);
    out.obj_trace.push_back(best->fitness.obj);
    out.l_dr_trace.push_back(best->fitness.l_dr);
    out.l_var_trace.push_back(best->fitness.l_var);
    if (out.best.empty() || best->fitness.loss < out.best_fitness.loss) {
      out.best = best->genes;
      out.best_fitness = best->fitness;
    }
    if (it + 1 == cfg.iterations) break;
    auto next = step(pop, ev.limits(), cfg, rng);
    pop.clear();
    for (auto& c : next) pop.push_back({std::move(c), {}});
  }
  return out;
}

nlohmann::json GARun::to_json() const {
  return {{"config", config.to_json()},
          {"evaluator", evaluator},
          {"seeding", seeding},
          {"seed", seed},
          {"skeleton_hash", skeleton_hash},
          {"trace", trace},
          {"components",
           {{"objective", obj_trace}, {"drift_constraint", l_dr_trace}, {"variety_constraint", l_var_trace}}},
          {"best_chromosome", best},
          {"best",
           {{"loss", best_fitness.loss},
            {"objective", best_fitness.obj},
            {"drift_constraint", best_fitness.l_dr},
            {"variety_constraint", best_fitness.l_var}}},
          {"evaluations", evaluations}};
}

GARun GARun::from_json(const nlohmann::json& j) {
  GARun r;
  r.evaluator = j.at("evaluator").get<std::string>();
  r.seeding = j.at("seeding").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.skeleton_hash = j.at("skeleton_hash").get<std::string>();
  r.trace = j.at("trace").get<std::vector<double>>();
  if (j.contains("components")) {
    const auto& c = j.at("components");
    r.obj_trace = c.at("objective").get<std::vector<double>>();
    r.l_dr_trace = c.at("drift_constraint").get<std::vector<double>>();
    r.l_var_trace = c.at("variety_constraint").get<std::vector<double>>();
  }
  r.best = j.at("best_chromosome").get<Chromosome>();
  const auto& b = j.at("best");
  r.best_fitness = {b.at("loss").get<double>(), b.at("objective").get<double>(),
                    b.at("drift_constraint").get<double>(), b.at("variety_constraint").get<double>()};
  r.evaluations = j.value("evaluations", std::size_t{0});
  const auto& c = j.at("config");
  r.config.population = c.at("population").get<int>();
  r.config.elites = c.at("elites").get<int>();
  r.config.crossover_rate = c.at("crossover_rate").get<double>();
  r.config.mutation_rate = c.at("mutation_rate").get<double>();
  r.config.iterations = c.at("iterations").get<int>();
  r.config.crossover = c.at("crossover").get<std::string>() == "single_point" ? Crossover::single_point
                                                                              : Crossover::uniform;
  return r;
}

nlohmann::json SeedingMetrics::to_json() const {
  auto opt = [](const auto& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"M1", opt(m1)}, {"M2", opt(m2)}, {"M3", opt(m3)}};
}

SeedingMetrics seeding_metrics(const std::vector<double>& random_trace, const std::vector<double>& seeded_trace) {
  if (random_trace.empty() || seeded_trace.empty()) throw std::invalid_argument("seeding metrics need two traces");
  const double rs = random_trace.front(), re = random_trace.back();
  const double ss = seeded_trace.front(), se = seeded_trace.back();
  SeedingMetrics m;
  if (rs != re) m.m1 = (rs - ss) / (rs - re);
  if (re != 0.0) m.m2 = (re - se) / re;
  for (std::size_t t = 0; t < seeded_trace.size(); ++t)
    if (seeded_trace[t] <= re) {
      m.m3 = static_cast<int>(t);
      break;
    }
  return m;
}

std::string skeleton_hash(const skel::Skeleton& sk) {
  auto bare = sk;
  for (auto& b : bare.bars) b.section.reset();
  return hash_hex(skel::skeleton_to_json(bare).dump());
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("spearman needs two equal series");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / ra.size();
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / rb.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return saa == 0 || sbb == 0 ? 0.0 : sab / std::sqrt(saa * sbb);
}

}  // namespace gridsizer::ga

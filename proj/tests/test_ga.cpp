#include <doctest.h>

#include <cmath>

#include "gridsizer/ga/ga.hpp"
#include "gridsizer/nn/neural_sizer.hpp"
#include "nn_fixtures.hpp"

using namespace gridsizer;

namespace {

skel::Skeleton small_skeleton(std::uint64_t seed, int stories = 2) {
  return skel::sample_skeleton(seed, fixtures::small_config(stories, stories));
}

ga::GAConfig fast_config(int iterations) {
  ga::GAConfig c;
  c.population = 30;
  c.elites = 3;
  c.iterations = iterations;
  return c;
}

// Stand-in evaluator with a closed-form drift model: stiffer columns, less drift.
class ToyEvaluator : public ga::Evaluator {
 public:
  using Evaluator::Evaluator;
  std::string tag() const override { return "toy"; }

 protected:
  std::vector<double> drifts(const ga::Chromosome& c) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) s += limits()[i] == 5 ? c[i] : 0.2 * c[i];
    return {0.03 / (1.0 + s / static_cast<double>(c.size()))};
  }
};

}  // namespace

TEST_CASE("fitness is monotone in mass and pure") {
  const auto sk = small_skeleton(1);
  ga::OracleEvaluator ev(sk, {});
  ga::Chromosome light(ev.limits().size(), 0), heavy(ev.limits().size());
  for (std::size_t i = 0; i < heavy.size(); ++i) heavy[i] = ev.limits()[i] - 1;
  CHECK(ev.evaluate(light).obj < ev.evaluate(heavy).obj);
  const auto a = ev.evaluate(heavy), b = ev.evaluate(heavy);
  CHECK(a.loss == b.loss);
  CHECK(a.l_dr == b.l_dr);
  ga::Chromosome bad(light);
  bad[0] = 9;
  try {
    ev.evaluate(bad, 17);
    FAIL("expected an error");
  } catch (const ga::GAError& e) {
    CHECK(std::string(e.what()).find("chromosome 17") != std::string::npos);
  }
}

TEST_CASE("degenerate rates copy tournament winners") {
  std::mt19937_64 rng(2);
  std::vector<ga::Individual> pop;
  for (int i = 0; i < 10; ++i) pop.push_back({ga::Chromosome(6, i % 5), {static_cast<double>(i), 0, 0, 0}});
  auto cfg = fast_config(1);
  cfg.population = 10;
  cfg.elites = 2;
  cfg.crossover_rate = 0.0;
  cfg.mutation_rate = 0.0;
  const auto next = ga::step(pop, std::vector<int>(6, 5), cfg, rng);
  REQUIRE(next.size() == 10);
  CHECK(next[0] == pop[0].genes);
  CHECK(next[1] == pop[1].genes);
  for (const auto& c : next) {
    bool found = false;
    for (const auto& p : pop) found |= p.genes == c;
    CHECK(found);
  }
}

TEST_CASE("tournament prefers the better of two draws") {
  std::mt19937_64 rng(3);
  std::vector<ga::Individual> pop;
  for (int i = 0; i < 4; ++i) pop.push_back({ga::Chromosome{i}, {static_cast<double>(i), 0, 0, 0}});
  std::vector<int> wins(4, 0);
  const int n = 40000;
  for (int k = 0; k < n; ++k) ++wins[static_cast<std::size_t>(ga::tournament(pop, rng).genes[0])];
  // With replacement: P(rank r wins) = ((4-r)^2 - (3-r)^2) / 16.
  const double expected[4] = {7.0 / 16, 5.0 / 16, 3.0 / 16, 1.0 / 16};
  for (int i = 0; i < 4; ++i) CHECK(std::abs(wins[static_cast<std::size_t>(i)] / double(n) - expected[i]) < 0.01);
}

TEST_CASE("mutation and crossover statistics") {
  std::mt19937_64 rng(4);
  SUBCASE("full mutation keeps a gene with probability 1/n") {
    const std::vector<int> limits(10000, 9);
    ga::Chromosome parent(limits.size(), 4), child = parent;
    ga::mutate(child, limits, 1.0, rng);
    int same = 0;
    for (std::size_t i = 0; i < child.size(); ++i) same += child[i] == parent[i];
    CHECK(std::abs(same / 10000.0 - 1.0 / 9.0) < 0.01);
  }
  SUBCASE("mutation rate 0.01 changes about 1% of genes") {
    const std::vector<int> limits(100000, 9);
    ga::Chromosome c(limits.size(), 0);
    ga::mutate(c, limits, 0.01, rng);
    int changed = 0;
    for (int g : c) changed += g != 0;
    CHECK(std::abs(changed / 100000.0 - 0.01 * 8.0 / 9.0) < 0.001);
  }
  SUBCASE("uniform crossover takes half the genes from each parent") {
    ga::Chromosome a(10000, 0), b(10000, 1);
    const auto c = ga::crossover(a, b, ga::Crossover::uniform, rng);
    int from_b = 0;
    for (int g : c) from_b += g;
    CHECK(std::abs(from_b / 10000.0 - 0.5) < 0.02);
  }
  SUBCASE("single-point crossover is a prefix of one parent and a suffix of the other") {
    ga::Chromosome a(50, 0), b(50, 1);
    const auto c = ga::crossover(a, b, ga::Crossover::single_point, rng);
    CHECK(std::is_sorted(c.begin(), c.end()));
    CHECK(c.front() == 0);
    CHECK(c.back() == 1);
  }
}

TEST_CASE("seeding strategies") {
  std::mt19937_64 rng(5);
  const std::vector<int> limits{5, 9, 9, 5};
  std::vector<double> p(4 * 9, 0.0);
  const std::vector<std::vector<double>> rows{
      {0.1, 0.2, 0.3, 0.15, 0.25}, {0.5, 0, 0, 0, 0, 0, 0, 0.2, 0.3}, {0, 0, 0, 0, 0, 0, 0, 0, 1}, {1, 0, 0, 0, 0}};
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) p[i * 9 + j] = rows[i][j];

  const auto best = ga::seed_population(ga::Seeding::best_seed, limits, 100, &p, rng);
  CHECK(best.size() == 100);
  CHECK(best.front() == ga::Chromosome{2, 0, 8, 0});
  for (const auto& c : best) CHECK(c == best.front());

  std::vector<double> onehot(4 * 9, 0.0);
  for (std::size_t i = 0; i < 4; ++i) onehot[i * 9 + i] = 1.0;
  for (const auto& c : ga::seed_population(ga::Seeding::sampled_seeds, limits, 100, &onehot, rng))
    CHECK(c == ga::Chromosome{0, 1, 2, 3});

  // Frequency test on a wider pool: 1000 chromosomes x 4 bars.
  const auto sampled = ga::seed_population(ga::Seeding::sampled_seeds, limits, 2000, &p, rng);
  for (std::size_t bar = 0; bar < 2; ++bar)
    for (std::size_t s = 0; s < rows[bar].size(); ++s) {
      double f = 0.0;
      for (const auto& c : sampled) f += c[bar] == static_cast<int>(s);
      CHECK(std::abs(f / 2000.0 - rows[bar][s]) < 0.03);
    }
  for (const auto& c : ga::seed_population(ga::Seeding::random, limits, 200, nullptr, rng))
    for (std::size_t i = 0; i < c.size(); ++i) CHECK((c[i] >= 0 && c[i] < limits[i]));
  CHECK_THROWS_AS(ga::seed_population(ga::Seeding::best_seed, limits, 10, nullptr, rng), ga::GAError);
  CHECK(ga::seeding_from_string("sampled_seeds") == ga::Seeding::sampled_seeds);
  CHECK_THROWS(ga::seeding_from_string("greedy"));
}

TEST_CASE("seeding metrics") {
  auto m = ga::seeding_metrics({10, 8, 5}, {2, 2, 2});
  CHECK(*m.m1 == doctest::Approx(1.6));
  CHECK(*m.m3 == 0);
  m = ga::seeding_metrics({10, 7, 5}, {9, 6, 5});
  CHECK(*m.m2 == 0.0);
  CHECK(*m.m3 == 2);
  std::vector<double> rand(100), seeded(100);
  for (int t = 0; t < 100; ++t) {
    rand[static_cast<std::size_t>(t)] = 100.0 - 0.5 * t;  // ends at 50.5
    seeded[static_cast<std::size_t>(t)] = t < 37 ? 60.0 : 50.0;
  }
  m = ga::seeding_metrics(rand, seeded);
  CHECK(*m.m3 == 37);
  m = ga::seeding_metrics({4, 4}, {5, 6});
  CHECK(!m.m1);
  CHECK(!m.m3);
  CHECK(m.to_json()["M1"].is_null());
  const auto self = ga::seeding_metrics(rand, rand);
  CHECK(*self.m1 == 0.0);
  CHECK(*self.m2 == 0.0);
}

TEST_CASE("runs are elitist and deterministic per seed") {
  const auto sk = small_skeleton(6);
  ToyEvaluator ev(sk, {});
  const auto cfg = fast_config(60);
  std::mt19937_64 rng(7);
  const auto init = ga::seed_population(ga::Seeding::random, ev.limits(), cfg.population, nullptr, rng);
  const auto a = ga::run(ev, cfg, init, 8);
  const auto b = ga::run(ev, cfg, init, 8);
  REQUIRE(a.trace.size() == 60);
  for (std::size_t t = 1; t < a.trace.size(); ++t) CHECK(a.trace[t] <= a.trace[t - 1]);
  CHECK(a.trace == b.trace);
  CHECK(a.best == b.best);
  CHECK(a.trace.back() < a.trace.front());
  CHECK(ev.evaluate(a.best).loss == a.trace.back());
  auto threaded = cfg;
  threaded.threads = 3;
  CHECK(ga::run(ev, threaded, init, 8).trace == a.trace);
  const auto j = a.to_json();
  const auto back = ga::GARun::from_json(j);
  CHECK(back.trace == a.trace);
  CHECK(back.best == a.best);
  CHECK(back.to_json() == j);
}

TEST_CASE("oracle GA run improves a small skeleton") {
  const auto sk = small_skeleton(9, 1);
  ga::OracleEvaluator ev(sk, {});
  auto cfg = fast_config(15);
  std::mt19937_64 rng(10);
  const auto r = ga::run(ev, cfg, ga::seed_population(ga::Seeding::random, ev.limits(), cfg.population, nullptr, rng), 11);
  CHECK(r.evaluator == "oracle");
  CHECK(r.trace.back() <= r.trace.front());
  CHECK(r.evaluations <= static_cast<std::size_t>(cfg.population * cfg.iterations));
}

TEST_CASE("surrogate and oracle evaluators rank designs alike") {
  // Surrogate fitted on designs of this one skeleton, then compared on fresh chromosomes.
  const auto sk = small_skeleton(12, 2);
  ga::OracleEvaluator oracle(sk, {});
  std::vector<fixtures::OracleSample> samples;
  for (int i = 0; i < 120; ++i) {
    fixtures::OracleSample s{sk, skel::assign_random_sections(sk, 1000 + static_cast<std::uint64_t>(i)), {}};
    // Spread column stiffness so the drift range is wide.
    for (std::size_t b = 0; b < sk.bars.size(); ++b)
      if (sk.bars[b].kind == skel::BarKind::column) s.sections[b] = i % 5;
    s.result = frame::solve(sk, s.sections);
    samples.push_back(std::move(s));
  }
  const double scale = fixtures::max_abs_drift(samples);
  std::vector<nn::SimExample> train_set;
  for (const auto& s : samples) train_set.push_back(fixtures::to_example(s, scale));
  nn::NeuralSimConfig mc;
  mc.embed_dim = 16;
  mc.prop_steps = 2;
  mc.dropout = 0.0;
  nn::NeuralSim model(mc, scale, 13);
  nn::SimTrainConfig tc;
  tc.lr = 3e-3;
  tc.epochs = 15;
  tc.seed = 14;
  nn::train(model, train_set, {}, tc);
  ga::SurrogateEvaluator surrogate(sk, {}, model);

  std::mt19937_64 rng(15);
  const auto designs = ga::seed_population(ga::Seeding::random, oracle.limits(), 50, nullptr, rng);
  std::vector<double> a, b, da, db;
  for (auto c : designs) {
    const int col = std::uniform_int_distribution<int>(0, 4)(rng);
    for (std::size_t i = 0; i < c.size(); ++i)
      if (oracle.limits()[i] == 5) c[i] = col;
    a.push_back(oracle.evaluate(c).loss);
    b.push_back(surrogate.evaluate(c).loss);
    da.push_back(oracle.evaluate(c).l_dr);
    db.push_back(surrogate.evaluate(c).l_dr);
  }
  const double rho = ga::spearman(a, b);
  // The mass term is shared by both evaluators, so also rank the drift term alone.
  const double rho_drift = ga::spearman(da, db);
  MESSAGE("Spearman rank correlation " << rho << ", drift term " << rho_drift);
  CHECK(rho > 0.8);
  CHECK(rho_drift > 0.8);
}

TEST_CASE("spearman and skeleton hash") {
  CHECK(ga::spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(ga::spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  auto sk = small_skeleton(16);
  const auto h = ga::skeleton_hash(sk);
  skel::apply_sections(sk, skel::assign_random_sections(sk, 1));
  CHECK(ga::skeleton_hash(sk) == h);
  CHECK(ga::skeleton_hash(small_skeleton(17)) != h);
}

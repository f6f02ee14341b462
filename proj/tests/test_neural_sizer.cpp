#include <doctest.h>

#include <cmath>
#include <set>

#include "gridsizer/diff/gradcheck.hpp"
#include "gridsizer/diff/ops.hpp"
#include "gridsizer/frame/sections.hpp"
#include "gridsizer/nn/neural_sizer.hpp"
#include "nn_fixtures.hpp"

using namespace gridsizer;
using nn::NeuralSizer;
using nn::SizerConfig;

namespace {

SizerConfig small_sizer() {
  SizerConfig c;
  c.embed_dim = 8;
  c.prop_steps = 2;
  return c;
}

nn::NeuralSim small_sim(std::uint64_t seed) {
  nn::NeuralSimConfig c;
  c.embed_dim = 8;
  c.prop_steps = 2;
  c.dropout = 0.0;
  return nn::NeuralSim(c, 0.02, seed);
}

nn::GraphInput unsized(std::uint64_t seed, int stories) {
  return nn::prepare_graph(skel::to_graph(skel::sample_skeleton(seed, fixtures::small_config(stories, stories))));
}

}  // namespace

TEST_CASE("hard forward gives one valid one-hot row per bar") {
  NeuralSizer s(small_sizer(), 1);
  const auto g = unsized(2, 2);
  std::mt19937_64 rng(3);
  const auto out = s.forward(g, true, nn::SampleMode::hard, rng);
  REQUIRE(out.y.rows() == g.nodes - 1);
  CHECK(out.y.cols() == 9);
  for (int r = 0; r < out.y.rows(); ++r) {
    double sum = 0.0;
    int ones = 0;
    for (int c = 0; c < 9; ++c) {
      sum += out.y.at(r, c);
      ones += out.y.at(r, c) == 1.0;
    }
    CHECK(sum == 1.0);
    CHECK(ones == 1);
    const int limit = g.bar_is_column[static_cast<std::size_t>(r)] ? 5 : 9;
    CHECK(out.index[static_cast<std::size_t>(r)] < limit);
    CHECK(out.best[static_cast<std::size_t>(r)] < limit);
    double ps = 0.0;
    for (int c = 0; c < 9; ++c) ps += out.p_soft[static_cast<std::size_t>(r * 9 + c)];
    CHECK(ps == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(s.forward(nn::prepare_graph(fixtures::toy_graph(10, 2, 19, 1)), false, nn::SampleMode::hard, rng),
                  ad::ShapeError);
}

TEST_CASE("sizer probabilities follow a node relabelling") {
  NeuralSizer s(small_sizer(), 4);
  const auto sk = skel::sample_skeleton(6, fixtures::small_config(2, 2));
  const auto g = skel::to_graph(sk);
  std::vector<int> perm(static_cast<std::size_t>(g.node_count()));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(7);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto pg = fixtures::permute(g, perm);
  const auto a = s.propose(nn::prepare_graph(g));
  const auto in_b = nn::prepare_graph(pg);
  const auto b = s.propose(in_b);
  // Row of old bar i in b: position of perm[i] among the permuted bar nodes.
  std::vector<int> row_of(static_cast<std::size_t>(g.node_count()), -1);
  for (std::size_t r = 0; r < in_b.bar_nodes.size(); ++r) row_of[static_cast<std::size_t>(in_b.bar_nodes[r])] = static_cast<int>(r);
  for (int i = 0; i < g.bar_count(); ++i) {
    const int r = row_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    for (int c = 0; c < 9; ++c)
      CHECK(a.p_soft[static_cast<std::size_t>(i * 9 + c)] ==
            doctest::Approx(b.p_soft[static_cast<std::size_t>(r * 9 + c)]).epsilon(1e-10));
  }
}

TEST_CASE("stitched features reproduce the sized graph layout") {
  const auto sk = skel::sample_skeleton(8, fixtures::small_config(1, 2));
  const auto sections = skel::assign_random_sections(sk, 8);
  const auto sized = nn::prepare_graph(skel::to_graph(sk, sections));
  const auto g = nn::prepare_graph(skel::to_graph(sk));
  std::vector<double> onehot(g.bar_nodes.size() * 9, 0.0);
  for (std::size_t i = 0; i < sections.size(); ++i) onehot[i * 9 + static_cast<std::size_t>(sections[i])] = 1.0;
  const auto x = nn::stitch_sections(g, ad::Tensor::from(onehot, static_cast<int>(sections.size()), 9));
  CHECK(x.values() == sized.features.values());
  CHECK(nn::slots_to_sections(g, sections) == sections);
}

TEST_CASE("mass objective is mean bar mass in tonnes") {
  skel::Grid grid{{30}, {30}};
  const auto sk = skel::build_skeleton(grid, {{0, 0}}, 1);
  const auto g = nn::prepare_graph(skel::to_graph(sk));
  std::vector<int> slots(g.bar_nodes.size(), 0);
  double lb = 0.0;
  for (const auto& b : sk.bars) lb += b.length() * frame::section_for(b.kind, 0).unit_weight;
  CHECK(nn::mass_objective(g, slots) == doctest::Approx(lb * 0.45359237e-3 / 8.0).epsilon(1e-12));
  std::vector<int> heavy(slots.size());
  for (std::size_t i = 0; i < heavy.size(); ++i) heavy[i] = g.bar_is_column[i] ? 4 : 8;
  CHECK(nn::mass_objective(g, heavy) > nn::mass_objective(g, slots));
}

TEST_CASE("constraint losses at their reference points") {
  SUBCASE("drifts at the limit give zero drift loss") {
    const auto h = ad::Tensor::from({0.75, -0.75, 0.75, 0.75}, 2, 2);
    CHECK(std::abs(nn::drift_loss(h, 0.02, 0.015).item()) < 1e-15);
    CHECK(nn::drift_loss({0.015, -0.015}, 0.015) == 0.0);
    CHECK(nn::drift_loss({0.025}, 0.015) == doctest::Approx(0.01));
    CHECK(nn::drift_loss({0.005}, 0.015) == doctest::Approx(-1e-4));
  }
  SUBCASE("entropy extremes") {
    CHECK(nn::entropy_loss(ad::Tensor::zeros(4, 9), 0.6).item() == doctest::Approx(0.4).epsilon(1e-12));
    auto sharp = ad::Tensor::full(3, 9, -1e4);
    for (int r = 0; r < 3; ++r) sharp.mutable_values()[static_cast<std::size_t>(r * 9 + r)] = 0.0;
    CHECK(nn::entropy_loss(sharp, 0.6).item() == doctest::Approx(-0.6).epsilon(1e-12));
  }
  SUBCASE("variety") {
    std::vector<double> six(18 * 9, 0.0);
    for (int r = 0; r < 18; ++r) six[static_cast<std::size_t>(r * 9 + r % 6)] = 1.0;
    CHECK(nn::variety_loss(ad::Tensor::from(six, 18, 9)).item() == doctest::Approx(0.0).epsilon(1e-15));
    std::vector<double> nine(18 * 9, 0.0);
    for (int r = 0; r < 18; ++r) nine[static_cast<std::size_t>(r * 9 + r % 9)] = 1.0;
    CHECK(nn::variety_loss(ad::Tensor::from(nine, 18, 9)).item() == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(nn::variety_loss(std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8}) == doctest::Approx(1.0 / 3.0));
    CHECK(nn::variety_loss(std::vector<int>{0, 0, 3, 3}) == 0.0);
  }
}

TEST_CASE("dual step") {
  const auto cfg = small_sizer();
  const nn::DualWeights w{1e3, 1.0, 1.0};
  const auto same = nn::dual_step(w, 0.0, 0.0, 0.0, cfg);
  CHECK(same.w1 == w.w1);
  CHECK(same.w2 == w.w2);
  CHECK(same.w3 == w.w3);
  CHECK(nn::dual_step(w, 0.01, 0.0, 0.0, cfg).w1 == doctest::Approx(1e3 + 1e-3).epsilon(1e-15));
  nn::DualWeights d = w;
  for (int i = 0; i < 5000; ++i) {
    d = nn::dual_step(d, 0.0, 0.0, -0.3, cfg);
    CHECK(d.w3 >= 0.0);
  }
  CHECK(d.w3 == 0.0);
  auto bad = cfg;
  bad.gamma2 = 0.0;
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.alpha = 1.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("total loss gradient through the frozen surrogate matches finite differences") {
  NeuralSizer s(small_sizer(), 9);
  const auto sim = small_sim(10).frozen();
  const auto g = nn::prepare_graph(fixtures::toy_graph(10, 2, 10, 11));
  const nn::DualWeights w{10.0, 1.0, 1.0};
  const auto r = ad::gradcheck(
      [&] {
        std::mt19937_64 rng(12);  // fixed dropout masks and Gumbel noise
        const auto out = s.forward(g, true, nn::SampleMode::soft, rng);
        const auto pred = sim.forward(g, nn::stitch_sections(g, out.y), false, rng);
        return nn::primal_loss(nn::sizer_losses(out, pred, g, sim.drift_scale(), s.config()), 1.0, w);
      },
      s.params().tensors(), 1e-5, 60, 13);
  CHECK(r.checked == 60);
  CHECK(r.max_error < 1e-4);
  MESSAGE("end-to-end relative error " << r.max_error);
}

TEST_CASE("hard sampling routes the soft Jacobian into the sizer") {
  NeuralSizer s(small_sizer(), 14);
  const auto sim = small_sim(15).frozen();
  const auto g = unsized(16, 1);
  std::mt19937_64 rng(17);
  const auto out = s.forward(g, true, nn::SampleMode::hard, rng);
  const auto pred = sim.forward(g, nn::stitch_sections(g, out.y), false, rng);
  nn::primal_loss(nn::sizer_losses(out, pred, g, sim.drift_scale(), s.config()), 1.0, {1e3, 1.0, 1.0}).backward();
  double norm = 0.0;
  for (double v : s.params().get("dec.1.w").grad()) norm += v * v;
  CHECK(norm > 0.0);
  for (const auto& t : sim.params().tensors()) CHECK(t.grad().empty());
}

TEST_CASE("sizer weights round trip") {
  auto cfg = small_sizer();
  cfg.w0 = 10.0;
  NeuralSizer s(cfg, 18);
  NeuralSizer back(ad::ModelParams::from_bytes(s.params().to_bytes()));
  CHECK(back.config().w0 == 10.0);
  const auto g = unsized(19, 2);
  CHECK(back.propose(g).p_soft == s.propose(g).p_soft);
  CHECK_THROWS_AS(NeuralSizer(small_sim(1).params().clone()), ad::FormatError);
}

TEST_CASE("training run") {
  const auto sim = small_sim(20);
  nn::SizerTrainConfig tc;
  tc.epochs = 40;
  tc.lr = 1e-3;
  tc.seed = 21;
  tc.sampler = fixtures::small_config(1, 2);
  SUBCASE("deterministic per seed with dual updates every 5 epochs") {
    NeuralSizer a(small_sizer(), 22), b(small_sizer(), 22);
    const auto ra = nn::train_sizer(a, sim, tc);
    const auto rb = nn::train_sizer(b, sim, tc);
    REQUIRE(ra.epochs.size() == 40);
    for (std::size_t i = 0; i < ra.epochs.size(); ++i) {
      CHECK(ra.epochs[i].total == rb.epochs[i].total);
      CHECK(ra.epochs[i].weights.w1 == rb.epochs[i].weights.w1);
    }
    for (int e = 1; e < 5; ++e) CHECK(ra.epochs[static_cast<std::size_t>(e)].weights.w1 == ra.epochs[0].weights.w1);
    CHECK(ra.epochs[5].weights.w3 != ra.epochs[0].weights.w3);
    CHECK(a.params().get("dec.1.w").values() == b.params().get("dec.1.w").values());
  }
  SUBCASE("entropy alone converges to the target ratio") {
    auto cfg = small_sizer();
    cfg.w0 = 0.0;
    cfg.w1 = 0.0;
    cfg.w2 = 0.0;
    cfg.gamma1 = 1e-12;
    cfg.gamma2 = 1e-12;
    cfg.w3 = 1.0;
    cfg.gamma3 = 1e-2;
    NeuralSizer s(cfg, 23);
    tc.epochs = 500;
    tc.lr = 1e-2;
    const auto r = nn::train_sizer(s, sim, tc);
    double ratio = 0.0;
    for (std::size_t i = r.epochs.size() - 50; i < r.epochs.size(); ++i) ratio += r.epochs[i].l_h + cfg.alpha;
    ratio /= 50.0;
    MESSAGE("entropy ratio " << ratio << " starting from " << r.epochs.front().l_h + cfg.alpha);
    CHECK(std::abs(ratio - cfg.alpha) < 0.05);
  }
}

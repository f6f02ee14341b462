#include "gridsizer/nn/neural_sizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gridsizer/diff/ops.hpp"
#include "gridsizer/frame/oracle.hpp"
#include "gridsizer/frame/sections.hpp"
#include "gridsizer/structure/graph.hpp"

namespace gridsizer::nn {

namespace {

constexpr const char* kModelTag = "neural_sizer";
constexpr double kMaskLogit = -1e4;
constexpr double kLbToTonne = 0.45359237e-3;
constexpr int kVarietyLimit = 6;

ad::Tensor column_mask(const GraphInput& g) {
  const int b = static_cast<int>(g.bar_nodes.size());
  std::vector<double> m(static_cast<std::size_t>(b) * skel::kSectionSlots, 0.0);
  for (int i = 0; i < b; ++i)
    if (g.bar_is_column[static_cast<std::size_t>(i)])
      for (int s = skel::kColumnSections; s < skel::kSectionSlots; ++s)
        m[static_cast<std::size_t>(i) * skel::kSectionSlots + s] = kMaskLogit;
  return ad::Tensor::from(std::move(m), b, skel::kSectionSlots);
}

std::vector<double> row_softmax(const std::vector<double>& logits, int cols) {
  std::vector<double> p(logits.size());
  for (std::size_t r = 0; r < logits.size() / cols; ++r) {
    const double* l = logits.data() + r * cols;
    const double mx = *std::max_element(l, l + cols);
    double s = 0.0;
    for (int c = 0; c < cols; ++c) s += (p[r * cols + c] = std::exp(l[c] - mx));
    for (int c = 0; c < cols; ++c) p[r * cols + c] /= s;
  }
  return p;
}

double leaky(double x) { return x > 0.0 ? x : 0.01 * x; }

}  // namespace

void SizerConfig::validate() const {
  if (embed_dim < 1) throw std::invalid_argument("embed_dim must be >= 1");
  if (prop_steps < 1) throw std::invalid_argument("prop_steps must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0, 1)");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be > 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0, 1)");
  if (!(drift_limit > 0.0)) throw std::invalid_argument("drift_limit must be > 0");
  if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0 || w3 < 0.0) throw std::invalid_argument("loss weights must be >= 0");
  if (!(gamma1 > 0.0 && gamma2 > 0.0 && gamma3 > 0.0)) throw std::invalid_argument("dual step sizes must be > 0");
}

nlohmann::json SizerConfig::to_json() const {
  return {{"embed_dim", embed_dim}, {"prop_steps", prop_steps}, {"dropout", dropout}, {"tau", tau},
          {"alpha", alpha},         {"drift_limit", drift_limit}, {"w0", w0},          {"w1", w1},
          {"gamma1", gamma1},       {"w2", w2},                   {"gamma2", gamma2},  {"w3", w3},
          {"gamma3", gamma3}};
}

SizerConfig SizerConfig::from_json(const nlohmann::json& j) {
  SizerConfig c;
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.prop_steps = j.value("prop_steps", c.prop_steps);
  c.dropout = j.value("dropout", c.dropout);
  c.tau = j.value("tau", c.tau);
  c.alpha = j.value("alpha", c.alpha);
  c.drift_limit = j.value("drift_limit", c.drift_limit);
  c.w0 = j.value("w0", c.w0);
  c.w1 = j.value("w1", c.w1);
  c.gamma1 = j.value("gamma1", c.gamma1);
  c.w2 = j.value("w2", c.w2);
  c.gamma2 = j.value("gamma2", c.gamma2);
  c.w3 = j.value("w3", c.w3);
  c.gamma3 = j.value("gamma3", c.gamma3);
  c.validate();
  return c;
}

NeuralSizer::NeuralSizer(const SizerConfig& cfg, std::uint64_t seed) : cfg_(cfg), params_("neural_sizer/1") {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const int d = cfg_.embed_dim;
  add_linear(params_, "enc", skel::kFeatureWidthUnsized, d, rng);
  add_message(params_, "msg", d, rng);
  add_linear(params_, "upd", 2 * d, d, rng);
  add_linear(params_, "dec.0", 2 * d, d, rng);
  add_linear(params_, "dec.1", d, skel::kSectionSlots, rng);
  auto& a = params_.attributes();
  a["model"] = kModelTag;
  a["config"] = cfg_.to_json().dump();
  a["layout_hash"] = layout_hash(skel::kFeatureWidthUnsized);
  params_.set_rng_state(rng);
}

NeuralSizer::NeuralSizer(ad::ModelParams params) : params_(std::move(params)) {
  const auto& a = params_.attributes();
  auto get = [&](const char* key) {
    auto it = a.find(key);
    if (it == a.end()) throw ad::FormatError(std::string("sizer weights lack attribute '") + key + "'");
    return it->second;
  };
  if (get("model") != kModelTag) throw ad::FormatError("weights are not a sizer model: " + get("model"));
  if (get("layout_hash") != layout_hash(skel::kFeatureWidthUnsized))
    throw ad::FormatError("sizer was trained with a different feature layout (hash " + get("layout_hash") + ")");
  cfg_ = SizerConfig::from_json(nlohmann::json::parse(get("config")));
  for (const char* name : {"enc.w", "msg.w_self", "upd.w", "dec.0.w", "dec.1.w"})
    if (!params_.contains(name)) throw ad::FormatError(std::string("sizer weights lack tensor '") + name + "'");
}

SizingOutput NeuralSizer::forward(const GraphInput& g, bool training, SampleMode mode, std::mt19937_64& rng) const {
  if (g.features.cols() != skel::kFeatureWidthUnsized)
    throw ad::ShapeError("sizer expects " + std::to_string(skel::kFeatureWidthUnsized) +
                         "-wide node features, got " + g.features.shape_string());
  auto v = slp(params_, "enc", g.features);
  for (int t = 0; t < cfg_.prop_steps; ++t) {
    const auto m = neighbour_message(params_, "msg", v, g);
    v = ad::dropout(slp(params_, "upd", ad::concat_cols({v, m})), cfg_.dropout, rng, training);
  }
  const std::vector<int> all(static_cast<std::size_t>(g.nodes), 0);
  const auto graph_embedding = ad::segment_max(v, all, 1);
  const auto bars = ad::gather_rows(v, g.bar_nodes);
  const std::vector<int> broadcast(g.bar_nodes.size(), 0);
  const auto joined = ad::concat_cols({bars, ad::gather_rows(graph_embedding, broadcast)});
  const auto hidden = ad::dropout(slp(params_, "dec.0", joined), cfg_.dropout, rng, training);

  SizingOutput out;
  out.logits = ad::add(linear(params_, "dec.1", hidden), column_mask(g));
  auto sample = ad::gumbel_softmax(out.logits, cfg_.tau, rng, mode == SampleMode::hard);
  out.y = std::move(sample.y);
  out.index = std::move(sample.index);
  out.p_soft = row_softmax(out.logits.values(), skel::kSectionSlots);
  for (std::size_t r = 0; r < g.bar_nodes.size(); ++r) {
    const auto* p = out.p_soft.data() + r * skel::kSectionSlots;
    out.best.push_back(static_cast<int>(std::max_element(p, p + skel::kSectionSlots) - p));
  }
  return out;
}

SizingOutput NeuralSizer::propose(const GraphInput& g) const {
  ad::NoGradGuard guard;
  std::mt19937_64 rng(0);
  return forward(g, false, SampleMode::hard, rng);
}

ad::Tensor stitch_sections(const GraphInput& g, const ad::Tensor& y) {
  if (g.features.cols() != skel::kFeatureWidthUnsized)
    throw ad::ShapeError("section stitching needs the unsized layout, got " + g.features.shape_string());
  if (y.rows() != static_cast<int>(g.bar_nodes.size()) || y.cols() != skel::kSectionSlots)
    throw ad::ShapeError("section rows " + y.shape_string() + " do not match " +
                         std::to_string(g.bar_nodes.size()) + " bars");
  const auto bars = ad::gather_rows(g.features, g.bar_nodes);
  const auto sized = ad::concat_cols({ad::slice_cols(bars, 0, skel::kSectionOffset), y,
                                      ad::slice_cols(bars, skel::kSectionOffset, skel::kFeatureWidthUnsized)});
  const auto stacked = ad::concat_rows({sized, ad::Tensor::full(1, skel::kFeatureWidthSized, -1.0)});
  std::vector<int> order(static_cast<std::size_t>(g.nodes));
  for (std::size_t i = 0; i < g.bar_nodes.size(); ++i) order[static_cast<std::size_t>(g.bar_nodes[i])] = static_cast<int>(i);
  order[static_cast<std::size_t>(g.ground)] = static_cast<int>(g.bar_nodes.size());
  return ad::gather_rows(stacked, order);
}

ad::Tensor mass_weights(const GraphInput& g) {
  const auto b = g.bar_nodes.size();
  std::vector<double> m(b * skel::kSectionSlots, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    const auto kind = g.bar_is_column[i] ? skel::BarKind::column : skel::BarKind::beam;
    for (int s = 0; s < skel::sections_for(kind); ++s)
      m[i * skel::kSectionSlots + s] =
          g.bar_length[i] * frame::section_for(kind, s).unit_weight * kLbToTonne / static_cast<double>(b);
  }
  return ad::Tensor::from(std::move(m), static_cast<int>(b), skel::kSectionSlots);
}

double mass_objective(const GraphInput& g, const std::vector<int>& slots) {
  const auto m = mass_weights(g);
  double s = 0.0;
  for (std::size_t i = 0; i < slots.size(); ++i) s += m.values()[i * skel::kSectionSlots + slots[i]];
  return s;
}

ad::Tensor drift_loss(const ad::Tensor& h, double drift_scale, double drift_limit) {
  return ad::mean(ad::leaky_relu(ad::add_scalar(ad::abs(ad::scale(h, drift_scale)), -drift_limit), 0.01));
}

double drift_loss(const std::vector<double>& drifts, double drift_limit) {
  if (drifts.empty()) return 0.0;
  double s = 0.0;
  for (double d : drifts) s += leaky(std::abs(d) - drift_limit);
  return s / static_cast<double>(drifts.size());
}

ad::Tensor variety_loss(const ad::Tensor& y) {
  return ad::add_scalar(ad::scale(ad::top_k_sum(ad::column_mean(y), kVarietyLimit), -1.0), 1.0);
}

double variety_loss(const std::vector<int>& slots) {
  if (slots.empty()) return 0.0;
  std::vector<double> usage(skel::kSectionSlots, 0.0);
  for (int s : slots) usage[static_cast<std::size_t>(s)] += 1.0 / static_cast<double>(slots.size());
  std::sort(usage.rbegin(), usage.rend());
  return 1.0 - std::accumulate(usage.begin(), usage.begin() + kVarietyLimit, 0.0);
}

ad::Tensor entropy_loss(const ad::Tensor& logits, double alpha) {
  return ad::add_scalar(ad::scale(ad::mean(ad::softmax_entropy(logits)), 1.0 / std::log(skel::kSectionSlots)),
                        -alpha);
}

SizerLosses sizer_losses(const SizingOutput& out, const SimPrediction& sim, const GraphInput& g,
                         double drift_scale, const SizerConfig& cfg) {
  return {ad::sum(ad::mul(out.y, mass_weights(g))), drift_loss(sim.h, drift_scale, cfg.drift_limit),
          variety_loss(out.y), entropy_loss(out.logits, cfg.alpha)};
}

ad::Tensor primal_loss(const SizerLosses& l, double w0, const DualWeights& w) {
  return ad::add(ad::add(ad::scale(l.obj, w0), ad::scale(l.l_dr, w.w1)),
                 ad::add(ad::scale(l.l_var, w.w2), ad::scale(ad::abs(l.l_h), w.w3)));
}

DualWeights dual_step(const DualWeights& w, double l_dr, double l_var, double l_h, const SizerConfig& cfg) {
  return {std::max(0.0, w.w1 + cfg.gamma1 * l_dr), std::max(0.0, w.w2 + cfg.gamma2 * l_var),
          std::max(0.0, w.w3 + cfg.gamma3 * l_h)};
}

nlohmann::json SizerTrainReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : epochs)
    rows.push_back({{"objective", e.obj},
                    {"drift_constraint", e.l_dr},
                    {"variety_constraint", e.l_var},
                    {"entropy_constraint", e.l_h},
                    {"total", e.total},
                    {"w1", e.weights.w1},
                    {"w2", e.weights.w2},
                    {"w3", e.weights.w3}});
  return {{"epochs", std::move(rows)}};
}

SizerTrainReport train_sizer(NeuralSizer& sizer, const NeuralSim& surrogate, const SizerTrainConfig& cfg,
                             const std::function<void(int, const SizerEpoch&)>& progress) {
  if (cfg.epochs < 1 || cfg.update_every < 1) throw std::invalid_argument("epochs and update_every must be >= 1");
  const auto& sc = sizer.config();
  const auto frozen = surrogate.frozen();
  std::mt19937_64 rng(cfg.seed);
  ad::AdamW opt;
  opt.lr = cfg.lr;
  const double p0 = sc.dropout;
  DualWeights w{sc.w1, sc.w2, sc.w3};
  SizerTrainReport report;
  double acc_dr = 0.0, acc_var = 0.0, acc_h = 0.0;
  int window = 0;
  sizer.params().zero_grad();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.decay_dropout) sizer.set_dropout(p0 * (1.0 - static_cast<double>(epoch) / cfg.epochs));
    const auto sk = skel::sample_skeleton(rng(), cfg.sampler);
    const auto g = prepare_graph(skel::to_graph(sk));
    const auto out = sizer.forward(g, true, SampleMode::hard, rng);
    const auto pred = frozen.forward(g, stitch_sections(g, out.y), false, rng);
    const auto l = sizer_losses(out, pred, g, frozen.drift_scale(), sc);
    const auto total = primal_loss(l, sc.w0, w);
    total.backward();
    SizerEpoch e{l.obj.item(), l.l_dr.item(), l.l_var.item(), l.l_h.item(), total.item(), w};
    acc_dr += e.l_dr;
    acc_var += e.l_var;
    acc_h += e.l_h;
    ++window;
    if (window == cfg.update_every || epoch + 1 == cfg.epochs) {
      sizer.params().scale_grad(1.0 / window);
      opt.step(sizer.params());
      sizer.params().zero_grad();
      w = dual_step(w, acc_dr / window, acc_var / window, acc_h / window, sc);
      acc_dr = acc_var = acc_h = 0.0;
      window = 0;
    }
    report.epochs.push_back(e);
    if (progress) progress(epoch, e);
  }
  sizer.set_dropout(p0);
  sizer.params().set_rng_state(rng);
  return report;
}

nlohmann::json SizerEvaluation::to_json() const {
  return {{"objective", obj},
          {"drift_constraint_oracle", l_dr_oracle},
          {"drift_constraint_surrogate", l_dr_surrogate},
          {"variety_constraint", l_var},
          {"max_oracle_drift", max_drift},
          {"designs", designs},
          {"per_design",
           {{"drift_constraint_oracle", design_l_dr},
            {"max_oracle_drift", design_max_drift},
            {"max_surrogate_drift", design_surrogate_max_drift}}}};
}

std::vector<int> slots_to_sections(const GraphInput& g, const std::vector<int>& slots) {
  if (slots.size() != g.bar_nodes.size()) throw std::invalid_argument("one slot per bar expected");
  std::vector<int> sections(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const int limit = g.bar_is_column[i] ? skel::kColumnSections : skel::kBeamSections;
    if (slots[i] < 0 || slots[i] >= limit)
      throw std::out_of_range("slot " + std::to_string(slots[i]) + " invalid for bar " + std::to_string(i));
    sections[static_cast<std::size_t>(g.bar_nodes[i])] = slots[i];
  }
  return sections;
}

SizerEvaluation evaluate_sizer(const NeuralSizer& sizer, const NeuralSim& surrogate,
                               const std::vector<skel::Skeleton>& skeletons, double drift_limit) {
  SizerEvaluation ev;
  for (const auto& sk : skeletons) {
    const auto g = prepare_graph(skel::to_graph(sk));
    const auto out = sizer.propose(g);
    const auto sections = slots_to_sections(g, out.best);
    const auto res = frame::solve(sk, sections);
    std::vector<double> drifts(res.drift_x);
    drifts.insert(drifts.end(), res.drift_y.begin(), res.drift_y.end());
    double worst = 0.0;
    for (double d : drifts) worst = std::max(worst, std::abs(d));
    ev.max_drift = std::max(ev.max_drift, worst);
    ev.design_max_drift.push_back(worst);
    ev.design_l_dr.push_back(drift_loss(drifts, drift_limit));
    ev.l_dr_oracle += ev.design_l_dr.back();
    ev.l_var += variety_loss(out.best);
    ev.obj += mass_objective(g, out.best);
    ad::NoGradGuard guard;
    std::vector<double> onehot(out.best.size() * skel::kSectionSlots, 0.0);
    for (std::size_t i = 0; i < out.best.size(); ++i) onehot[i * skel::kSectionSlots + out.best[i]] = 1.0;
    const auto y = ad::Tensor::from(std::move(onehot), static_cast<int>(out.best.size()), skel::kSectionSlots);
    std::mt19937_64 rng(0);
    const auto pred = surrogate.forward(g, stitch_sections(g, y), false, rng);
    ev.l_dr_surrogate += drift_loss(pred.h, surrogate.drift_scale(), drift_limit).item();
    double s_worst = 0.0;
    for (double h : pred.h.values()) s_worst = std::max(s_worst, std::abs(h) * surrogate.drift_scale());
    ev.design_surrogate_max_drift.push_back(s_worst);
    ++ev.designs;
  }
  if (ev.designs > 0) {
    const double n = static_cast<double>(ev.designs);
    ev.obj /= n;
    ev.l_dr_oracle /= n;
    ev.l_dr_surrogate /= n;
    ev.l_var /= n;
  }
  return ev;
}

}  // namespace gridsizer::nn

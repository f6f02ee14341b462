#include "gridsizer/nn/neural_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "gridsizer/diff/ops.hpp"
#include "gridsizer/structure/graph.hpp"

namespace gridsizer::nn {

namespace {

constexpr const char* kModelTag = "neural_sim";

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ad::Tensor mlp_head(const ad::ModelParams& p, const std::string& prefix, const ad::Tensor& x) {
  return linear(p, prefix + ".1", slp(p, prefix + ".0", x));
}

}  // namespace

void NeuralSimConfig::validate() const {
  if (embed_dim < 1) throw std::invalid_argument("embed_dim must be >= 1");
  if (prop_steps < 1) throw std::invalid_argument("prop_steps must be >= 1");
  if (use_position_aware && anchor_count < 1) throw std::invalid_argument("anchor_count must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0, 1)");
  if (drift_limit <= 0.0) throw std::invalid_argument("drift_limit must be > 0");
  if (bce_weight < 0.0) throw std::invalid_argument("bce_weight must be >= 0");
}

nlohmann::json NeuralSimConfig::to_json() const {
  return {{"embed_dim", embed_dim},     {"prop_steps", prop_steps}, {"use_position_aware", use_position_aware},
          {"anchor_count", anchor_count}, {"dropout", dropout},     {"drift_limit", drift_limit},
          {"bce_weight", bce_weight}};
}

NeuralSimConfig NeuralSimConfig::from_json(const nlohmann::json& j) {
  NeuralSimConfig c;
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.prop_steps = j.value("prop_steps", c.prop_steps);
  c.use_position_aware = j.value("use_position_aware", c.use_position_aware);
  c.anchor_count = j.value("anchor_count", c.anchor_count);
  c.dropout = j.value("dropout", c.dropout);
  c.drift_limit = j.value("drift_limit", c.drift_limit);
  c.bce_weight = j.value("bce_weight", c.bce_weight);
  c.validate();
  return c;
}

std::vector<std::vector<int>> sample_anchor_sets(int nodes, int count, std::mt19937_64& rng) {
  if (nodes < 1 || count < 1) throw std::invalid_argument("anchor sampling needs nodes and anchors");
  std::vector<int> sizes;
  int left = count;
  for (int s = 1; left > 0; s *= 2) {
    sizes.push_back(std::min(s, left));
    left -= sizes.back();
  }
  const bool replace = nodes < count;
  std::uniform_int_distribution<int> pick(0, nodes - 1);
  std::vector<int> pool(static_cast<std::size_t>(nodes));
  std::vector<std::vector<int>> sets;
  for (int size : sizes) {
    std::vector<int> set(static_cast<std::size_t>(size));
    if (replace) {
      for (auto& a : set) a = pick(rng);
    } else {
      // Partial Fisher-Yates.
      std::iota(pool.begin(), pool.end(), 0);
      for (int k = 0; k < size; ++k) {
        std::uniform_int_distribution<int> d(k, nodes - 1);
        std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(d(rng))]);
        set[static_cast<std::size_t>(k)] = pool[static_cast<std::size_t>(k)];
      }
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

NeuralSim::NeuralSim(const NeuralSimConfig& cfg, double drift_scale, std::uint64_t seed)
    : cfg_(cfg), drift_scale_(drift_scale), params_("neural_sim/1") {
  cfg_.validate();
  if (!(drift_scale > 0.0)) throw std::invalid_argument("drift_scale must be > 0");
  std::mt19937_64 rng(seed);
  const int d = cfg_.embed_dim;
  add_linear(params_, "enc", skel::kFeatureWidthSized, d, rng);
  add_message(params_, "msg", d, rng);
  if (cfg_.use_position_aware) add_message(params_, "pmsg", d, rng);
  add_linear(params_, "upd", (cfg_.use_position_aware ? 3 : 2) * d, d, rng);
  add_linear(params_, "rec", 2 * d, d, rng);
  for (const char* head : {"head_h", "head_c"}) {
    add_linear(params_, std::string(head) + ".0", d, d, rng);
    add_linear(params_, std::string(head) + ".1", d, 2, rng);
  }
  auto& a = params_.attributes();
  a["model"] = kModelTag;
  a["config"] = cfg_.to_json().dump();
  a["drift_scale"] = format_double(drift_scale_);
  a["layout_hash"] = layout_hash(skel::kFeatureWidthSized);
  params_.set_rng_state(rng);
}

NeuralSim::NeuralSim(ad::ModelParams params) : params_(std::move(params)) {
  const auto& a = params_.attributes();
  auto get = [&](const char* key) {
    auto it = a.find(key);
    if (it == a.end()) throw ad::FormatError(std::string("surrogate weights lack attribute '") + key + "'");
    return it->second;
  };
  if (get("model") != kModelTag) throw ad::FormatError("weights are not a surrogate model: " + get("model"));
  if (get("layout_hash") != layout_hash(skel::kFeatureWidthSized))
    throw ad::FormatError("surrogate was trained with a different feature layout (hash " + get("layout_hash") +
                          ", expected " + layout_hash(skel::kFeatureWidthSized) + ")");
  cfg_ = NeuralSimConfig::from_json(nlohmann::json::parse(get("config")));
  drift_scale_ = std::stod(get("drift_scale"));
  for (const char* name : {"enc.w", "msg.w_self", "upd.w", "rec.w", "head_h.1.w", "head_c.1.w"})
    if (!params_.contains(name)) throw ad::FormatError(std::string("surrogate weights lack tensor '") + name + "'");
  if (params_.get("enc.w").cols() != cfg_.embed_dim) throw ad::FormatError("surrogate embed_dim mismatch");
}

ad::Tensor NeuralSim::encode(const ad::Tensor& features) const {
  if (features.cols() != skel::kFeatureWidthSized)
    throw ad::ShapeError("surrogate expects " + std::to_string(skel::kFeatureWidthSized) +
                         "-wide node features, got " + features.shape_string());
  return slp(params_, "enc", features);
}

ad::Tensor NeuralSim::position_message(const ad::Tensor& v, const GraphInput& g, std::mt19937_64& rng) const {
  const auto sets = sample_anchor_sets(g.nodes, cfg_.anchor_count, rng);
  std::vector<int> distinct;
  for (const auto& s : sets) distinct.insert(distinct.end(), s.begin(), s.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<std::vector<int>> dist(static_cast<std::size_t>(g.nodes));
  for (int a : distinct) dist[static_cast<std::size_t>(a)] = skel::bfs_distances(g.adjacency, a);

  std::vector<int> target, source;
  std::vector<double> weight;
  for (const auto& set : sets) {
    for (int i = 0; i < g.nodes; ++i) {
      int far = set.front();
      for (int a : set)
        if (dist[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)] >
            dist[static_cast<std::size_t>(far)][static_cast<std::size_t>(i)])
          far = a;
      target.push_back(i);
      source.push_back(far);
      weight.push_back(1.0 / (dist[static_cast<std::size_t>(far)][static_cast<std::size_t>(i)] + 1.0));
    }
  }
  const auto self = ad::matmul(v, params_.get("pmsg.w_self"));
  const auto other = ad::matmul(v, params_.get("pmsg.w_nb"));
  const auto pre = ad::add(
      ad::add(ad::gather_rows(self, target), ad::scale_rows(ad::gather_rows(other, source), weight)),
      params_.get("pmsg.b"));
  return ad::segment_mean(ad::leaky_relu(pre, 0.01), target, g.nodes);
}

ad::Tensor NeuralSim::propagate_step(const ad::Tensor& v, const GraphInput& g, bool training,
                                     std::mt19937_64& rng) const {
  const auto m = neighbour_message(params_, "msg", v, g);
  const auto in = cfg_.use_position_aware ? ad::concat_cols({v, position_message(v, g, rng), m})
                                          : ad::concat_cols({v, m});
  return ad::dropout(slp(params_, "upd", in), cfg_.dropout, rng, training);
}

ad::Tensor NeuralSim::story_pool(const ad::Tensor& v, const GraphInput& g) const {
  return ad::segment_mean(ad::gather_rows(v, g.bar_nodes), g.bar_story, g.stories);
}

ad::Tensor NeuralSim::structured_decode(const ad::Tensor& stories) const {
  const int k = stories.rows();
  if (k == 0) throw std::invalid_argument("structured decoder needs at least one story");
  std::vector<ad::Tensor> rows(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) rows[static_cast<std::size_t>(i)] = ad::gather_rows(stories, {i});
  for (int i = k - 2; i >= 0; --i)
    rows[static_cast<std::size_t>(i)] =
        slp(params_, "rec", ad::concat_cols({rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(i) + 1]}));
  return ad::concat_rows(rows);
}

SimPrediction NeuralSim::forward(const GraphInput& g, const ad::Tensor& features, bool training,
                                 std::mt19937_64& rng) const {
  if (features.rows() != g.nodes)
    throw ad::ShapeError("feature rows " + features.shape_string() + " do not match " + std::to_string(g.nodes) +
                         " graph nodes");
  auto v = encode(features);
  for (int t = 0; t < cfg_.prop_steps; ++t) v = propagate_step(v, g, training, rng);
  const auto o = structured_decode(story_pool(v, g));
  return {mlp_head(params_, "head_h", o), ad::sigmoid(mlp_head(params_, "head_c", o))};
}

SimPrediction NeuralSim::forward(const GraphInput& g, bool training, std::mt19937_64& rng) const {
  return forward(g, g.features, training, rng);
}

SimPrediction NeuralSim::predict(const GraphInput& g) const {
  ad::NoGradGuard guard;
  std::mt19937_64 rng(0);
  return forward(g, false, rng);
}

NeuralSim NeuralSim::frozen() const {
  NeuralSim out(*this);
  out.params_ = frozen_copy(params_);
  return out;
}

ad::Tensor sim_loss(const SimPrediction& pred, const std::vector<double>& truth, double drift_scale,
                    double drift_limit, double bce_weight) {
  if (truth.size() != pred.h.size())
    throw ad::ShapeError("drift target has " + std::to_string(truth.size()) + " entries, prediction " +
                         pred.h.shape_string());
  const auto target = ad::Tensor::from(truth, pred.h.rows(), pred.h.cols());
  std::vector<double> labels(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) labels[i] = std::abs(truth[i] * drift_scale) > drift_limit;
  const auto l1 = ad::l1_loss(pred.h, target);
  if (bce_weight == 0.0) return l1;
  return ad::add(l1, ad::scale(ad::bce_loss(pred.c, ad::Tensor::from(labels, pred.c.rows(), pred.c.cols())),
                               bce_weight));
}

nlohmann::json SimMetrics::to_json() const {
  return {{"l1_loss", l1},
          {"relative_accuracy", relative_accuracy},
          {"classification_accuracy", classification_accuracy},
          {"entries", entries},
          {"relative_accuracy_definition", "1 - mean(|h - h_true| / (|h_true| + 1e-6)), clamped to [0, 1]"}};
}

SimMetrics evaluate(const NeuralSim& model, const std::vector<SimExample>& data) {
  SimMetrics m;
  double abs_err = 0.0, rel_err = 0.0;
  std::size_t correct = 0;
  const double s = model.drift_scale(), lim = model.config().drift_limit;
  for (const auto& ex : data) {
    const auto p = model.predict(ex.graph);
    const auto& h = p.h.values();
    const auto& c = p.c.values();
    if (h.size() != ex.drift.size()) throw ad::ShapeError("prediction/target story count mismatch");
    for (std::size_t i = 0; i < h.size(); ++i) {
      abs_err += std::abs(h[i] - ex.drift[i]);
      rel_err += std::abs(h[i] - ex.drift[i]) * s / (std::abs(ex.drift[i] * s) + 1e-6);
      const bool label = std::abs(ex.drift[i] * s) > lim;
      correct += (c[i] > 0.5) == label;
    }
    m.entries += h.size();
  }
  if (m.entries == 0) return m;
  const double n = static_cast<double>(m.entries);
  m.l1 = abs_err / n;
  m.relative_accuracy = std::clamp(1.0 - rel_err / n, 0.0, 1.0);
  m.classification_accuracy = static_cast<double>(correct) / n;
  return m;
}

nlohmann::json SimTrainReport::to_json() const {
  return {{"epoch_loss", epoch_loss}, {"train", train.to_json()}, {"validation", validation.to_json()}};
}

SimTrainReport train(NeuralSim& model, const std::vector<SimExample>& train_set,
                     const std::vector<SimExample>& validation_set, const SimTrainConfig& cfg,
                     const std::function<void(int, double)>& progress) {
  if (train_set.empty()) throw std::invalid_argument("surrogate training set is empty");
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  std::mt19937_64 rng(cfg.seed);
  ad::AdamW opt;
  opt.lr = cfg.lr;
  opt.weight_decay = cfg.weight_decay;
  const double p0 = model.config().dropout;
  const auto& mc = model.config();
  SimTrainReport report;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const double total_steps = static_cast<double>(cfg.epochs) * static_cast<double>(order.size());
  double step_no = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.decay_dropout) model.set_dropout(p0 * (1.0 - static_cast<double>(epoch) / cfg.epochs));
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (auto idx : order) {
      const auto& ex = train_set[idx];
      if (cfg.lr_final >= 0.0)
        opt.lr = cfg.lr_final + 0.5 * (cfg.lr - cfg.lr_final) * (1.0 + std::cos(M_PI * step_no / total_steps));
      step_no += 1.0;
      model.params().zero_grad();
      const auto loss =
          sim_loss(model.forward(ex.graph, true, rng), ex.drift, model.drift_scale(), mc.drift_limit, mc.bce_weight);
      loss.backward();
      opt.step(model.params());
      report.step_loss.push_back(loss.item());
      total += loss.item();
    }
    report.epoch_loss.push_back(total / static_cast<double>(order.size()));
    if (progress) progress(epoch, report.epoch_loss.back());
  }
  model.set_dropout(p0);
  model.params().set_rng_state(rng);
  report.train = evaluate(model, train_set);
  if (!validation_set.empty()) report.validation = evaluate(model, validation_set);
  return report;
}

}  // namespace gridsizer::nn

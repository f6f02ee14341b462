#include "gridsizer/diff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gridsizer::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

std::string shapes(const Tensor& a, const Tensor& b) { return a.shape_string() + " and " + b.shape_string(); }

// Grad buffer of parent i when it takes part in the backward pass.
double* parent_grad(Node& n, std::size_t i) {
  auto& p = n.parents[i];
  return p->requires_grad ? p->grad_buffer() : nullptr;
}

const std::vector<double>& parent_value(Node& n, std::size_t i) { return n.parents[i]->value; }

enum class Broadcast { same, row, scalar };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::same;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
  throw ShapeError(std::string(op) + ": incompatible shapes " + shapes(a, b));
}

// Visits (i, j) pairs of a[i] and its broadcast partner b[j] without a
// per-element division.
template <class Fn>
void for_each_pair(Broadcast k, std::size_t size, int cols, Fn fn) {
  switch (k) {
    case Broadcast::same:
      for (std::size_t i = 0; i < size; ++i) fn(i, i);
      break;
    case Broadcast::scalar:
      for (std::size_t i = 0; i < size; ++i) fn(i, std::size_t{0});
      break;
    case Broadcast::row:
      for (std::size_t i = 0; i < size;)
        for (std::size_t c = 0; c < static_cast<std::size_t>(cols); ++c, ++i) fn(i, c);
      break;
  }
}

template <class F, class Da, class Db>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, F f, Da da, Db db) {
  const Broadcast k = broadcast_kind(a, b, op);
  const int cols = a.cols();
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for_each_pair(k, av.size(), cols, [&](std::size_t i, std::size_t j) { out[i] = f(av[i], bv[j]); });
  return make_result(a.rows(), cols, std::move(out), {a, b}, [k, cols, da, db](Node& n) {
    const auto& x = parent_value(n, 0);
    const auto& y = parent_value(n, 1);
    double* gx = parent_grad(n, 0);
    double* gy = parent_grad(n, 1);
    const double* g = n.grad.data();
    if (gx) for_each_pair(k, n.grad.size(), cols, [&](std::size_t i, std::size_t j) { gx[i] += g[i] * da(x[i], y[j]); });
    if (gy) for_each_pair(k, n.grad.size(), cols, [&](std::size_t i, std::size_t j) { gy[j] += g[i] * db(x[i], y[j]); });
  });
}

template <class F, class D>
Tensor unary(const Tensor& a, F f, D d) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  return make_result(a.rows(), a.cols(), std::move(out), {a}, [d](Node& n) {
    const auto& x = parent_value(n, 0);
    double* gx = parent_grad(n, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < n.grad.size(); ++i) gx[i] += n.grad[i] * d(x[i], n.value[i]);
  });
}

void check_segments(const Tensor& a, const std::vector<int>& segment, int groups, const char* op) {
  if (segment.size() != static_cast<std::size_t>(a.rows()))
    throw ShapeError(std::string(op) + ": " + std::to_string(segment.size()) + " segment ids for " + a.shape_string());
  for (int s : segment)
    if (s < 0 || s >= groups) throw ShapeError(std::string(op) + ": segment id out of range");
}

std::vector<double> row_softmax(const std::vector<double>& z, int rows, int cols) {
  std::vector<double> out(z.size());
  for (int r = 0; r < rows; ++r) {
    const double* zr = z.data() + static_cast<std::size_t>(r) * cols;
    double* o = out.data() + static_cast<std::size_t>(r) * cols;
    const double mx = *std::max_element(zr, zr + cols);
    double s = 0.0;
    for (int c = 0; c < cols; ++c) s += (o[c] = std::exp(zr[c] - mx));
    for (int c = 0; c < cols; ++c) o[c] /= s;
  }
  return out;
}

// dx = y * (g - sum(g * y)) per row, scaled.
void softmax_backward(const double* y, const double* g, double* dx, int rows, int cols, double factor) {
  for (int r = 0; r < rows; ++r) {
    const std::size_t o = static_cast<std::size_t>(r) * cols;
    double dot = 0.0;
    for (int c = 0; c < cols; ++c) dot += g[o + c] * y[o + c];
    for (int c = 0; c < cols; ++c) dx[o + c] += factor * y[o + c] * (g[o + c] - dot);
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ for " + shapes(a, b));
  const int m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  Map(out.data(), m, n).noalias() = MapC(a.values().data(), m, k) * MapC(b.values().data(), k, n);
  return make_result(m, n, std::move(out), {a, b}, [m, k, n](Node& nd) {
    const MapC g(nd.grad.data(), m, n);
    if (double* ga = parent_grad(nd, 0)) Map(ga, m, k).noalias() += g * MapC(parent_value(nd, 1).data(), k, n).transpose();
    if (double* gb = parent_grad(nd, 1)) Map(gb, k, n).noalias() += MapC(parent_value(nd, 0).data(), m, k).transpose() * g;
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
                [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
                [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
                [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const int rows = parts.front().rows();
  int cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ for " + shapes(parts.front(), p));
    cols += p.cols();
  }
  std::vector<double> out(static_cast<std::size_t>(rows) * cols);
  std::vector<int> offsets;
  int off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    for (int r = 0; r < rows; ++r)
      std::copy_n(p.values().data() + static_cast<std::size_t>(r) * p.cols(), p.cols(),
                  out.data() + static_cast<std::size_t>(r) * cols + off);
    off += p.cols();
  }
  return make_result(rows, cols, std::move(out), parts, [rows, cols, offsets](Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      double* g = parent_grad(n, i);
      if (!g) continue;
      const int pc = n.parents[i]->cols;
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < pc; ++c)
          g[static_cast<std::size_t>(r) * pc + c] += n.grad[static_cast<std::size_t>(r) * cols + offsets[i] + c];
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const int cols = parts.front().cols();
  int rows = 0;
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ for " + shapes(parts.front(), p));
    offsets.push_back(out.size());
    out.insert(out.end(), p.values().begin(), p.values().end());
    rows += p.rows();
  }
  return make_result(rows, cols, std::move(out), parts, [offsets](Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      double* g = parent_grad(n, i);
      if (!g) continue;
      const std::size_t len = n.parents[i]->value.size();
      for (std::size_t j = 0; j < len; ++j) g[j] += n.grad[offsets[i] + j];
    }
  });
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& index) {
  const int cols = a.cols();
  std::vector<double> out(index.size() * static_cast<std::size_t>(cols));
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.rows())
      throw ShapeError("gather_rows: index " + std::to_string(index[i]) + " outside " + a.shape_string());
    std::copy_n(a.values().data() + static_cast<std::size_t>(index[i]) * cols, cols, out.data() + i * cols);
  }
  return make_result(static_cast<int>(index.size()), cols, std::move(out), {a}, [index, cols](Node& n) {
    double* g = parent_grad(n, 0);
    if (!g) return;
    for (std::size_t i = 0; i < index.size(); ++i) {
      double* dst = g + static_cast<std::size_t>(index[i]) * cols;
      const double* src = n.grad.data() + i * cols;
      for (int c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

Tensor scale_rows(const Tensor& a, const std::vector<double>& w) {
  if (w.size() != static_cast<std::size_t>(a.rows()))
    throw ShapeError("scale_rows: " + std::to_string(w.size()) + " weights for " + a.shape_string());
  const int cols = a.cols();
  std::vector<double> out(a.values());
  for (std::size_t r = 0; r < w.size(); ++r)
    for (int c = 0; c < cols; ++c) out[r * cols + c] *= w[r];
  return make_result(a.rows(), cols, std::move(out), {a}, [w, cols](Node& n) {
    double* g = parent_grad(n, 0);
    if (!g) return;
    for (std::size_t r = 0; r < w.size(); ++r)
      for (int c = 0; c < cols; ++c) g[r * cols + c] += w[r] * n.grad[r * cols + c];
  });
}

Tensor slice_cols(const Tensor& a, int begin, int end) {
  if (begin < 0 || end > a.cols() || begin > end)
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) + ") outside " +
                     a.shape_string());
  const int rows = a.rows(), cols = end - begin, src_cols = a.cols();
  std::vector<double> out(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    std::copy_n(a.values().data() + static_cast<std::size_t>(r) * src_cols + begin, cols,
                out.data() + static_cast<std::size_t>(r) * cols);
  return make_result(rows, cols, std::move(out), {a}, [rows, cols, src_cols, begin](Node& n) {
    double* g = parent_grad(n, 0);
    if (!g) return;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        g[static_cast<std::size_t>(r) * src_cols + begin + c] += n.grad[static_cast<std::size_t>(r) * cols + c];
  });
}

Tensor segment_mean(const Tensor& a, const std::vector<int>& segment, int groups) {
  check_segments(a, segment, groups, "segment_mean");
  const int cols = a.cols();
  std::vector<double> count(static_cast<std::size_t>(groups), 0.0);
  for (int s : segment) count[static_cast<std::size_t>(s)] += 1.0;
  for (int g = 0; g < groups; ++g)
    if (count[static_cast<std::size_t>(g)] == 0.0) throw ShapeError("segment_mean: group " + std::to_string(g) + " is empty");
  std::vector<double> out(static_cast<std::size_t>(groups) * cols, 0.0);
  for (std::size_t r = 0; r < segment.size(); ++r) {
    double* dst = out.data() + static_cast<std::size_t>(segment[r]) * cols;
    const double* src = a.values().data() + r * cols;
    for (int c = 0; c < cols; ++c) dst[c] += src[c];
  }
  for (int g = 0; g < groups; ++g)
    for (int c = 0; c < cols; ++c) out[static_cast<std::size_t>(g) * cols + c] /= count[static_cast<std::size_t>(g)];
  return make_result(groups, cols, std::move(out), {a}, [segment, count, cols](Node& n) {
    double* g = parent_grad(n, 0);
    if (!g) return;
    for (std::size_t r = 0; r < segment.size(); ++r) {
      const std::size_t s = static_cast<std::size_t>(segment[r]);
      const double inv = 1.0 / count[s];
      for (int c = 0; c < cols; ++c) g[r * cols + c] += n.grad[s * cols + c] * inv;
    }
  });
}

Tensor segment_max(const Tensor& a, const std::vector<int>& segment, int groups) {
  check_segments(a, segment, groups, "segment_max");
  const int cols = a.cols();
  std::vector<double> out(static_cast<std::size_t>(groups) * cols, -std::numeric_limits<double>::infinity());
  std::vector<int> arg(out.size(), -1);
  for (std::size_t r = 0; r < segment.size(); ++r) {
    const std::size_t base = static_cast<std::size_t>(segment[r]) * cols;
    for (int c = 0; c < cols; ++c) {
      const double v = a.values()[r * cols + c];
      if (arg[base + c] < 0 || v > out[base + c]) {
        out[base + c] = v;
        arg[base + c] = static_cast<int>(r);
      }
    }
  }
  for (int g = 0; g < groups; ++g)
    if (arg[static_cast<std::size_t>(g) * cols] < 0 && cols > 0)
      throw ShapeError("segment_max: group " + std::to_string(g) + " is empty");
  return make_result(groups, cols, std::move(out), {a}, [arg, cols](Node& n) {
    double* g = parent_grad(n, 0);
    if (!g) return;
    for (std::size_t i = 0; i < arg.size(); ++i)
      g[static_cast<std::size_t>(arg[i]) * cols + i % static_cast<std::size_t>(cols)] += n.grad[i];
  });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(a, [slope](double x) { return x > 0.0 ? x : slope * x; },
               [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softmax_rows(const Tensor& a) {
  const int rows = a.rows(), cols = a.cols();
  auto out = row_softmax(a.values(), rows, cols);
  return make_result(rows, cols, std::move(out), {a}, [rows, cols](Node& n) {
    if (double* g = parent_grad(n, 0)) softmax_backward(n.value.data(), n.grad.data(), g, rows, cols, 1.0);
  });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor abs(const Tensor& a) {
  return unary(a, [](double x) { return std::abs(x); },
               [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor dropout(const Tensor& a, double p, Rng& rng, bool training) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must lie in [0, 1)");
  if (!training || p == 0.0) return a;
  std::bernoulli_distribution keep(1.0 - p);
  const double inv = 1.0 / (1.0 - p);
  std::vector<double> mask(a.size());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = keep(rng) ? inv : 0.0;
    out[i] = a.values()[i] * mask[i];
  }
  return make_result(a.rows(), a.cols(), std::move(out), {a}, [mask](Node& n) {
    if (double* g = parent_grad(n, 0))
      for (std::size_t i = 0; i < mask.size(); ++i) g[i] += n.grad[i] * mask[i];
  });
}

Tensor sum(const Tensor& a) {
  const double s = std::accumulate(a.values().begin(), a.values().end(), 0.0);
  return make_result(1, 1, {s}, {a}, [](Node& n) {
    if (double* g = parent_grad(n, 0)) {
      const std::size_t len = n.parents[0]->value.size();
      for (std::size_t i = 0; i < len; ++i) g[i] += n.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor column_mean(const Tensor& a) {
  if (a.rows() == 0) throw ShapeError("column_mean of a tensor without rows");
  return segment_mean(a, std::vector<int>(static_cast<std::size_t>(a.rows()), 0), 1);
}

Tensor top_k_sum(const Tensor& a, int k) {
  if (k < 0) throw std::invalid_argument("top_k_sum: k must be nonnegative");
  std::vector<int> order(a.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
  const auto& v = a.values();
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk), order.end(),
                    [&v](int x, int y) { return v[static_cast<std::size_t>(x)] > v[static_cast<std::size_t>(y)] ||
                                                (v[static_cast<std::size_t>(x)] == v[static_cast<std::size_t>(y)] && x < y); });
  order.resize(kk);
  double s = 0.0;
  for (int i : order) s += v[static_cast<std::size_t>(i)];
  return make_result(1, 1, {s}, {a}, [order](Node& n) {
    if (double* g = parent_grad(n, 0))
      for (int i : order) g[static_cast<std::size_t>(i)] += n.grad[0];
  });
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ShapeError("l1_loss: shapes differ, " + shapes(pred, target));
  return mean(abs(sub(pred, target)));
}

Tensor bce_loss(const Tensor& prob, const Tensor& target, double eps) {
  if (prob.rows() != target.rows() || prob.cols() != target.cols())
    throw ShapeError("bce_loss: shapes differ, " + shapes(prob, target));
  const std::size_t len = prob.size();
  if (len == 0) throw ShapeError("bce_loss of empty tensors");
  double s = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double p = std::clamp(prob.values()[i], eps, 1.0 - eps);
    const double t = target.values()[i];
    s -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  const double inv = 1.0 / static_cast<double>(len);
  return make_result(1, 1, {s * inv}, {prob, target}, [eps, inv](Node& n) {
    const auto& pv = parent_value(n, 0);
    const auto& tv = parent_value(n, 1);
    double* gp = parent_grad(n, 0);
    double* gt = parent_grad(n, 1);
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double p = std::clamp(pv[i], eps, 1.0 - eps);
      if (gp && pv[i] == p) gp[i] += n.grad[0] * inv * ((1.0 - tv[i]) / (1.0 - p) - tv[i] / p);
      if (gt) gt[i] += n.grad[0] * inv * (std::log(1.0 - p) - std::log(p));
    }
  });
}

GumbelSample gumbel_softmax(const Tensor& logits, double tau, Rng& rng, bool hard) {
  if (!(tau > 0.0)) throw std::invalid_argument("gumbel_softmax: temperature must be positive");
  const int rows = logits.rows(), cols = logits.cols();
  std::vector<double> z(logits.size());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double l = logits.values()[i];
    if (!std::isfinite(l)) throw std::invalid_argument("gumbel_softmax: non-finite logit");
    double u = unif(rng);
    while (u <= 0.0) u = unif(rng);
    z[i] = (l - std::log(-std::log(u))) / tau;
  }
  auto soft = row_softmax(z, rows, cols);
  GumbelSample out;
  out.index.resize(static_cast<std::size_t>(rows));
  std::vector<double> value = soft;
  for (int r = 0; r < rows; ++r) {
    const auto* zr = z.data() + static_cast<std::size_t>(r) * cols;
    out.index[static_cast<std::size_t>(r)] = static_cast<int>(std::max_element(zr, zr + cols) - zr);
  }
  if (hard) {
    std::fill(value.begin(), value.end(), 0.0);
    for (int r = 0; r < rows; ++r) value[static_cast<std::size_t>(r) * cols + out.index[static_cast<std::size_t>(r)]] = 1.0;
  }
  out.y = make_result(rows, cols, std::move(value), {logits}, [soft = std::move(soft), rows, cols, tau](Node& n) {
    if (double* g = parent_grad(n, 0)) softmax_backward(soft.data(), n.grad.data(), g, rows, cols, 1.0 / tau);
  });
  return out;
}

Tensor softmax_entropy(const Tensor& logits) {
  const int rows = logits.rows(), cols = logits.cols();
  std::vector<double> logp(logits.size());
  std::vector<double> h(static_cast<std::size_t>(rows), 0.0);
  for (int r = 0; r < rows; ++r) {
    const double* l = logits.values().data() + static_cast<std::size_t>(r) * cols;
    double* lp = logp.data() + static_cast<std::size_t>(r) * cols;
    const double mx = *std::max_element(l, l + cols);
    double s = 0.0;
    for (int c = 0; c < cols; ++c) s += std::exp(l[c] - mx);
    const double lse = mx + std::log(s);
    for (int c = 0; c < cols; ++c) {
      lp[c] = l[c] - lse;
      h[static_cast<std::size_t>(r)] -= std::exp(lp[c]) * lp[c];
    }
  }
  auto hv = h;
  return make_result(rows, 1, std::move(h), {logits}, [logp = std::move(logp), hv = std::move(hv), rows, cols](Node& n) {
    double* g = parent_grad(n, 0);
    if (!g) return;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * cols + c;
        g[i] -= n.grad[static_cast<std::size_t>(r)] * std::exp(logp[i]) * (logp[i] + hv[static_cast<std::size_t>(r)]);
      }
  });
}

}  // namespace gridsizer::ad

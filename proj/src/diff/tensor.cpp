#include "gridsizer/diff/tensor.hpp"

#include <algorithm>
#include <unordered_set>

namespace gridsizer::ad {

namespace {
thread_local bool g_grad_enabled = true;
}

double* Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad.data();
}

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) { return full(rows, cols, 0.0, requires_grad); }

Tensor Tensor::full(int rows, int cols, double v, bool requires_grad) {
  return from(std::vector<double>(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), v), rows, cols,
              requires_grad);
}

Tensor Tensor::from(std::vector<double> values, int rows, int cols, bool requires_grad) {
  if (rows < 0 || cols < 0 || values.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
    throw ShapeError("tensor: " + std::to_string(values.size()) + " values do not fill a " + std::to_string(rows) +
                     "x" + std::to_string(cols) + " shape");
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({v}, 1, 1, requires_grad); }

std::string Tensor::shape_string() const {
  return "[" + std::to_string(rows()) + "x" + std::to_string(cols()) + "]";
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on a " + shape_string() + " tensor");
  return node_->value[0];
}

void Tensor::backward() const {
  if (size() != 1) throw ShapeError("backward() without a seed needs a 1x1 tensor, got " + shape_string());
  const double one = 1.0;
  backward(std::span<const double>(&one, 1));
}

void Tensor::backward(std::span<const double> seed) const {
  if (seed.size() != size()) throw ShapeError("backward seed does not match " + shape_string());
  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  double* g = node_->grad_buffer();
  for (std::size_t i = 0; i < seed.size(); ++i) g[i] += seed[i];
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

Tensor Tensor::detach() const { return from(node_->value, rows(), cols(), false); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_result(int rows, int cols, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->value = std::move(value);
  const bool needs = g_grad_enabled && std::any_of(parents.begin(), parents.end(), [](const Tensor& t) {
                       return t.requires_grad();
                     });
  if (needs) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

}  // namespace gridsizer::ad

#pragma once

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridsizer::ad {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Node {
  int rows = 0;
  int cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a backward pass reaches the node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  double* grad_buffer();  // allocates zeros on first use
};

// Dense row-major 2D tensor of doubles. Copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(int rows, int cols, bool requires_grad = false);
  static Tensor full(int rows, int cols, double v, bool requires_grad = false);
  static Tensor from(std::vector<double> values, int rows, int cols, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  int rows() const { return node_->rows; }
  int cols() const { return node_->cols; }
  std::size_t size() const { return node_->value.size(); }
  std::string shape_string() const;

  const std::vector<double>& values() const { return node_->value; }
  std::vector<double>& mutable_values() { return node_->value; }
  double at(int r, int c) const { return node_->value[static_cast<std::size_t>(r) * cols() + c]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  // Empty when no gradient has reached this tensor.
  const std::vector<double>& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  // Reverse pass from a 1x1 tensor (seed 1) or with an explicit seed.
  void backward() const;
  void backward(std::span<const double> seed) const;

  // Leaf copy of the values, outside any graph.
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Recording is on by default; a guard switches it off on the current thread.
bool grad_enabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Builds an op result. When recording is on and any parent needs a gradient,
// the parents and backward closure are attached.
Tensor make_result(int rows, int cols, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward);

}  // namespace gridsizer::ad

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

// Reverse-mode differentiation over dense double buffers. Graphs are built
// eagerly by the operations below and released when the last Var handle
// referencing them goes away.
namespace uwsplat::ad {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);

struct Node;
using BackwardFn = std::function<void(Node& self)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on demand by backward()
  bool requires_grad = false;
  bool detached = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;

  bool is_leaf() const { return !backward; }
  // Grad buffer of a parent, sized and zero-filled on first touch.
  std::vector<double>& parent_grad(std::size_t i);
};

/// Handle to a node in the graph.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  explicit operator bool() const { return static_cast<bool>(node_); }

  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }
  std::span<const double> value() const { return node_->value; }
  double item() const;
  bool requires_grad() const { return node_->requires_grad; }
  bool detached() const { return node_->detached; }

  /// Gradient after backward(); all zeros if none has been accumulated.
  std::vector<double> grad() const;
  void zero_grad() { node_->grad.clear(); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(std::vector<double> values, Shape shape);
Var scalar(double v);
/// Differentiable leaf. Gradients accumulate across backward() calls until
/// zero_grad().
Var parameter(std::vector<double> values, Shape shape);

/// Builds an operation node. requires_grad is inherited from the parents; the
/// backward function is dropped when no parent needs a gradient.
Var make_op(std::vector<double> value, Shape shape, std::vector<Var> parents, BackwardFn backward);

// Elementwise. Binary operands must have equal shapes or one of them must hold
// a single element.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);
Var exp(const Var& a);
Var abs(const Var& a);
Var square(const Var& a);
Var scale(const Var& a, double k);
Var add_scalar(const Var& a, double k);
// Subgradient 0 on the constant branch, including the kink itself.
Var max_with_const(const Var& a, double c);
Var min_with_const(const Var& a, double c);
Var clamp_min(const Var& a, double c);
Var softplus(const Var& a);
Var sigmoid(const Var& a);

Var sum(const Var& a);
Var mean(const Var& a);

/// Same values, no gradient path to the ancestors.
Var detach(const Var& a);

Var reshape(const Var& a, Shape shape);
Var slice(const Var& a, std::size_t offset, Shape shape);

// Raster helpers. Maps are (H, W), color images (H, W, 3).
/// out(y, x, c) = map(y, x) * coeffs(c)
Var channel_outer(const Var& map, const Var& coeffs);
/// (H, W) -> (H, W, 3), value repeated per channel.
Var expand_channels(const Var& map);
/// (3) -> (H, W, 3)
Var broadcast_pixels(const Var& v3, std::size_t height, std::size_t width);
/// (H, W, 3) -> (3)
Var channel_means(const Var& img);
/// Forward differences of a map, zero in the trailing column / row.
Var diff_x(const Var& map);
Var diff_y(const Var& map);

/// Accumulates d(loss)/d(node) into every reachable node that requires a
/// gradient. Throws std::invalid_argument unless loss holds one element.
void backward(const Var& loss);

struct GradCheckResult {
  double max_error = 0.0;  // relative, or absolute where |analytic| < 1e-8
  std::size_t worst_index = 0;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

/// Compares the reverse-mode gradient of f at `at` with central differences
/// (f(x+eps) - f(x-eps)) / (2 eps). Coordinates with mask[i] == false are
/// skipped (hinge kinks, severed paths); an empty mask checks everything.
GradCheckResult finite_diff_check(const std::function<Var(const Var&)>& f, const std::vector<double>& at,
                                  double eps = 1e-4, const std::vector<bool>& mask = {});

}  // namespace uwsplat::ad

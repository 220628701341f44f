#include "uwsplat/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "uwsplat/simd.hpp"

namespace uwsplat::ad {

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::vector<double>& Node::parent_grad(std::size_t i) {
  Node& p = *parents[i];
  if (p.grad.size() != p.value.size()) p.grad.assign(p.value.size(), 0.0);
  return p.grad;
}

double Var::item() const {
  if (size() != 1) throw std::invalid_argument("Var::item on a non-scalar value");
  return node_->value[0];
}

std::vector<double> Var::grad() const {
  if (node_->grad.size() == node_->value.size()) return node_->grad;
  return std::vector<double>(node_->value.size(), 0.0);
}

namespace {

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

Var make_leaf(std::vector<double> values, Shape shape, bool requires_grad) {
  if (values.size() != element_count(shape)) {
    throw std::invalid_argument("value count " + std::to_string(values.size()) + " does not match shape " +
                                shape_str(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Var(std::move(n));
}

bool parent_live(const Node& self, std::size_t i) { return self.parents[i]->requires_grad; }

enum class Broadcast { kNone, kLeftScalar, kRightScalar };

Broadcast broadcast_kind(const Var& a, const Var& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (b.size() == 1) return Broadcast::kRightScalar;
  if (a.size() == 1) return Broadcast::kLeftScalar;
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                              shape_str(b.shape()));
}

// Expands a scalar operand to the other operand's length.
std::vector<double> expanded(const Var& v, std::size_t n) {
  if (v.size() == n) return std::vector<double>(v.value().begin(), v.value().end());
  return std::vector<double>(n, v.value()[0]);
}

// Adds g into a parent gradient, summing when the parent is a broadcast scalar.
void accumulate(std::vector<double>& dst, const double* g, std::size_t n) {
  if (dst.size() == n) {
    simd::kernels().axpy(1.0, g, dst.data(), n);
  } else {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += g[i];
    dst[0] += s;
  }
}

const Shape& result_shape(const Var& a, const Var& b) { return a.size() >= b.size() ? a.shape() : b.shape(); }

}  // namespace

Var constant(std::vector<double> values, Shape shape) { return make_leaf(std::move(values), std::move(shape), false); }

Var scalar(double v) { return make_leaf({v}, Shape{1}, false); }

Var parameter(std::vector<double> values, Shape shape) {
  return make_leaf(std::move(values), std::move(shape), true);
}

Var make_op(std::vector<double> value, Shape shape, std::vector<Var> parents, BackwardFn backward) {
  if (value.size() != element_count(shape)) {
    throw std::invalid_argument("make_op: value count does not match shape " + shape_str(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  for (const Var& p : parents) n->requires_grad = n->requires_grad || p.requires_grad();
  if (n->requires_grad) {
    n->parents.reserve(parents.size());
    for (const Var& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(backward);
  }
  return Var(std::move(n));
}

Var add(const Var& a, const Var& b) {
  broadcast_kind(a, b, "add");
  const std::size_t n = std::max(a.size(), b.size());
  const auto av = expanded(a, n);
  const auto bv = expanded(b, n);
  std::vector<double> out(n);
  simd::kernels().add(av.data(), bv.data(), out.data(), n);
  return make_op(std::move(out), result_shape(a, b), {a, b}, [n](Node& self) {
    for (std::size_t i = 0; i < 2; ++i) {
      if (parent_live(self, i)) accumulate(self.parent_grad(i), self.grad.data(), n);
    }
  });
}

Var sub(const Var& a, const Var& b) {
  broadcast_kind(a, b, "sub");
  const std::size_t n = std::max(a.size(), b.size());
  const auto av = expanded(a, n);
  const auto bv = expanded(b, n);
  std::vector<double> out(n);
  simd::kernels().sub(av.data(), bv.data(), out.data(), n);
  return make_op(std::move(out), result_shape(a, b), {a, b}, [n](Node& self) {
    if (parent_live(self, 0)) accumulate(self.parent_grad(0), self.grad.data(), n);
    if (parent_live(self, 1)) {
      std::vector<double> g(n);
      for (std::size_t i = 0; i < n; ++i) g[i] = -self.grad[i];
      accumulate(self.parent_grad(1), g.data(), n);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  broadcast_kind(a, b, "mul");
  const std::size_t n = std::max(a.size(), b.size());
  auto av = expanded(a, n);
  auto bv = expanded(b, n);
  std::vector<double> out(n);
  simd::kernels().mul(av.data(), bv.data(), out.data(), n);
  return make_op(std::move(out), result_shape(a, b), {a, b},
                 [n, av = std::move(av), bv = std::move(bv)](Node& self) {
                   std::vector<double> g(n);
                   if (parent_live(self, 0)) {
                     simd::kernels().mul(self.grad.data(), bv.data(), g.data(), n);
                     accumulate(self.parent_grad(0), g.data(), n);
                   }
                   if (parent_live(self, 1)) {
                     simd::kernels().mul(self.grad.data(), av.data(), g.data(), n);
                     accumulate(self.parent_grad(1), g.data(), n);
                   }
                 });
}

Var div(const Var& a, const Var& b) {
  broadcast_kind(a, b, "div");
  const std::size_t n = std::max(a.size(), b.size());
  auto av = expanded(a, n);
  auto bv = expanded(b, n);
  std::vector<double> out(n);
  simd::kernels().div(av.data(), bv.data(), out.data(), n);
  return make_op(std::move(out), result_shape(a, b), {a, b}, [n, bv = std::move(bv)](Node& self) {
    std::vector<double> g(n);
    simd::kernels().div(self.grad.data(), bv.data(), g.data(), n);
    if (parent_live(self, 0)) accumulate(self.parent_grad(0), g.data(), n);
    if (parent_live(self, 1)) {
      // d(a/b)/db = -(a/b) / b
      for (std::size_t i = 0; i < n; ++i) g[i] = -g[i] * self.value[i];
      accumulate(self.parent_grad(1), g.data(), n);
    }
  });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double k) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * k;
  return make_op(std::move(out), a.shape(), {a},
                 [k](Node& self) { simd::kernels().axpy(k, self.grad.data(), self.parent_grad(0).data(), self.grad.size()); });
}

Var add_scalar(const Var& a, double k) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + k;
  return make_op(std::move(out), a.shape(), {a},
                 [](Node& self) { simd::kernels().axpy(1.0, self.grad.data(), self.parent_grad(0).data(), self.grad.size()); });
}

Var exp(const Var& a) {
  std::vector<double> out(a.size());
  simd::kernels().exp(a.value().data(), out.data(), out.size());
  return make_op(std::move(out), a.shape(), {a}, [](Node& self) {
    simd::kernels().mul_acc(self.grad.data(), self.value.data(), self.parent_grad(0).data(), self.grad.size());
  });
}

Var abs(const Var& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(a.value()[i]);
  return make_op(std::move(out), a.shape(), {a}, [](Node& self) {
    const auto& x = self.parents[0]->value;
    auto& g = self.parent_grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0.0) {
        g[i] += self.grad[i];
      } else if (x[i] < 0.0) {
        g[i] -= self.grad[i];
      }
    }
  });
}

Var square(const Var& a) {
  std::vector<double> out(a.size());
  simd::kernels().mul(a.value().data(), a.value().data(), out.data(), out.size());
  return make_op(std::move(out), a.shape(), {a}, [](Node& self) {
    const auto& x = self.parents[0]->value;
    auto& g = self.parent_grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * x[i] * self.grad[i];
  });
}

Var max_with_const(const Var& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] > c ? a.value()[i] : c;
  return make_op(std::move(out), a.shape(), {a}, [c](Node& self) {
    const auto& x = self.parents[0]->value;
    auto& g = self.parent_grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > c) g[i] += self.grad[i];
    }
  });
}

Var min_with_const(const Var& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] < c ? a.value()[i] : c;
  return make_op(std::move(out), a.shape(), {a}, [c](Node& self) {
    const auto& x = self.parents[0]->value;
    auto& g = self.parent_grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] < c) g[i] += self.grad[i];
    }
  });
}

Var clamp_min(const Var& a, double c) { return max_with_const(a, c); }

Var softplus(const Var& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a.value()[i];
    out[i] = x > 30.0 ? x : std::log1p(std::exp(x));
  }
  return make_op(std::move(out), a.shape(), {a}, [](Node& self) {
    const auto& x = self.parents[0]->value;
    auto& g = self.parent_grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / (1.0 + std::exp(-x[i]));
  });
}

Var sigmoid(const Var& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a.value()[i]));
  return make_op(std::move(out), a.shape(), {a}, [](Node& self) {
    auto& g = self.parent_grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = self.value[i];
      g[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value()) s += v;
  return make_op({s}, Shape{1}, {a}, [](Node& self) {
    auto& g = self.parent_grad(0);
    const double up = self.grad[0];
    for (double& v : g) v += up;
  });
}

Var mean(const Var& a) {
  if (a.size() == 0) throw std::invalid_argument("mean of an empty value");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Var detach(const Var& a) {
  auto n = std::make_shared<Node>();
  n->shape = a.shape();
  n->value.assign(a.value().begin(), a.value().end());
  n->detached = true;
  return Var(std::move(n));
}

Var reshape(const Var& a, Shape shape) {
  if (element_count(shape) != a.size()) {
    throw std::invalid_argument("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  return make_op(std::vector<double>(a.value().begin(), a.value().end()), std::move(shape), {a},
                 [](Node& self) { simd::kernels().axpy(1.0, self.grad.data(), self.parent_grad(0).data(), self.grad.size()); });
}

Var slice(const Var& a, std::size_t offset, Shape shape) {
  const std::size_t n = element_count(shape);
  if (offset + n > a.size()) throw std::invalid_argument("slice: range exceeds source of size " + std::to_string(a.size()));
  return make_op(std::vector<double>(a.value().begin() + static_cast<std::ptrdiff_t>(offset),
                                     a.value().begin() + static_cast<std::ptrdiff_t>(offset + n)),
                 std::move(shape), {a}, [offset, n](Node& self) {
                   simd::kernels().axpy(1.0, self.grad.data(), self.parent_grad(0).data() + offset, n);
                 });
}

namespace {

void require_map(const Var& m, const char* op) {
  if (m.shape().size() != 2) throw std::invalid_argument(std::string(op) + ": expected an (H, W) map, got " + shape_str(m.shape()));
}

void require_rgb(const Var& m, const char* op) {
  if (m.shape().size() != 3 || m.shape()[2] != 3) {
    throw std::invalid_argument(std::string(op) + ": expected an (H, W, 3) image, got " + shape_str(m.shape()));
  }
}

}  // namespace

Var channel_outer(const Var& map, const Var& coeffs) {
  require_map(map, "channel_outer");
  if (coeffs.size() != 3) throw std::invalid_argument("channel_outer: expected 3 coefficients");
  const std::size_t px = map.size();
  std::vector<double> out(px * 3);
  const auto m = map.value();
  const auto k = coeffs.value();
  for (std::size_t i = 0; i < px; ++i) {
    for (std::size_t c = 0; c < 3; ++c) out[i * 3 + c] = m[i] * k[c];
  }
  return make_op(std::move(out), Shape{map.shape()[0], map.shape()[1], 3}, {map, coeffs}, [px](Node& self) {
    const auto& m = self.parents[0]->value;
    const auto& k = self.parents[1]->value;
    if (parent_live(self, 0)) {
      auto& g = self.parent_grad(0);
      for (std::size_t i = 0; i < px; ++i) {
        g[i] += self.grad[i * 3] * k[0] + self.grad[i * 3 + 1] * k[1] + self.grad[i * 3 + 2] * k[2];
      }
    }
    if (parent_live(self, 1)) {
      auto& g = self.parent_grad(1);
      for (std::size_t i = 0; i < px; ++i) {
        for (std::size_t c = 0; c < 3; ++c) g[c] += self.grad[i * 3 + c] * m[i];
      }
    }
  });
}

Var expand_channels(const Var& map) {
  require_map(map, "expand_channels");
  const std::size_t px = map.size();
  std::vector<double> out(px * 3);
  for (std::size_t i = 0; i < px; ++i) out[i * 3] = out[i * 3 + 1] = out[i * 3 + 2] = map.value()[i];
  return make_op(std::move(out), Shape{map.shape()[0], map.shape()[1], 3}, {map}, [px](Node& self) {
    auto& g = self.parent_grad(0);
    for (std::size_t i = 0; i < px; ++i) g[i] += self.grad[i * 3] + self.grad[i * 3 + 1] + self.grad[i * 3 + 2];
  });
}

Var broadcast_pixels(const Var& v3, std::size_t height, std::size_t width) {
  if (v3.size() != 3) throw std::invalid_argument("broadcast_pixels: expected 3 values");
  const std::size_t px = height * width;
  std::vector<double> out(px * 3);
  for (std::size_t i = 0; i < px; ++i) {
    for (std::size_t c = 0; c < 3; ++c) out[i * 3 + c] = v3.value()[c];
  }
  return make_op(std::move(out), Shape{height, width, 3}, {v3}, [px](Node& self) {
    auto& g = self.parent_grad(0);
    for (std::size_t i = 0; i < px; ++i) {
      for (std::size_t c = 0; c < 3; ++c) g[c] += self.grad[i * 3 + c];
    }
  });
}

Var channel_means(const Var& img) {
  require_rgb(img, "channel_means");
  const std::size_t px = img.size() / 3;
  if (px == 0) throw std::invalid_argument("channel_means: empty image");
  std::vector<double> out(3, 0.0);
  for (std::size_t i = 0; i < px; ++i) {
    for (std::size_t c = 0; c < 3; ++c) out[c] += img.value()[i * 3 + c];
  }
  const double inv = 1.0 / static_cast<double>(px);
  for (double& v : out) v *= inv;
  return make_op(std::move(out), Shape{3}, {img}, [px, inv](Node& self) {
    auto& g = self.parent_grad(0);
    for (std::size_t i = 0; i < px; ++i) {
      for (std::size_t c = 0; c < 3; ++c) g[i * 3 + c] += self.grad[c] * inv;
    }
  });
}

Var diff_x(const Var& map) {
  require_map(map, "diff_x");
  const std::size_t h = map.shape()[0];
  const std::size_t w = map.shape()[1];
  std::vector<double> out(h * w, 0.0);
  const auto m = map.value();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x + 1 < w; ++x) out[y * w + x] = m[y * w + x + 1] - m[y * w + x];
  }
  return make_op(std::move(out), map.shape(), {map}, [h, w](Node& self) {
    auto& g = self.parent_grad(0);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x + 1 < w; ++x) {
        const double up = self.grad[y * w + x];
        g[y * w + x + 1] += up;
        g[y * w + x] -= up;
      }
    }
  });
}

Var diff_y(const Var& map) {
  require_map(map, "diff_y");
  const std::size_t h = map.shape()[0];
  const std::size_t w = map.shape()[1];
  std::vector<double> out(h * w, 0.0);
  const auto m = map.value();
  for (std::size_t y = 0; y + 1 < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) out[y * w + x] = m[(y + 1) * w + x] - m[y * w + x];
  }
  return make_op(std::move(out), map.shape(), {map}, [h, w](Node& self) {
    auto& g = self.parent_grad(0);
    for (std::size_t y = 0; y + 1 < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double up = self.grad[y * w + x];
        g[(y + 1) * w + x] += up;
        g[y * w + x] -= up;
      }
    }
  });
}

void backward(const Var& loss) {
  if (!loss) throw std::invalid_argument("backward: empty Var");
  if (loss.size() != 1) throw std::invalid_argument("backward: loss must hold a single element, got " + shape_str(loss.shape()));
  Node* root = loss.node().get();
  if (!root->requires_grad) return;

  // Iterative post-order DFS; reversed, it is a topological order from the loss.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
  }
  if (root->grad.size() != 1) root->grad.assign(1, 0.0);
  root->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->is_leaf()) continue;
    n->backward(*n);
  }
}

GradCheckResult finite_diff_check(const std::function<Var(const Var&)>& f, const std::vector<double>& at, double eps,
                                  const std::vector<bool>& mask) {
  if (!mask.empty() && mask.size() != at.size()) throw std::invalid_argument("finite_diff_check: mask size mismatch");
  GradCheckResult r;
  Var x = parameter(at, Shape{at.size()});
  Var out = f(x);
  backward(out);
  r.analytic = x.grad();
  r.numeric.assign(at.size(), 0.0);

  std::vector<double> probe = at;
  for (std::size_t i = 0; i < at.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    probe[i] = at[i] + eps;
    const double fp = f(constant(probe, Shape{at.size()})).item();
    probe[i] = at[i] - eps;
    const double fm = f(constant(probe, Shape{at.size()})).item();
    probe[i] = at[i];
    r.numeric[i] = (fp - fm) / (2.0 * eps);

    const double a = r.analytic[i];
    const double diff = std::abs(a - r.numeric[i]);
    const double err = std::abs(a) < 1e-8 ? diff : diff / std::max(std::abs(a), std::abs(r.numeric[i]));
    if (err > r.max_error || !std::isfinite(err)) {
      r.max_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
      r.worst_index = i;
    }
  }
  return r;
}

}  // namespace uwsplat::ad

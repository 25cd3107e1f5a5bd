#include "pgg/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "pgg/error.hpp"

namespace pgg {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

std::atomic<std::uint64_t> g_next_id{1};
thread_local bool g_grad_enabled = true;

std::shared_ptr<detail::Node> make_node(Shape shape, std::vector<double> value) {
  auto node = std::make_shared<detail::Node>();
  node->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  node->shape = std::move(shape);
  node->value = std::move(value);
  return node;
}

void check_nan(const char* op, const Tensor& t) {
  if (!t.defined()) throw Error(std::string(op) + ": undefined tensor");
  for (double v : t.values()) {
    if (std::isnan(v)) throw Error(std::string(op) + ": NaN input");
  }
}

// Creates the output node and, when any input needs a gradient, wires the
// backward closure into the graph.
Tensor finish(Shape shape, std::vector<double> value,
              std::initializer_list<Tensor> inputs,
              std::function<void(detail::Node&)> backward_fn) {
  auto node = make_node(std::move(shape), std::move(value));
  if (g_grad_enabled) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || in.requires_grad();
    if (needs) {
      node->requires_grad = true;
      node->is_leaf = false;
      for (const auto& in : inputs) node->parents.push_back(in.node());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Tensor(std::move(node));
}

struct View {
  std::size_t rows;
  std::size_t cols;
};

View view_of(const Shape& s) {
  if (s.empty()) return {1, 1};
  if (s.size() == 1) return {1, s[0]};
  return {s[0], s[1]};
}

struct Broadcast {
  View a, b;
  std::size_t rows = 0, cols = 0;
  Shape out;

  std::size_t ia(std::size_t r, std::size_t c) const {
    return (a.rows == 1 ? 0 : r) * a.cols + (a.cols == 1 ? 0 : c);
  }
  std::size_t ib(std::size_t r, std::size_t c) const {
    return (b.rows == 1 ? 0 : r) * b.cols + (b.cols == 1 ? 0 : c);
  }
};

Broadcast broadcast(const char* op, const Tensor& x, const Tensor& y) {
  Broadcast bc;
  bc.a = view_of(x.shape());
  bc.b = view_of(y.shape());
  auto fit = [&](std::size_t p, std::size_t q) -> std::size_t {
    if (p == q || q == 1) return p;
    if (p == 1) return q;
    throw Error(std::string(op) + ": shape mismatch " + shape_str(x.shape()) +
                " vs " + shape_str(y.shape()));
  };
  bc.rows = fit(bc.a.rows, bc.b.rows);
  bc.cols = fit(bc.a.cols, bc.b.cols);
  const std::size_t rank = std::max(x.rank(), y.rank());
  if (rank == 0) {
    bc.out = {};
  } else if (rank == 1 && bc.rows == 1) {
    bc.out = {bc.cols};
  } else {
    bc.out = {bc.rows, bc.cols};
  }
  return bc;
}

// Shared driver for broadcasting binary ops. `f` computes the value, `da` and
// `db` the local partials given (x, y, out).
template <typename F, typename DA, typename DB>
Tensor binary(const char* op, const Tensor& x, const Tensor& y, F f, DA da, DB db) {
  check_nan(op, x);
  check_nan(op, y);
  const Broadcast bc = broadcast(op, x, y);
  std::vector<double> out(bc.rows * bc.cols);
  const auto xv = x.values();
  const auto yv = y.values();
  for (std::size_t r = 0; r < bc.rows; ++r) {
    for (std::size_t c = 0; c < bc.cols; ++c) {
      out[r * bc.cols + c] = f(xv[bc.ia(r, c)], yv[bc.ib(r, c)]);
    }
  }
  auto xn = x.node();
  auto yn = y.node();
  return finish(bc.out, std::move(out), {x, y},
                [bc, xn = xn.get(), yn = yn.get(), da, db](detail::Node& self) {
                  for (std::size_t r = 0; r < bc.rows; ++r) {
                    for (std::size_t c = 0; c < bc.cols; ++c) {
                      const std::size_t k = r * bc.cols + c;
                      const double g = self.grad[k];
                      const double a = xn->value[bc.ia(r, c)];
                      const double b = yn->value[bc.ib(r, c)];
                      if (xn->requires_grad) {
                        xn->ensure_grad();
                        xn->grad[bc.ia(r, c)] += g * da(a, b, self.value[k]);
                      }
                      if (yn->requires_grad) {
                        yn->ensure_grad();
                        yn->grad[bc.ib(r, c)] += g * db(a, b, self.value[k]);
                      }
                    }
                  }
                });
}

template <typename F, typename D>
Tensor unary(const char* op, const Tensor& x, F f, D d) {
  check_nan(op, x);
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  auto xn = x.node();
  return finish(x.shape(), std::move(out), {x}, [xn = xn.get(), d](detail::Node& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      xn->grad[i] += self.grad[i] * d(xn->value[i], self.value[i]);
    }
  });
}

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2) {
    throw Error(std::string(op) + ": expected rank-2 tensor, got " +
                shape_str(t.shape()));
  }
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

void detail::Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
}

// ---- Tensor ----

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (shape.size() > 2) throw Error("tensor: rank > 2 unsupported " + shape_str(shape));
  if (shape_numel(shape) != values.size()) {
    throw Error("tensor: " + std::to_string(values.size()) +
                " values do not fill shape " + shape_str(shape));
  }
  return Tensor(make_node(std::move(shape), std::move(values)));
}

Tensor Tensor::zeros(Shape shape) {
  const auto n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values, std::string name) {
  Tensor t = from(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  t.node_->name = std::move(name);
  t.node_->ensure_grad();
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->value.size(); }
std::size_t Tensor::rows() const { return view_of(shape()).rows; }
std::size_t Tensor::cols() const { return view_of(shape()).cols; }
std::span<const double> Tensor::values() const { return node_->value; }
std::span<double> Tensor::mutable_values() { return node_->value; }

double Tensor::item() const {
  if (numel() != 1) throw Error("item: tensor of shape " + shape_str(shape()) + " is not scalar");
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }
std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }
const std::string& Tensor::name() const { return node_->name; }
std::uint64_t Tensor::node_id() const { return node_->id; }

// ---- grad mode ----

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// ---- backward ----

void backward(const Tensor& loss) {
  if (!loss.defined()) throw Error("backward: undefined loss");
  if (loss.numel() != 1) {
    throw Error("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS; parents are visited in recorded order so the
  // accumulation order is a pure function of the op sequence.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* p = node->parents[next++].get();
      if (p->requires_grad && !visited.contains(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    if (!n->is_leaf) n->grad.assign(n->value.size(), 0.0);
  }
  loss.node()->ensure_grad();
  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

// ---- ops ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  if (a.cols() != b.rows()) {
    throw Error("matmul: shape mismatch " + shape_str(a.shape()) + " x " +
                shape_str(b.shape()));
  }
  check_nan("matmul", a);
  check_nan("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n);
  MatMap(out.data(), m, n).noalias() =
      ConstMatMap(a.values().data(), m, k) * ConstMatMap(b.values().data(), k, n);
  auto an = a.node();
  auto bn = b.node();
  return finish({m, n}, std::move(out), {a, b},
                [an = an.get(), bn = bn.get(), m, k, n](detail::Node& self) {
                  ConstMatMap g(self.grad.data(), m, n);
                  if (an->requires_grad) {
                    an->ensure_grad();
                    MatMap(an->grad.data(), m, k).noalias() +=
                        g * ConstMatMap(bn->value.data(), k, n).transpose();
                  }
                  if (bn->requires_grad) {
                    bn->ensure_grad();
                    MatMap(bn->grad.data(), k, n).noalias() +=
                        ConstMatMap(an->value.data(), m, k).transpose() * g;
                  }
                });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

// Ties route the gradient to the first operand.
Tensor maximum(const Tensor& a, const Tensor& b) {
  return binary(
      "maximum", a, b, [](double x, double y) { return x >= y ? x : y; },
      [](double x, double y, double) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x >= y ? 0.0 : 1.0; });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  return binary(
      "minimum", a, b, [](double x, double y) { return x <= y ? x : y; },
      [](double x, double y, double) { return x <= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x <= y ? 0.0 : 1.0; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary(
      "add_scalar", a, [offset](double x) { return x + offset; },
      [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) {
  return unary(
      "neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double v : a.values()) {
    if (v < 0.0) throw Error("log: negative input " + std::to_string(v));
  }
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
  return unary(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

// Gradient passes where lo <= x <= hi.
Tensor clamp(const Tensor& a, double lo, double hi) {
  if (lo > hi) throw Error("clamp: lo > hi");
  return unary(
      "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

namespace {

void check_finite(const char* op, const Tensor& t) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) throw Error(std::string(op) + ": non-finite input");
  }
}

// Row-wise log-sum-exp normalized log-probabilities.
std::vector<double> log_softmax_values(const Tensor& a) {
  const std::size_t rows = a.rows(), cols = a.cols();
  const auto v = a.values();
  std::vector<double> out(v.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = v.data() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += std::exp(row[c] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = row[c] - lse;
  }
  return out;
}

}  // namespace

Tensor softmax(const Tensor& a) {
  check_finite("softmax", a);
  if (a.numel() == 0) throw Error("softmax: empty input");
  auto out = log_softmax_values(a);
  for (auto& x : out) x = std::exp(x);
  const std::size_t rows = a.rows(), cols = a.cols();
  auto an = a.node();
  return finish(a.shape(), std::move(out), {a}, [an = an.get(), rows, cols](detail::Node& self) {
    an->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* s = self.value.data() + r * cols;
      const double* g = self.grad.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g[c] * s[c];
      for (std::size_t c = 0; c < cols; ++c) an->grad[r * cols + c] += s[c] * (g[c] - dot);
    }
  });
}

Tensor log_softmax(const Tensor& a) {
  check_finite("log_softmax", a);
  if (a.numel() == 0) throw Error("log_softmax: empty input");
  auto out = log_softmax_values(a);
  const std::size_t rows = a.rows(), cols = a.cols();
  auto an = a.node();
  return finish(a.shape(), std::move(out), {a}, [an = an.get(), rows, cols](detail::Node& self) {
    an->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * cols;
      const double* g = self.grad.data() + r * cols;
      double gs = 0.0;
      for (std::size_t c = 0; c < cols; ++c) gs += g[c];
      for (std::size_t c = 0; c < cols; ++c) {
        an->grad[r * cols + c] += g[c] - std::exp(y[c]) * gs;
      }
    }
  });
}

Tensor sum(const Tensor& a) {
  check_nan("sum", a);
  double s = 0.0;
  for (double v : a.values()) s += v;
  auto an = a.node();
  return finish({}, {s}, {a}, [an = an.get()](detail::Node& self) {
    an->ensure_grad();
    for (auto& g : an->grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  check_nan("mean", a);
  if (a.numel() == 0) throw Error("mean: empty input");
  double s = 0.0;
  for (double v : a.values()) s += v;
  const double n = static_cast<double>(a.numel());
  auto an = a.node();
  return finish({}, {s / n}, {a}, [an = an.get(), n](detail::Node& self) {
    an->ensure_grad();
    const double g = self.grad[0] / n;
    for (auto& x : an->grad) x += g;
  });
}

Tensor sum_last(const Tensor& a) {
  check_nan("sum_last", a);
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(rows, 0.0);
  const auto v = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r] += v[r * cols + c];
  }
  auto an = a.node();
  return finish({rows}, std::move(out), {a}, [an = an.get(), rows, cols](detail::Node& self) {
    an->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) an->grad[r * cols + c] += self.grad[r];
    }
  });
}

Tensor gather(const Tensor& a, std::span<const std::size_t> index) {
  require_rank2("gather", a);
  check_nan("gather", a);
  const std::size_t rows = a.rows(), cols = a.cols();
  if (index.size() != rows) {
    throw Error("gather: " + std::to_string(index.size()) + " indices for shape " +
                shape_str(a.shape()));
  }
  std::vector<double> out(rows);
  std::vector<std::size_t> idx(index.begin(), index.end());
  for (std::size_t r = 0; r < rows; ++r) {
    if (idx[r] >= cols) {
      throw Error("gather: index " + std::to_string(idx[r]) + " out of range for " +
                  shape_str(a.shape()));
    }
    out[r] = a.values()[r * cols + idx[r]];
  }
  auto an = a.node();
  return finish({rows}, std::move(out), {a},
                [an = an.get(), idx = std::move(idx), cols](detail::Node& self) {
                  an->ensure_grad();
                  for (std::size_t r = 0; r < idx.size(); ++r) {
                    an->grad[r * cols + idx[r]] += self.grad[r];
                  }
                });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape.size() > 2 || shape_numel(shape) != a.numel()) {
    throw Error("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  auto an = a.node();
  return finish(std::move(shape), std::move(out), {a}, [an = an.get()](detail::Node& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
  });
}

Tensor where_rows(std::span<const std::uint8_t> mask, const Tensor& a,
                  const Tensor& replacement) {
  require_rank2("where_rows", a);
  check_nan("where_rows", a);
  check_nan("where_rows", replacement);
  const std::size_t rows = a.rows(), cols = a.cols();
  if (mask.size() != rows || replacement.numel() != cols) {
    throw Error("where_rows: shape mismatch " + shape_str(a.shape()) + " vs replacement " +
                shape_str(replacement.shape()) + " with mask of " +
                std::to_string(mask.size()));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  for (std::size_t r = 0; r < rows; ++r) {
    if (m[r]) std::copy_n(replacement.values().data(), cols, out.data() + r * cols);
  }
  auto an = a.node();
  auto bn = replacement.node();
  return finish({rows, cols}, std::move(out), {a, replacement},
                [an = an.get(), bn = bn.get(), m = std::move(m), cols](detail::Node& self) {
                  for (std::size_t r = 0; r < m.size(); ++r) {
                    const double* g = self.grad.data() + r * cols;
                    detail::Node* dst = m[r] ? bn : an;
                    if (!dst->requires_grad) continue;
                    dst->ensure_grad();
                    double* d = dst->grad.data() + (m[r] ? 0 : r * cols);
                    for (std::size_t c = 0; c < cols; ++c) d[c] += g[c];
                  }
                });
}

}  // namespace pgg

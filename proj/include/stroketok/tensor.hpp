#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace stroketok::tensor {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Graph node. Values and gradients are dense row-major float64 arrays.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(const Node& self)> backward;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const double> data() const { return node_->value; }
  // Mutable access is for leaves (parameters, inputs); editing a recorded
  // intermediate invalidates its graph.
  std::span<double> mutable_data() { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  double item() const;

  // Copy of the values with no graph attached.
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }

  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

// Reverse-mode sweep from a scalar loss; accumulates into every reachable
// node that requires grad. Throws ShapeMismatch for non-scalar losses.
void backward(const Tensor& loss);

// ---- Operations ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

// sg[.]: forward copy, zero gradient backward.
Tensor stop_gradient(const Tensor& a);

// Forward value of `quantized`, gradient routed to `input` unchanged.
Tensor straight_through(const Tensor& input, const Tensor& quantized);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor mse(const Tensor& prediction, const Tensor& target);

// x (C_in, L), kernel (C_out, C_in, K), bias (C_out) or undefined.
Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride, std::size_t padding);

// x (C_in, L), kernel (C_in, C_out, K): the adjoint of conv1d with the same kernel.
// Output length (L - 1) * stride - 2 * padding + K.
Tensor conv_transpose1d(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride,
                        std::size_t padding);

// Rank-2 operations.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add_row_vector(const Tensor& a, const Tensor& row);
Tensor slice_columns(const Tensor& a, std::size_t start, std::size_t width);
Tensor concat_columns(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Row i is a softmax over columns 0..i; later columns are exactly zero.
Tensor causal_softmax(const Tensor& scores);

// Rows of `table` (V, D) selected by `ids`; result (ids.size(), D).
Tensor embedding(const Tensor& table, std::span<const std::size_t> ids);

constexpr std::int64_t kIgnoreTarget = -1;

// Mean token cross-entropy of logits (n, V); rows whose target is
// kIgnoreTarget contribute neither loss nor gradient.
Tensor cross_entropy(const Tensor& logits, std::span<const std::int64_t> targets);

// Numerically stable log-softmax of a single row.
std::vector<double> log_softmax(std::span<const double> logits);

// ---- Parameters and optimizer ---------------------------------------------

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class ParameterStore {
 public:
  Tensor& add(const std::string& name, Tensor value, bool frozen = false);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  bool frozen(const std::string& name) const;

  // Insertion order; this is also the checkpoint order.
  const std::vector<std::string>& names() const { return names_; }

  void zero_grad();

  // Adam update on every trainable parameter holding a gradient, then clears
  // gradients. Throws NoGradient when no parameter has one.
  void step(double lr, const AdamOptions& options = {});

  // Resets the optimizer moments of rows [first, first + count) of a rank-2 parameter.
  void reset_moments(const std::string& name, std::size_t first, std::size_t count);

 private:
  struct Entry {
    Tensor tensor;
    bool frozen = false;
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t steps = 0;
  };

  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;

  std::vector<std::string> names_;
  std::map<std::string, std::size_t> index_;
  std::deque<Entry> entries_;  // deque: references returned by add() stay valid
};

inline void optimizer_step(ParameterStore& store, double lr, const AdamOptions& options = {}) {
  store.step(lr, options);
}

}  // namespace stroketok::tensor

#pragma once

// Define-by-run reverse-mode differentiation over small dense double tensors.
//
// A Tape records every primitive application together with a closure that
// computes its vector-Jacobian product. Parameters live outside the tape as
// Tensors with a gradient accumulator; Tape::param links one in as a leaf and
// backward() accumulates into Tensor::grad. Tapes are rebuilt every step.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace canoncorr::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Tensor {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty unless requires_grad

  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> data, bool requires_grad = false);

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  double item() const;
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  void zero_grad();
};

class Tape;

/// Handle to a node recorded on a tape. Cheap to copy; valid while the tape
/// lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape; }
  double item() const { return value().item(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(const std::vector<double>& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf bound to an external parameter. Gradients accumulate into
  /// param.grad during backward() when param.requires_grad is set.
  Var param(Tensor& param);
  Var constant(Tensor value);

  /// Records a primitive. `backward` receives d(root)/d(output) and must add
  /// into the inputs' gradient buffers via grad_of(). Throws Numeric when the
  /// output contains a non-finite value.
  Var record(std::string op, Tensor value, std::vector<Var> inputs,
             Backward backward);

  /// Reverse sweep from a single-element root.
  void backward(Var root);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(const Var& v) const { return nodes_[v.id()].needs_grad; }
  /// Gradient buffer of a node, allocated on first use.
  std::vector<double>& grad_of(const Var& v);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::string op;
    Tensor value;
    std::vector<double> grad;
    Backward backward;
    Tensor* param = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

// Primitive set. All shape errors raise ErrorKind::InvalidInput.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double c);
/// Multiplies every element of a by the single-element tensor s.
Var scale(Var a, Var s);
/// (n×k)·(k×m) for rank-2 operands.
Var matmul(Var a, Var b);
Var mul(Var a, Var b);
Var sum(Var a);
Var mean(Var a);
Var l1_norm(Var a);
Var l2_norm(Var a);
/// Row-wise cosine similarities between a (n×m) and b (k×m): an n×k matrix.
Var cosine_similarity(Var a, Var b);
/// Softmax along an axis of a rank-1 or rank-2 tensor.
Var softmax(Var a, std::size_t axis);
Var log(Var a);
Var exp(Var a);
Var gather_rows(Var a, std::span<const std::size_t> rows);
/// Σ w_i · x_i over equally shaped inputs.
Var weighted_sum(std::span<const Var> xs, std::span<const double> weights);
/// Forwards the value and blocks the gradient.
Var stop_gradient(Var a);

struct GradCheckResult {
  double max_rel_error = 0.0;
  // Per parameter, flattened.
  std::vector<std::vector<double>> analytic;
  std::vector<std::vector<double>> numeric;
};

using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

/// Relative error floor: entries are compared as |a−n| / max(|a|, |n|, 1e-3).
inline constexpr double kGradCheckFloor = 1e-3;

/// Compares tape gradients of a scalar function against central differences
/// with step eps. Parameters are restored afterwards and their grad buffers
/// hold the analytic gradient.
GradCheckResult grad_check_full(const ScalarFn& f,
                                std::span<Tensor* const> params, double eps);
double grad_check(const ScalarFn& f, std::span<Tensor* const> params,
                  double eps);

}  // namespace canoncorr::ad

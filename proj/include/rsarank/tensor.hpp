#pragma once

// Dense 2-D tensors with define-by-run reverse-mode differentiation.
//
// A Tape owns every node created during one forward pass. Ops append nodes
// whose backward rule accumulates adjoints into their parents; backward()
// walks the tape in reverse creation order, so the graph is acyclic by
// construction. Vectors are n x 1 matrices and scalars are 1 x 1.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rsarank {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

std::string shape_string(const Matrix& m);

namespace ad {

// Probabilities entering a log are clamped into [kProbFloor, 1 - kProbFloor].
inline constexpr double kProbFloor = 1e-12;
inline constexpr double kEluAlpha = 1.0;
inline constexpr double kLayerNormEps = 1e-5;

class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that receives a gradient.
  Var variable(Matrix value);
  /// Leaf excluded from differentiation.
  Var constant(Matrix value);

  /// Seeds d(loss)/d(loss) = 1 and propagates adjoints to every node that
  /// depends on a variable. `loss` must be 1 x 1.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const;

  // Op implementation hooks. `backprop` receives the node's own adjoint and
  // forward value and accumulates into parents through grad_ref().
  using Backprop = std::function<void(Tape&, const Matrix& upstream, const Matrix& output)>;
  Var push(Matrix value, std::vector<Var> parents, Backprop backprop);
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  Matrix& grad_ref(Var v);

 private:
  struct Node {
    Matrix value;
    mutable Matrix grad;  // empty until touched
    bool requires_grad = false;
    Backprop backprop;
  };

  std::vector<Node> nodes_;
};

// Linear algebra. Shape mismatches throw ShapeError naming both shapes.
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double factor);
Var one_minus(Var a);
/// Adds a 1 x c row to every row of an r x c matrix.
Var add_row(Var a, Var row);
Var concat_cols(std::span<const Var> parts);
Var sum(Var a);
Var mean(Var a);

// Elementwise / row-wise nonlinearities.
Var sigmoid(Var x);
Var elu(Var x, double alpha = kEluAlpha);
/// Each row normalized to zero mean and unit variance (population variance,
/// eps added inside the root), then scaled by `gain` and shifted by `bias`
/// (both 1 x c).
Var layer_norm(Var x, Var gain, Var bias, double eps = kLayerNormEps);
/// Softmax over all entries (treated as one flat vector).
Var softmax(Var v);
Var log_softmax(Var v);

// Losses; all return 1 x 1.
/// Mean over entries of -[t log p + (1 - t) log(1 - p)], p clamped.
Var bce_mean(Var pred, const Matrix& target);
/// -sum t log p, p clamped.
Var cross_entropy(const Matrix& p_target, Var p_pred);
/// -sum t log softmax(logits), computed through log_softmax.
Var cross_entropy_with_logits(const Matrix& p_target, Var logits);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, double s) { return scale(a, s); }

// Plain (non-taped) helpers shared with code that does not need gradients.
double clamp_prob(double p);
double sigmoid(double x);
double elu(double x, double alpha = kEluAlpha);
Vector softmax(const Vector& v);

}  // namespace ad
}  // namespace rsarank

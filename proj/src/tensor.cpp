#include "rsarank/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rsarank/error.hpp"

namespace rsarank {

std::string shape_string(const Matrix& m) {
  std::ostringstream os;
  os << "[" << m.rows() << "x" << m.cols() << "]";
  return os.str();
}

namespace ad {

namespace {

void require_same_tape(Var a, Var b) {
  if (!a.valid() || a.tape() != b.tape()) {
    throw Error("operands belong to different tapes");
  }
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.value()) +
                     " vs " + shape_string(b.value()));
  }
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) {
    throw ShapeError("scalar(): expected [1x1], got " + shape_string(v));
  }
  return v(0, 0);
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), true, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::push(Matrix value, std::vector<Var> parents, Backprop backprop) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape() != this) throw Error("operand belongs to a different tape");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Matrix(), needs, needs ? std::move(backprop) : nullptr});
  return Var(this, nodes_.size() - 1);
}

Matrix& Tape::grad_ref(Var v) {
  Node& node = nodes_[v.id()];
  if (node.grad.size() == 0) {
    node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
  }
  return node.grad;
}

const Matrix& Tape::grad(std::size_t id) const {
  const Node& node = nodes_[id];
  if (node.grad.size() == 0 && node.value.size() != 0) {
    // Untouched by backward: report zeros of the right shape.
    node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
  }
  return node.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw Error("backward: loss is on a different tape");
  if (loss.value().size() != 1) {
    throw ShapeError("backward: loss must be [1x1], got " + shape_string(loss.value()));
  }
  for (Node& node : nodes_) node.grad.resize(0, 0);
  grad_ref(loss)(0, 0) = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || !node.backprop || node.grad.size() == 0) continue;
    // Parents always have smaller ids, so this node's grad is not written
    // while its own rule runs.
    node.backprop(*this, node.grad, node.value);
  }
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: shape mismatch " + shape_string(a.value()) + " vs " +
                     shape_string(b.value()));
  }
  Matrix out = a.value() * b.value();
  return a.tape()->push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.requires_grad(a)) t.grad_ref(a).noalias() += g * b.value().transpose();
    if (t.requires_grad(b)) t.grad_ref(b).noalias() += a.value().transpose() * g;
  });
}

Var transpose(Var a) {
  Matrix out = a.value().transpose();
  return a.tape()->push(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
    t.grad_ref(a) += g.transpose();
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("add", a, b);
  Matrix out = a.value() + b.value();
  return a.tape()->push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.requires_grad(a)) t.grad_ref(a) += g;
    if (t.requires_grad(b)) t.grad_ref(b) += g;
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("sub", a, b);
  Matrix out = a.value() - b.value();
  return a.tape()->push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.requires_grad(a)) t.grad_ref(a) += g;
    if (t.requires_grad(b)) t.grad_ref(b) -= g;
  });
}

Var hadamard(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("hadamard", a, b);
  Matrix out = a.value().cwiseProduct(b.value());
  return a.tape()->push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.requires_grad(a)) t.grad_ref(a) += g.cwiseProduct(b.value());
    if (t.requires_grad(b)) t.grad_ref(b) += g.cwiseProduct(a.value());
  });
}

Var scale(Var a, double factor) {
  Matrix out = a.value() * factor;
  return a.tape()->push(std::move(out), {a}, [a, factor](Tape& t, const Matrix& g, const Matrix&) {
    t.grad_ref(a) += g * factor;
  });
}

Var one_minus(Var a) {
  Matrix out = (1.0 - a.value().array()).matrix();
  return a.tape()->push(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
    t.grad_ref(a) -= g;
  });
}

Var add_row(Var a, Var row) {
  require_same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row: shape mismatch " + shape_string(a.value()) + " vs " +
                     shape_string(row.value()));
  }
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.tape()->push(std::move(out), {a, row}, [a, row](Tape& t, const Matrix& g, const Matrix&) {
    if (t.requires_grad(a)) t.grad_ref(a) += g;
    if (t.requires_grad(row)) t.grad_ref(row) += g.colwise().sum();
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    require_same_tape(parts.front(), p);
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: shape mismatch " + shape_string(parts.front().value()) +
                       " vs " + shape_string(p.value()));
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  Tape* tape = parts.front().tape();
  return tape->push(std::move(out), parents, [parents](Tape& t, const Matrix& g, const Matrix&) {
    Eigen::Index off = 0;
    for (const Var& p : parents) {
      if (t.requires_grad(p)) t.grad_ref(p) += g.middleCols(off, p.cols());
      off += p.cols();
    }
  });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->push(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
    t.grad_ref(a).array() += g(0, 0);
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  Matrix out(1, 1);
  out(0, 0) = a.value().sum() / n;
  return a.tape()->push(std::move(out), {a}, [a, n](Tape& t, const Matrix& g, const Matrix&) {
    t.grad_ref(a).array() += g(0, 0) / n;
  });
}

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double elu(double x, double alpha) { return x > 0 ? x : alpha * std::expm1(x); }

Vector softmax(const Vector& v) {
  Vector out = (v.array() - v.maxCoeff()).exp().matrix();
  return out / out.sum();
}

Var sigmoid(Var x) {
  Matrix out = x.value().unaryExpr([](double v) { return sigmoid(v); });
  return x.tape()->push(std::move(out), {x}, [x](Tape& t, const Matrix& g, const Matrix& y) {
    t.grad_ref(x).array() += g.array() * y.array() * (1.0 - y.array());
  });
}

Var elu(Var x, double alpha) {
  Matrix out = x.value().unaryExpr([alpha](double v) { return elu(v, alpha); });
  return x.tape()->push(std::move(out), {x},
                        [x, alpha](Tape& t, const Matrix& g, const Matrix& y) {
                          const auto& in = x.value().array();
                          // d/dx alpha(e^x - 1) = y + alpha for x <= 0.
                          t.grad_ref(x).array() +=
                              g.array() * (in > 0.0).select(1.0, y.array() + alpha);
                        });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  require_same_tape(x, gain);
  require_same_tape(x, bias);
  const Eigen::Index cols = x.cols();
  if (gain.rows() != 1 || gain.cols() != cols || bias.rows() != 1 || bias.cols() != cols) {
    throw ShapeError("layer_norm: shape mismatch " + shape_string(x.value()) + " vs gain " +
                     shape_string(gain.value()) + " / bias " + shape_string(bias.value()));
  }
  const Matrix& in = x.value();
  Matrix normalized(in.rows(), cols);
  Vector inv_std(in.rows());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const double mu = in.row(r).mean();
    const double var = (in.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    normalized.row(r) = (in.row(r).array() - mu) * inv_std(r);
  }
  Matrix out = (normalized.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  return x.tape()->push(
      std::move(out), {x, gain, bias},
      [x, gain, bias, normalized = std::move(normalized), inv_std = std::move(inv_std)](
          Tape& t, const Matrix& g, const Matrix&) {
        if (t.requires_grad(gain)) {
          t.grad_ref(gain) += g.cwiseProduct(normalized).colwise().sum();
        }
        if (t.requires_grad(bias)) t.grad_ref(bias) += g.colwise().sum();
        if (t.requires_grad(x)) {
          const Matrix dxhat = (g.array().rowwise() * gain.value().row(0).array()).matrix();
          Matrix& dx = t.grad_ref(x);
          for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
            const double m1 = dxhat.row(r).mean();
            const double m2 = dxhat.row(r).cwiseProduct(normalized.row(r)).mean();
            dx.row(r).array() +=
                inv_std(r) * (dxhat.row(r).array() - m1 - normalized.row(r).array() * m2);
          }
        }
      });
}

Var softmax(Var v) {
  const Matrix& in = v.value();
  Matrix out = (in.array() - in.maxCoeff()).exp().matrix();
  out /= out.sum();
  return v.tape()->push(std::move(out), {v}, [v](Tape& t, const Matrix& g, const Matrix& y) {
    const double dot = g.cwiseProduct(y).sum();
    t.grad_ref(v).array() += y.array() * (g.array() - dot);
  });
}

Var log_softmax(Var v) {
  const Matrix& in = v.value();
  const double shift = in.maxCoeff();
  const double log_z = shift + std::log((in.array() - shift).exp().sum());
  Matrix out = (in.array() - log_z).matrix();
  return v.tape()->push(std::move(out), {v}, [v](Tape& t, const Matrix& g, const Matrix& y) {
    t.grad_ref(v).array() += g.array() - y.array().exp() * g.sum();
  });
}

Var bce_mean(Var pred, const Matrix& target) {
  const Matrix& p = pred.value();
  if (p.rows() != target.rows() || p.cols() != target.cols()) {
    throw ShapeError("bce_mean: shape mismatch " + shape_string(p) + " vs " +
                     shape_string(target));
  }
  const double count = static_cast<double>(p.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double q = clamp_prob(p(i, j));
      const double w = target(i, j);
      total -= w * std::log(q) + (1.0 - w) * std::log(1.0 - q);
    }
  }
  Matrix out(1, 1);
  out(0, 0) = total / count;
  return pred.tape()->push(
      std::move(out), {pred}, [pred, target, count](Tape& t, const Matrix& g, const Matrix&) {
        const Matrix& p = pred.value();
        Matrix& dp = t.grad_ref(pred);
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
          for (Eigen::Index j = 0; j < p.cols(); ++j) {
            const double raw = p(i, j);
            // Clamped entries are locally constant.
            if (raw < kProbFloor || raw > 1.0 - kProbFloor) continue;
            const double w = target(i, j);
            dp(i, j) += g(0, 0) * (-w / raw + (1.0 - w) / (1.0 - raw)) / count;
          }
        }
      });
}

Var cross_entropy(const Matrix& p_target, Var p_pred) {
  const Matrix& p = p_pred.value();
  if (p.rows() != p_target.rows() || p.cols() != p_target.cols()) {
    throw ShapeError("cross_entropy: shape mismatch " + shape_string(p_target) + " vs " +
                     shape_string(p));
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    total -= p_target.data()[i] * std::log(clamp_prob(p.data()[i]));
  }
  Matrix out(1, 1);
  out(0, 0) = total;
  return p_pred.tape()->push(
      std::move(out), {p_pred}, [p_pred, p_target](Tape& t, const Matrix& g, const Matrix&) {
        const Matrix& p = p_pred.value();
        Matrix& dp = t.grad_ref(p_pred);
        for (Eigen::Index i = 0; i < p.size(); ++i) {
          const double raw = p.data()[i];
          if (raw < kProbFloor || raw > 1.0 - kProbFloor) continue;
          dp.data()[i] -= g(0, 0) * p_target.data()[i] / raw;
        }
      });
}

Var cross_entropy_with_logits(const Matrix& p_target, Var logits) {
  if (logits.rows() != p_target.rows() || logits.cols() != p_target.cols()) {
    throw ShapeError("cross_entropy_with_logits: shape mismatch " + shape_string(p_target) +
                     " vs " + shape_string(logits.value()));
  }
  Tape* tape = logits.tape();
  Var log_p = log_softmax(logits);
  Var target = tape->constant(p_target);
  return scale(sum(hadamard(target, log_p)), -1.0);
}

}  // namespace ad
}  // namespace rsarank

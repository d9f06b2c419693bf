#include "rsarank/optimizer.hpp"

#include <cmath>
#include <string>

#include "rsarank/error.hpp"

namespace rsarank {

std::string_view optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::kSgd ? "sgd" : "adam";
}

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "sgd") return OptimizerKind::kSgd;
  if (text == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer '" + std::string(text) + "' (use sgd, adam)");
}

namespace {

void check_aligned(std::span<Matrix* const> params, std::span<const Matrix> grads) {
  if (params.size() != grads.size()) {
    throw ShapeError(std::to_string(params.size()) + " parameters vs " +
                     std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i].rows() || params[i]->cols() != grads[i].cols()) {
      throw ShapeError("optimizer: shape mismatch " + shape_string(*params[i]) + " vs " +
                       shape_string(grads[i]));
    }
  }
}

}  // namespace

void sgd_step(std::span<Matrix* const> params, std::span<const Matrix> grads, double learning_rate) {
  check_aligned(params, grads);
  for (std::size_t i = 0; i < params.size(); ++i) *params[i] -= learning_rate * grads[i];
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state,
               const AdamOptions& options) {
  check_aligned(params, grads);
  if (state.first_moment.size() != params.size()) {
    state.step = 0;
    state.first_moment.clear();
    state.second_moment.clear();
    for (const Matrix* p : params) {
      state.first_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.second_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    m = options.beta1 * m + (1.0 - options.beta1) * grads[i];
    v = options.beta2 * v + (1.0 - options.beta2) * grads[i].cwiseProduct(grads[i]);
    params[i]->array() -= options.learning_rate * (m.array() / correction1) /
                          ((v.array() / correction2).sqrt() + options.epsilon);
  }
}

}  // namespace rsarank

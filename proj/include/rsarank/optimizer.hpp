#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "rsarank/tensor.hpp"

namespace rsarank {

enum class OptimizerKind { kSgd, kAdam };

std::string_view optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view text);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::size_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

/// p <- p - lr * g.
void sgd_step(std::span<Matrix* const> params, std::span<const Matrix> grads, double learning_rate);

/// Bias-corrected Adam. Moments are allocated on the first call.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state,
               const AdamOptions& options);

}  // namespace rsarank

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "rsarank/tensor.hpp"

namespace rsarank::ad {

/// Builds a scalar expression on `tape` from one Var per parameter matrix.
using TapeFunction = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  Eigen::Index worst_index = 0;
  std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients of `f` at `params` with central
/// differences of step `step`. Per coordinate the error is
/// |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckReport grad_check_report(const TapeFunction& f, std::span<const Matrix> params,
                                  double step = 1e-5);

double grad_check(const TapeFunction& f, std::span<const Matrix> params, double step = 1e-5);

/// Value and reverse-mode gradient of `f` at `params`.
double evaluate_with_gradient(const TapeFunction& f, std::span<const Matrix> params,
                              std::vector<Matrix>& grads);

}  // namespace rsarank::ad

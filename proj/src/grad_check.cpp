#include "rsarank/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace rsarank::ad {

namespace {

double evaluate(const TapeFunction& f, std::span<const Matrix> params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Matrix& p : params) vars.push_back(tape.constant(p));
  return f(tape, vars).scalar();
}

}  // namespace

double evaluate_with_gradient(const TapeFunction& f, std::span<const Matrix> params,
                              std::vector<Matrix>& grads) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Matrix& p : params) vars.push_back(tape.variable(p));
  Var loss = f(tape, vars);
  tape.backward(loss);
  grads.clear();
  for (const Var& v : vars) grads.push_back(v.grad());
  return loss.scalar();
}

GradCheckReport grad_check_report(const TapeFunction& f, std::span<const Matrix> params,
                                  double step) {
  std::vector<Matrix> analytic;
  evaluate_with_gradient(f, params, analytic);

  std::vector<Matrix> probe(params.begin(), params.end());
  GradCheckReport report;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    for (Eigen::Index i = 0; i < probe[p].size(); ++i) {
      double& x = probe[p].data()[i];
      const double original = x;
      x = original + step;
      const double up = evaluate(f, probe);
      x = original - step;
      const double down = evaluate(f, probe);
      x = original;

      const double numeric = (up - down) / (2.0 * step);
      const double exact = analytic[p].data()[i];
      const double denom = std::max({1.0, std::abs(exact), std::abs(numeric)});
      const double err = std::abs(exact - numeric) / denom;
      ++report.coordinates;
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_param = p;
        report.worst_index = i;
      }
    }
  }
  return report;
}

double grad_check(const TapeFunction& f, std::span<const Matrix> params, double step) {
  return grad_check_report(f, params, step).max_relative_error;
}

}  // namespace rsarank::ad

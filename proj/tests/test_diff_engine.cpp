#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rsarank/error.hpp"
#include "rsarank/grad_check.hpp"
#include "rsarank/random.hpp"
#include "rsarank/tensor.hpp"

namespace rsarank::ad {
namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, scale);
  return m;
}

TEST(DiffEngine, MatmulIdentity) {
  Rng rng(1);
  Tape tape;
  const Matrix b = random_matrix(rng, 3, 4);
  Var out = matmul(tape.constant(Matrix::Identity(3, 3)), tape.constant(b));
  EXPECT_EQ(out.value(), b);
}

TEST(DiffEngine, ShapeMismatchNamesBothShapes) {
  Tape tape;
  Var a = tape.constant(Matrix::Zero(2, 3));
  Var b = tape.constant(Matrix::Zero(2, 3));
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
  EXPECT_THROW(add(a, tape.constant(Matrix::Zero(3, 2))), ShapeError);
  EXPECT_THROW(hadamard(a, tape.constant(Matrix::Zero(1, 3))), ShapeError);
}

TEST(DiffEngine, ConcatColsShapeLaw) {
  Tape tape;
  std::vector<Var> parts;
  for (int i = 0; i < 4; ++i) parts.push_back(tape.constant(Matrix::Constant(5, 3, i)));
  Var out = concat_cols(parts);
  EXPECT_EQ(out.rows(), 5);
  EXPECT_EQ(out.cols(), 12);
  EXPECT_EQ(out.value()(2, 7), 2.0);
}

TEST(DiffEngine, TraceGradientMatchesClosedForm) {
  // d/dA tr((AB)^T C) = C B^T
  Rng rng(2);
  const Matrix b = random_matrix(rng, 4, 3);
  const Matrix c = random_matrix(rng, 2, 3);
  const std::vector<Matrix> params = {random_matrix(rng, 2, 4)};
  auto f = [&](Tape& tape, std::span<const Var> p) {
    return sum(hadamard(matmul(p[0], tape.constant(b)), tape.constant(c)));
  };
  std::vector<Matrix> grads;
  evaluate_with_gradient(f, params, grads);
  EXPECT_LT((grads[0] - c * b.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(grad_check(f, params), 1e-8);
}

TEST(DiffEngine, ScalarOpValues) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(elu(-1.0, 1.0), std::exp(-1.0) - 1.0, 1e-15);
  EXPECT_NEAR(elu(-1.0, 1.0), -0.63212, 1e-5);
  EXPECT_EQ(elu(2.5), 2.5);
  for (double c : {-50.0, 0.0, 3.0, 700.0}) {
    const Vector p = softmax(Vector::Constant(3, c));
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(p(i), 1.0 / 3.0, 1e-15);
  }
}

TEST(DiffEngine, SoftmaxSumsToOneAndIsShiftInvariant) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.below(12));
    Matrix v = random_matrix(rng, n, 1, 5.0);
    const double shift = rng.uniform(-100.0, 100.0);
    Tape tape;
    const Matrix p = softmax(tape.constant(v)).value();
    const Matrix q = softmax(tape.constant((v.array() + shift).matrix())).value();
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    EXPECT_LT((p - q).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(DiffEngine, LayerNormRowsAreStandardized) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix x = random_matrix(rng, 4, 7, 3.0);
    Tape tape;
    const Matrix y = layer_norm(tape.constant(x), tape.constant(Matrix::Ones(1, 7)),
                                tape.constant(Matrix::Zero(1, 7)), 0.0)
                         .value();
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double mu = y.row(r).mean();
      const double var = (y.row(r).array() - mu).square().mean();
      EXPECT_LT(std::abs(mu), 1e-9);
      EXPECT_NEAR(var, 1.0, 1e-6);
    }
  }
}

TEST(DiffEngine, LayerNormDefaultEpsOnWideRows) {
  // With eps = 1e-5 the normalized variance is var / (var + eps); rows with
  // variance of at least 100 land within 1e-6 of one.
  Rng rng(5);
  const Matrix x = random_matrix(rng, 6, 9, 40.0);
  Tape tape;
  const Matrix y = layer_norm(tape.constant(x), tape.constant(Matrix::Ones(1, 9)),
                              tape.constant(Matrix::Zero(1, 9)))
                       .value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const double in_var = (x.row(r).array() - x.row(r).mean()).square().mean();
    ASSERT_GE(in_var, 100.0);
    const double var = (y.row(r).array() - y.row(r).mean()).square().mean();
    EXPECT_LT(std::abs(y.row(r).mean()), 1e-9);
    EXPECT_NEAR(var, 1.0, 1e-6);
  }
}

TEST(DiffEngine, BceAtHalfIsLog2) {
  Rng rng(6);
  Matrix target(3, 3);
  for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = rng.uniform();
  Tape tape;
  EXPECT_NEAR(bce_mean(tape.constant(Matrix::Constant(3, 3, 0.5)), target).scalar(),
              std::log(2.0), 1e-15);
}

TEST(DiffEngine, CrossEntropyOfSelfIsEntropy) {
  const double e = std::exp(1.0);
  Matrix p(2, 1);
  p << e / (1 + e), 1 / (1 + e);
  Tape tape;
  const double ce = cross_entropy(p, tape.constant(p)).scalar();
  EXPECT_NEAR(ce, -(p(0) * std::log(p(0)) + p(1) * std::log(p(1))), 1e-15);
  EXPECT_NEAR(ce, 0.58220, 5e-6);
}

TEST(DiffEngine, BceClampsSaturatedPredictions) {
  Matrix pred(1, 2);
  pred << 0.0, 1.0;
  Matrix target(1, 2);
  target << 1.0, 0.0;
  Tape tape;
  Var p = tape.variable(pred);
  Var loss = bce_mean(p, target);
  const double expected = -(std::log(kProbFloor) + std::log(1.0 - (1.0 - kProbFloor))) / 2.0;
  EXPECT_NEAR(loss.scalar(), expected, 1e-12);
  tape.backward(loss);
  EXPECT_TRUE(p.grad().allFinite());
}

// One finite-difference check per differentiable op.
struct OpCase {
  const char* name;
  std::vector<Matrix> inputs;
  TapeFunction f;
};

TEST(DiffEngine, EveryOpPassesGradientCheck) {
  Rng rng(7);
  const Matrix target = (random_matrix(rng, 3, 3).array() > 0).cast<double>().matrix();
  Matrix dist = random_matrix(rng, 4, 1).cwiseAbs();
  dist /= dist.sum();
  const Matrix weights = random_matrix(rng, 3, 4);
  auto weigh = [&](Tape& t, Var v) { return sum(hadamard(v, t.constant(weights))); };

  std::vector<OpCase> cases = {
      {"matmul", {random_matrix(rng, 3, 2), random_matrix(rng, 2, 4)},
       [&](Tape& t, std::span<const Var> p) { return weigh(t, matmul(p[0], p[1])); }},
      {"transpose", {random_matrix(rng, 4, 3)},
       [&](Tape& t, std::span<const Var> p) { return weigh(t, transpose(p[0])); }},
      {"add_sub", {random_matrix(rng, 3, 4), random_matrix(rng, 3, 4)},
       [&](Tape& t, std::span<const Var> p) { return weigh(t, (p[0] + p[1]) - p[1] * 3.0); }},
      {"hadamard", {random_matrix(rng, 3, 4), random_matrix(rng, 3, 4)},
       [&](Tape& t, std::span<const Var> p) { return weigh(t, hadamard(p[0], p[1])); }},
      {"one_minus", {random_matrix(rng, 3, 4)},
       [&](Tape& t, std::span<const Var> p) { return weigh(t, one_minus(p[0])); }},
      {"add_row", {random_matrix(rng, 3, 4), random_matrix(rng, 1, 4)},
       [&](Tape& t, std::span<const Var> p) { return weigh(t, add_row(p[0], p[1])); }},
      {"concat_cols", {random_matrix(rng, 3, 1), random_matrix(rng, 3, 3)},
       [&](Tape& t, std::span<const Var> p) { return weigh(t, concat_cols(p)); }},
      {"mean", {random_matrix(rng, 3, 4)},
       [&](Tape&, std::span<const Var> p) { return mean(hadamard(p[0], p[0])); }},
      {"sigmoid", {random_matrix(rng, 3, 4, 2.0)},
       [&](Tape& t, std::span<const Var> p) { return weigh(t, sigmoid(p[0])); }},
      {"elu", {random_matrix(rng, 3, 4, 2.0)},
       [&](Tape& t, std::span<const Var> p) { return weigh(t, elu(p[0])); }},
      {"layer_norm", {random_matrix(rng, 3, 4), random_matrix(rng, 1, 4), random_matrix(rng, 1, 4)},
       [&](Tape& t, std::span<const Var> p) { return weigh(t, layer_norm(p[0], p[1], p[2])); }},
      {"softmax", {random_matrix(rng, 4, 1)},
       [&](Tape& t, std::span<const Var> p) {
         return sum(hadamard(softmax(p[0]), t.constant(dist)));
       }},
      {"log_softmax", {random_matrix(rng, 4, 1)},
       [&](Tape& t, std::span<const Var> p) {
         return sum(hadamard(log_softmax(p[0]), t.constant(dist)));
       }},
      {"bce_mean", {random_matrix(rng, 3, 3)},
       [&](Tape&, std::span<const Var> p) { return bce_mean(sigmoid(p[0]), target); }},
      {"cross_entropy", {random_matrix(rng, 4, 1)},
       [&](Tape&, std::span<const Var> p) { return cross_entropy(dist, softmax(p[0])); }},
      {"cross_entropy_with_logits", {random_matrix(rng, 4, 1)},
       [&](Tape&, std::span<const Var> p) { return cross_entropy_with_logits(dist, p[0]); }},
  };
  for (const auto& c : cases) {
    EXPECT_LT(grad_check(c.f, c.inputs), 1e-6) << c.name;
  }
}

TEST(GradCheck, SquareAtThree) {
  const std::vector<Matrix> x = {Matrix::Constant(1, 1, 3.0)};
  auto f = [](Tape&, std::span<const Var> p) { return sum(hadamard(p[0], p[0])); };
  std::vector<Matrix> grads;
  EXPECT_EQ(evaluate_with_gradient(f, x, grads), 9.0);
  EXPECT_EQ(grads[0](0, 0), 6.0);
  EXPECT_LT(grad_check(f, x, 1e-5), 1e-8);
}

TEST(GradCheck, ConstantFunction) {
  const std::vector<Matrix> x = {Matrix::Constant(2, 2, 1.5)};
  auto f = [](Tape& tape, std::span<const Var>) { return tape.constant(Matrix::Constant(1, 1, 4.0)); };
  EXPECT_EQ(grad_check(f, x), 0.0);
}

TEST(GradCheck, RandomQuadraticForms) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.below(6));
    const Matrix a = random_matrix(rng, n, n);
    const std::vector<Matrix> x = {random_matrix(rng, n, 1)};
    auto f = [&](Tape& tape, std::span<const Var> p) {
      return sum(hadamard(p[0], matmul(tape.constant(a), p[0])));
    };
    std::vector<Matrix> grads;
    evaluate_with_gradient(f, x, grads);
    const Matrix expected = (a + a.transpose()) * x[0];
    EXPECT_LT((grads[0] - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(grad_check(f, x), 1e-6);
  }
}

TEST(GradCheck, ReportsWorstCoordinate) {
  // A deliberately wrong backward rule must be caught.
  auto f = [](Tape& tape, std::span<const Var> p) {
    Var x = p[0];
    Var doubled = tape.push(x.value() * 2.0, {x}, [x](Tape& t, const Matrix& up, const Matrix&) {
      t.grad_ref(x) += up;  // should be 2 * up
    });
    return sum(doubled);
  };
  const std::vector<Matrix> x = {Matrix::Ones(2, 3)};
  const GradCheckReport report = grad_check_report(f, x);
  EXPECT_NEAR(report.max_relative_error, 0.5, 1e-6);
  EXPECT_EQ(report.coordinates, 6u);
}

TEST(Tape, GradientsMatchParameterShapes) {
  Rng rng(9);
  Tape tape;
  Var w = tape.variable(random_matrix(rng, 3, 2));
  Var b = tape.variable(random_matrix(rng, 1, 2));
  Var unused = tape.variable(random_matrix(rng, 5, 5));
  Var x = tape.constant(random_matrix(rng, 4, 3));
  Var loss = mean(sigmoid(add_row(matmul(x, w), b)));
  tape.backward(loss);
  EXPECT_EQ(w.grad().rows(), 3);
  EXPECT_EQ(w.grad().cols(), 2);
  EXPECT_EQ(b.grad().rows(), 1);
  EXPECT_EQ(b.grad().cols(), 2);
  EXPECT_EQ(unused.grad().rows(), 5);
  EXPECT_EQ(unused.grad().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Tape, BackwardTwiceGivesSameGradients) {
  Rng rng(10);
  Tape tape;
  Var w = tape.variable(random_matrix(rng, 3, 3));
  Var loss = sum(elu(matmul(w, w)));
  tape.backward(loss);
  const Matrix first = w.grad();
  tape.backward(loss);
  EXPECT_EQ(first, w.grad());
}

TEST(Tape, BackwardRejectsNonScalar) {
  Tape tape;
  Var w = tape.variable(Matrix::Ones(2, 2));
  EXPECT_THROW(tape.backward(w), ShapeError);
}

}  // namespace
}  // namespace rsarank::ad

#include "rsarank/objective.hpp"

#include <cmath>
#include <string>

#include "rsarank/error.hpp"

namespace rsarank {

double ideal_normalizer(int k) {
  double z = 0.0;
  for (int m = 0; m <= k; ++m) z += std::exp(static_cast<double>(m));
  return z;
}

IdealAttentionMatrix ideal_attention(std::span<const int> rels, EncoderKind kind, int k) {
  for (int r : rels) {
    if (r < 0 || r > k) {
      throw Error("relevance grade " + std::to_string(r) + " outside [0, " +
                  std::to_string(k) + "]");
    }
  }
  const auto n = static_cast<Eigen::Index>(rels.size());
  const double z = ideal_normalizer(k);
  IdealAttentionMatrix ideal{kind, Matrix::Zero(n, n), k};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const int ri = rels[i];
      const int rj = rels[j];
      double w = 0.0;
      switch (kind) {
        case EncoderKind::kPlus: w = rj > ri ? 1.0 : 0.0; break;
        case EncoderKind::kGreater: w = rj > ri ? std::exp(static_cast<double>(rj - ri)) / z : 0.0; break;
        case EncoderKind::kMinus: w = rj < ri ? 1.0 : 0.0; break;
        case EncoderKind::kLess: w = rj < ri ? std::exp(static_cast<double>(ri - rj)) / z : 0.0; break;
      }
      ideal.weights(i, j) = w;
    }
  }
  return ideal;
}

Vector top_one_prob(const Vector& values) { return ad::softmax(values); }

Vector top_one_prob(std::span<const int> grades) {
  Vector v(static_cast<Eigen::Index>(grades.size()));
  for (std::size_t i = 0; i < grades.size(); ++i) v(static_cast<Eigen::Index>(i)) = grades[i];
  return top_one_prob(v);
}

double entropy(const Vector& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0.0) h -= p(i) * std::log(p(i));
  }
  return h;
}

double listnet_loss(const Vector& scores, std::span<const int> rels) {
  if (static_cast<std::size_t>(scores.size()) != rels.size()) {
    throw ShapeError("listnet_loss: " + std::to_string(scores.size()) + " scores vs " +
                     std::to_string(rels.size()) + " grades");
  }
  const Vector target = top_one_prob(rels);
  const double shift = scores.maxCoeff();
  const double log_z = shift + std::log((scores.array() - shift).exp().sum());
  return -(target.array() * (scores.array() - log_z)).sum();
}

ad::Var listnet_loss(ad::Var scores, std::span<const int> rels) {
  if (static_cast<std::size_t>(scores.rows()) != rels.size() || scores.cols() != 1) {
    throw ShapeError("listnet_loss: scores " + shape_string(scores.value()) + " vs " +
                     std::to_string(rels.size()) + " grades");
  }
  const Vector target = top_one_prob(rels);
  return ad::cross_entropy_with_logits(Matrix(target), scores);
}

double attention_regularizer(const Matrix& attention, const Matrix& ideal) {
  if (attention.rows() != ideal.rows() || attention.cols() != ideal.cols()) {
    throw ShapeError("attention_regularizer: shape mismatch " + shape_string(attention) +
                     " vs " + shape_string(ideal));
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < attention.size(); ++i) {
    const double p = ad::clamp_prob(attention.data()[i]);
    const double w = ideal.data()[i];
    total -= w * std::log(p) + (1.0 - w) * std::log(1.0 - p);
  }
  return total / static_cast<double>(attention.size());
}

ad::Var attention_regularizer(ad::Var attention, const Matrix& ideal) {
  return ad::bce_mean(attention, ideal);
}

TotalLoss total_loss(ad::Tape& tape, const RsaModel& model, const BoundModel& bound,
                     const QueryGroup& group, int k) {
  TotalLoss loss;
  loss.forward = model_forward(model, bound, tape.constant(group.features));
  loss.listnet = listnet_loss(loss.forward.scores, group.relevance);
  loss.total = loss.listnet;
  if (model.config.regularized()) {
    for (std::size_t e = 0; e < loss.forward.attention.size(); ++e) {
      const EncoderKind kind = loss.forward.kinds[e];
      const IdealAttentionMatrix ideal = ideal_attention(group.relevance, kind, k);
      ad::Var reg = attention_regularizer(loss.forward.attention[e], ideal.weights);
      loss.kinds.push_back(kind);
      loss.regularizers.push_back(reg);
      loss.total = loss.total + reg;
    }
  }
  return loss;
}

double total_loss(const RsaModel& model, const QueryGroup& group, int k) {
  ad::Tape tape;
  BoundModel bound = rsarank::bind(model, tape, /*differentiable=*/false);
  return total_loss(tape, model, bound, group, k).total.scalar();
}

LossAndGradient loss_and_gradient(const RsaModel& model, const QueryGroup& group, int k) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  model.for_each_parameter(
      [&](const std::string&, const Matrix& m) { vars.push_back(tape.variable(m)); });
  BoundModel bound = bind_vars(model, vars);
  TotalLoss loss = total_loss(tape, model, bound, group, k);
  tape.backward(loss.total);
  LossAndGradient out;
  out.loss = loss.total.scalar();
  out.grads.reserve(vars.size());
  for (const ad::Var& v : vars) out.grads.push_back(v.grad());
  return out;
}

}  // namespace rsarank

#pragma once

#include <span>
#include <vector>

#include "rsarank/letor_data.hpp"
#include "rsarank/model.hpp"
#include "rsarank/tensor.hpp"

namespace rsarank {

/// Target attention for one encoder kind. Row i says how much document i
/// should attend to each document j:
///   +  1 if r_j > r_i           >  e^(r_j - r_i) / Z if r_j > r_i
///   -  1 if r_j < r_i           <  e^(r_i - r_j) / Z if r_j < r_i
/// and 0 otherwise, with the constant Z = sum_{m=0..k} e^m.
struct IdealAttentionMatrix {
  EncoderKind kind = EncoderKind::kPlus;
  Matrix weights;
  int k = 0;
};

/// sum_{m=0}^{k} e^m.
double ideal_normalizer(int k);

/// Throws Error when a grade lies outside [0, k].
IdealAttentionMatrix ideal_attention(std::span<const int> rels, EncoderKind kind, int k);

/// Top-one probabilities e^v_j / sum_k e^v_k (max-shifted).
Vector top_one_prob(const Vector& values);
Vector top_one_prob(std::span<const int> grades);

double entropy(const Vector& p);

/// -sum_i P_R(i) log P_f(i), P_R from grades used verbatim, P_f from scores.
double listnet_loss(const Vector& scores, std::span<const int> rels);
ad::Var listnet_loss(ad::Var scores, std::span<const int> rels);

/// Average binary cross-entropy between an attention matrix and its ideal,
/// attention clamped away from 0 and 1.
double attention_regularizer(const Matrix& attention, const Matrix& ideal);
ad::Var attention_regularizer(ad::Var attention, const Matrix& ideal);

struct TotalLoss {
  ad::Var total;
  ad::Var listnet;
  std::vector<EncoderKind> kinds;
  std::vector<ad::Var> regularizers;  // empty unless the model is regularized
  ForwardResult forward;
};

/// ListNet loss plus, for the regularized variant, one unit-weight attention
/// regularizer per active encoder against that encoder's ideal matrix.
TotalLoss total_loss(ad::Tape& tape, const RsaModel& model, const BoundModel& bound,
                     const QueryGroup& group, int k);

/// Value only.
double total_loss(const RsaModel& model, const QueryGroup& group, int k);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<Matrix> grads;  // for_each_parameter order
};

LossAndGradient loss_and_gradient(const RsaModel& model, const QueryGroup& group, int k);

}  // namespace rsarank

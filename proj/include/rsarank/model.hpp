#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsarank/tensor.hpp"

namespace rsarank {

/// The four document encoders, named by the ideal attention pattern that
/// supervises them: attend to more relevant (+), exponentially to more
/// relevant (>), to less relevant (-), exponentially to less relevant (<).
enum class EncoderKind { kPlus, kGreater, kMinus, kLess };

inline constexpr std::array<EncoderKind, 4> kAllEncoderKinds = {
    EncoderKind::kPlus, EncoderKind::kGreater, EncoderKind::kMinus, EncoderKind::kLess};

char encoder_symbol(EncoderKind kind);
/// File-name friendly: plus, greater, minus, less.
std::string_view encoder_name(EncoderKind kind);
std::optional<EncoderKind> encoder_from_symbol(char symbol);
/// Parses e.g. "+>-<", "+,-" or "all". Throws ConfigError on unknown symbols
/// or duplicates.
std::vector<EncoderKind> parse_encoder_set(std::string_view text);
std::string format_encoder_set(std::span<const EncoderKind> kinds);

enum class Variant { kListNet, kListNetSA, kListNetRSA };

std::string_view variant_name(Variant v);  // listnet, sa, rsa
Variant parse_variant(std::string_view text);

struct ModelConfig {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 64;
  Variant variant = Variant::kListNetRSA;
  std::vector<EncoderKind> encoders{kAllEncoderKinds.begin(), kAllEncoderKinds.end()};
  std::uint64_t seed = 1;

  bool uses_encoders() const { return variant != Variant::kListNet; }
  bool regularized() const { return variant == Variant::kListNetRSA; }
  void validate() const;
};

/// Parameters of one document encoder. T is Matrix for storage and ad::Var
/// when bound to a tape.
///
///   A  = ELU(LN1(V W1 + b1));          H1 = G1(V) * A + (1 - G1(V)) * (V P)
///   S  = sigmoid((H1 Wq)(H1 Wk)^T);    H2 = G2(H1) * S (H1 Wv) + (1 - G2(H1)) * H1
///   B  = ELU(LN2(H2 W2 + b2));         H3 = G3(H2) * B + (1 - G3(H2)) * H2
///
/// with gates Gi(x) = sigmoid(x Wgi + bgi). P projects the d-wide input onto
/// the d_h-wide carry path of G1.
template <typename T>
struct EncoderWeights {
  T ff1_w, ff1_b, ln1_gain, ln1_bias;
  T gate1_w, gate1_b, carry_proj;
  T query_w, key_w, value_w;
  T gate2_w, gate2_b;
  T ff2_w, ff2_b, ln2_gain, ln2_bias;
  T gate3_w, gate3_b;

  template <typename F>
  void for_each(F&& f) { visit(*this, f); }
  template <typename F>
  void for_each(F&& f) const { visit(*this, f); }

 private:
  template <typename Self, typename F>
  static void visit(Self& s, F& f) {
    f("ff1.w", s.ff1_w); f("ff1.b", s.ff1_b); f("ln1.gain", s.ln1_gain); f("ln1.bias", s.ln1_bias);
    f("gate1.w", s.gate1_w); f("gate1.b", s.gate1_b); f("carry.proj", s.carry_proj);
    f("attn.query", s.query_w); f("attn.key", s.key_w); f("attn.value", s.value_w);
    f("gate2.w", s.gate2_w); f("gate2.b", s.gate2_b);
    f("ff2.w", s.ff2_w); f("ff2.b", s.ff2_b); f("ln2.gain", s.ln2_gain); f("ln2.bias", s.ln2_bias);
    f("gate3.w", s.gate3_w); f("gate3.b", s.gate3_b);
  }
};

using EncoderParams = EncoderWeights<Matrix>;

/// All three scorers share this container; which members are populated
/// depends on config.variant. ListNet uses only `linear_w` (d x 1, no bias).
/// SA and RSA use one encoder per active kind plus the scoring head over the
/// concatenated encoder outputs.
struct RsaModel {
  ModelConfig config;
  Matrix linear_w;
  std::vector<EncoderParams> encoders;  // aligned with config.encoders
  Matrix head_w;                        // (m * d_h) x 1
  Matrix head_b;                        // 1 x 1

  /// Visits every trainable matrix in a fixed order with a stable name.
  template <typename F>
  void for_each_parameter(F&& f) { visit(*this, f); }
  template <typename F>
  void for_each_parameter(F&& f) const { visit(*this, f); }

  std::vector<Matrix*> parameters();
  std::vector<Matrix> parameter_values() const;
  std::size_t parameter_count() const;  // scalar count

 private:
  template <typename Self, typename F>
  static void visit(Self& m, F& f) {
    if (!m.config.uses_encoders()) {
      f(std::string("linear.w"), m.linear_w);
      return;
    }
    for (std::size_t e = 0; e < m.encoders.size(); ++e) {
      const std::string prefix =
          "encoder." + std::string(encoder_name(m.config.encoders[e])) + ".";
      m.encoders[e].for_each([&](const char* name, auto& w) { f(prefix + name, w); });
    }
    f(std::string("head.w"), m.head_w);
    f(std::string("head.b"), m.head_b);
  }
};

/// Xavier-uniform weights a = sqrt(6 / (fan_in + fan_out)), zero biases,
/// unit layer-norm gains, highway gate biases -1. Deterministic per seed.
RsaModel init_params(const ModelConfig& config, std::uint64_t seed);
inline RsaModel init_params(const ModelConfig& config) { return init_params(config, config.seed); }

/// Model parameters bound to one tape.
struct BoundModel {
  ad::Var linear_w;
  std::vector<EncoderWeights<ad::Var>> encoders;
  ad::Var head_w, head_b;
};

/// Binds as tape variables (for gradients) or constants.
BoundModel bind(const RsaModel& model, ad::Tape& tape, bool differentiable = true);
/// Binds pre-made Vars given in for_each_parameter order.
BoundModel bind_vars(const RsaModel& model, std::span<const ad::Var> params);

struct EncoderOutput {
  ad::Var output;     // n x d_h
  ad::Var attention;  // n x n, entries in (0, 1)
};

struct ForwardResult {
  ad::Var scores;                        // n x 1
  std::vector<EncoderKind> kinds;        // aligned with attention
  std::vector<ad::Var> attention;
};

EncoderOutput encoder_forward(const EncoderWeights<ad::Var>& weights, ad::Var features);

/// Scores one group. Throws ShapeError if feature columns differ from
/// config.input_dim.
ForwardResult model_forward(const RsaModel& model, const BoundModel& bound, ad::Var features);

/// s = features * w.
Vector listnet_score(const Matrix& weights, const Matrix& features);

struct Prediction {
  Vector scores;
  std::vector<EncoderKind> kinds;
  std::vector<Matrix> attention;
};

/// Gradient-free forward pass.
Prediction predict(const RsaModel& model, const Matrix& features);
Vector score(const RsaModel& model, const Matrix& features);

}  // namespace rsarank

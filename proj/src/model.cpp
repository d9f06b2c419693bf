#include "rsarank/model.hpp"

#include <cmath>

#include "rsarank/error.hpp"
#include "rsarank/random.hpp"

namespace rsarank {

char encoder_symbol(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::kPlus: return '+';
    case EncoderKind::kGreater: return '>';
    case EncoderKind::kMinus: return '-';
    case EncoderKind::kLess: return '<';
  }
  return '?';
}

std::string_view encoder_name(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::kPlus: return "plus";
    case EncoderKind::kGreater: return "greater";
    case EncoderKind::kMinus: return "minus";
    case EncoderKind::kLess: return "less";
  }
  return "unknown";
}

std::optional<EncoderKind> encoder_from_symbol(char symbol) {
  for (EncoderKind kind : kAllEncoderKinds) {
    if (encoder_symbol(kind) == symbol) return kind;
  }
  return std::nullopt;
}

std::vector<EncoderKind> parse_encoder_set(std::string_view text) {
  if (text == "all") return {kAllEncoderKinds.begin(), kAllEncoderKinds.end()};
  std::vector<EncoderKind> kinds;
  for (char c : text) {
    if (c == ',' || c == ' ') continue;
    auto kind = encoder_from_symbol(c);
    if (!kind) throw ConfigError(std::string("unknown encoder kind '") + c + "' (use + > - <)");
    for (EncoderKind k : kinds) {
      if (k == *kind) throw ConfigError(std::string("duplicate encoder kind '") + c + "'");
    }
    kinds.push_back(*kind);
  }
  return kinds;
}

std::string format_encoder_set(std::span<const EncoderKind> kinds) {
  std::string out;
  for (EncoderKind k : kinds) out.push_back(encoder_symbol(k));
  return out;
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kListNet: return "listnet";
    case Variant::kListNetSA: return "sa";
    case Variant::kListNetRSA: return "rsa";
  }
  return "unknown";
}

Variant parse_variant(std::string_view text) {
  if (text == "listnet") return Variant::kListNet;
  if (text == "sa" || text == "listnet_sa") return Variant::kListNetSA;
  if (text == "rsa" || text == "listnet_rsa") return Variant::kListNetRSA;
  throw ConfigError("unknown variant '" + std::string(text) + "' (use listnet, sa, rsa)");
}

void ModelConfig::validate() const {
  if (input_dim == 0) throw ConfigError("model input dimension must be positive");
  if (uses_encoders()) {
    if (hidden_dim == 0) throw ConfigError("hidden_dim must be >= 1");
    if (encoders.empty()) throw ConfigError("sa/rsa variants need at least one active encoder");
  }
}

std::vector<Matrix*> RsaModel::parameters() {
  std::vector<Matrix*> out;
  for_each_parameter([&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

std::vector<Matrix> RsaModel::parameter_values() const {
  std::vector<Matrix> out;
  for_each_parameter([&](const std::string&, const Matrix& m) { out.push_back(m); });
  return out;
}

std::size_t RsaModel::parameter_count() const {
  std::size_t n = 0;
  for_each_parameter([&](const std::string&, const Matrix& m) { n += m.size(); });
  return n;
}

namespace {

Matrix xavier(Rng& rng, Eigen::Index fan_in, Eigen::Index fan_out) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-a, a);
  return w;
}

Matrix filled(Eigen::Index cols, double value) { return Matrix::Constant(1, cols, value); }

constexpr double kGateBias = -1.0;

EncoderParams init_encoder(Rng& rng, Eigen::Index d, Eigen::Index h) {
  EncoderParams p;
  p.ff1_w = xavier(rng, d, h);
  p.ff1_b = filled(h, 0.0);
  p.ln1_gain = filled(h, 1.0);
  p.ln1_bias = filled(h, 0.0);
  p.gate1_w = xavier(rng, d, h);
  p.gate1_b = filled(h, kGateBias);
  p.carry_proj = xavier(rng, d, h);
  p.query_w = xavier(rng, h, h);
  p.key_w = xavier(rng, h, h);
  p.value_w = xavier(rng, h, h);
  p.gate2_w = xavier(rng, h, h);
  p.gate2_b = filled(h, kGateBias);
  p.ff2_w = xavier(rng, h, h);
  p.ff2_b = filled(h, 0.0);
  p.ln2_gain = filled(h, 1.0);
  p.ln2_bias = filled(h, 0.0);
  p.gate3_w = xavier(rng, h, h);
  p.gate3_b = filled(h, kGateBias);
  return p;
}

template <typename F>
void visit_bound(BoundModel& b, const ModelConfig& config, F&& f) {
  if (!config.uses_encoders()) {
    f(b.linear_w);
    return;
  }
  for (auto& e : b.encoders) e.for_each([&](const char*, ad::Var& v) { f(v); });
  f(b.head_w);
  f(b.head_b);
}

BoundModel empty_bound(const RsaModel& model) {
  BoundModel b;
  if (model.config.uses_encoders()) b.encoders.resize(model.encoders.size());
  return b;
}

// Highway: g * transformed + (1 - g) * carry, g = sigmoid(x Wg + bg).
ad::Var highway(ad::Var gate_input, ad::Var gate_w, ad::Var gate_b, ad::Var transformed,
                ad::Var carry) {
  ad::Var gate = ad::sigmoid(ad::add_row(ad::matmul(gate_input, gate_w), gate_b));
  return ad::hadamard(gate, transformed) + ad::hadamard(ad::one_minus(gate), carry);
}

}  // namespace

RsaModel init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  RsaModel model;
  model.config = config;
  model.config.seed = seed;
  Rng rng(seed);
  const auto d = static_cast<Eigen::Index>(config.input_dim);
  const auto h = static_cast<Eigen::Index>(config.hidden_dim);
  if (!config.uses_encoders()) {
    model.linear_w = xavier(rng, d, 1);
    return model;
  }
  for (std::size_t e = 0; e < config.encoders.size(); ++e) {
    model.encoders.push_back(init_encoder(rng, d, h));
  }
  model.head_w = xavier(rng, h * static_cast<Eigen::Index>(config.encoders.size()), 1);
  model.head_b = Matrix::Zero(1, 1);
  return model;
}

BoundModel bind(const RsaModel& model, ad::Tape& tape, bool differentiable) {
  std::vector<ad::Var> vars;
  model.for_each_parameter([&](const std::string&, const Matrix& m) {
    vars.push_back(differentiable ? tape.variable(m) : tape.constant(m));
  });
  return bind_vars(model, vars);
}

BoundModel bind_vars(const RsaModel& model, std::span<const ad::Var> params) {
  BoundModel b = empty_bound(model);
  std::size_t i = 0;
  visit_bound(b, model.config, [&](ad::Var& v) {
    if (i >= params.size()) throw Error("bind: too few parameter vars");
    v = params[i++];
  });
  if (i != params.size()) throw Error("bind: too many parameter vars");
  return b;
}

EncoderOutput encoder_forward(const EncoderWeights<ad::Var>& w, ad::Var features) {
  using namespace ad;
  // FF1 -> LN -> ELU, highway over a projected carry.
  Var ff1 = elu(layer_norm(add_row(matmul(features, w.ff1_w), w.ff1_b), w.ln1_gain, w.ln1_bias));
  Var h1 = highway(features, w.gate1_w, w.gate1_b, ff1, matmul(features, w.carry_proj));

  // Self-attention with sigmoid weights, no scaling.
  Var queries = matmul(h1, w.query_w);
  Var keys = matmul(h1, w.key_w);
  Var values = matmul(h1, w.value_w);
  Var attention = sigmoid(matmul(queries, transpose(keys)));
  Var attended = matmul(attention, values);
  Var h2 = highway(h1, w.gate2_w, w.gate2_b, attended, h1);

  Var ff2 = elu(layer_norm(add_row(matmul(h2, w.ff2_w), w.ff2_b), w.ln2_gain, w.ln2_bias));
  Var h3 = highway(h2, w.gate3_w, w.gate3_b, ff2, h2);
  return {h3, attention};
}

ForwardResult model_forward(const RsaModel& model, const BoundModel& bound, ad::Var features) {
  const auto expected = static_cast<Eigen::Index>(model.config.input_dim);
  if (features.cols() != expected) {
    throw ShapeError("feature dimension mismatch: model expects " + std::to_string(expected) +
                     " columns, group has " + shape_string(features.value()));
  }
  ForwardResult result;
  if (!model.config.uses_encoders()) {
    result.scores = ad::matmul(features, bound.linear_w);
    return result;
  }
  std::vector<ad::Var> outputs;
  for (std::size_t e = 0; e < bound.encoders.size(); ++e) {
    EncoderOutput out = encoder_forward(bound.encoders[e], features);
    outputs.push_back(out.output);
    result.kinds.push_back(model.config.encoders[e]);
    result.attention.push_back(out.attention);
  }
  ad::Var concat = outputs.size() == 1 ? outputs.front() : ad::concat_cols(outputs);
  result.scores = ad::add_row(ad::matmul(concat, bound.head_w), bound.head_b);
  return result;
}

Vector listnet_score(const Matrix& weights, const Matrix& features) {
  if (weights.cols() != 1 || weights.rows() != features.cols()) {
    throw ShapeError("listnet_score: shape mismatch " + shape_string(features) + " vs " +
                     shape_string(weights));
  }
  return features * weights.col(0);
}

Prediction predict(const RsaModel& model, const Matrix& features) {
  ad::Tape tape;
  BoundModel bound = rsarank::bind(model, tape, /*differentiable=*/false);
  ForwardResult fwd = model_forward(model, bound, tape.constant(features));
  Prediction p;
  p.scores = fwd.scores.value().col(0);
  p.kinds = fwd.kinds;
  for (const ad::Var& a : fwd.attention) p.attention.push_back(a.value());
  return p;
}

Vector score(const RsaModel& model, const Matrix& features) {
  if (!model.config.uses_encoders()) {
    if (features.cols() != static_cast<Eigen::Index>(model.config.input_dim)) {
      throw ShapeError("feature dimension mismatch: model expects " +
                       std::to_string(model.config.input_dim) + " columns, group has " +
                       shape_string(features));
    }
    return listnet_score(model.linear_w, features);
  }
  return predict(model, features).scores;
}

}  // namespace rsarank

#include "rsarank/config.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "rsarank/error.hpp"

namespace rsarank {

std::string_view normalization_name(Normalization n) {
  return n == Normalization::kNone ? "none" : "query-minmax";
}

Normalization parse_normalization(std::string_view text) {
  if (text == "none") return Normalization::kNone;
  if (text == "query-minmax") return Normalization::kQueryMinMax;
  throw ConfigError("unknown normalization '" + std::string(text) + "' (use none, query-minmax)");
}

RunConfig::RunConfig() { model.hidden_dim = 64; }

namespace {

template <typename T>
T parse_value(std::string_view key, std::string_view text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("bad value '" + std::string(text) + "' for " + std::string(key));
  }
  return value;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

void apply_setting(RunConfig& c, std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "variant") {
    c.model.variant = parse_variant(value);
  } else if (key == "encoders") {
    c.model.encoders = parse_encoder_set(value);
  } else if (key == "hidden_dim") {
    c.model.hidden_dim = parse_value<std::size_t>(key, value);
  } else if (key == "seed") {
    c.model.seed = parse_value<std::uint64_t>(key, value);
    c.train.seed = c.model.seed;
  } else if (key == "optimizer") {
    c.train.optimizer = parse_optimizer(value);
  } else if (key == "learning_rate") {
    c.train.learning_rate = parse_value<double>(key, value);
  } else if (key == "beta1") {
    c.train.beta1 = parse_value<double>(key, value);
  } else if (key == "beta2") {
    c.train.beta2 = parse_value<double>(key, value);
  } else if (key == "epsilon") {
    c.train.epsilon = parse_value<double>(key, value);
  } else if (key == "batch_size") {
    c.train.batch_size = parse_value<std::size_t>(key, value);
  } else if (key == "max_epochs") {
    c.train.max_epochs = parse_value<std::size_t>(key, value);
  } else if (key == "patience") {
    c.train.patience = parse_value<std::size_t>(key, value);
  } else if (key == "normalize") {
    c.normalize = parse_normalization(value);
  } else if (key == "k_max_floor") {
    c.k_max_floor = parse_value<int>(key, value);
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

void apply_config_file(RunConfig& config, std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      apply_setting(config, trim(view.substr(0, eq)), view.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void dump_config(std::ostream& out, const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "variant = " << variant_name(c.model.variant) << '\n'
     << "encoders = " << format_encoder_set(c.model.encoders) << '\n'
     << "hidden_dim = " << c.model.hidden_dim << '\n'
     << "seed = " << c.model.seed << '\n'
     << "optimizer = " << optimizer_name(c.train.optimizer) << '\n'
     << "learning_rate = " << c.train.learning_rate << '\n'
     << "beta1 = " << c.train.beta1 << '\n'
     << "beta2 = " << c.train.beta2 << '\n'
     << "epsilon = " << c.train.epsilon << '\n'
     << "batch_size = " << c.train.batch_size << '\n'
     << "max_epochs = " << c.train.max_epochs << '\n'
     << "patience = " << c.train.patience << '\n'
     << "normalize = " << normalization_name(c.normalize) << '\n'
     << "k_max_floor = " << c.k_max_floor << '\n';
  out << os.str();
}

Dataset preprocess(Dataset dataset, Normalization normalize) {
  if (normalize == Normalization::kQueryMinMax) return normalize_query_minmax(std::move(dataset));
  return dataset;
}

}  // namespace rsarank

#pragma once

#include <iosfwd>
#include <string>
#include <string_view>

#include "rsarank/letor_data.hpp"
#include "rsarank/model.hpp"
#include "rsarank/trainer.hpp"

namespace rsarank {

enum class Normalization { kNone, kQueryMinMax };

std::string_view normalization_name(Normalization n);  // none, query-minmax
Normalization parse_normalization(std::string_view text);

/// Everything a run needs besides file paths. model.input_dim is filled in
/// from the data at train time.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  Normalization normalize = Normalization::kNone;
  int k_max_floor = 4;

  RunConfig();
};

/// Sets one key. Throws ConfigError for unknown keys or unparsable values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Flat `key = value` lines; blank lines and `#` comments ignored.
void apply_config_file(RunConfig& config, std::istream& in);

/// Every key with its current value, in a stable order, in the format
/// apply_config_file reads.
void dump_config(std::ostream& out, const RunConfig& config);

Dataset preprocess(Dataset dataset, Normalization normalize);

}  // namespace rsarank

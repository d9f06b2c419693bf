#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rsarank/config.hpp"
#include "rsarank/letor_data.hpp"
#include "rsarank/metrics.hpp"
#include "rsarank/objective.hpp"

namespace rsarank::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct TrainPaths {
  std::filesystem::path train;
  std::filesystem::path valid;
  std::optional<std::filesystem::path> test;
  std::filesystem::path out_dir;
};

int cmd_train(const RunConfig& config, const TrainPaths& paths, std::ostream& out);

struct EvalPaths {
  std::filesystem::path model;
  std::filesystem::path data;
  std::optional<std::filesystem::path> out_dir;
};

int cmd_eval(const EvalPaths& paths, std::ostream& out);
int cmd_predict(const EvalPaths& paths, std::optional<std::filesystem::path> out_file,
                std::ostream& out);
int cmd_attention(const EvalPaths& paths, const std::string& qid, std::ostream& out);
int cmd_significance(const std::filesystem::path& a, const std::filesystem::path& b,
                     std::ostream& out);

struct SynthOptions {
  std::uint64_t seed = 1;
  std::size_t train_queries = 200;
  std::size_t valid_queries = 50;
  std::size_t test_queries = 50;
  std::size_t docs_per_query = 20;
  std::size_t num_features = 10;
  std::filesystem::path out_dir;
};

int cmd_synth(const SynthOptions& options, std::ostream& out);

/// Loads a LETOR file and applies the normalization recorded with a model.
Dataset load_for_model(const std::filesystem::path& path, std::size_t model_dim,
                       Normalization normalize, int k_max_floor);

/// n x n grid, comma separated, 17 significant digits.
void write_matrix_csv(std::ostream& out, const Matrix& m);
Matrix read_matrix_csv(std::istream& in);
/// Plain-text graymap (P2), pixel = round(255 * value) clamped to [0, 255].
void write_pgm(std::ostream& out, const Matrix& m);

}  // namespace rsarank::cli

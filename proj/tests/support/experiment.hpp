#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "rsarank/trainer.hpp"

namespace rsarank::testing {

/// Synthetic train/valid/test comparison of ListNet, SA and RSA under one
/// shared training configuration.
struct ComparisonSetup {
  std::size_t train_queries = 200;
  std::size_t valid_queries = 50;
  std::size_t test_queries = 50;
  std::size_t docs_per_query = 20;
  std::size_t num_features = 10;
  std::size_t hidden_dim = 16;
  TrainConfig train;
};

ComparisonSetup acceptance_setup();

struct SystemOutcome {
  double best_valid_ndcg10 = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  double test_ndcg10 = 0.0;
  std::array<double, 4> test_bce{};  // per encoder kind, mean over test queries
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  SystemOutcome listnet, sa, rsa;
};

SeedOutcome run_comparison(const ComparisonSetup& setup, std::uint64_t seed);

/// Mean BCE between each learned attention matrix and its ideal matrix.
std::array<double, 4> mean_attention_bce(const RsaModel& model, const Dataset& data);

}  // namespace rsarank::testing

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rsarank/letor_data.hpp"

namespace rsarank {

/// Desk-scale LETOR stand-in. Grades are drawn from {0..4}; each query also
/// draws a hidden context sign. Feature roles cycle over the columns:
///   0  noisy grade signal
///   1  grade signal whose sign flips with the query context
///   2  weak per-document hint of the context (readable from the set mean)
///   3  within-query rank percentile of the latent relevance, jittered
///   4+ the latent signal and context pushed through a fixed random
///      nonlinear map, plus noise
/// Feature 1 is only useful to a model that looks at the other documents.
/// The nonlinear map is drawn from `seed` before any query, so every query
/// of one call shares it. Deterministic per seed.
Dataset generate_synthetic(std::uint64_t seed, std::size_t num_queries,
                           std::size_t docs_per_query, std::size_t num_features);

/// Consecutive slices of `dataset` with the given query counts.
std::vector<Dataset> split_dataset(const Dataset& dataset, std::span<const std::size_t> sizes);

}  // namespace rsarank

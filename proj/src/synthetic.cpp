#include "rsarank/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "rsarank/error.hpp"
#include "rsarank/random.hpp"

namespace rsarank {

namespace {

constexpr std::array<double, 5> kGradeProbs = {0.40, 0.25, 0.18, 0.12, 0.05};
constexpr double kLatentNoise = 1.0;
constexpr double kDirectNoise = 1.6;
constexpr double kFlippedNoise = 0.6;
constexpr double kContextShift = 0.6;
constexpr double kPercentileNoise = 1.0;
constexpr double kMixNoise = 0.3;

int draw_grade(Rng& rng) {
  double u = rng.uniform();
  for (std::size_t g = 0; g < kGradeProbs.size(); ++g) {
    if (u < kGradeProbs[g]) return static_cast<int>(g);
    u -= kGradeProbs[g];
  }
  return static_cast<int>(kGradeProbs.size()) - 1;
}

struct MixUnit {
  double latent_w;
  double flipped_w;
  double bias;
};

}  // namespace

Dataset generate_synthetic(std::uint64_t seed, std::size_t num_queries,
                           std::size_t docs_per_query, std::size_t num_features) {
  if (num_queries == 0 || docs_per_query == 0 || num_features == 0) {
    throw ConfigError("synthetic sizes must be positive");
  }
  Rng rng(seed);
  std::vector<MixUnit> mix(num_features);
  for (auto& unit : mix) {
    unit = {rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(-0.5, 0.5)};
  }

  const auto n = static_cast<Eigen::Index>(docs_per_query);
  const auto d = static_cast<Eigen::Index>(num_features);
  Dataset dataset;
  dataset.feature_dim = num_features;
  dataset.k_max = 4;
  dataset.groups.reserve(num_queries);
  for (std::size_t q = 0; q < num_queries; ++q) {
    QueryGroup group;
    group.qid = std::to_string(q + 1);
    group.features = Matrix::Zero(n, d);
    group.relevance.resize(docs_per_query);
    const double context = rng.uniform() < 0.5 ? -1.0 : 1.0;

    Vector latent(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      group.relevance[static_cast<std::size_t>(i)] = draw_grade(rng);
      latent(i) = group.relevance[static_cast<std::size_t>(i)] + rng.normal(0.0, kLatentNoise);
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return latent(a) < latent(b); });
    Vector percentile = Vector::Zero(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      percentile(order[static_cast<std::size_t>(r)]) =
          n > 1 ? static_cast<double>(r) / static_cast<double>(n - 1) : 0.5;
    }

    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = latent(i);
      for (Eigen::Index j = 0; j < d; ++j) {
        double x = 0.0;
        switch (std::min<Eigen::Index>(j, 4)) {
          case 0: x = z + rng.normal(0.0, kDirectNoise); break;
          case 1: x = context * z + rng.normal(0.0, kFlippedNoise); break;
          case 2: x = context * kContextShift + rng.normal(); break;
          case 3: x = percentile(i) + rng.normal(0.0, kPercentileNoise); break;
          default: {
            const MixUnit& u = mix[static_cast<std::size_t>(j)];
            x = std::tanh(u.latent_w * z + u.flipped_w * context * z + u.bias) +
                rng.normal(0.0, kMixNoise);
          }
        }
        group.features(i, j) = x;
      }
    }
    dataset.groups.push_back(std::move(group));
  }
  return dataset;
}

std::vector<Dataset> split_dataset(const Dataset& dataset, std::span<const std::size_t> sizes) {
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (total > dataset.groups.size()) {
    throw ConfigError("split sizes sum to " + std::to_string(total) + " but dataset has " +
                      std::to_string(dataset.groups.size()) + " queries");
  }
  std::vector<Dataset> parts;
  std::size_t offset = 0;
  for (std::size_t size : sizes) {
    Dataset part;
    part.feature_dim = dataset.feature_dim;
    part.k_max = dataset.k_max;
    part.groups.assign(dataset.groups.begin() + static_cast<std::ptrdiff_t>(offset),
                       dataset.groups.begin() + static_cast<std::ptrdiff_t>(offset + size));
    offset += size;
    parts.push_back(std::move(part));
  }
  return parts;
}

}  // namespace rsarank

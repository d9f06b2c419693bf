#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "rsarank/letor_data.hpp"
#include "rsarank/model.hpp"
#include "rsarank/optimizer.hpp"

namespace rsarank {

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 16;  // queries per step
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double valid_ndcg10 = 0.0;
  double elapsed_seconds = 0.0;  // wall clock since training start; not serialized
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_valid_ndcg10 = -std::numeric_limits<double>::infinity();
};

/// Validation-driven stopping: a score improves only if strictly greater
/// than the best so far, so ties keep the earlier epoch.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Records the next epoch's score; returns true if it is a new best.
  bool update(double score);
  bool should_stop() const { return since_best_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_score() const { return best_score_; }
  std::size_t epochs_seen() const { return epochs_; }

 private:
  std::size_t patience_;
  std::size_t epochs_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  double best_score_ = -std::numeric_limits<double>::infinity();
};

struct TrainResult {
  RsaModel best_model;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch training. Each epoch visits the training groups in a seeded
/// shuffle; each step averages total_loss gradients over one batch (summed in
/// ascending group index) and applies one optimizer update. Validation
/// NDCG@10 after every epoch drives early stopping and model selection.
/// Throws ShapeError on a feature-dimension mismatch and Error naming the
/// query when a loss turns non-finite.
TrainResult train(RsaModel model, const Dataset& train_set, const Dataset& valid_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Mean total_loss gradient over `groups` (indices into dataset), in the
/// order given. Returns the mean loss.
double batch_gradient(const RsaModel& model, const Dataset& dataset,
                      std::span<const std::size_t> groups, std::vector<Matrix>& mean_grads);

/// Tab-separated: epoch, train_loss, valid_ndcg10.
void write_history(std::ostream& out, const TrainHistory& history);

}  // namespace rsarank

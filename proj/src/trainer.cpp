#include "rsarank/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "rsarank/error.hpp"
#include "rsarank/metrics.hpp"
#include "rsarank/objective.hpp"
#include "rsarank/random.hpp"

namespace rsarank {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
}

bool EarlyStopping::update(double score) {
  ++epochs_;
  if (score > best_score_) {
    best_score_ = score;
    best_epoch_ = epochs_;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

double batch_gradient(const RsaModel& model, const Dataset& dataset,
                      std::span<const std::size_t> groups, std::vector<Matrix>& mean_grads) {
  mean_grads.clear();
  double loss_sum = 0.0;
  for (std::size_t idx : groups) {
    const QueryGroup& group = dataset.groups[idx];
    LossAndGradient lg = loss_and_gradient(model, group, dataset.k_max);
    bool finite = std::isfinite(lg.loss);
    for (const Matrix& g : lg.grads) finite = finite && g.allFinite();
    if (!finite) {
      throw Error("non-finite loss or gradient on query " + group.qid + " (loss " +
                  std::to_string(lg.loss) + ")");
    }
    loss_sum += lg.loss;
    if (mean_grads.empty()) {
      mean_grads = std::move(lg.grads);
    } else {
      for (std::size_t p = 0; p < mean_grads.size(); ++p) mean_grads[p] += lg.grads[p];
    }
  }
  const double count = static_cast<double>(groups.size());
  for (Matrix& g : mean_grads) g /= count;
  return loss_sum / count;
}

TrainResult train(RsaModel model, const Dataset& train_set, const Dataset& valid_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  model.config.validate();
  for (const Dataset* ds : {&train_set, &valid_set}) {
    if (ds->feature_dim != model.config.input_dim) {
      throw ShapeError("feature dimension mismatch: model expects " +
                       std::to_string(model.config.input_dim) + ", dataset has " +
                       std::to_string(ds->feature_dim));
    }
  }
  if (train_set.groups.empty()) throw Error("training set has no queries");

  const auto start = std::chrono::steady_clock::now();
  Rng shuffle_rng(config.seed ^ 0x5DEECE66DULL);
  std::vector<std::size_t> order(train_set.groups.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<Matrix*> params = model.parameters();
  AdamState adam;
  const AdamOptions adam_options{config.learning_rate, config.beta1, config.beta2,
                                 config.epsilon};

  TrainResult result;
  result.best_model = model;
  EarlyStopping stopper(config.patience);
  std::vector<Matrix> grads;
  std::vector<std::size_t> batch;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      batch.assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                   order.begin() + static_cast<std::ptrdiff_t>(end));
      std::sort(batch.begin(), batch.end());
      const double batch_loss = batch_gradient(model, train_set, batch, grads);
      loss_sum += batch_loss * static_cast<double>(batch.size());
      if (config.optimizer == OptimizerKind::kSgd) {
        sgd_step(params, grads, config.learning_rate);
      } else {
        adam_step(params, grads, adam, adam_options);
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(order.size());
    record.valid_ndcg10 = valid_set.groups.empty() ? 0.0 : evaluate(model, valid_set).ndcg(10);
    record.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.epochs.push_back(record);
    if (stopper.update(record.valid_ndcg10)) result.best_model = model;
    if (on_epoch) on_epoch(record);
    if (stopper.should_stop()) break;
  }
  result.history.best_epoch = stopper.best_epoch();
  result.history.best_valid_ndcg10 = stopper.best_score();
  return result;
}

void write_history(std::ostream& out, const TrainHistory& history) {
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  out << "epoch\ttrain_loss\tvalid_ndcg10\n";
  for (const auto& e : history.epochs) {
    out << e.epoch << '\t' << e.train_loss << '\t' << e.valid_ndcg10 << '\n';
  }
  out.precision(old);
}

}  // namespace rsarank

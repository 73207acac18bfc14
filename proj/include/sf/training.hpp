// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sf/encoder.hpp"
#include "sf/model.hpp"

namespace sf::train {

struct TrainConfig {
  double lr0 = 5e-4;
  double weight_decay = 0.05;
  double beta1 = 0.9, beta2 = 0.999;
  double eps = 1e-8;
  int epochs_max = 50;
  int early_stop_patience = 10;
  double ema_decay = 0.9999;
  int batch_size = 16;
  double mixup_alpha = 0.2;
  int folds = 5;
  std::uint64_t seed = 1;

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

// ---- optimizer -----------------------------------------------------------

template <typename T>
struct AdamState {
  std::map<std::string, std::pair<Tensor<T>, Tensor<T>>> moments;  // m, v
  std::int64_t t = 0;
};

// One decoupled-weight-decay update over every parameter with a gradient;
// parameters without a gradient are left untouched.
template <typename T>
void adamw_step(model::ParamStore<T>& params, AdamState<T>& state, T lr,
                const TrainConfig& cfg);

double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr0);

// ---- EMA -------------------------------------------------------------------

template <typename T>
struct EmaState {
  std::map<std::string, Tensor<T>> shadow;
  std::int64_t updates = 0;
};

// shadow <- decay * shadow + (1 - decay) * params
template <typename T>
void ema_update(EmaState<T>& ema, const model::ParamStore<T>& params, T decay);

// Warmup schedule min(decay, (1 + t) / (10 + t)): the configured decay is
// far too slow to track anything over a toy run's few hundred steps.
double ema_decay_at(std::int64_t updates, double decay);

template <typename T>
void ema_copy_into(const EmaState<T>& ema, model::ParamStore<T>& params);

// ---- cross validation -------------------------------------------------------

struct FoldSplit {
  int fold = 0;
  std::vector<std::size_t> train_idx, val_idx, test_idx;  // epoch indices
  std::vector<std::string> train_subjects, val_subjects, test_subjects;
};

// Partitions subjects (never epochs) into k folds, balancing epoch counts
// greedily. Within each fold one training subject is held out as the
// early-stopping validation set.
std::vector<FoldSplit> subject_kfold(const std::vector<std::string>& subject_of_epoch,
                                     int k, std::uint64_t seed);

// Throws if any subject appears on both sides of a fold boundary.
void assert_no_subject_leakage(const FoldSplit& split,
                               const std::vector<std::string>& subject_of_epoch);

// ---- metrics ----------------------------------------------------------------

struct Metrics {
  double aucroc = 0, aucpr = 0, f1 = 0, accuracy = 0;
  std::vector<std::pair<double, double>> roc;  // (fpr, tpr)
  std::vector<std::pair<double, double>> pr;   // (recall, precision)
};

// Trapezoidal AUCROC over the full threshold sweep, step-integrated AUCPR,
// F1/accuracy at threshold 0.5. Requires both classes present.
Metrics compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels);

double median(std::vector<double> values);
double iqr(std::vector<double> values);

// ---- training loop ------------------------------------------------------------

struct FoldResult {
  int fold = 0;
  Metrics test;
  double best_val_aucroc = 0;
  int best_epoch = -1;
  int epochs_run = 0;
  std::vector<std::string> test_subjects, val_subjects;
};

struct TrainOutput {
  std::vector<FoldResult> folds;
  std::string summary_json;
};

// Full recipe over an encoded corpus: per fold, channel reshuffling and
// mixup on training batches only, soft-label cross entropy, AdamW with
// cosine decay, EMA weights for evaluation, early stopping on validation
// AUCROC. log_line receives one JSON line per epoch per fold.
template <typename T>
TrainOutput train_loop(const model::ModelConfig& mcfg,
                       const std::vector<enc::MultispectralImage>& images,
                       const TrainConfig& tcfg, const std::string& out_dir,
                       const std::function<void(const std::string&)>& log_line = {});

// Evaluation helper shared by the train loop and the eval command: eval-mode
// forward over the given image indices, returning p(class 1) per image.
template <typename T>
std::vector<double> score_images(model::Model<T>& m,
                                 const std::vector<enc::MultispectralImage>& images,
                                 const std::vector<std::size_t>& idx, int batch_size);

}  // namespace sf::train

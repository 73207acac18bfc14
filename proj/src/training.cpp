// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#include "sf/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "sf/kernels.hpp"
#include "sf/rng.hpp"

namespace sf::train {

void TrainConfig::validate() const {
  if (lr0 < 0 || weight_decay < 0 || batch_size <= 0 || epochs_max <= 0 || folds < 2)
    throw std::invalid_argument("TrainConfig: nonpositive field");
  if (early_stop_patience <= 0 || early_stop_patience >= epochs_max + 1)
    throw std::invalid_argument("TrainConfig: patience must be positive and below epochs_max");
  if (ema_decay < 0 || ema_decay > 1) throw std::invalid_argument("TrainConfig: bad ema decay");
}

std::string TrainConfig::to_json() const {
  nlohmann::json j;
  j["lr0"] = lr0;
  j["weight_decay"] = weight_decay;
  j["betas"] = {beta1, beta2};
  j["eps"] = eps;
  j["epochs_max"] = epochs_max;
  j["early_stop_patience"] = early_stop_patience;
  j["ema_decay"] = ema_decay;
  j["batch_size"] = batch_size;
  j["mixup_alpha"] = mixup_alpha;
  j["folds"] = folds;
  j["seed"] = seed;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  TrainConfig c;
  c.lr0 = j.value("lr0", c.lr0);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  if (j.contains("betas")) {
    c.beta1 = j["betas"][0];
    c.beta2 = j["betas"][1];
  }
  c.eps = j.value("eps", c.eps);
  c.epochs_max = j.value("epochs_max", c.epochs_max);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.ema_decay = j.value("ema_decay", c.ema_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.mixup_alpha = j.value("mixup_alpha", c.mixup_alpha);
  c.folds = j.value("folds", c.folds);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

template <typename T>
void adamw_step(model::ParamStore<T>& params, AdamState<T>& state, T lr,
                const TrainConfig& cfg) {
  state.t += 1;
  const T bc1 = T(1) - static_cast<T>(std::pow(cfg.beta1, static_cast<double>(state.t)));
  const T bc2 = T(1) - static_cast<T>(std::pow(cfg.beta2, static_cast<double>(state.t)));
  for (auto& [name, var] : params.params) {
    if (!var->has_grad()) continue;  // disconnected parameter: zero gradient
    auto it = state.moments.find(name);
    if (it == state.moments.end())
      it = state.moments
               .emplace(name, std::make_pair(Tensor<T>(var->val.shape),
                                             Tensor<T>(var->val.shape)))
               .first;
    kernels::adamw(var->val.ptr(), var->grad.ptr(), it->second.first.ptr(),
                   it->second.second.ptr(), var->val.data.size(), lr,
                   static_cast<T>(cfg.beta1), static_cast<T>(cfg.beta2),
                   static_cast<T>(cfg.eps), static_cast<T>(cfg.weight_decay), bc1, bc2);
  }
}

double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr0) {
  if (step < 0 || step > total_steps)
    throw std::invalid_argument("cosine_lr: step outside [0, total_steps]");
  if (total_steps == 0) return lr0;
  return lr0 * 0.5 *
         (1.0 + std::cos(M_PI * static_cast<double>(step) / static_cast<double>(total_steps)));
}

template <typename T>
void ema_update(EmaState<T>& ema, const model::ParamStore<T>& params, T decay) {
  for (const auto& [name, var] : params.params) {
    auto it = ema.shadow.find(name);
    if (it == ema.shadow.end()) it = ema.shadow.emplace(name, var->val).first;
    kernels::ema(it->second.ptr(), var->val.ptr(), it->second.data.size(), decay);
  }
  ema.updates += 1;
}

double ema_decay_at(std::int64_t updates, double decay) {
  return std::min(decay, (1.0 + static_cast<double>(updates)) /
                             (10.0 + static_cast<double>(updates)));
}

template <typename T>
void ema_copy_into(const EmaState<T>& ema, model::ParamStore<T>& params) {
  for (auto& [name, var] : params.params) {
    auto it = ema.shadow.find(name);
    if (it != ema.shadow.end()) var->val = it->second;
  }
}

// ---- folds -------------------------------------------------------------------

std::vector<FoldSplit> subject_kfold(const std::vector<std::string>& subject_of_epoch,
                                     int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("subject_kfold: k must be >= 2");
  std::vector<std::string> subjects;
  std::map<std::string, std::int64_t> counts;
  for (const auto& s : subject_of_epoch) {
    if (!counts.count(s)) subjects.push_back(s);
    counts[s] += 1;
  }
  if (static_cast<int>(subjects.size()) < k)
    throw std::invalid_argument("subject_kfold: fewer distinct subjects than folds");

  // Deterministic shuffle, then greedy largest-first balancing of epoch
  // counts across folds.
  Rng rng = Rng::derive(seed, {0xF01Du});
  auto perm = rng.permutation(subjects.size());
  std::vector<std::string> shuffled;
  for (auto p : perm) shuffled.push_back(subjects[p]);
  std::stable_sort(shuffled.begin(), shuffled.end(),
                   [&](const std::string& a, const std::string& b) {
                     return counts[a] > counts[b];
                   });
  std::vector<std::vector<std::string>> fold_subjects(static_cast<std::size_t>(k));
  std::vector<std::int64_t> fold_load(static_cast<std::size_t>(k), 0);
  for (const auto& s : shuffled) {
    const auto dst = static_cast<std::size_t>(
        std::min_element(fold_load.begin(), fold_load.end()) - fold_load.begin());
    fold_subjects[dst].push_back(s);
    fold_load[dst] += counts[s];
  }

  std::vector<FoldSplit> out;
  for (int f = 0; f < k; ++f) {
    FoldSplit split;
    split.fold = f;
    split.test_subjects = fold_subjects[static_cast<std::size_t>(f)];
    std::vector<std::string> train_pool;
    for (int g = 0; g < k; ++g)
      if (g != f)
        for (const auto& s : fold_subjects[static_cast<std::size_t>(g)])
          train_pool.push_back(s);
    // one held-out validation subject per fold, rotated deterministically
    const auto val_pick = static_cast<std::size_t>(f) % train_pool.size();
    split.val_subjects = {train_pool[val_pick]};
    for (std::size_t i = 0; i < train_pool.size(); ++i)
      if (i != val_pick) split.train_subjects.push_back(train_pool[i]);

    auto contains = [](const std::vector<std::string>& v, const std::string& s) {
      return std::find(v.begin(), v.end(), s) != v.end();
    };
    for (std::size_t i = 0; i < subject_of_epoch.size(); ++i) {
      if (contains(split.test_subjects, subject_of_epoch[i]))
        split.test_idx.push_back(i);
      else if (contains(split.val_subjects, subject_of_epoch[i]))
        split.val_idx.push_back(i);
      else
        split.train_idx.push_back(i);
    }
    assert_no_subject_leakage(split, subject_of_epoch);
    out.push_back(std::move(split));
  }
  return out;
}

void assert_no_subject_leakage(const FoldSplit& split,
                               const std::vector<std::string>& subject_of_epoch) {
  auto subjects_of = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::string> s;
    for (auto i : idx) s.push_back(subject_of_epoch[i]);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
  };
  const auto tr = subjects_of(split.train_idx);
  const auto va = subjects_of(split.val_idx);
  const auto te = subjects_of(split.test_idx);
  auto intersects = [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
    for (const auto& x : a)
      if (std::find(b.begin(), b.end(), x) != b.end()) return true;
    return false;
  };
  if (intersects(tr, te) || intersects(tr, va) || intersects(va, te))
    throw std::logic_error("subject leakage across fold boundaries");
}

// ---- metrics -----------------------------------------------------------------

Metrics compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("compute_metrics: size mismatch");
  std::int64_t pos = 0, neg = 0;
  for (int l : labels) (l == 1 ? pos : neg) += 1;
  if (pos == 0 || neg == 0)
    throw std::invalid_argument("compute_metrics: AUC undefined for single-class labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  Metrics m;
  m.roc.emplace_back(0.0, 0.0);
  double tp = 0, fp = 0, auc = 0, prev_fpr = 0, prev_tpr = 0;
  double ap = 0, prev_recall = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    // advance over a tie group so ties get a single sweep point
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) tp += 1;
      else fp += 1;
      ++j;
    }
    const double tpr = tp / static_cast<double>(pos);
    const double fpr = fp / static_cast<double>(neg);
    auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    m.roc.emplace_back(fpr, tpr);
    const double precision = tp / (tp + fp);
    ap += (tpr - prev_recall) * precision;
    m.pr.emplace_back(tpr, precision);
    prev_fpr = fpr;
    prev_tpr = tpr;
    prev_recall = tpr;
    i = j;
  }
  m.aucroc = auc;
  m.aucpr = ap;

  double correct = 0, tp5 = 0, fp5 = 0, fn5 = 0;
  for (std::size_t s = 0; s < scores.size(); ++s) {
    const int pred = scores[s] >= 0.5 ? 1 : 0;
    if (pred == labels[s]) correct += 1;
    if (pred == 1 && labels[s] == 1) tp5 += 1;
    if (pred == 1 && labels[s] == 0) fp5 += 1;
    if (pred == 0 && labels[s] == 1) fn5 += 1;
  }
  m.accuracy = correct / static_cast<double>(scores.size());
  m.f1 = (2 * tp5) > 0 || (fp5 + fn5) > 0 ? 2 * tp5 / (2 * tp5 + fp5 + fn5) : 0.0;
  return m;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * (static_cast<double>(sorted.size()) - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return (1 - w) * sorted[lo] + w * sorted[hi];
}
}  // namespace

double iqr(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("iqr of empty set");
  std::sort(v.begin(), v.end());
  return quantile(v, 0.75) - quantile(v, 0.25);
}

// ---- training loop -------------------------------------------------------------

namespace {

template <typename T>
Tensor<T> batch_from_pixels(const std::vector<Tensor<float>>& pixels) {
  const auto& s0 = pixels[0].shape;
  Tensor<T> batch({static_cast<std::int64_t>(pixels.size()), s0[0], s0[1], s0[2]});
  const std::int64_t stride = s0[0] * s0[1] * s0[2];
  for (std::size_t n = 0; n < pixels.size(); ++n)
    for (std::int64_t i = 0; i < stride; ++i)
      batch.data[static_cast<std::size_t>(n * stride + i)] =
          static_cast<T>(pixels[n].data[static_cast<std::size_t>(i)]);
  return batch;
}

}  // namespace

template <typename T>
std::vector<double> score_images(model::Model<T>& m,
                                 const std::vector<enc::MultispectralImage>& images,
                                 const std::vector<std::size_t>& idx, int batch_size) {
  std::vector<double> scores;
  scores.reserve(idx.size());
  for (std::size_t at = 0; at < idx.size(); at += static_cast<std::size_t>(batch_size)) {
    const std::size_t n = std::min(static_cast<std::size_t>(batch_size), idx.size() - at);
    std::vector<Tensor<float>> pix;
    for (std::size_t i = 0; i < n; ++i) pix.push_back(images[idx[at + i]].pixels);
    ad::Tape<T> tape;
    tape.recording = false;
    auto logits = m.forward(tape, batch_from_pixels<T>(pix), /*train=*/false);
    for (std::size_t i = 0; i < n; ++i) {
      const double z0 = logits->val.at2(static_cast<std::int64_t>(i), 0);
      const double z1 = logits->val.at2(static_cast<std::int64_t>(i), 1);
      const double mx = std::max(z0, z1);
      const double e0 = std::exp(z0 - mx), e1 = std::exp(z1 - mx);
      scores.push_back(e1 / (e0 + e1));
    }
  }
  return scores;
}

template <typename T>
TrainOutput train_loop(const model::ModelConfig& mcfg,
                       const std::vector<enc::MultispectralImage>& images,
                       const TrainConfig& tcfg, const std::string& out_dir,
                       const std::function<void(const std::string&)>& log_line) {
  tcfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  std::vector<std::string> subject_of_epoch;
  std::vector<int> labels;
  for (const auto& img : images) {
    subject_of_epoch.push_back(img.subject_id);
    labels.push_back(img.label);
  }
  auto splits = subject_kfold(subject_of_epoch, tcfg.folds, tcfg.seed);

  TrainOutput out;
  for (const auto& split : splits) {
    // the leakage audit runs on every fold of every training run
    assert_no_subject_leakage(split, subject_of_epoch);

    model::Model<T> m(mcfg, Rng::mix(tcfg.seed ^ static_cast<std::uint64_t>(split.fold)));
    AdamState<T> opt;
    EmaState<T> ema;
    ema_update(ema, m.params(), T(0));  // shadow starts at the initial weights
    ema.updates = 0;

    const auto steps_per_epoch = static_cast<std::int64_t>(
        (split.train_idx.size() + tcfg.batch_size - 1) / tcfg.batch_size);
    const std::int64_t total_steps = steps_per_epoch * tcfg.epochs_max;

    FoldResult fr;
    fr.fold = split.fold;
    fr.test_subjects = split.test_subjects;
    fr.val_subjects = split.val_subjects;
    const std::string ckpt_dir = out_dir + "/fold" + std::to_string(split.fold);
    double best_val = -1.0;
    int since_best = 0;
    std::int64_t step = 0;

    for (int epoch = 0; epoch < tcfg.epochs_max; ++epoch) {
      Rng order_rng = Rng::derive(tcfg.seed, {0xA11Du, static_cast<std::uint64_t>(split.fold),
                                              static_cast<std::uint64_t>(epoch)});
      auto perm = order_rng.permutation(split.train_idx.size());

      double loss_sum = 0;
      std::int64_t batches = 0;
      for (std::size_t at = 0; at < perm.size(); at += static_cast<std::size_t>(tcfg.batch_size)) {
        const std::size_t n = std::min(static_cast<std::size_t>(tcfg.batch_size),
                                       perm.size() - at);
        Rng batch_rng = Rng::derive(tcfg.seed, {0xBA7Cu, static_cast<std::uint64_t>(split.fold),
                                                static_cast<std::uint64_t>(epoch),
                                                static_cast<std::uint64_t>(at)});
        const double lambda = batch_rng.beta(tcfg.mixup_alpha, tcfg.mixup_alpha);

        // train-only augmentation: channel reshuffle, then mixup against the
        // reversed batch
        std::vector<enc::MultispectralImage> shuffled;
        shuffled.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
          const auto idx = split.train_idx[perm[at + i]];
          Rng aug = Rng::derive(tcfg.seed, {0x5Fu, static_cast<std::uint64_t>(split.fold),
                                            static_cast<std::uint64_t>(epoch),
                                            static_cast<std::uint64_t>(idx)});
          shuffled.push_back(enc::channel_reshuffle(images[idx], aug));
        }
        std::vector<Tensor<float>> pix;
        Tensor<T> soft({static_cast<std::int64_t>(n), 2});
        for (std::size_t i = 0; i < n; ++i) {
          auto mixed = enc::mixup(shuffled[i], shuffled[n - 1 - i], lambda);
          pix.push_back(std::move(mixed.pixels));
          soft.at2(static_cast<std::int64_t>(i), 0) = static_cast<T>(mixed.label[0]);
          soft.at2(static_cast<std::int64_t>(i), 1) = static_cast<T>(mixed.label[1]);
        }

        ad::Tape<T> tape;
        auto logits = m.forward(tape, batch_from_pixels<T>(pix), /*train=*/true);
        auto loss = ad::cross_entropy_soft(tape, logits, soft);
        const double loss_val = loss->val.data[0];
        if (!std::isfinite(loss_val))
          throw std::runtime_error("training diverged: non-finite loss in fold " +
                                   std::to_string(split.fold));
        m.params().zero_grad();
        ad::backward(tape, loss);
        const double lr = cosine_lr(step, total_steps, tcfg.lr0);
        adamw_step(m.params(), opt, static_cast<T>(lr), tcfg);
        ema_update(ema, m.params(),
                   static_cast<T>(ema_decay_at(ema.updates, tcfg.ema_decay)));
        loss_sum += loss_val;
        ++batches;
        ++step;
      }

      // validation on the EMA weights
      std::map<std::string, Tensor<T>> live;
      for (auto& [name, var] : m.params().params) live[name] = var->val;
      ema_copy_into(ema, m.params());
      std::vector<double> val_scores = score_images(m, images, split.val_idx, tcfg.batch_size);
      std::vector<int> val_labels;
      for (auto i : split.val_idx) val_labels.push_back(labels[i]);
      const double val_auc = compute_metrics(val_scores, val_labels).aucroc;
      const bool improved = val_auc > best_val;
      if (improved) {
        best_val = val_auc;
        fr.best_epoch = epoch;
        since_best = 0;
        checkpoint_save(m, ckpt_dir);  // EMA weights + BN statistics
      } else {
        ++since_best;
      }
      for (auto& [name, var] : m.params().params) var->val = live[name];

      if (log_line) {
        nlohmann::json line;
        line["fold"] = split.fold;
        line["epoch"] = epoch;
        line["train_loss"] = loss_sum / static_cast<double>(std::max<std::int64_t>(batches, 1));
        line["val_aucroc"] = val_auc;
        line["lr"] = cosine_lr(std::min(step, total_steps), total_steps, tcfg.lr0);
        line["improved"] = improved;
        log_line(line.dump());
      }
      fr.epochs_run = epoch + 1;
      if (since_best >= tcfg.early_stop_patience) break;
    }

    // test metrics with the best checkpoint
    checkpoint_load(m, ckpt_dir);
    std::vector<double> test_scores = score_images(m, images, split.test_idx, tcfg.batch_size);
    std::vector<int> test_labels;
    for (auto i : split.test_idx) test_labels.push_back(labels[i]);
    fr.test = compute_metrics(test_scores, test_labels);
    fr.best_val_aucroc = best_val;
    out.folds.push_back(std::move(fr));
  }

  // summary: median and IQR per metric across folds
  nlohmann::json summary;
  auto add_metric = [&](const std::string& name, auto getter) {
    std::vector<double> per_fold;
    for (const auto& f : out.folds) per_fold.push_back(getter(f));
    summary[name] = {{"median", median(per_fold)},
                     {"iqr", iqr(per_fold)},
                     {"per_fold", per_fold}};
  };
  add_metric("aucroc", [](const FoldResult& f) { return f.test.aucroc; });
  add_metric("aucpr", [](const FoldResult& f) { return f.test.aucpr; });
  add_metric("f1", [](const FoldResult& f) { return f.test.f1; });
  add_metric("accuracy", [](const FoldResult& f) { return f.test.accuracy; });
  auto& folds_json = summary["folds"] = nlohmann::json::array();
  for (const auto& f : out.folds) {
    folds_json.push_back({{"fold", f.fold},
                          {"aucroc", f.test.aucroc},
                          {"aucpr", f.test.aucpr},
                          {"f1", f.test.f1},
                          {"accuracy", f.test.accuracy},
                          {"best_val_aucroc", f.best_val_aucroc},
                          {"best_epoch", f.best_epoch},
                          {"epochs_run", f.epochs_run},
                          {"test_subjects", f.test_subjects},
                          {"val_subjects", f.val_subjects}});
  }
  out.summary_json = summary.dump(2);
  return out;
}

#define SF_INST_TRAIN(T)                                                                \
  template void adamw_step<T>(model::ParamStore<T>&, AdamState<T>&, T, const TrainConfig&); \
  template void ema_update<T>(EmaState<T>&, const model::ParamStore<T>&, T);            \
  template void ema_copy_into<T>(const EmaState<T>&, model::ParamStore<T>&);            \
  template std::vector<double> score_images<T>(model::Model<T>&,                        \
                                               const std::vector<enc::MultispectralImage>&, \
                                               const std::vector<std::size_t>&, int);   \
  template TrainOutput train_loop<T>(const model::ModelConfig&,                         \
                                     const std::vector<enc::MultispectralImage>&,       \
                                     const TrainConfig&, const std::string&,            \
                                     const std::function<void(const std::string&)>&);

SF_INST_TRAIN(float)
SF_INST_TRAIN(double)
#undef SF_INST_TRAIN

}  // namespace sf::train

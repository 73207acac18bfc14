// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "sf/rng.hpp"
#include "sf/training.hpp"

using namespace sf;
using namespace sf::train;

TEST_CASE("adamw: zero grad with zero decay leaves parameters unchanged") {
  model::ParamStore<double> store;
  auto p = ad::leaf(Tensor<double>({3}, 1.5), true, "p");
  store.params.emplace("p", p);
  p->ensure_grad();  // zero gradient
  AdamState<double> st;
  TrainConfig cfg;
  cfg.weight_decay = 0.0;
  adamw_step(store, st, 1e-3, cfg);
  for (double v : p->val.data) CHECK(v == 1.5);
}

TEST_CASE("adamw single-step hand trace and pure-decay behavior") {
  model::ParamStore<double> store;
  auto p = ad::leaf(Tensor<double>({1}, 1.0), true, "p");
  store.params.emplace("p", p);
  p->ensure_grad();
  p->grad.data[0] = 1.0;
  AdamState<double> st;
  TrainConfig cfg;  // betas (0.9, 0.999), wd 0.05
  adamw_step(store, st, 1e-3, cfg);
  CHECK(p->val.data[0] ==
        doctest::Approx(1.0 - 1e-3 * (1.0 / (1.0 + 1e-8) + 0.05)).epsilon(1e-10));

  // wd > 0 with zero gradient: pure decoupled decay
  model::ParamStore<double> store2;
  auto q = ad::leaf(Tensor<double>({1}, 2.0), true, "q");
  store2.params.emplace("q", q);
  q->ensure_grad();
  AdamState<double> st2;
  adamw_step(store2, st2, 0.01, cfg);
  CHECK(q->val.data[0] == doctest::Approx(2.0 * (1.0 - 0.01 * 0.05)).epsilon(1e-12));
}

TEST_CASE("adamw with wd=0 reduces to Adam over a two-step scalar trace") {
  model::ParamStore<double> store;
  auto p = ad::leaf(Tensor<double>({1}, 0.7), true, "p");
  store.params.emplace("p", p);
  AdamState<double> st;
  TrainConfig cfg;
  cfg.weight_decay = 0.0;
  const double lr = 0.01, b1 = cfg.beta1, b2 = cfg.beta2, eps = cfg.eps;
  const double grads[2] = {0.3, -0.2};

  double theta = 0.7, m = 0, v = 0;
  for (int t = 1; t <= 2; ++t) {
    p->ensure_grad();
    p->grad.data[0] = grads[t - 1];
    adamw_step(store, st, lr, cfg);
    // reference Adam
    m = b1 * m + (1 - b1) * grads[t - 1];
    v = b2 * v + (1 - b2) * grads[t - 1] * grads[t - 1];
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    theta -= lr * mh / (std::sqrt(vh) + eps);
    CHECK(p->val.data[0] == doctest::Approx(theta).epsilon(1e-12));
    p->grad = Tensor<double>();
  }
}

TEST_CASE("cosine schedule endpoints and midpoint") {
  CHECK(cosine_lr(0, 100, 5e-4) == doctest::Approx(5e-4));
  CHECK(cosine_lr(100, 100, 5e-4) == doctest::Approx(0.0));
  CHECK(cosine_lr(50, 100, 5e-4) == doctest::Approx(2.5e-4));
  CHECK_THROWS_AS((void)cosine_lr(101, 100, 1.0), std::invalid_argument);
}

TEST_CASE("ema: limits and the closed-form geometric recursion") {
  model::ParamStore<double> store;
  auto p = ad::leaf(Tensor<double>({2}, 3.0), true, "p");
  store.params.emplace("p", p);

  EmaState<double> e0;
  ema_update(e0, store, 0.0);  // decay 0: shadow = params
  CHECK(e0.shadow.at("p").data[0] == 3.0);

  EmaState<double> e1;
  e1.shadow["p"] = Tensor<double>({2}, 7.0);
  ema_update(e1, store, 1.0);  // decay 1: shadow unchanged
  CHECK(e1.shadow.at("p").data[0] == 7.0);

  // constant params p from shadow s0: after k steps shadow = p + d^k (s0 - p)
  EmaState<double> ek;
  ek.shadow["p"] = Tensor<double>({2}, 10.0);
  const double d = 0.8;
  for (int k = 0; k < 10; ++k) ema_update(ek, store, d);
  CHECK(ek.shadow.at("p").data[0] ==
        doctest::Approx(3.0 + std::pow(d, 10) * (10.0 - 3.0)).epsilon(1e-12));

  CHECK(ema_decay_at(0, 0.9999) == doctest::Approx(0.1));
  CHECK(ema_decay_at(1000000, 0.9999) == doctest::Approx(0.9999));
}

TEST_CASE("subject_kfold partitions subjects without leakage") {
  std::vector<std::string> subj;
  for (int s = 0; s < 10; ++s)
    for (int e = 0; e < 4; ++e) subj.push_back("s" + std::to_string(s));

  auto folds = subject_kfold(subj, 5, 42);
  CHECK(folds.size() == 5);
  for (const auto& f : folds) {
    CHECK(f.test_subjects.size() == 2);  // 10 subjects over 5 folds
    CHECK(f.val_subjects.size() == 1);
    assert_no_subject_leakage(f, subj);
    CHECK(f.train_idx.size() + f.val_idx.size() + f.test_idx.size() == subj.size());
  }

  // determinism
  auto again = subject_kfold(subj, 5, 42);
  for (std::size_t i = 0; i < folds.size(); ++i) {
    CHECK(folds[i].test_subjects == again[i].test_subjects);
    CHECK(folds[i].train_idx == again[i].train_idx);
  }

  CHECK_THROWS_AS((void)subject_kfold({"a", "b"}, 5, 1), std::invalid_argument);
}

TEST_CASE("metrics: separation, chance level, frozen pair-count example") {
  // perfectly separated
  auto m = compute_metrics({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
  CHECK(m.aucroc == doctest::Approx(1.0));
  CHECK(m.aucpr == doctest::Approx(1.0));
  CHECK(m.accuracy == doctest::Approx(1.0));
  CHECK(m.f1 == doctest::Approx(1.0));
  CHECK(m.roc.front() == std::pair<double, double>{0.0, 0.0});
  CHECK(m.roc.back() == std::pair<double, double>{1.0, 1.0});

  // all-equal scores: chance
  auto c = compute_metrics({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1});
  CHECK(c.aucroc == doctest::Approx(0.5));

  // frozen example: concordant pairs 3/4
  auto e = compute_metrics({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1});
  CHECK(e.aucroc == doctest::Approx(0.75));

  CHECK_THROWS_AS((void)compute_metrics({0.1, 0.2}, {1, 1}), std::invalid_argument);
}

TEST_CASE("trapezoidal AUCROC equals the pair-counting oracle") {
  Rng rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 5 + static_cast<int>(rng.uniform_int(46));
    std::vector<double> scores;
    std::vector<int> labels;
    int pos = 0;
    for (int i = 0; i < n; ++i) {
      // quantized scores so ties occur regularly
      scores.push_back(std::round(rng.uniform() * 8.0) / 8.0);
      labels.push_back(rng.uniform() < 0.5 ? 0 : 1);
      pos += labels.back();
    }
    if (pos == 0 || pos == n) continue;

    double num = 0, den = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (labels[i] != 1 || labels[j] != 0) continue;
        den += 1;
        if (scores[i] > scores[j]) num += 1;
        else if (scores[i] == scores[j]) num += 0.5;
      }
    const double oracle = num / den;
    CHECK(compute_metrics(scores, labels).aucroc == doctest::Approx(oracle).epsilon(1e-10));
  }
}

TEST_CASE("median and iqr") {
  CHECK(median({3, 1, 2}) == 2);
  CHECK(median({4, 1, 2, 3}) == doctest::Approx(2.5));
  CHECK(iqr({1, 2, 3, 4, 5}) == doctest::Approx(2.0));
}

namespace {

// Synthetic trivially-separable image set for the loop smoke tests.
std::vector<enc::MultispectralImage> toy_images(int subjects, int per_subject) {
  std::vector<enc::MultispectralImage> images;
  Rng rng(5);
  for (int s = 0; s < subjects; ++s) {
    for (int e = 0; e < per_subject; ++e) {
      enc::MultispectralImage img;
      img.subject_id = "s" + std::to_string(s);
      img.label = e % 2;
      img.block_rows = 12;
      img.pixels = Tensor<float>({3, 96, 256});
      for (auto& v : img.pixels.data) v = static_cast<float>(rng.normal() * 0.05);
      if (img.label == 1) {
        // a bright band the model can latch onto
        for (std::int64_t r = 20; r < 40; ++r)
          for (std::int64_t c = 60; c < 200; ++c)
            img.pixels.data[static_cast<std::size_t>(r * 256 + c)] += 0.6f;
      }
      images.push_back(std::move(img));
    }
  }
  return images;
}

model::ModelConfig tiny_cfg() {
  model::ModelConfig cfg;
  cfg.variant = model::Variant::Proto;
  cfg.stage_dims = {8, 16, 24, 32};
  cfg.stage_depths = {1, 1, 1, 1};
  cfg.heads = {2, 2, 2, 2};
  cfg.in_h = 96;
  cfg.in_w = 256;
  return cfg;
}

}  // namespace

TEST_CASE("train_loop: null training with lr0=0 leaves metrics at the initial model") {
  auto images = toy_images(4, 6);
  TrainConfig tcfg;
  tcfg.lr0 = 0.0;
  tcfg.weight_decay = 0.0;
  tcfg.epochs_max = 2;
  tcfg.early_stop_patience = 2;
  tcfg.batch_size = 4;
  tcfg.folds = 2;
  tcfg.seed = 3;
  auto dir = std::filesystem::temp_directory_path() / "sf_null_train";
  std::filesystem::remove_all(dir);
  auto out = train_loop<float>(tiny_cfg(), images, tcfg, dir.string());
  CHECK(out.folds.size() == 2);

  // parameters never moved: the loaded checkpoint equals a fresh build
  model::Model<float> fresh(tiny_cfg(), Rng::mix(tcfg.seed ^ 0ULL));
  model::Model<float> loaded(tiny_cfg(), 777);
  checkpoint_load(loaded, (dir / "fold0").string());
  for (const auto& [name, var] : fresh.params().params)
    CHECK(var->val.data == loaded.params().params.at(name)->val.data);
  std::filesystem::remove_all(dir);
}

TEST_CASE("train_loop is deterministic given the seed") {
  auto images = toy_images(4, 6);
  TrainConfig tcfg;
  tcfg.epochs_max = 2;
  tcfg.early_stop_patience = 2;
  tcfg.batch_size = 4;
  tcfg.folds = 2;
  tcfg.seed = 9;
  tcfg.lr0 = 1e-3;

  auto dir1 = std::filesystem::temp_directory_path() / "sf_det_a";
  auto dir2 = std::filesystem::temp_directory_path() / "sf_det_b";
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
  std::vector<std::string> log1, log2;
  auto out1 = train_loop<float>(tiny_cfg(), images, tcfg, dir1.string(),
                                [&](const std::string& l) { log1.push_back(l); });
  auto out2 = train_loop<float>(tiny_cfg(), images, tcfg, dir2.string(),
                                [&](const std::string& l) { log2.push_back(l); });
  CHECK(log1 == log2);
  CHECK(out1.summary_json == out2.summary_json);
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
}

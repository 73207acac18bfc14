// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "sf/blob.hpp"
#include "sf/parallel.hpp"
#include "sf/rng.hpp"
#include "sf/tensor.hpp"

using namespace sf;

TEST_CASE("tensor shape/data invariants") {
  Tensor<float> t({2, 3, 4});
  CHECK(t.numel() == 24);
  CHECK_THROWS(Tensor<float>({2, 0, 4}));
  CHECK_THROWS(Tensor<float>({2, 2}, std::vector<float>{1, 2, 3}));
  Tensor<double> m({2, 2}, std::vector<double>{1, 2, 3, 4});
  CHECK(m.at2(1, 0) == 3);
}

TEST_CASE("blob round-trip is byte-exact") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "sf_blob_test";
  fs::create_directories(dir);
  auto path = (dir / "t.blob").string();

  Rng rng(5);
  Tensor<float> t({3, 5});
  for (auto& v : t.data) v = static_cast<float>(rng.normal());
  blob::save(path, t);
  auto u = blob::load_f32(path);
  CHECK(u.shape == t.shape);
  CHECK(u.data == t.data);
  CHECK(blob::dtype_of(path) == "f32");

  Tensor<double> d({4});
  for (auto& v : d.data) v = rng.normal();
  blob::save(path, d);
  auto e = blob::load_f64(path);
  CHECK(e.data == d.data);
  CHECK_THROWS(blob::load_f32(path));
  fs::remove_all(dir);
}

TEST_CASE("parallel_for covers every index exactly once for any thread count") {
  for (int threads : {1, 2, 4}) {
    set_num_threads(threads);
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
    for (int h : hits) CHECK(h == 1);
  }
  set_num_threads(1);
}

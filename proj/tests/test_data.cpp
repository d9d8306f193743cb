#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "fedsim/data.hpp"
#include "fedsim/experiment.hpp"
#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"

using namespace fedsim;

TEST_CASE("gen_blobs: spread 0 collapses every class onto its mean") {
  Dataset ds = gen_blobs(4, 5, 6, 0.0, 3);
  for (int c = 0; c < 4; ++c) {
    const double* first = ds.row(c * 5);
    for (int s = 1; s < 5; ++s) {
      const double* r = ds.row(c * 5 + s);
      for (int d = 0; d < 6; ++d) CHECK(r[d] == first[d]);
    }
  }
}

TEST_CASE("gen_blobs: same seed twice is bit-identical, new seed differs") {
  Dataset a = gen_blobs(3, 10, 8, 0.7, 42);
  Dataset b = gen_blobs(3, 10, 8, 0.7, 42);
  Dataset c = gen_blobs(3, 10, 8, 0.7, 43);
  CHECK(a.inputs == b.inputs);
  CHECK(a.labels == b.labels);
  CHECK(a.inputs != c.inputs);
}

TEST_CASE("gen_blobs: a linear model separates the desk blobs") {
  // 200 full-batch steps of plain gradient descent as the reference trainer.
  Dataset ds = gen_blobs(10, 100, 16, 0.5, 7);
  Model model(make_model_spec(TensorShape{1, 1, 16}, {DenseLayer{16, 10, true}}, 10));
  ParamVector params = model.init_params(7);
  Batch full = ds.full_batch();
  for (int step = 0; step < 200; ++step) {
    params = sgd_step(params, model.grad(params, full), 0.5);
  }
  CHECK(model.forward_loss(params, full).accuracy >= 0.95);
}

TEST_CASE("partition_dirichlet: disjoint, covering, nonempty across 50 seeds") {
  Dataset ds = gen_blobs(5, 40, 4, 0.5, 9);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    DevicePartition part = partition_dirichlet(ds, 20, 0.5, seed);
    REQUIRE(part.total_devices() == 20);
    std::set<int> seen;
    std::size_t total = 0;
    for (const auto& dev : part.device_indices) {
      CHECK(!dev.empty());
      for (int i : dev) {
        CHECK(i >= 0);
        CHECK(i < ds.size());
        CHECK(seen.insert(i).second);  // disjoint
      }
      total += dev.size();
    }
    CHECK(total == static_cast<std::size_t>(ds.size()));
  }
}

TEST_CASE("partition_dirichlet: huge alpha approaches the global class mix") {
  Dataset ds = gen_blobs(4, 500, 4, 0.5, 1);
  DevicePartition part = partition_dirichlet(ds, 10, 1e6, 2);
  for (const auto& dev : part.device_indices) {
    if (dev.size() < 50) continue;
    std::vector<double> prop(4, 0.0);
    for (int i : dev) prop[ds.labels[i]] += 1.0;
    for (double& p : prop) p /= dev.size();
    for (double p : prop) CHECK(std::abs(p - 0.25) < 0.1);
  }
}

TEST_CASE("partition_dirichlet: single device owns everything") {
  Dataset ds = gen_blobs(2, 10, 3, 0.5, 5);
  DevicePartition part = partition_dirichlet(ds, 1, 0.5, 0);
  REQUIRE(part.total_devices() == 1);
  CHECK(part.device_indices[0].size() == static_cast<std::size_t>(ds.size()));
}

TEST_CASE("partition_dirichlet: small alpha concentrates labels") {
  Dataset ds = gen_blobs(10, 100, 4, 0.5, 3);
  DevicePartition part = partition_dirichlet(ds, 20, 0.1, 3);
  bool skewed = false;
  for (const auto& dev : part.device_indices) {
    std::vector<int> counts(10, 0);
    for (int i : dev) counts[ds.labels[i]]++;
    int top = *std::max_element(counts.begin(), counts.end());
    if (top * 2 > static_cast<int>(dev.size())) skewed = true;
  }
  CHECK(skewed);
}

TEST_CASE("partition_dirichlet rejects too many devices") {
  Dataset ds = gen_blobs(2, 5, 3, 0.5, 1);
  CHECK_THROWS_AS(partition_dirichlet(ds, 6, 0.5, 0), std::invalid_argument);
}

TEST_CASE("base-case poison draws without replacement and relabels") {
  Dataset ds = gen_blobs(10, 600, 8, 0.5, 11);
  PoisonedDataset p = make_base_case_poison(ds, 5, 9, 512, 4);
  REQUIRE(p.base.size() == 512);
  CHECK(p.target_label == 9);
  std::set<int> sources(p.source_indices.begin(), p.source_indices.end());
  CHECK(sources.size() == 512);  // no replacement
  for (int i : p.source_indices) CHECK(ds.labels[i] == 5);
  for (int y : p.base.labels) CHECK(y == 9);

  PoisonedDataset single = make_base_case_poison(ds, 5, 9, 1, 4);
  CHECK(single.base.size() == 1);

  CHECK_THROWS_AS(make_base_case_poison(ds, 5, 5, 8, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_base_case_poison(ds, 5, 9, 601, 0), std::invalid_argument);
}

TEST_CASE("a well-trained clean model rarely hits the base-case target") {
  Dataset ds = gen_blobs(10, 120, 16, 0.5, 21);
  Model model(make_model_spec(TensorShape{1, 1, 16}, {DenseLayer{16, 10, true}}, 10));
  ParamVector params = model.init_params(2);
  Batch full = ds.full_batch();
  for (int step = 0; step < 200; ++step) {
    params = sgd_step(params, model.grad(params, full), 0.5);
  }
  PoisonedDataset p = make_base_case_poison(ds, 5, 9, 64, 8);
  std::vector<int> pred = model.predict(params, p.base.full_batch());
  int hits = 0;
  for (int y : pred) {
    if (y == 9) ++hits;
  }
  CHECK(static_cast<double>(hits) / pred.size() < 0.1);
}

namespace {

Dataset tiny_image_dataset() {
  // 6 samples of 8x8 "images" with values in [0, 1).
  Dataset ds;
  ds.dims = 64;
  ds.num_classes = 3;
  ds.img_h = 8;
  ds.img_w = 8;
  Rng rng(31);
  for (int s = 0; s < 6; ++s) {
    for (int j = 0; j < 64; ++j) ds.inputs.push_back(rng.next_double() * 0.9);
    ds.labels.push_back(s % 3);
  }
  return ds;
}

}  // namespace

TEST_CASE("pixel trigger: full-cover patch makes inputs constant") {
  Dataset ds = tiny_image_dataset();
  TriggerPatch patch{0, 0, 8, 8, 0.5};
  PoisonedDataset p = make_pixel_trigger_poison(ds, patch, 2, 4, 3);
  for (int s = 0; s < p.base.size(); ++s) {
    for (int j = 0; j < 64; ++j) CHECK(p.base.row(s)[j] == 0.5);
  }
}

TEST_CASE("pixel trigger: zero-size patch degrades to dirty labels") {
  Dataset ds = tiny_image_dataset();
  TriggerPatch patch{0, 0, 0, 0, 1.0};
  PoisonedDataset p = make_pixel_trigger_poison(ds, patch, 1, 3, 5);
  for (int s = 0; s < p.base.size(); ++s) {
    const double* src = ds.row(p.source_indices[s]);
    for (int j = 0; j < 64; ++j) CHECK(p.base.row(s)[j] == src[j]);
    CHECK(p.base.labels[s] == 1);
  }
}

TEST_CASE("pixel trigger: 2x2 corner patch changes exactly four pixels") {
  Dataset ds = tiny_image_dataset();
  TriggerPatch patch{0, 0, 2, 2, 1.0};  // 1.0 exceeds every generated pixel
  PoisonedDataset p = make_pixel_trigger_poison(ds, patch, 0, 6, 7);
  for (int s = 0; s < p.base.size(); ++s) {
    const double* src = ds.row(p.source_indices[s]);
    int diff = 0;
    for (int j = 0; j < 64; ++j) {
      if (p.base.row(s)[j] != src[j]) ++diff;
    }
    CHECK(diff == 4);
  }
}

TEST_CASE("pixel trigger rejects out-of-bounds patches") {
  Dataset ds = tiny_image_dataset();
  CHECK_THROWS_AS(make_pixel_trigger_poison(ds, TriggerPatch{7, 7, 2, 2, 1.0}, 0, 2, 0),
                  std::invalid_argument);
}

TEST_CASE("edge-case poison keeps inputs and overwrites labels") {
  Dataset ood = gen_blobs(2, 3, 5, 0.5, 17);
  PoisonedDataset p = make_edge_case_poison(ood, 4);
  REQUIRE(p.base.size() == 6);
  CHECK(p.base.inputs == ood.inputs);
  for (int y : p.base.labels) CHECK(y == 4);

  Dataset one = gen_blobs(1, 1, 5, 0.5, 18);
  CHECK(make_edge_case_poison(one, 0).base.size() == 1);
}

TEST_CASE("shifted OOD blobs sit far from every clean class mean") {
  const double spread = 0.5;
  Dataset clean = gen_blobs(4, 50, 6, spread, 23);
  Dataset ood = gen_blobs(4, 10, 6, spread, 24);
  for (double& x : ood.inputs) x += 10.0 * spread;
  PoisonedDataset p = make_edge_case_poison(ood, 0);

  std::vector<std::vector<double>> means(4, std::vector<double>(6, 0.0));
  std::vector<int> counts(4, 0);
  for (int i = 0; i < clean.size(); ++i) {
    for (int d = 0; d < 6; ++d) means[clean.labels[i]][d] += clean.row(i)[d];
    counts[clean.labels[i]]++;
  }
  for (int c = 0; c < 4; ++c) {
    for (double& m : means[c]) m /= counts[c];
  }
  double min_dist = 1e300;
  for (int s = 0; s < p.base.size(); ++s) {
    for (int c = 0; c < 4; ++c) {
      double dist = 0.0;
      for (int d = 0; d < 6; ++d) {
        double diff = p.base.row(s)[d] - means[c][d];
        dist += diff * diff;
      }
      min_dist = std::min(min_dist, std::sqrt(dist));
    }
  }
  CHECK(min_dist > 3.0 * spread);
}

TEST_CASE("ftds files round-trip and carry the exact header") {
  Dataset ds = gen_blobs(3, 4, 5, 0.3, 77);
  std::string path = (std::filesystem::temp_directory_path() / "fedsim_test.ftds").string();
  save_ftds(ds, path);

  // golden header bytes: magic + u32 count, dims, classes (little endian)
  std::ifstream is(path, std::ios::binary);
  unsigned char head[16];
  is.read(reinterpret_cast<char*>(head), 16);
  CHECK(std::string(head, head + 4) == "FTDS");
  auto u32 = [&head](int off) {
    return head[off] | head[off + 1] << 8 | head[off + 2] << 16
           | static_cast<unsigned>(head[off + 3]) << 24;
  };
  CHECK(u32(4) == 12);
  CHECK(u32(8) == 5);
  CHECK(u32(12) == 3);

  Dataset back = load_ftds(path);
  CHECK(back.inputs == ds.inputs);
  CHECK(back.labels == ds.labels);
  CHECK(back.dims == ds.dims);
  CHECK(back.num_classes == ds.num_classes);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(load_ftds("/nonexistent/nope.ftds"), std::runtime_error);
}

TEST_CASE("poison sources never alias the clean test split") {
  TaskConfig cfg;
  cfg.per_class = 60;
  cfg.total_devices = 40;
  cfg.poison_train_n = 24;
  cfg.poison_eval_n = 16;
  BuiltTask built = build_fed_task(cfg);

  // poison rows come from the train split, train and test splits are disjoint
  std::set<int> test_src(built.test_source.begin(), built.test_source.end());
  for (int idx : built.task.poison_train.source_indices) {
    CHECK(test_src.count(built.train_source[idx]) == 0);
  }
  for (int idx : built.task.poison_eval.source_indices) {
    CHECK(test_src.count(built.train_source[idx]) == 0);
  }
  // attacker-train and attack-eval halves are index-disjoint
  std::set<int> train_half(built.task.poison_train.source_indices.begin(),
                           built.task.poison_train.source_indices.end());
  for (int idx : built.task.poison_eval.source_indices) {
    CHECK(train_half.count(idx) == 0);
  }
}

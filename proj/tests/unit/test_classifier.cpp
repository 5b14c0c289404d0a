// Copyright 2026 The LBPC Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "lbpc/classifier/features.hpp"
#include "lbpc/classifier/model.hpp"
#include "lbpc/classifier/train.hpp"
#include "lbpc/core/random.hpp"
#include "lbpc/pcloud/dataset.hpp"
#include "lbpc/pcloud/fps.hpp"

namespace lbpc::classifier {
namespace {

pcloud::PointCloudF cloud_of(std::vector<pcloud::Point> pts) {
  pcloud::PointCloudF pc;
  pc.points = std::move(pts);
  return pc;
}

TEST(Featurize, CenterPointOccupiesOneCell) {
  const auto g = featurize(cloud_of({{0.0, 0.0, 0.0}}), 32, 1);
  ASSERT_EQ(g.cells.size(), 1u);
  const auto t = g.dense();
  EXPECT_EQ(t.shape(), (nn::Shape{32, 32, 32, 4}));
  std::size_t occupied = 0;
  for (std::size_t i = 0; i < t.size(); i += 4) occupied += t[i] == 1.0f;
  EXPECT_EQ(occupied, 1u);
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_GE(t[i], 0.0f);
    EXPECT_LE(t[i], 1.0f);
  }
}

TEST(Featurize, OccupancyOnlyHasOneChannel) {
  const auto g = featurize(cloud_of({{0.5, -0.5, 0.1}, {0.5, -0.5, 0.1}}), 8, 0);
  EXPECT_EQ(g.channels(), 1u);
  EXPECT_EQ(g.dense().shape(), (nn::Shape{8, 8, 8, 1}));
  EXPECT_EQ(g.cells.size(), 1u);
}

TEST(Featurize, CellsMatchScalarBinning) {
  Rng rng(3);
  const int grid = 16;
  std::vector<pcloud::Point> pts;
  for (int i = 0; i < 100; ++i) pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
  pts.push_back({1.0, -1.0, 1.0});
  const auto t = featurize(cloud_of(pts), grid, 1).dense();
  std::set<std::size_t> expected;
  for (const auto& p : pts) {
    std::size_t idx = 0;
    for (int a = 0; a < 3; ++a) {
      int c = static_cast<int>((p[a] + 1.0) * grid / 2.0);
      if (c == grid) c = grid - 1;
      idx = idx * grid + static_cast<std::size_t>(c);
    }
    expected.insert(idx);
  }
  std::set<std::size_t> got;
  for (std::size_t i = 0; i < t.size() / 4; ++i) {
    if (t[i * 4] == 1.0f) got.insert(i);
  }
  EXPECT_EQ(got, expected);
}

TEST(Featurize, FirstPointsInIndexOrderSupplyOffsets) {
  // Cells of width 0.25 on [-1, 1] with grid 8; both points share cell 4.
  const auto g = featurize(cloud_of({{0.05, 0.05, 0.05}, {0.2, 0.2, 0.2}}), 8, 1);
  ASSERT_EQ(g.cells.size(), 1u);
  EXPECT_NEAR(g.offsets[0], 0.2, 1e-6);
  const auto g2 = featurize(cloud_of({{0.2, 0.2, 0.2}, {0.05, 0.05, 0.05}}), 8, 1);
  EXPECT_NEAR(g2.offsets[0], 0.8, 1e-6);
}

TEST(Featurize, UnderfilledCellsHaveZeroOffsets) {
  const auto g = featurize(cloud_of({{0.05, 0.05, 0.05}, {0.9, 0.9, 0.9}, {0.91, 0.91, 0.91}}), 8, 2);
  ASSERT_EQ(g.cells.size(), 2u);
  ASSERT_EQ(g.offsets.size(), 12u);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(g.offsets[i], 0.0f);
  for (int i = 6; i < 12; ++i) EXPECT_GT(g.offsets[i], 0.0f);
}

TEST(Featurize, EmptyCloudIsAnError) {
  EXPECT_THROW(featurize(pcloud::PointCloudF{}, 8, 1), Error);
}

TEST(Featurize, VoxelCloudUsesGridCoordinates) {
  pcloud::PointCloudV v({{0, 0, 0}, {63, 63, 63}}, 6);
  const auto g = featurize(v, 8, 1);
  EXPECT_EQ(g.cells, (std::vector<std::uint32_t>{0, 511}));
}

std::size_t conv_params(std::size_t in, std::size_t out) { return 27 * in * out + out; }

TEST(StClassifier, ToyDefaultPrunesAtLatentVolume) {
  const ClassifierConfig cfg;
  const auto m = build_st_classifier(cfg, 1, nn::Shape{8, 8, 8, 32});
  EXPECT_EQ(m.pruning_input_shape(), (nn::Shape{8, 8, 8, 32}));
  std::size_t fc = 0, conv = 0;
  for (const auto& u : m.network.units()) {
    fc += u.kind == nn::LayerKind::kFullyConnected;
    conv += u.kind == nn::LayerKind::kConv3D;
  }
  EXPECT_EQ(fc, 3u);
  EXPECT_EQ(conv, 7u);
  // Units past the pruning point: four convolutions and three FC layers.
  EXPECT_EQ(m.network.units().size() - static_cast<std::size_t>(cfg.pruning_unit), 7u);
  for (const auto& l : m.network.layers()) EXPECT_EQ(l.provenance, nn::Provenance::kFreshInit);
}

TEST(StClassifier, ParameterCountMatchesFormula) {
  const auto m = build_st_classifier(ClassifierConfig{}, 1);
  std::size_t expected = conv_params(4, 16) + conv_params(16, 64) + conv_params(64, 32) + 4 * conv_params(32, 32);
  expected += 2 * (16 + 64 + 32 + 4 * 32);  // batch norm scale and shift
  expected += (8 * 8 * 8 * 32) * 256 + 256 + 256 * 64 + 64 + 64 * 6 + 6;
  EXPECT_EQ(m.network.parameter_count(), expected);
  EXPECT_EQ(m.network.parameter_count(), nn::count_parameters(classifier_specs(ClassifierConfig{})));
}

TEST(StClassifier, RejectsUnmatchedLatentVolume) {
  try {
    build_st_classifier(ClassifierConfig{}, 1, nn::Shape{8, 8, 8, 64});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    EXPECT_NE(std::string(e.what()).find("8x8x8x64"), std::string::npos) << e.what();
  }
}

TEST(StClassifier, RejectsPruningOutsideConvolutions) {
  ClassifierConfig cfg;
  cfg.pruning_unit = 0;
  EXPECT_THROW(build_st_classifier(cfg, 1), Error);
  cfg.pruning_unit = 7;  // first fully connected layer
  EXPECT_THROW(build_st_classifier(cfg, 1), Error);
}

TEST(StClassifier, FileRoundTrip) {
  auto m = build_st_classifier(ClassifierConfig{}, 5);
  auto bytes = save_classifier(m);
  auto back = load_classifier(bytes);
  EXPECT_EQ(back.config, m.config);
  EXPECT_EQ(save_classifier(back), bytes);
  bytes[bytes.size() / 2] ^= 1;
  try {
    load_classifier(bytes);
    FAIL() << "expected a crc error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kCrc);
  }
}

TEST(PredictTopk, DominantClassFirst) {
  std::vector<float> logits{0.1f, 9.0f, 0.3f, -2.0f};
  EXPECT_EQ(predict_topk(logits, 1), (std::vector<std::size_t>{1}));
}

TEST(PredictTopk, FullKIsAPermutation) {
  std::vector<float> logits{0.5f, -1.0f, 2.0f, 0.0f, 1.0f};
  auto all = predict_topk(logits, 5);
  std::vector<std::size_t> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(all, (std::vector<std::size_t>{2, 4, 0, 3, 1}));
}

TEST(PredictTopk, TiesPreferLowerClassId) {
  std::vector<float> logits{1.0f, 3.0f, 3.0f, 1.0f};
  EXPECT_EQ(predict_topk(logits, 4), (std::vector<std::size_t>{1, 2, 0, 3}));
}

TEST(PredictTopk, MatchesArgsortOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> logits(6);
    // Coarse values so ties occur.
    for (auto& v : logits) v = static_cast<float>(rng.below(5));
    std::vector<std::size_t> oracle(6);
    std::iota(oracle.begin(), oracle.end(), 0);
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = i + 1; j < 6; ++j) {
        const bool swap = logits[oracle[j]] > logits[oracle[i]] ||
                          (logits[oracle[j]] == logits[oracle[i]] && oracle[j] < oracle[i]);
        if (swap) std::swap(oracle[i], oracle[j]);
      }
    }
    for (std::size_t k = 1; k <= 6; ++k) {
      auto got = predict_topk(logits, k);
      EXPECT_EQ(got, std::vector<std::size_t>(oracle.begin(), oracle.begin() + static_cast<long>(k)));
    }
  }
}

TEST(PredictTopk, TopOneIsInEveryTopK) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> logits(6);
    for (auto& v : logits) v = static_cast<float>(rng.normal());
    const std::size_t first = predict_topk(logits, 1)[0];
    for (std::size_t k = 1; k <= 6; ++k) {
      auto top = predict_topk(logits, k);
      EXPECT_NE(std::find(top.begin(), top.end(), first), top.end());
    }
  }
}

TEST(PredictTopk, RejectsBadK) {
  std::vector<float> logits{1.0f, 2.0f};
  EXPECT_THROW(predict_topk(logits, 0), Error);
  EXPECT_THROW(predict_topk(logits, 3), Error);
}

// A small shape-classification task that trains in seconds.
class SmallTask : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    cfg_ = new ClassifierConfig;
    cfg_->grid = 8;
    cfg_->point_count = 256;
    cfg_->conv = {{4, 2}, {8, 1}, {8, 1}};
    cfg_->hidden = {16, 8};
    cfg_->num_classes = 3;
    cfg_->pruning_unit = 1;
    const auto ds = pcloud::generate_dataset(3, 20, 512, 21);
    std::vector<VoxelFeatureGrid> tr, va;
    std::vector<std::size_t> ltr, lva;
    for (const auto& s : ds.samples) {
      auto g = featurize(pcloud::fps_resample(s.cloud, cfg_->point_count), cfg_->grid, cfg_->points_per_cell);
      const auto label = static_cast<std::size_t>(*s.cloud.label);
      if (s.split == pcloud::Split::kTrain) {
        tr.push_back(std::move(g));
        ltr.push_back(label);
      } else {
        va.push_back(std::move(g));
        lva.push_back(label);
      }
    }
    train_ = new Examples(feature_examples(std::move(tr), std::move(ltr)));
    val_ = new Examples(feature_examples(std::move(va), std::move(lva)));
  }
  static void TearDownTestSuite() {
    delete cfg_;
    delete train_;
    delete val_;
  }

  static TrainHyper hyper(int epochs) {
    TrainHyper h;
    h.batch_size = 8;
    h.lr = 3e-3;
    h.max_epochs = epochs;
    h.seed = 4;
    return h;
  }

  static ClassifierConfig* cfg_;
  static Examples* train_;
  static Examples* val_;
};

ClassifierConfig* SmallTask::cfg_ = nullptr;
Examples* SmallTask::train_ = nullptr;
Examples* SmallTask::val_ = nullptr;

TEST_F(SmallTask, LossDecreasesOverFirstEpochs) {
  auto m = build_st_classifier(*cfg_, 9);
  auto r = train_network(m.network, *train_, *val_, hyper(5));
  ASSERT_EQ(r.history.size(), 5u);
  EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
  EXPECT_GT(r.best_val_top1, 1.0 / 3.0);
}

TEST_F(SmallTask, SeededRunsAreBitIdentical) {
  auto m = build_st_classifier(*cfg_, 9);
  auto a = train_network(m.network, *train_, *val_, hyper(3));
  auto b = train_network(m.network, *train_, *val_, hyper(3));
  EXPECT_EQ(nn::save_network(a.best), nn::save_network(b.best));
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
}

TEST_F(SmallTask, FrozenLayersStayBitIdentical) {
  auto m = build_st_classifier(*cfg_, 9);
  const auto units = m.network.units();
  m.network.set_unit_frozen(units[0], true);
  m.network.set_unit_frozen(units[1], true);
  auto r = train_network(m.network, *train_, *val_, hyper(3));
  for (std::size_t i = 0; i <= units[1].last; ++i) {
    const auto& before = m.network.layer(i);
    const auto& after = r.best.layer(i);
    for (std::size_t p = 0; p < before.params.size(); ++p) EXPECT_EQ(before.params[p], after.params[p]);
    for (std::size_t p = 0; p < before.buffers.size(); ++p) {
      EXPECT_EQ(before.buffers[p], after.buffers[p]);
    }
  }
  bool changed = false;
  for (std::size_t i = units[2].first; i < m.network.size(); ++i) {
    for (std::size_t p = 0; p < m.network.layer(i).params.size(); ++p) {
      changed |= !(m.network.layer(i).params[p] == r.best.layer(i).params[p]);
    }
  }
  EXPECT_TRUE(changed);
}

TEST_F(SmallTask, ReturnsBestValidationCheckpoint) {
  auto m = build_st_classifier(*cfg_, 9);
  auto r = train_network(m.network, *train_, *val_, hyper(6));
  double best = -1.0;
  int best_epoch = -1;
  for (const auto& e : r.history) {
    if (e.val_top1 > best) {
      best = e.val_top1;
      best_epoch = e.epoch;
    }
  }
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_EQ(r.best_val_top1, best);
  EXPECT_DOUBLE_EQ(top1_accuracy(predict_logits(r.best, *val_), val_->labels), best);
}

TEST_F(SmallTask, HalvesLearningRateAndStopsEarly) {
  auto m = build_st_classifier(*cfg_, 9);
  TrainHyper h = hyper(40);
  h.lr_patience = 1;
  h.early_stop = 3;
  auto r = train_network(m.network, *train_, *val_, h);
  EXPECT_LT(r.history.size(), 40u);
  const int since = static_cast<int>(r.history.size()) - 1 - r.best_epoch;
  EXPECT_EQ(since, 3);
  EXPECT_LT(r.history.back().lr, h.lr);
}

TEST_F(SmallTask, ParallelEvaluationMatchesSerial) {
  auto m = build_st_classifier(*cfg_, 9);
  EXPECT_EQ(predict_logits(m.network, *val_, 1), predict_logits(m.network, *val_, 3));
}

}  // namespace
}  // namespace lbpc::classifier

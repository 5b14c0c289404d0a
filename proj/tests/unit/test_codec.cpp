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
#include <map>

#include <gtest/gtest.h>

#include "lbpc/codec/bitstream.hpp"
#include "lbpc/codec/entropy.hpp"
#include "lbpc/codec/model.hpp"
#include "lbpc/codec/range_coder.hpp"
#include "lbpc/codec/train.hpp"
#include "lbpc/core/random.hpp"
#include "lbpc/pcloud/dataset.hpp"
#include "oracles.hpp"

namespace lbpc::codec {
namespace {

using nn::Tensor;

// Laplace CDF written directly from its textbook form.
double naive_laplace_cdf(double x, double mu, double b) {
  const double z = x - mu;
  return z < 0 ? 0.5 * std::exp(z / b) : 1.0 - 0.5 * std::exp(-z / b);
}

double naive_bits(double v, double mu, double b) {
  const double p = naive_laplace_cdf(v + 0.5, mu, b) - naive_laplace_cdf(v - 0.5, mu, b);
  return -std::log2(std::max(p, 1.0 / 65536.0));
}

CodecConfig tiny_config() {
  CodecConfig c;
  c.bit_depth = 4;
  c.block_size = 8;
  c.widths = {2};
  c.latent_channels = 2;
  c.residual_blocks = 1;
  return c;
}

CodecConfig small_config() {
  CodecConfig c;
  c.bit_depth = 5;
  c.block_size = 16;
  c.widths = {4};
  c.latent_channels = 4;
  return c;
}

pcloud::PointCloudV shape_voxels(int family, int bit_depth, std::uint64_t seed, int points = 800) {
  return pcloud::voxelize(pcloud::generate_shape(family, points, seed), bit_depth);
}

TEST(Quantize, InferRoundsHalfAwayFromZero) {
  Tensor<double> t({5}, std::vector<double>{2.5, -2.5, 0.49, -0.5, 3.0});
  auto q = quantize(t, nn::Mode::kInfer);
  EXPECT_EQ(q.to_vector(), (std::vector<double>{3, -3, 0, -1, 3}));
}

TEST(Quantize, IntegersAreFixedPoints) {
  Tensor<float> t({4}, std::vector<float>{-7, 0, 1, 63});
  EXPECT_EQ(quantize(t, nn::Mode::kInfer), t);
}

TEST(Quantize, TrainNoiseIsCenteredAndBounded) {
  Tensor<double> t({1000000});
  Rng rng(17);
  auto q = quantize(t, nn::Mode::kTrain, &rng);
  double mean = 0.0;
  for (double v : q.data()) {
    ASSERT_GE(v, -0.5);
    ASSERT_LT(v, 0.5);
    mean += v;
  }
  mean /= static_cast<double>(q.size());
  EXPECT_GT(mean, -0.01);
  EXPECT_LT(mean, 0.01);
}

TEST(Rate, NearDeterministicSymbolCostsNothing) {
  EntropyModel m{{{3.0, std::log(1e-3)}}};
  Tensor<double> t({1}, std::vector<double>{3.0});
  EXPECT_LT(rate_estimate(t, m).bits, 1e-9);
}

TEST(Rate, SymmetricAroundMean) {
  EntropyModel m{{{1.25, std::log(0.8)}}};
  for (double off : {0.3, 1.0, 2.7, 9.0}) {
    Tensor<double> a({1}, std::vector<double>{1.25 + off});
    Tensor<double> b({1}, std::vector<double>{1.25 - off});
    EXPECT_NEAR(rate_estimate(a, m).bits, rate_estimate(b, m).bits, 1e-12);
  }
}

TEST(Rate, MatchesScalarOracle) {
  Rng rng(5);
  EntropyModel m;
  for (int c = 0; c < 3; ++c) m.channels.push_back({rng.uniform(-1, 1), std::log(rng.uniform(0.3, 2.0))});
  Tensor<double> t({4, 4, 4, 3});
  for (auto& v : t.data()) v = std::round(rng.uniform(-5, 5));
  double oracle = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& ch = m.channels[i % 3];
    oracle += naive_bits(t[i], ch.mu, std::exp(ch.log_b));
  }
  EXPECT_NEAR(rate_estimate(t, m).bits, oracle, 1e-9);
}

TEST(Rate, FlooredTailCostsSixteenBits) {
  EntropyModel m{{{0.0, std::log(0.1)}}};
  Tensor<double> t({1}, std::vector<double>{40.0});
  EXPECT_DOUBLE_EQ(rate_estimate(t, m).bits, 16.0);
  auto r = rate_estimate(t, m, true);
  EXPECT_GT(r.d_latent[0], 0.0);
  t[0] = -40.0;
  r = rate_estimate(t, m, true);
  EXPECT_LT(r.d_latent[0], 0.0);
  EXPECT_DOUBLE_EQ(r.d_mu[0], 0.0);
}

TEST(Rate, GradientsMatchFiniteDifferences) {
  Rng rng(8);
  EntropyModel m;
  for (int c = 0; c < 2; ++c) m.channels.push_back({rng.uniform(-0.5, 0.5), std::log(rng.uniform(0.5, 1.5))});
  Tensor<double> t({5, 2});
  for (auto& v : t.data()) v = rng.uniform(-2, 2);
  auto r = rate_estimate(t, m, true);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    Tensor<double> p = t, q = t;
    p[i] += h;
    q[i] -= h;
    const double num = (rate_estimate(p, m).bits - rate_estimate(q, m).bits) / (2 * h);
    worst = std::max(worst, testing::relative_error(r.d_latent[i], num));
  }
  for (std::size_t c = 0; c < 2; ++c) {
    for (int which = 0; which < 2; ++which) {
      EntropyModel p = m, q = m;
      (which ? p.channels[c].log_b : p.channels[c].mu) += h;
      (which ? q.channels[c].log_b : q.channels[c].mu) -= h;
      const double num = (rate_estimate(t, p).bits - rate_estimate(t, q).bits) / (2 * h);
      worst = std::max(worst, testing::relative_error(which ? r.d_log_b[c] : r.d_mu[c], num));
    }
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(Cdf, TablesAreStrictlyIncreasingAndComplete) {
  for (double log_b : {-8.0, -2.0, 0.0, 2.0, 5.0}) {
    for (double mu : {-70.0, -3.3, 0.0, 0.5, 62.9}) {
      CdfTable t = build_cdf({mu, log_b});
      ASSERT_EQ(t.alphabet(), kAlphabetSize);
      EXPECT_EQ(t.cum.front(), 0u);
      EXPECT_EQ(t.total(), kCdfTotal);
      for (std::size_t s = 0; s < t.alphabet(); ++s) EXPECT_GE(t.freq(s), 1u);
    }
  }
}

double table_bits(std::span<const std::int32_t> symbols, std::span<const CdfTable> tables) {
  double bits = 0.0;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const CdfTable& t = tables[i % tables.size()];
    bits -= std::log2(static_cast<double>(t.freq(static_cast<std::size_t>(symbols[i] - t.min_symbol))) / t.total());
  }
  return bits;
}

TEST(RangeCoder, MillionUniformSymbolsRoundTrip) {
  Rng rng(21);
  std::vector<CdfTable> tables = build_cdfs(EntropyModel{{{0.0, 3.0}, {2.0, 1.0}, {-1.0, 4.5}}});
  std::vector<std::int32_t> symbols(1000000);
  for (auto& s : symbols) s = kSymbolMin + static_cast<std::int32_t>(rng.below(kAlphabetSize));
  auto bytes = range_encode(symbols, tables);
  EXPECT_EQ(range_decode(bytes, tables, symbols.size()), symbols);
  const double ideal = table_bits(symbols, tables);
  EXPECT_LE(bytes.size() * 8.0, 1.01 * ideal + 64);
}

TEST(RangeCoder, IidDrawsNearShannonBound) {
  Rng rng(4);
  for (double log_b : {-1.0, 0.5, 2.0}) {
    EntropyModel m{{{0.3, log_b}}};
    auto tables = build_cdfs(m);
    std::vector<std::int32_t> symbols(200000);
    for (auto& s : symbols) {
      // Inverse-CDF draw from the table itself.
      const auto u = static_cast<std::uint32_t>(rng.below(kCdfTotal));
      const auto it = std::upper_bound(tables[0].cum.begin(), tables[0].cum.end(), u);
      s = kSymbolMin + static_cast<std::int32_t>(it - tables[0].cum.begin() - 1);
    }
    auto bytes = range_encode(symbols, tables);
    const double ideal = table_bits(symbols, tables);
    EXPECT_GE(bytes.size() * 8.0 + 8, ideal);
    EXPECT_LE(bytes.size() * 8.0, 1.01 * ideal + 64) << "log_b " << log_b;
    EXPECT_EQ(range_decode(bytes, tables, symbols.size()), symbols);
  }
}

TEST(RangeCoder, SingleSymbolAlphabet) {
  CdfTable t{5, {0, kCdfTotal}};
  std::vector<std::int32_t> symbols(10000, 5);
  auto bytes = range_encode(symbols, std::span(&t, 1));
  EXPECT_LE(bytes.size(), 8u);
  EXPECT_EQ(range_decode(bytes, std::span(&t, 1), symbols.size()), symbols);
}

TEST(RangeCoder, CarryPropagationStress) {
  // A very skewed table makes long 0xFF runs in the output likely.
  CdfTable t{0, {0, 65530, 65535, 65536}};
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::int32_t> symbols(5000);
    for (auto& s : symbols) {
      const auto u = rng.below(65536);
      s = u < 65530 ? 0 : (u < 65535 ? 1 : 2);
    }
    auto bytes = range_encode(symbols, std::span(&t, 1));
    ASSERT_EQ(range_decode(bytes, std::span(&t, 1), symbols.size()), symbols) << trial;
  }
}

TEST(RangeCoder, EmptyInput) {
  auto tables = build_cdfs(EntropyModel{{{0.0, 0.0}}});
  auto bytes = range_encode(std::vector<std::int32_t>{}, tables);
  EXPECT_TRUE(bytes.empty());
  EXPECT_TRUE(range_decode(bytes, tables, 0).empty());
}

TEST(RangeCoder, RejectsSymbolOutsideSupport) {
  auto tables = build_cdfs(EntropyModel{{{0.0, 0.0}}});
  EXPECT_THROW(range_encode(std::vector<std::int32_t>{64}, tables), Error);
  EXPECT_THROW(range_encode(std::vector<std::int32_t>{-65}, tables), Error);
}

TEST(CodecModel, ToyShapeContract) {
  CodecConfig cfg;  // bit depth 6, BS 32, SF 1, d 3, C 32
  auto m = build_codec(cfg, 1);
  EXPECT_EQ(m.analysis.output_shape(), (nn::Shape{4, 4, 4, 32}));
  EXPECT_EQ(m.synthesis.output_shape(), (nn::Shape{32, 32, 32, 1}));
  EXPECT_EQ(cfg.volume_shape(), (nn::Shape{8, 8, 8, 32}));
  Tensor<float> empty({1, 32, 32, 32, 1});
  auto y = m.analysis.infer(empty);
  EXPECT_TRUE(y.all_finite());
}

TEST(CodecModel, AnalysisMatchesNaiveConvolution) {
  CodecConfig cfg = tiny_config();
  cfg.residual_blocks = 0;
  auto m = build_codec<double>(cfg, 3);
  Rng rng(2);
  Tensor<double> x = testing::random_tensor({1, 8, 8, 8, 1}, rng);
  auto y = m.analysis.infer(x);
  // conv(1->2, s2) -> leaky -> conv(2->2, s2)
  std::size_t d, h, w;
  const auto& l0 = m.analysis.layer(0);
  auto a = testing::naive_conv3d(x.to_vector(), 8, 8, 8, 1, l0.params[0].to_vector(), l0.params[1].to_vector(), 2, 3, 2,
                                 true, d, h, w);
  for (auto& v : a) v = v > 0 ? v : 0.1 * v;
  const auto& l2 = m.analysis.layer(2);
  auto b = testing::naive_conv3d(a, d, h, w, 2, l2.params[0].to_vector(), l2.params[1].to_vector(), 2, 3, 2, true, d, h,
                                 w);
  ASSERT_EQ(b.size(), y.size());
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_LE(testing::relative_error(y[i], b[i]), 1e-9);
}

TEST(CodecModel, RejectsImpossibleDepth) {
  CodecConfig cfg;
  cfg.block_size = 4;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(CodecModel, FileRoundTripIsExact) {
  auto m = build_codec(small_config(), 9);
  m.entropy.channels[1] = {0.25, -1.5};
  m.lambda = 0.002;
  m.lambda_index = 1;
  Bytes bytes = save_codec(m);
  auto back = load_codec(bytes);
  EXPECT_EQ(save_codec(back), bytes);
  EXPECT_EQ(back.entropy, m.entropy);
  EXPECT_EQ(back.config, m.config);
  bytes[bytes.size() / 2] ^= 0x10;
  try {
    load_codec(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kCrc);
  }
}

TEST(RdLoss, ZeroLambdaIsFocalOnly) {
  auto m = build_codec<double>(tiny_config(), 4);
  auto blocks = pcloud::partition(shape_voxels(0, 4, 1, 200), 8);
  std::vector<const pcloud::Block*> ptrs;
  for (const auto& b : blocks) ptrs.push_back(&b);
  auto batch = block_batch<double>(ptrs);
  Rng r1(1), r2(1);
  auto res = rd_loss(m, batch, 0.0, r1, false);
  EXPECT_TRUE(std::isfinite(res.loss));
  EXPECT_EQ(res.loss, res.focal);
  auto res2 = rd_loss(m, batch, 0.01, r2, false);
  EXPECT_GT(res2.loss, res2.focal);
}

TEST(RdLoss, SkipsEmptyBlocks) {
  auto m = build_codec<double>(tiny_config(), 4);
  Tensor<double> batch({2, 8, 8, 8, 1});
  batch[5] = 1.0;
  Rng rng(3);
  auto res = rd_loss(m, batch, 0.01, rng, true);
  EXPECT_EQ(res.blocks, 1u);
  EXPECT_EQ(res.occupied, 1u);
}

TEST(RdLoss, GradientMatchesFiniteDifferences) {
  for (std::uint64_t trial = 0; trial < 3; ++trial) {
    auto m = build_codec<double>(tiny_config(), 10 + trial);
    Rng init(trial);
    for (auto& ch : m.entropy.channels) ch = {init.uniform(-0.3, 0.3), init.uniform(-0.5, 0.5)};
    // Zero biases put every empty-input position exactly on the LeakyReLU
    // kink, where central differences are meaningless.
    for (auto* net : {&m.analysis, &m.synthesis}) {
      for (auto& layer : net->layers()) {
        if (layer.spec.kind != nn::LayerKind::kConv3D && layer.spec.kind != nn::LayerKind::kConvTranspose3D) continue;
        for (auto& b : layer.params[1].data()) b = init.uniform(0.05, 0.2) * (init.uniform() < 0.5 ? -1 : 1);
      }
    }
    ASSERT_LE(m.analysis.parameter_count() + m.synthesis.parameter_count(), 1000u);
    auto blocks = pcloud::partition(shape_voxels(static_cast<int>(trial), 4, trial, 300), 8);
    std::vector<const pcloud::Block*> ptrs{&blocks[0], &blocks[blocks.size() - 1]};
    auto batch = block_batch<double>(ptrs);
    const double lambda = 0.05;
    auto loss_at = [&](CodecModelT<double> model) {
      Rng rng(77);
      return rd_loss(model, batch, lambda, rng, false).loss;
    };
    Rng rng(77);
    auto res = rd_loss(m, batch, lambda, rng, true);
    const double h = 1e-5;
    double worst = 0.0;
    for (int which = 0; which < 2; ++which) {
      auto& net = which == 0 ? m.analysis : m.synthesis;
      const auto& grads = which == 0 ? res.analysis : res.synthesis;
      for (std::size_t li = 0; li < net.size(); ++li) {
        for (std::size_t p = 0; p < net.layer(li).params.size(); ++p) {
          for (std::size_t e = 0; e < net.layer(li).params[p].size(); ++e) {
            auto plus = m, minus = m;
            (which == 0 ? plus.analysis : plus.synthesis).layer(li).params[p][e] += h;
            (which == 0 ? minus.analysis : minus.synthesis).layer(li).params[p][e] -= h;
            const double num = (loss_at(plus) - loss_at(minus)) / (2 * h);
            worst = std::max(worst, testing::relative_error(grads.layers[li][p][e], num));
          }
        }
      }
    }
    for (std::size_t c = 0; c < m.entropy.size(); ++c) {
      for (int which = 0; which < 2; ++which) {
        auto plus = m, minus = m;
        (which ? plus.entropy.channels[c].log_b : plus.entropy.channels[c].mu) += h;
        (which ? minus.entropy.channels[c].log_b : minus.entropy.channels[c].mu) -= h;
        const double num = (loss_at(plus) - loss_at(minus)) / (2 * h);
        worst = std::max(worst, testing::relative_error(which ? res.d_log_b[c] : res.d_mu[c], num));
      }
    }
    EXPECT_LE(worst, 1e-4) << "trial " << trial;
  }
}

class TrainedSmallCodec : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    for (int f = 0; f < 4; ++f) {
      for (const auto& b : pcloud::partition(shape_voxels(f, 5, 100 + f, 1200), 16)) blocks_.push_back(b);
    }
    CodecTrainConfig tc;
    tc.ladder = {0.02, 0.002};
    tc.epochs = 3;
    tc.finetune_epochs = 2;
    tc.seed = 5;
    ladder_ = new CodecLadder(train_codec(blocks_, small_config(), tc));
  }
  static void TearDownTestSuite() {
    delete ladder_;
    ladder_ = nullptr;
  }
  static inline std::vector<pcloud::Block> blocks_;
  static inline CodecLadder* ladder_ = nullptr;
};

TEST_F(TrainedSmallCodec, TrainsLowestLambdaFirstAndChainsWeights) {
  ASSERT_EQ(ladder_->training_order, (std::vector<int>{1, 0}));
  EXPECT_EQ(ladder_->models[1].lambda_index, 1);
  EXPECT_EQ(ladder_->models[0].lambda, 0.02);
  // Model 0 started exactly where model 1 finished.
  const auto& start = ladder_->initial[0];
  const auto& prev = ladder_->models[1];
  EXPECT_EQ(nn::save_network(start.analysis), nn::save_network(prev.analysis));
  EXPECT_EQ(nn::save_network(start.synthesis), nn::save_network(prev.synthesis));
  EXPECT_EQ(start.entropy, prev.entropy);
}

TEST_F(TrainedSmallCodec, TrainingIsDeterministic) {
  CodecTrainConfig tc;
  tc.ladder = {0.02, 0.002};
  tc.epochs = 3;
  tc.finetune_epochs = 2;
  tc.seed = 5;
  auto again = train_codec(blocks_, small_config(), tc);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(save_codec(again.models[i]), save_codec(ladder_->models[i]));
}

TEST_F(TrainedSmallCodec, LossDecreases) {
  const auto& log = ladder_->log;
  ASSERT_GE(log.size(), 3u);
  EXPECT_LT(log[2].loss, log[0].loss);
}

TEST_F(TrainedSmallCodec, EncodeDecodeIsDeterministic) {
  const auto& m = ladder_->models[1];
  auto pc = shape_voxels(2, 5, 555, 1200);
  auto a = encode_pc(pc, m);
  auto b = encode_pc(pc, m);
  EXPECT_EQ(a.stream, b.stream);
  EXPECT_EQ(decode_pc(a.stream, m), decode_pc(b.stream, m));
  EXPECT_GT(a.stats.blocks, 0u);
}

TEST_F(TrainedSmallCodec, PayloadBitsTrackRateEstimate) {
  for (const auto& m : ladder_->models) {
    for (int f = 0; f < 4; ++f) {
      auto pc = shape_voxels(f, 5, 900 + f, 1200);
      auto res = encode_pc(pc, m);
      const double actual = static_cast<double>(res.stats.payload_bytes) * 8.0;
      const double ideal = res.stats.estimated_bits;
      EXPECT_GE(actual, ideal) << "family " << f;
      EXPECT_LE(actual, 1.01 * ideal + 64.0 * static_cast<double>(res.stats.blocks)) << "family " << f;
    }
  }
}

TEST_F(TrainedSmallCodec, LatentsSurviveTheBitstream) {
  const auto& m = ladder_->models[0];
  auto pc = shape_voxels(3, 5, 31, 1200);
  auto enc = encode_pc(pc, m);
  auto direct = extract_latents(pc, m);
  auto decoded = latents_from_stream(enc.stream, m);
  EXPECT_EQ(direct.values, decoded.values);
  EXPECT_EQ(direct.cells, decoded.cells);
  EXPECT_EQ(extract_latents(pc, m).values, direct.values);
}

TEST_F(TrainedSmallCodec, ReencodingDecodedLatentsIsByteIdentical) {
  const auto& m = ladder_->models[1];
  auto pc = shape_voxels(1, 5, 32, 1200);
  auto enc = encode_pc(pc, m);
  auto parsed = parse_stream(enc.stream);
  auto latents = decode_block_latents(parsed, m);
  const auto tables = build_cdfs(m.entropy);
  std::vector<BlockPayload> payloads;
  for (const auto& bl : latents) payloads.push_back({bl.origin, range_encode(bl.symbols, tables)});
  EXPECT_EQ(write_stream(parsed.header, payloads), enc.stream);
}

TEST_F(TrainedSmallCodec, BlocksAreCodedIndependently) {
  const auto& m = ladder_->models[1];
  auto pc = shape_voxels(0, 5, 33, 1200);
  auto full = parse_stream(encode_pc(pc, m).stream);
  for (const auto& blk : pcloud::partition(pc, m.config.block_size)) {
    auto alone = parse_stream(encode_pc(pcloud::merge(std::vector<pcloud::Block>{blk}, 5), m).stream);
    ASSERT_EQ(alone.blocks.size(), 1u);
    auto it = std::find_if(full.blocks.begin(), full.blocks.end(),
                           [&](const BlockPayload& p) { return p.origin == blk.origin; });
    ASSERT_NE(it, full.blocks.end());
    EXPECT_EQ(it->bytes, alone.blocks[0].bytes);
  }
}

TEST_F(TrainedSmallCodec, EmptyCloudGivesHeaderOnlyStream) {
  const auto& m = ladder_->models[0];
  auto enc = encode_pc(pcloud::PointCloudV({}, 5), m);
  EXPECT_EQ(enc.stats.blocks, 0u);
  EXPECT_EQ(enc.stream.size(), 4u + 2 + 1 + 2 + 2 + 1 + 4 + 2 + 2 + 4);
  EXPECT_TRUE(decode_pc(enc.stream, m).empty());
}

TEST_F(TrainedSmallCodec, CorruptionIsDetected) {
  const auto& m = ladder_->models[0];
  auto enc = encode_pc(shape_voxels(1, 5, 34, 1200), m);
  auto flipped = enc.stream;
  flipped[20] ^= 1;
  try {
    decode_pc(flipped, m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kCrc);
  }
  auto cut = enc.stream;
  cut.resize(cut.size() / 2);
  EXPECT_THROW(decode_pc(cut, m), Error);
  // Bump the version and fix the CRC so only the version check can fire.
  auto bumped = enc.stream;
  bumped[4] = 9;
  bumped.resize(bumped.size() - 4);
  ByteWriter w;
  w.raw(bumped);
  w.append_crc();
  try {
    decode_pc(std::move(w).take(), m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kVersion);
  }
}

TEST_F(TrainedSmallCodec, HeaderMustMatchModel) {
  auto enc = encode_pc(shape_voxels(1, 5, 35, 1200), ladder_->models[0]);
  try {
    decode_pc(enc.stream, ladder_->models[1]);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST_F(TrainedSmallCodec, TopNKeepsExactCounts) {
  auto m = ladder_->models[1];
  m.config.top_n = true;
  auto pc = shape_voxels(4, 5, 36, 1200);
  auto enc = encode_pc(pc, m);
  auto counts = block_counts(pc, m.config);
  auto rec = decode_pc(enc.stream, m, counts);
  std::size_t total = 0;
  for (auto c : counts) total += c;
  EXPECT_EQ(rec.size(), total);
  EXPECT_THROW(decode_pc(enc.stream, m), Error);
}

TEST(Assemble, SingleBlockAtOrigin) {
  CodecConfig cfg;
  BlockLatent bl{{0, 0, 0}, std::vector<std::int32_t>(4 * 4 * 4 * 32, 1)};
  auto vol = assemble_latents(std::span(&bl, 1), cfg, 0);
  EXPECT_EQ(vol.values.shape(), (nn::Shape{8, 8, 8, 32}));
  std::size_t ones = 0;
  for (std::size_t x = 0; x < 8; ++x)
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t z = 0; z < 8; ++z) {
        const bool inside = x < 4 && y < 4 && z < 4;
        for (std::size_t c = 0; c < 32; ++c) {
          const auto v = vol.values[((x * 8 + y) * 8 + z) * 32 + c];
          EXPECT_EQ(v, inside ? 1 : 0);
          ones += v;
        }
      }
  EXPECT_EQ(ones, 4u * 4 * 4 * 32);
}

TEST(Assemble, FullGridPlacesEveryCell) {
  CodecConfig cfg;
  std::vector<BlockLatent> blocks;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z) {
        const std::int32_t tag = x * 4 + y * 2 + z + 1;
        blocks.push_back({{x * 32, y * 32, z * 32}, std::vector<std::int32_t>(4 * 4 * 4 * 32, tag)});
      }
  auto vol = assemble_latents(blocks, cfg, 0);
  for (std::size_t x = 0; x < 8; ++x)
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t z = 0; z < 8; ++z) {
        const auto want = static_cast<std::int32_t>((x / 4) * 4 + (y / 4) * 2 + (z / 4) + 1);
        EXPECT_EQ(vol.values[((x * 8 + y) * 8 + z) * 32], want);
      }
}

TEST(Assemble, OriginCollisionIsRejected) {
  CodecConfig cfg;
  std::vector<BlockLatent> blocks(2, BlockLatent{{32, 0, 0}, std::vector<std::int32_t>(4 * 4 * 4 * 32, 0)});
  EXPECT_THROW(assemble_latents(blocks, cfg, 0), Error);
}

TEST(Ladder, OrderAndValidation) {
  EXPECT_EQ(ladder_training_order(std::vector<double>{0.008, 0.002, 0.0005}), (std::vector<int>{2, 1, 0}));
  EXPECT_EQ(ladder_training_order(std::vector<double>{0.001}), (std::vector<int>{0}));
  EXPECT_THROW(ladder_training_order(std::vector<double>{0.002, 0.008, 0.001}), Error);
  EXPECT_THROW(ladder_training_order(std::vector<double>{}), Error);
  EXPECT_THROW(ladder_training_order(std::vector<double>{0.002, 0.002}), Error);
}

}  // namespace
}  // namespace lbpc::codec

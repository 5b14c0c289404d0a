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

// Experiment stages and the artifacts they exchange. Each stage output is
// kept in memory once produced and otherwise loaded from the output
// directory, so stages can run in one process or as separate commands.

#ifndef LBPC_HARNESS_WORKSPACE_HPP_
#define LBPC_HARNESS_WORKSPACE_HPP_

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lbpc/classifier/features.hpp"
#include "lbpc/classifier/model.hpp"
#include "lbpc/classifier/train.hpp"
#include "lbpc/codec/bitstream.hpp"
#include "lbpc/codec/model.hpp"
#include "lbpc/codec/train.hpp"
#include "lbpc/core/binary_io.hpp"
#include "lbpc/core/error.hpp"
#include "lbpc/core/parallel.hpp"
#include "lbpc/core/random.hpp"
#include "lbpc/harness/artifacts.hpp"
#include "lbpc/harness/config.hpp"
#include "lbpc/metrics/psnr.hpp"
#include "lbpc/pcloud/dataset.hpp"
#include "lbpc/pcloud/fps.hpp"
#include "lbpc/pcloud/io.hpp"
#include "lbpc/pcloud/point_cloud.hpp"
#include "lbpc/taxonomy/adapt.hpp"

namespace lbpc::harness {

// Failure inside a named stage. The message reads "<kind>: <stage>: <text>".
class StageError : public Error {
 public:
  StageError(ErrorKind kind, const std::string& stage, const std::string& message)
      : Error(kind, stage + ": " + message), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

template <typename F>
decltype(auto) run_stage(const std::string& name, F&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    const std::string what = e.what();
    const std::size_t prefix = error_kind_name(e.kind()).size() + 2;
    throw StageError(e.kind(), name, what.size() >= prefix ? what.substr(prefix) : what);
  } catch (const std::filesystem::filesystem_error& e) {
    throw StageError(ErrorKind::kIo, name, e.what());
  } catch (const std::bad_alloc&) {
    throw StageError(ErrorKind::kState, name, "out of memory");
  }
}

// Latent volumes of one split at one rate point, stored as 8-bit symbols.
struct LatentSet {
  nn::Shape shape;
  std::vector<std::int8_t> values;  // one volume per example, back to back
  std::vector<std::size_t> labels;
  std::vector<std::size_t> ids;

  std::size_t volume() const { return nn::shape_volume(shape); }
  std::size_t size() const { return labels.size(); }

  void resize(std::size_t n) {
    values.assign(n * volume(), 0);
    labels.assign(n, 0);
    ids.assign(n, 0);
  }

  void store(std::size_t i, const codec::LatentVolume& v, std::size_t label, std::size_t id) {
    require(v.values.shape() == shape, ErrorKind::kShape, "latent volume shape differs within a set");
    const auto src = v.values.data();
    std::int8_t* dst = values.data() + i * volume();
    for (std::size_t k = 0; k < src.size(); ++k) {
      require(src[k] >= -128 && src[k] <= 127, ErrorKind::kNumeric, "latent symbol outside the 8-bit range");
      dst[k] = static_cast<std::int8_t>(src[k]);
    }
    labels[i] = label;
    ids[i] = id;
  }

  classifier::Examples examples() const {
    classifier::Examples ex;
    ex.item_shape = shape;
    ex.labels = labels;
    auto data = std::make_shared<std::vector<std::int8_t>>(values);
    const std::size_t n = volume();
    ex.fill = [data, n](std::size_t i, std::span<float> dst) {
      const std::int8_t* src = data->data() + i * n;
      for (std::size_t k = 0; k < n; ++k) dst[k] = static_cast<float>(src[k]);
    };
    return ex;
  }
};

struct RdCloud {
  std::size_t sample_id = 0;
  std::size_t input_points = 0;
  std::size_t decoded_points = 0;
  std::size_t stream_bytes = 0;
  double bpp = 0.0;
  double psnr = 0.0;
  bool infinite = false;
};

struct RdSummary {
  std::size_t lambda_index = 0;
  double lambda = 0.0;
  double bpp = 0.0;      // mean over test clouds
  double psnr = 0.0;     // mean over test clouds with finite PSNR
  std::size_t infinite = 0;
  std::vector<RdCloud> clouds;
};

class Workspace {
 public:
  explicit Workspace(ExperimentConfig cfg) : cfg_(std::move(cfg)), layout_{cfg_.output} {}

  const ExperimentConfig& config() const { return cfg_; }
  const Layout& layout() const { return layout_; }
  Provenance provenance() const { return provenance_of(cfg_); }
  std::size_t ladder_size() const { return cfg_.codec_training.ladder.size(); }
  double lambda(std::size_t li) const { return cfg_.codec_training.ladder.at(li); }
  const std::vector<std::pair<std::string, double>>& timings() const { return timings_; }

  template <typename F>
  decltype(auto) timed(const std::string& stage, F&& fn) {
    const auto start = std::chrono::steady_clock::now();
    struct Record {
      Workspace* ws;
      std::string stage;
      std::chrono::steady_clock::time_point start;
      ~Record() {
        ws->timings_.emplace_back(
            stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
      }
    } record{this, stage, start};
    return run_stage(stage, std::forward<F>(fn));
  }

  // ---- dataset ----

  const pcloud::Dataset& generate_dataset() {
    return timed("gen-data", [&]() -> const pcloud::Dataset& {
      pcloud::DatasetSpec spec = cfg_.dataset;
      spec.seed = stage_seed(cfg_, SeedStream::kDataset);
      dataset_ = pcloud::generate_dataset(spec);
      pcloud::save_dataset(layout_.dataset(), *dataset_);
      return *dataset_;
    });
  }

  const pcloud::Dataset& dataset() {
    if (!dataset_) {
      run_stage("load-dataset", [&] {
        require(std::filesystem::exists(layout_.dataset() / "manifest.json"), ErrorKind::kState,
                "no dataset under " + layout_.dataset().string() + "; run gen-data first");
        dataset_ = pcloud::load_dataset(layout_.dataset());
        pcloud::DatasetSpec expected = cfg_.dataset;
        expected.seed = stage_seed(cfg_, SeedStream::kDataset);
        const auto& s = dataset_->spec;
        require(s.num_classes == expected.num_classes && s.per_class == expected.per_class &&
                    s.points_per_cloud == expected.points_per_cloud && s.seed == expected.seed,
                ErrorKind::kState, "dataset under " + layout_.dataset().string() +
                                       " was generated with a different configuration or seed; rerun gen-data");
      });
    }
    return *dataset_;
  }

  std::vector<const pcloud::Sample*> split(pcloud::Split s) { return dataset().subset(s); }

  // ---- codec ----

  // Training clouds used for the codec, spread evenly over the train split.
  std::vector<const pcloud::Sample*> codec_training_clouds() {
    const auto train = split(pcloud::Split::kTrain);
    const std::size_t n = std::min<std::size_t>(train.size(), static_cast<std::size_t>(cfg_.codec_train_clouds));
    std::vector<const pcloud::Sample*> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(train[i * train.size() / n]);
    return out;
  }

  const codec::CodecLadder& train_codec() {
    return timed("train-codec", [&]() -> const codec::CodecLadder& {
      const codec::CodecConfig& cc = cfg_.codec;
      std::vector<pcloud::Block> blocks;
      for (const auto* s : codec_training_clouds()) {
        for (const auto& b : pcloud::partition(pcloud::voxelize(s->cloud, cc.bit_depth), cc.block_size)) {
          blocks.push_back(pcloud::downsample(b, cc.sampling_factor));
        }
      }
      codec::CodecTrainConfig tc = cfg_.codec_training;
      tc.seed = stage_seed(cfg_, SeedStream::kCodec);
      ladder_ = codec::train_codec(blocks, cc, tc);
      std::filesystem::create_directories(layout_.models());
      for (std::size_t li = 0; li < ladder_->models.size(); ++li) {
        write_file(layout_.codec(li), codec::save_codec(ladder_->models[li]));
        write_file(layout_.codec_initial(li), codec::save_codec(ladder_->initial[li]));
      }
      codecs_ = ladder_->models;
      return *ladder_;
    });
  }

  const std::optional<codec::CodecLadder>& trained_ladder() const { return ladder_; }

  const std::vector<codec::CodecModel>& codecs() {
    if (!codecs_) {
      run_stage("load-codec", [&] {
        std::vector<codec::CodecModel> models;
        for (std::size_t li = 0; li < ladder_size(); ++li) {
          const auto path = layout_.codec(li);
          require(std::filesystem::exists(path), ErrorKind::kState,
                  "missing codec model for lambda index " + std::to_string(li) + " (" + path.string() +
                      "); run train-codec first");
          models.push_back(codec::load_codec(read_file(path)));
          require(models.back().config == cfg_.codec && models.back().lambda == lambda(li), ErrorKind::kState,
                  path.string() + " was trained with a different codec configuration; rerun train-codec");
        }
        codecs_ = std::move(models);
      });
    }
    return *codecs_;
  }

  // Voxelized test clouds, in test-split order.
  const std::vector<pcloud::PointCloudV>& test_voxels() {
    if (!test_voxels_) {
      const auto test = split(pcloud::Split::kTest);
      std::vector<pcloud::PointCloudV> v(test.size());
      parallel_for(test.size(), cfg_.threads,
                   [&](std::size_t i) { v[i] = pcloud::voxelize(test[i]->cloud, cfg_.codec.bit_depth); });
      test_voxels_ = std::move(v);
    }
    return *test_voxels_;
  }

  // Encodes the test split at every rate point into out/streams.
  void encode_streams() {
    timed("encode", [&] {
      const auto& models = codecs();
      const auto test = split(pcloud::Split::kTest);
      const auto& vox = test_voxels();
      streams_.assign(ladder_size(), {});
      clamped_.assign(ladder_size(), 0);
      for (std::size_t li = 0; li < ladder_size(); ++li) {
        std::vector<codec::EncodeResult> enc(test.size());
        parallel_for(test.size(), cfg_.threads, [&](std::size_t i) { enc[i] = codec::encode_pc(vox[i], models[li]); });
        std::filesystem::create_directories(layout_.stream_dir(li));
        for (std::size_t i = 0; i < test.size(); ++i) {
          write_file(layout_.stream(li, test[i]->id), enc[i].stream);
          clamped_[li] += enc[i].stats.clamped;
          streams_[li].push_back(std::move(enc[i].stream));
        }
      }
    });
  }

  const std::vector<Bytes>& streams(std::size_t li) {
    if (streams_.size() != ladder_size()) {
      run_stage("load-streams", [&] {
        const auto test = split(pcloud::Split::kTest);
        std::vector<std::vector<Bytes>> all(ladder_size());
        for (std::size_t l = 0; l < ladder_size(); ++l) {
          for (const auto* s : test) {
            const auto path = layout_.stream(l, s->id);
            require(std::filesystem::exists(path), ErrorKind::kState,
                    "missing stream " + path.string() + "; run encode first");
            all[l].push_back(read_file(path));
          }
        }
        streams_ = std::move(all);
      });
    }
    return streams_.at(li);
  }

  std::optional<std::size_t> clamped(std::size_t li) const {
    if (li < clamped_.size()) return clamped_[li];
    return std::nullopt;
  }

  // Decoded test clouds at rate point li.
  const std::vector<pcloud::PointCloudV>& decoded(std::size_t li) {
    if (decoded_.size() != ladder_size()) decoded_.assign(ladder_size(), std::nullopt);
    if (!decoded_[li]) {
      const auto& s = streams(li);
      const auto& m = codecs().at(li);
      std::vector<pcloud::PointCloudV> out(s.size());
      parallel_for(s.size(), cfg_.threads, [&](std::size_t i) { out[i] = codec::decode_pc(s[i], m); });
      decoded_[li] = std::move(out);
    }
    return *decoded_[li];
  }

  // Rate and D1 PSNR of every test cloud at every rate point. The rate is
  // stream bits over the cloud's original point count.
  const std::vector<RdSummary>& eval_rd() {
    if (!rd_) {
      timed("eval-rd", [&] {
        const auto test = split(pcloud::Split::kTest);
        const auto& vox = test_voxels();
        std::vector<RdSummary> out;
        for (std::size_t li = 0; li < ladder_size(); ++li) {
          RdSummary r;
          r.lambda_index = li;
          r.lambda = lambda(li);
          const auto& s = streams(li);
          const auto& dec = decoded(li);
          r.clouds.resize(test.size());
          parallel_for(test.size(), cfg_.threads, [&](std::size_t i) {
            RdCloud& c = r.clouds[i];
            c.sample_id = test[i]->id;
            c.input_points = test[i]->cloud.size();
            c.decoded_points = dec[i].size();
            c.stream_bytes = s[i].size();
            c.bpp = 8.0 * static_cast<double>(c.stream_bytes) / static_cast<double>(c.input_points);
            if (dec[i].empty()) return;  // nothing reconstructed: PSNR undefined, left at 0
            const auto d1 = metrics::psnr_d1(vox[i], dec[i], cfg_.codec.bit_depth);
            c.psnr = d1.psnr;
            c.infinite = d1.infinite;
          });
          double bpp = 0.0, psnr = 0.0;
          std::size_t finite = 0;
          for (const auto& c : r.clouds) {
            bpp += c.bpp;
            if (c.infinite) {
              ++r.infinite;
            } else {
              psnr += c.psnr;
              ++finite;
            }
          }
          r.bpp = bpp / static_cast<double>(r.clouds.size());
          r.psnr = finite ? psnr / static_cast<double>(finite) : 0.0;
          out.push_back(std::move(r));
        }
        rd_ = std::move(out);
      });
    }
    return *rd_;
  }

  // ---- ST-domain classifier ----

  std::uint64_t resample_seed(std::size_t sample_id) const {
    return derive_seed(stage_seed(cfg_, SeedStream::kDataset), 0x5A3D0000ULL + sample_id);
  }

  classifier::VoxelFeatureGrid st_features(const pcloud::PointCloudF& pc, std::size_t sample_id) const {
    const auto& cc = cfg_.classifier;
    return classifier::featurize(pcloud::fps_resample(pc, cc.point_count, resample_seed(sample_id)), cc.grid,
                                 cc.points_per_cell);
  }

  classifier::Examples original_examples(pcloud::Split s) {
    const auto samples = split(s);
    std::vector<classifier::VoxelFeatureGrid> grids(samples.size());
    std::vector<std::size_t> labels(samples.size());
    parallel_for(samples.size(), cfg_.threads, [&](std::size_t i) {
      grids[i] = st_features(samples[i]->cloud, samples[i]->id);
      labels[i] = static_cast<std::size_t>(samples[i]->cloud.label.value());
    });
    return classifier::feature_examples(std::move(grids), std::move(labels));
  }

  const classifier::ClassifierModel& train_classifier() {
    return timed("train-classifier", [&]() -> const classifier::ClassifierModel& {
      const auto train = original_examples(pcloud::Split::kTrain);
      const auto val = original_examples(pcloud::Split::kVal);
      const std::uint64_t seed = stage_seed(cfg_, SeedStream::kClassifier);
      auto model = classifier::build_st_classifier(cfg_.classifier, derive_seed(seed, 0), cfg_.codec.volume_shape());
      auto result = classifier::train_network(std::move(model.network), train, val,
                                              train_hyper(cfg_.classifier_training, derive_seed(seed, 1), cfg_.threads));
      model.network = std::move(result.best);
      classifier_history_ = std::move(result.history);
      classifier_ = std::move(model);
      std::filesystem::create_directories(layout_.models());
      write_file(layout_.classifier(), classifier::save_classifier(*classifier_));
      return *classifier_;
    });
  }

  const std::vector<classifier::EpochRecord>& classifier_history() const { return classifier_history_; }

  const classifier::ClassifierModel& classifier() {
    if (!classifier_) {
      run_stage("load-classifier", [&] {
        require(std::filesystem::exists(layout_.classifier()), ErrorKind::kState,
                "no classifier at " + layout_.classifier().string() + "; run train-classifier first");
        classifier_ = classifier::load_classifier(read_file(layout_.classifier()));
        require(classifier_->config == cfg_.classifier, ErrorKind::kState,
                layout_.classifier().string() + " was trained with a different classifier configuration");
      });
    }
    return *classifier_;
  }

  // ---- compressed domain ----

  // Encoder-side latents of the train and validation splits, per rate point.
  const std::vector<taxonomy::LatentSplits>& training_latents() {
    if (!latent_splits_) {
      run_stage("latents", [&] {
        const auto& models = codecs();
        std::vector<taxonomy::LatentSplits> out;
        for (std::size_t li = 0; li < ladder_size(); ++li) {
          taxonomy::LatentSplits ls;
          ls.train = latent_set(pcloud::Split::kTrain, models[li]).examples();
          ls.val = latent_set(pcloud::Split::kVal, models[li]).examples();
          out.push_back(std::move(ls));
        }
        latent_splits_ = std::move(out);
      });
    }
    return *latent_splits_;
  }

  LatentSet latent_set(pcloud::Split s, const codec::CodecModel& model) {
    const auto samples = split(s);
    LatentSet set;
    set.shape = model.config.volume_shape();
    set.resize(samples.size());
    parallel_for(samples.size(), cfg_.threads, [&](std::size_t i) {
      const auto v = codec::extract_latents(pcloud::voxelize(samples[i]->cloud, model.config.bit_depth), model);
      set.store(i, v, static_cast<std::size_t>(samples[i]->cloud.label.value()), samples[i]->id);
    });
    return set;
  }

  // Decoder-side latents of the test split: entropy decoding only.
  LatentSet stream_latents(std::size_t li) {
    const auto test = split(pcloud::Split::kTest);
    const auto& s = streams(li);
    const auto& model = codecs().at(li);
    LatentSet set;
    set.shape = model.config.volume_shape();
    set.resize(test.size());
    parallel_for(test.size(), cfg_.threads, [&](std::size_t i) {
      set.store(i, codec::latents_from_stream(s[i], model), static_cast<std::size_t>(test[i]->cloud.label.value()),
                test[i]->id);
    });
    return set;
  }

  classifier::TrainHyper adaptation_hyper() const {
    return train_hyper(cfg_.adaptation(), stage_seed(cfg_, SeedStream::kAdaptation), cfg_.threads);
  }

  // Trains every configured compressed-domain classifier and stores them.
  void adapt() {
    timed("adapt", [&] {
      const auto& reference = classifier();
      const auto& data = training_latents();
      taxonomy::BridgeCache cache;
      adapted_.clear();
      for (const auto& tc : cfg_.taxonomy) {
        auto models = run_stage("adapt " + tc.name, [&] {
          return taxonomy::adapt_train(reference, tc, data, adaptation_hyper(), &cache);
        });
        std::filesystem::create_directories(layout_.models() / "adapted");
        for (const auto& a : models) write_file(layout_.adapted(tc.name, a.lambda_index), save_adapted(a));
        adapted_[tc.name] = std::move(models);
      }
    });
  }

  const std::vector<taxonomy::AdaptedClassifier>& adapted(const std::string& name) {
    if (!adapted_.contains(name)) {
      run_stage("load-adapted", [&] {
        std::vector<taxonomy::AdaptedClassifier> models;
        for (std::size_t li = 0; li < ladder_size(); ++li) {
          const auto path = layout_.adapted(name, li);
          require(std::filesystem::exists(path), ErrorKind::kState,
                  "missing adapted classifier '" + name + "' for lambda index " + std::to_string(li) + " (" +
                      path.string() + "); run adapt first");
          models.push_back(load_adapted(read_file(path)));
          require(models.back().lambda_index == li, ErrorKind::kFormat, path.string() + " holds another rate point");
        }
        adapted_[name] = std::move(models);
      });
    }
    return adapted_.at(name);
  }

 private:
  ExperimentConfig cfg_;
  Layout layout_;
  std::vector<std::pair<std::string, double>> timings_;

  std::optional<pcloud::Dataset> dataset_;
  std::optional<codec::CodecLadder> ladder_;
  std::optional<std::vector<codec::CodecModel>> codecs_;
  std::optional<std::vector<pcloud::PointCloudV>> test_voxels_;
  std::vector<std::vector<Bytes>> streams_;
  std::vector<std::size_t> clamped_;
  std::vector<std::optional<std::vector<pcloud::PointCloudV>>> decoded_;
  std::optional<std::vector<RdSummary>> rd_;
  std::optional<classifier::ClassifierModel> classifier_;
  std::vector<classifier::EpochRecord> classifier_history_;
  std::optional<std::vector<taxonomy::LatentSplits>> latent_splits_;
  std::map<std::string, std::vector<taxonomy::AdaptedClassifier>> adapted_;
};

}  // namespace lbpc::harness

#endif  // LBPC_HARNESS_WORKSPACE_HPP_

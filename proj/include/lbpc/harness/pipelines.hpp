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

// The four classification pipelines evaluated on the test split.

#ifndef LBPC_HARNESS_PIPELINES_HPP_
#define LBPC_HARNESS_PIPELINES_HPP_

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "lbpc/classifier/train.hpp"
#include "lbpc/codec/bitstream.hpp"
#include "lbpc/core/error.hpp"
#include "lbpc/core/parallel.hpp"
#include "lbpc/harness/workspace.hpp"
#include "lbpc/metrics/accuracy.hpp"

namespace lbpc::harness {

enum class PipelineKind { kOriginal, kVoxelized, kDecompressed, kCompressed };

inline std::string pipeline_name(PipelineKind k) {
  switch (k) {
    case PipelineKind::kOriginal: return "Original";
    case PipelineKind::kVoxelized: return "Voxelized";
    case PipelineKind::kDecompressed: return "Decompressed";
    case PipelineKind::kCompressed: return "Compressed";
  }
  return "unknown";
}

struct Prediction {
  std::size_t sample_id = 0;
  std::size_t label = 0;
  std::vector<std::size_t> ranked;  // best class first
};

struct PipelinePoint {
  std::size_t lambda_index = 0;
  double lambda = 0.0;
  double bpp = 0.0;  // mean test rate of the codec at this lambda
  double top1 = 0.0;  // percent
  double top5 = 0.0;
  std::vector<Prediction> predictions;
};

struct PipelineRun {
  PipelineKind kind = PipelineKind::kOriginal;
  std::string name;  // "Original", ..., or the taxonomy configuration name
  bool rate_dependent = true;
  std::vector<PipelinePoint> points;  // one per lambda, ladder order
};

inline std::size_t top5_k(std::size_t classes) { return std::min<std::size_t>(5, classes); }

// Runs `net` over `ex` and scores Top-1 and Top-5.
inline PipelinePoint classify(const nn::Network<float>& net, const classifier::Examples& ex,
                              const std::vector<std::size_t>& ids, int threads) {
  const auto logits = classifier::predict_logits(net, ex, threads);
  PipelinePoint p;
  std::vector<std::vector<std::size_t>> ranked;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    ranked.push_back(classifier::predict_topk(logits[i], top5_k(logits[i].size())));
    p.predictions.push_back({ids.at(i), ex.labels[i], ranked.back()});
  }
  p.top1 = metrics::topk_accuracy(ranked, ex.labels, 1);
  p.top5 = metrics::topk_accuracy(ranked, ex.labels, ranked.empty() ? 1 : ranked.front().size());
  return p;
}

inline std::vector<std::size_t> test_ids(Workspace& ws) {
  std::vector<std::size_t> ids;
  for (const auto* s : ws.split(pcloud::Split::kTest)) ids.push_back(s->id);
  return ids;
}

// Rate-independent results are repeated at every lambda so all pipelines
// share one rate axis.
inline PipelineRun baseline_run(Workspace& ws, PipelineKind kind, PipelinePoint p) {
  const auto& rd = ws.eval_rd();
  PipelineRun run{kind, pipeline_name(kind), false, {}};
  for (const auto& r : rd) {
    p.lambda_index = r.lambda_index;
    p.lambda = r.lambda;
    p.bpp = r.bpp;
    run.points.push_back(p);
  }
  return run;
}

// Float cloud -> FPS -> features -> ST classifier.
inline PipelineRun run_original(Workspace& ws) {
  return run_stage("pipeline Original", [&] {
    const auto ex = ws.original_examples(pcloud::Split::kTest);
    return baseline_run(ws, PipelineKind::kOriginal,
                        classify(ws.classifier().network, ex, test_ids(ws), ws.config().threads));
  });
}

// Voxelize -> devoxelize -> FPS -> features -> ST classifier.
inline PipelineRun run_voxelized(Workspace& ws) {
  return run_stage("pipeline Voxelized", [&] {
    const auto test = ws.split(pcloud::Split::kTest);
    const auto& vox = ws.test_voxels();
    std::vector<classifier::VoxelFeatureGrid> grids(test.size());
    std::vector<std::size_t> labels(test.size());
    parallel_for(test.size(), ws.config().threads, [&](std::size_t i) {
      grids[i] = ws.st_features(pcloud::devoxelize(vox[i]), test[i]->id);
      labels[i] = static_cast<std::size_t>(test[i]->cloud.label.value());
    });
    const auto ex = classifier::feature_examples(std::move(grids), std::move(labels));
    return baseline_run(ws, PipelineKind::kVoxelized,
                        classify(ws.classifier().network, ex, test_ids(ws), ws.config().threads));
  });
}

// Encode -> decode -> FPS -> features -> ST classifier, per lambda. A cloud
// the codec reconstructs as empty falls back to a single centre point.
inline PipelineRun run_decompressed(Workspace& ws) {
  return run_stage("pipeline Decompressed", [&] {
    const auto test = ws.split(pcloud::Split::kTest);
    const auto& rd = ws.eval_rd();
    PipelineRun run{PipelineKind::kDecompressed, pipeline_name(PipelineKind::kDecompressed), true, {}};
    for (std::size_t li = 0; li < ws.ladder_size(); ++li) {
      const auto& dec = ws.decoded(li);
      std::vector<classifier::VoxelFeatureGrid> grids(test.size());
      std::vector<std::size_t> labels(test.size());
      parallel_for(test.size(), ws.config().threads, [&](std::size_t i) {
        pcloud::PointCloudF pc = pcloud::devoxelize(dec[i]);
        if (pc.empty()) pc.points.push_back({0.0, 0.0, 0.0});
        grids[i] = ws.st_features(pc, test[i]->id);
        labels[i] = static_cast<std::size_t>(test[i]->cloud.label.value());
      });
      const auto ex = classifier::feature_examples(std::move(grids), std::move(labels));
      PipelinePoint p = classify(ws.classifier().network, ex, test_ids(ws), ws.config().threads);
      p.lambda_index = li;
      p.lambda = ws.lambda(li);
      p.bpp = rd[li].bpp;
      run.points.push_back(std::move(p));
    }
    return run;
  });
}

// Stream -> entropy-decoded latents -> adapted classifier, per lambda. The
// voxel decoder is never touched; the codec counters prove it.
inline PipelineRun run_compressed(Workspace& ws, const std::string& config_name) {
  return run_stage("pipeline Compressed " + config_name, [&] {
    const auto& rd = ws.eval_rd();
    const auto& models = ws.adapted(config_name);
    require(models.size() == ws.ladder_size(), ErrorKind::kState,
            "configuration '" + config_name + "' has no adapted classifier for every lambda");
    const auto ids = test_ids(ws);
    PipelineRun run{PipelineKind::kCompressed, config_name, true, {}};
    auto& counters = codec::codec_counters();
    for (std::size_t li = 0; li < ws.ladder_size(); ++li) {
      const std::uint64_t decodes = counters.decode_pc_calls, synth = counters.synthesis_calls;
      const LatentSet latents = ws.stream_latents(li);
      PipelinePoint p = classify(models[li].network, latents.examples(), ids, ws.config().threads);
      require(counters.decode_pc_calls == decodes && counters.synthesis_calls == synth, ErrorKind::kState,
              "compressed-domain pipeline invoked the voxel decoder");
      p.lambda_index = li;
      p.lambda = ws.lambda(li);
      p.bpp = rd[li].bpp;
      run.points.push_back(std::move(p));
    }
    return run;
  });
}

}  // namespace lbpc::harness

#endif  // LBPC_HARNESS_PIPELINES_HPP_

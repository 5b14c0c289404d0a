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

// lbpc: command-line front end for compressed-domain classification
// experiments.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lbpc/codec/bitstream.hpp"
#include "lbpc/codec/model.hpp"
#include "lbpc/core/binary_io.hpp"
#include "lbpc/core/error.hpp"
#include "lbpc/harness/config.hpp"
#include "lbpc/harness/reports.hpp"
#include "lbpc/harness/workspace.hpp"
#include "lbpc/metrics/bd.hpp"
#include "lbpc/pcloud/io.hpp"

namespace {

using lbpc::ErrorKind;
using lbpc::harness::ExperimentConfig;
using lbpc::harness::Workspace;
namespace fs = std::filesystem;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

ExperimentConfig resolve_config(const CommonFlags& f) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : lbpc::harness::load_config(f.config);
  lbpc::harness::apply_seed_env(cfg);
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.output = *f.out;
  if (f.threads) cfg.threads = *f.threads;
  return cfg;
}

void print_json(const nlohmann::ordered_json& j) { std::cout << j.dump(2) << "\n"; }

lbpc::pcloud::PointCloudV read_voxels(const fs::path& path, int bit_depth) {
  const auto ply = lbpc::pcloud::read_ply(path);
  if (ply.integer) return lbpc::pcloud::ply_to_voxels(ply, ply.bit_depth.value_or(bit_depth));
  return lbpc::pcloud::voxelize(lbpc::pcloud::ply_to_float(ply), bit_depth);
}

int encode_file(Workspace& ws, const fs::path& input, std::string output, std::string model_path, std::size_t li) {
  if (model_path.empty()) model_path = ws.layout().codec(li).string();
  const auto model = lbpc::codec::load_codec(lbpc::read_file(model_path));
  const auto ply = lbpc::pcloud::read_ply(input);
  const auto pc = read_voxels(input, model.config.bit_depth);
  const auto enc = lbpc::codec::encode_pc(pc, model);
  if (output.empty()) output = fs::path(input).replace_extension(".lbpc").string();
  lbpc::write_file(output, enc.stream);
  print_json({{"input", input.string()},
              {"output", output},
              {"lambda_index", model.lambda_index},
              {"input_points", ply.points.size()},
              {"voxels", pc.size()},
              {"blocks", enc.stats.blocks},
              {"stream_bytes", enc.stats.stream_bytes},
              {"bpp", 8.0 * static_cast<double>(enc.stats.stream_bytes) / static_cast<double>(ply.points.size())},
              {"clamped", enc.stats.clamped}});
  return 0;
}

int decode_file(Workspace& ws, const fs::path& input, std::string output, std::string model_path) {
  const auto stream = lbpc::read_file(input);
  const auto parsed = lbpc::codec::parse_stream(stream);
  if (model_path.empty()) model_path = ws.layout().codec(static_cast<std::size_t>(parsed.header.lambda_index)).string();
  const auto model = lbpc::codec::load_codec(lbpc::read_file(model_path));
  const auto pc = lbpc::codec::decode_pc(stream, model);
  if (output.empty()) output = fs::path(input).replace_extension(".ply").string();
  lbpc::pcloud::write_ply(output, pc);
  print_json({{"input", input.string()},
              {"output", output},
              {"lambda_index", parsed.header.lambda_index},
              {"blocks", parsed.blocks.size()},
              {"points", pc.size()}});
  return 0;
}

// Deltas of golden curve pairs: {"cases": [{"name", "test", "reference"}]}.
int bd_curves(const fs::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(lbpc::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    lbpc::fail(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  auto curve = [](const nlohmann::json& pts) {
    lbpc::metrics::RDCurve c;
    for (const auto& p : pts) c.push_back({p.at(0).get<double>(), p.at(1).get<double>(), false});
    return lbpc::metrics::rd_curve(c);
  };
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  try {
    for (const auto& c : doc.at("cases")) {
      const auto r = lbpc::metrics::bd_metric_ex(curve(c.at("test")), curve(c.at("reference")), true);
      nlohmann::ordered_json row{{"name", c.value("name", "")}, {"delta", r.delta}, {"order", r.order}};
      if (c.contains("delta")) row["expected"] = c["delta"];
      out.push_back(row);
    }
  } catch (const nlohmann::json::exception& e) {
    lbpc::fail(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  print_json(out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lbpc: learned point-cloud coding and compressed-domain classification"};
  app.require_subcommand(1);
  CommonFlags flags;
  app.add_option("--config", flags.config, "experiment configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", flags.seed, "global seed; overrides LB_SEED and the config");
  app.add_option("--out", flags.out, "output directory");
  app.add_option("--threads", flags.threads, "worker threads")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  auto* train_codec = app.add_subcommand("train-codec", "train the codec ladder");
  auto* encode = app.add_subcommand("encode", "encode the test split, or one PLY file");
  auto* decode = app.add_subcommand("decode", "decode one stream to PLY");
  auto* eval_rd = app.add_subcommand("eval-rd", "rate and D1 PSNR of the encoded test split");
  auto* train_cls = app.add_subcommand("train-classifier", "train the ST-domain classifier");
  auto* adapt = app.add_subcommand("adapt", "train the compressed-domain classifiers");
  auto* eval_pipes = app.add_subcommand("eval-pipelines", "evaluate all classification pipelines");
  auto* bd = app.add_subcommand("bd-report", "BD-Top-k against the Decompressed pipeline");
  auto* sweep = app.add_subcommand("sweep", "freeze-boundary sensitivity sweep");
  auto* run_all = app.add_subcommand("run-all", "run every stage and write all reports");
  for (auto* sub : app.get_subcommands([](CLI::App*) { return true; })) sub->fallthrough();

  std::string input, output, model;
  std::size_t lambda_index = 0;
  encode->add_option("--input", input, "PLY file; omit to encode the test split");
  encode->add_option("--output", output, "stream path (default: input with .lbpc)");
  encode->add_option("--model", model, "codec model (default: out/models/codec_l<i>.lbcm)");
  encode->add_option("--lambda-index", lambda_index, "ladder position of the codec model");
  decode->add_option("--input", input, "stream file")->required();
  decode->add_option("--output", output, "PLY path (default: input with .ply)");
  decode->add_option("--model", model, "codec model (default: from the stream header)");
  std::string curves;
  bd->add_option("--curves", curves, "JSON file of curve pairs; prints their deltas")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    std::cerr << "error: argument: cli: " << e.what() << "\n";
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return lbpc::harness::run_stage(command, [&]() -> int {
      Workspace ws(resolve_config(flags));
      namespace h = lbpc::harness;
      if (*bd && !curves.empty()) return bd_curves(curves);
      if (*decode) return decode_file(ws, input, output, model);
      if (*encode && !input.empty()) return encode_file(ws, input, output, model, lambda_index);
      h::validate_experiment(ws.config());
      if (*gen) {
        ws.generate_dataset();
      } else if (*train_codec) {
        h::write_codec_log(ws, ws.train_codec());
      } else if (*encode) {
        ws.encode_streams();
      } else if (*eval_rd) {
        h::write_rd_report(ws);
      } else if (*train_cls) {
        ws.train_classifier();
        h::write_classifier_log(ws);
      } else if (*adapt) {
        ws.adapt();
        h::write_compat_report(ws);
      } else if (*eval_pipes) {
        h::write_classification(ws, h::eval_pipelines(ws));
      } else if (*bd) {
        h::write_bd_report(ws, h::load_classification(ws.layout().report("classification.csv")));
      } else if (*sweep) {
        h::run_sweep(ws);
      } else if (*run_all) {
        h::run_experiment(ws);
      }
      double seconds = 0.0;
      for (const auto& [stage, s] : ws.timings()) seconds += s;
      std::cout << command << ": done in " << h::num(seconds, 1) << " s; output under " << ws.layout().root.string()
                << "\n";
      return 0;
    });
  } catch (const lbpc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: state: " << command << ": " << e.what() << "\n";
    return 1;
  }
}

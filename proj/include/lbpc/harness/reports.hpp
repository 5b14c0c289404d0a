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

// CSV, JSON and SVG reports, and the full experiment driver.
//
// Every CSV row ends with the provenance columns config_hash, seed and
// build_tag. CSVs hold no timings, so reruns compare byte for byte; wall
// clock goes to reports/run.json.

#ifndef LBPC_HARNESS_REPORTS_HPP_
#define LBPC_HARNESS_REPORTS_HPP_

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lbpc/harness/pipelines.hpp"
#include "lbpc/harness/workspace.hpp"
#include "lbpc/metrics/bd.hpp"
#include "lbpc/metrics/svg.hpp"
#include "lbpc/taxonomy/json.hpp"

namespace lbpc::harness {

inline constexpr char kRateBasis[] = "stream bits per original input point";

inline std::string num(double v, int digits = 6) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string lambda_str(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

class CsvTable {
 public:
  CsvTable(std::string header, Provenance prov) : prov_(std::move(prov)) {
    text_ = header + ",config_hash,seed,build_tag\n";
  }
  void row(const std::string& cells) {
    text_ += cells + "," + prov_.config_hash + "," + std::to_string(prov_.seed) + "," + prov_.build_tag + "\n";
  }
  void write(const std::filesystem::path& path) const {
    std::filesystem::create_directories(path.parent_path());
    write_text(path, text_);
  }
  const std::string& text() const { return text_; }

 private:
  Provenance prov_;
  std::string text_;
};

// Names may contain anything but the separator structure survives.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline void write_codec_log(Workspace& ws, const codec::CodecLadder& ladder) {
  CsvTable t("lambda_index,lambda,epoch,loss,focal,bits_per_occupied", ws.provenance());
  for (const auto& e : ladder.log) {
    t.row(std::to_string(e.lambda_index) + "," + lambda_str(e.lambda) + "," + std::to_string(e.epoch) + "," +
          num(e.loss) + "," + num(e.focal) + "," + num(e.bits_per_occupied));
  }
  t.write(ws.layout().report("codec_training.csv"));
}

inline void write_classifier_log(Workspace& ws) {
  CsvTable t("epoch,train_loss,val_top1,lr", ws.provenance());
  for (const auto& e : ws.classifier_history()) {
    t.row(std::to_string(e.epoch) + "," + num(e.train_loss) + "," + num(e.val_top1) + "," + num(e.lr, 8));
  }
  t.write(ws.layout().report("classifier_training.csv"));
}

inline void write_rd_report(Workspace& ws) {
  const auto& rd = ws.eval_rd();
  CsvTable summary("lambda_index,lambda,mean_bpp,mean_psnr_d1,lossless_clouds,test_clouds,rate_basis", ws.provenance());
  CsvTable clouds("lambda_index,lambda,sample_id,input_points,decoded_points,stream_bytes,bpp,psnr_d1", ws.provenance());
  metrics::Series series{"learned codec", {}, false};
  for (const auto& r : rd) {
    summary.row(std::to_string(r.lambda_index) + "," + lambda_str(r.lambda) + "," + num(r.bpp) + "," + num(r.psnr) +
                "," + std::to_string(r.infinite) + "," + std::to_string(r.clouds.size()) + "," + kRateBasis);
    for (const auto& c : r.clouds) {
      clouds.row(std::to_string(r.lambda_index) + "," + lambda_str(r.lambda) + "," + std::to_string(c.sample_id) + "," +
                 std::to_string(c.input_points) + "," + std::to_string(c.decoded_points) + "," +
                 std::to_string(c.stream_bytes) + "," + num(c.bpp) + "," + (c.infinite ? "inf" : num(c.psnr)));
    }
    series.points.emplace_back(r.bpp, r.psnr);
  }
  summary.write(ws.layout().report("rd.csv"));
  clouds.write(ws.layout().report("rd_clouds.csv"));
  write_text(ws.layout().report("rd.svg"),
             metrics::svg_plot("Rate-distortion (test split)", "rate (bpp)", "D1 PSNR (dB)", {series}));
}

inline void write_compat_report(Workspace& ws) {
  const std::size_t reference = ws.classifier().network.parameter_count();
  CsvTable t(taxonomy::compat_csv_header() + ",parameters,reference_parameters,within_budget", ws.provenance());
  taxonomy::Json all = taxonomy::Json::array();
  CsvTable log("solution,lambda_index,lambda,bridge_steps,finetune_steps,bridge_val_top1,finetune_val_top1",
               ws.provenance());
  for (const auto& tc : ws.config().taxonomy) {
    const auto& models = ws.adapted(tc.name);
    const auto& a = models.front();
    const std::size_t params = a.network.parameter_count();
    t.row(taxonomy::compat_csv_row(csv_field(tc.name), a.compat) + "," + std::to_string(params) + "," +
          std::to_string(reference) + "," + (params < reference ? "yes" : "no"));
    taxonomy::Json j = taxonomy::compat_to_json(a.compat);
    j["solution"] = tc.name;
    j["configuration"] = taxonomy::config_to_json(tc);
    j["parameters"] = params;
    j["reference_parameters"] = reference;
    all.push_back(j);
    for (const auto& m : models) {
      log.row(csv_field(tc.name) + "," + std::to_string(m.lambda_index) + "," + lambda_str(ws.lambda(m.lambda_index)) +
              "," + std::to_string(m.bridge_steps) + "," + std::to_string(m.finetune_steps) + "," +
              num(m.bridge_val_top1) + "," + num(m.finetune_val_top1));
    }
  }
  t.write(ws.layout().report("compat.csv"));
  log.write(ws.layout().report("adaptation.csv"));
  write_text(ws.layout().report("compat.json"), all.dump(2) + "\n");
}

inline void write_classification(Workspace& ws, const std::vector<PipelineRun>& runs) {
  CsvTable t("pipeline,kind,lambda_index,lambda,bpp,top1,top5,rate_dependent,rate_basis", ws.provenance());
  CsvTable p("pipeline,lambda_index,sample_id,label,predicted,ranked", ws.provenance());
  std::vector<metrics::Series> s1, s5;
  for (const auto& run : runs) {
    metrics::Series a{run.name, {}, !run.rate_dependent}, b = a;
    for (const auto& pt : run.points) {
      t.row(csv_field(run.name) + "," + pipeline_name(run.kind) + "," + std::to_string(pt.lambda_index) + "," +
            lambda_str(pt.lambda) + "," + num(pt.bpp) + "," + num(pt.top1, 4) + "," + num(pt.top5, 4) + "," +
            (run.rate_dependent ? "yes" : "no") + "," + kRateBasis);
      a.points.emplace_back(pt.bpp, pt.top1);
      b.points.emplace_back(pt.bpp, pt.top5);
      // Rate-independent pipelines log their predictions once.
      if (!run.rate_dependent && pt.lambda_index != run.points.front().lambda_index) continue;
      for (const auto& pr : pt.predictions) {
        std::string ranked;
        for (std::size_t c : pr.ranked) ranked += (ranked.empty() ? "" : " ") + std::to_string(c);
        p.row(csv_field(run.name) + "," + (run.rate_dependent ? std::to_string(pt.lambda_index) : "") + "," +
              std::to_string(pr.sample_id) + "," + std::to_string(pr.label) + "," +
              std::to_string(pr.ranked.front()) + "," + ranked);
      }
    }
    s1.push_back(std::move(a));
    s5.push_back(std::move(b));
  }
  t.write(ws.layout().report("classification.csv"));
  p.write(ws.layout().report("predictions.csv"));
  write_text(ws.layout().report("top1.svg"), metrics::svg_plot("Top-1 accuracy", "rate (bpp)", "Top-1 (%)", s1));
  write_text(ws.layout().report("top5.svg"), metrics::svg_plot("Top-5 accuracy", "rate (bpp)", "Top-5 (%)", s5));
}

// Reads classification.csv back into runs, without predictions.
inline std::vector<PipelineRun> load_classification(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::kFormat, path.string() + " is empty");
  auto split_csv = [](const std::string& s) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const char c = s[i];
      if (quoted) {
        if (c == '"' && i + 1 < s.size() && s[i + 1] == '"') {
          out.back() += '"';
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          out.back() += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        out.emplace_back();
      } else {
        out.back() += c;
      }
    }
    return out;
  };
  const auto header = split_csv(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* k : {"pipeline", "kind", "lambda_index", "lambda", "bpp", "top1", "top5", "rate_dependent"}) {
    require(col.contains(k), ErrorKind::kFormat, path.string() + " lacks column '" + k + "'");
  }
  std::vector<PipelineRun> runs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    require(f.size() == header.size(), ErrorKind::kFormat, path.string() + ": ragged row");
    const std::string& name = f[col["pipeline"]];
    if (runs.empty() || runs.back().name != name) {
      PipelineRun r;
      r.name = name;
      const std::string& kind = f[col["kind"]];
      r.kind = kind == "Original"       ? PipelineKind::kOriginal
               : kind == "Voxelized"    ? PipelineKind::kVoxelized
               : kind == "Decompressed" ? PipelineKind::kDecompressed
                                        : PipelineKind::kCompressed;
      r.rate_dependent = f[col["rate_dependent"]] == "yes";
      runs.push_back(std::move(r));
    }
    PipelinePoint p;
    try {
      p.lambda_index = std::stoul(f[col["lambda_index"]]);
      p.lambda = std::stod(f[col["lambda"]]);
      p.bpp = std::stod(f[col["bpp"]]);
      p.top1 = std::stod(f[col["top1"]]);
      p.top5 = std::stod(f[col["top5"]]);
    } catch (const std::exception&) {
      fail(ErrorKind::kFormat, path.string() + ": bad number in row '" + line + "'");
    }
    runs.back().points.push_back(std::move(p));
  }
  return runs;
}

struct BdRow {
  std::string solution;
  std::optional<metrics::BdResult> top1, top5;
  std::size_t points = 0;
  std::string note;
};

// BD-Top-1 and BD-Top-5 of every compressed-domain run against the
// Decompressed pipeline.
inline std::vector<BdRow> bd_rows(const std::vector<PipelineRun>& runs) {
  const PipelineRun* ref = nullptr;
  for (const auto& r : runs)
    if (r.kind == PipelineKind::kDecompressed) ref = &r;
  require(ref != nullptr, ErrorKind::kState, "no Decompressed pipeline results to use as the BD reference");
  auto curve = [](const PipelineRun& r, bool top5) {
    std::vector<metrics::RDPoint> pts;
    for (const auto& p : r.points) pts.push_back({p.bpp, top5 ? p.top5 : p.top1, false});
    return metrics::rd_curve(pts);
  };
  std::vector<BdRow> rows;
  for (const auto& r : runs) {
    if (r.kind != PipelineKind::kCompressed) continue;
    BdRow row;
    row.solution = r.name;
    row.points = r.points.size();
    try {
      row.top1 = metrics::bd_metric_ex(curve(r, false), curve(*ref, false), true);
      row.top5 = metrics::bd_metric_ex(curve(r, true), curve(*ref, true), true);
      if (row.top1->reduced) {
        row.note = "fewer than 4 rate points; order-" + std::to_string(row.top1->order) + " fit";
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kArgument) throw;
      row.top1.reset();
      row.top5.reset();
      const std::string what = e.what();
      row.note = what.substr(std::min(what.size(), error_kind_name(e.kind()).size() + 2));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_bd_report(Workspace& ws, const std::vector<PipelineRun>& runs) {
  CsvTable t("solution,reference,bd_top1,bd_top5,fit_order,reduced_order,rate_points,note,rate_basis",
             ws.provenance());
  for (const auto& r : bd_rows(runs)) {
    t.row(csv_field(r.solution) + ",Decompressed," + (r.top1 ? num(r.top1->delta, 4) : "") + "," +
          (r.top5 ? num(r.top5->delta, 4) : "") + "," + (r.top1 ? std::to_string(r.top1->order) : "") + "," +
          (r.top1 ? (r.top1->reduced ? "yes" : "no") : "") + "," + std::to_string(r.points) + "," +
          csv_field(r.note) + "," + kRateBasis);
  }
  t.write(ws.layout().report("bd.csv"));
}

inline std::vector<PipelineRun> eval_pipelines(Workspace& ws) {
  return ws.timed("eval-pipelines", [&] {
    std::vector<PipelineRun> runs;
    runs.push_back(run_original(ws));
    runs.push_back(run_voxelized(ws));
    runs.push_back(run_decompressed(ws));
    for (const auto& tc : ws.config().taxonomy) runs.push_back(run_compressed(ws, tc.name));
    return runs;
  });
}

inline std::vector<taxonomy::SweepRow> run_sweep(Workspace& ws) {
  return ws.timed("sweep", [&] {
    const auto& reference = ws.classifier();
    std::vector<classifier::Examples> test;
    for (std::size_t li = 0; li < ws.ladder_size(); ++li) test.push_back(ws.stream_latents(li).examples());
    classifier::TrainHyper hyper = ws.adaptation_hyper();
    hyper.seed = stage_seed(ws.config(), SeedStream::kSweep);
    if (ws.config().sweep_epochs) hyper.max_epochs = *ws.config().sweep_epochs;
    const auto& rd = ws.eval_rd();
    CsvTable t("configuration,frozen_units,partial_units,layers,weights_compat,tier,lambda_index,lambda,bpp,top1,top5",
               ws.provenance());
    taxonomy::BridgeCache cache;
    auto rows = taxonomy::sensitivity_sweep(reference, ws.training_latents(), test, hyper, &cache,
                                            [&](const taxonomy::SweepRow& r) {
      for (std::size_t li = 0; li < r.top1.size(); ++li) {
        t.row(csv_field(r.config.name) + "," + std::to_string(r.frozen_units) + "," +
              std::to_string(r.partial_units) + "," + std::to_string(r.compat.shared_layers) + "/" +
              std::to_string(r.compat.total_layers) + "," + taxonomy::percent(r.compat.weights_compat()) + "," +
              taxonomy::tier_name(r.compat.tier()) + "," + std::to_string(li) + "," + lambda_str(ws.lambda(li)) +
              "," + num(rd[li].bpp) + "," + num(r.top1[li], 4) + "," + num(r.top5[li], 4));
      }
      // Partial results survive an interrupted sweep.
      t.write(ws.layout().report("sweep.csv"));
    });
    t.write(ws.layout().report("sweep.csv"));
    return rows;
  });
}

inline void write_run_json(Workspace& ws, double total_seconds) {
  Json j;
  const Provenance p = ws.provenance();
  j["provenance"] = {{"config_hash", p.config_hash}, {"seed", p.seed}, {"build_tag", p.build_tag}};
  j["rate_basis"] = kRateBasis;
  j["config"] = config_to_json(ws.config());
  Json timings = Json::array();
  for (const auto& [stage, seconds] : ws.timings()) timings.push_back({{"stage", stage}, {"seconds", seconds}});
  j["timings"] = timings;
  j["total_seconds"] = total_seconds;
  Json clamped = Json::array();
  for (std::size_t li = 0; li < ws.ladder_size(); ++li) {
    const auto c = ws.clamped(li);
    clamped.push_back(c ? Json(*c) : Json(nullptr));
  }
  j["clamped_symbols"] = clamped;
  const auto& counters = codec::codec_counters();
  j["codec_calls"] = {{"analysis", counters.analysis_calls.load()},
                      {"synthesis", counters.synthesis_calls.load()},
                      {"range_encodes", counters.range_encodes.load()},
                      {"range_decodes", counters.range_decodes.load()},
                      {"decode_pc", counters.decode_pc_calls.load()}};
  write_text(ws.layout().report("run.json"), j.dump(2) + "\n");
}

// Every stage in order, writing the full report bundle.
inline std::vector<PipelineRun> run_experiment(Workspace& ws) {
  const auto start = std::chrono::steady_clock::now();
  run_stage("validate", [&] { validate_experiment(ws.config()); });
  std::filesystem::create_directories(ws.layout().reports());
  ws.generate_dataset();
  write_codec_log(ws, ws.train_codec());
  ws.encode_streams();
  write_rd_report(ws);
  ws.train_classifier();
  write_classifier_log(ws);
  ws.adapt();
  write_compat_report(ws);
  auto runs = eval_pipelines(ws);
  write_classification(ws, runs);
  run_stage("bd-report", [&] { write_bd_report(ws, runs); });
  if (ws.config().sweep) run_sweep(ws);
  write_run_json(ws, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  return runs;
}

}  // namespace lbpc::harness

#endif  // LBPC_HARNESS_REPORTS_HPP_

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

// ASCII PLY (vertex x, y, z only) and the JSON dataset manifest.

#ifndef LBPC_PCLOUD_IO_HPP_
#define LBPC_PCLOUD_IO_HPP_

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lbpc/core/binary_io.hpp"
#include "lbpc/core/error.hpp"
#include "lbpc/pcloud/dataset.hpp"
#include "lbpc/pcloud/point_cloud.hpp"

namespace lbpc::pcloud {

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string to_ply(const PointCloudF& pc) {
  std::string out = "ply\nformat ascii 1.0\n";
  if (pc.label) out += "comment label " + std::to_string(*pc.label) + "\n";
  out += "element vertex " + std::to_string(pc.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\nend_header\n";
  for (const Point& p : pc.points) {
    out += format_double(p[0]) + ' ' + format_double(p[1]) + ' ' + format_double(p[2]) + '\n';
  }
  return out;
}

inline std::string to_ply(const PointCloudV& pc) {
  std::string out = "ply\nformat ascii 1.0\n";
  out += "comment bit_depth " + std::to_string(pc.bit_depth()) + "\n";
  out += "element vertex " + std::to_string(pc.size()) + "\n";
  out += "property int x\nproperty int y\nproperty int z\nend_header\n";
  for (const Voxel& v : pc.points()) {
    out += std::to_string(v[0]) + ' ' + std::to_string(v[1]) + ' ' + std::to_string(v[2]) + '\n';
  }
  return out;
}

struct PlyData {
  std::vector<Point> points;
  bool integer = false;
  std::optional<int> label;
  std::optional<int> bit_depth;
};

inline PlyData parse_ply(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(std::getline(in, line) && line == "ply", ErrorKind::kFormat, "missing 'ply' magic line");
  PlyData data;
  long vertices = -1;
  bool in_vertex = false;
  std::vector<std::string> props;
  int ix = -1, iy = -1, iz = -1;
  bool ended = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      require(fmt == "ascii", ErrorKind::kFormat, "only ascii PLY is supported, got '" + fmt + "'");
    } else if (word == "comment") {
      std::string key;
      int value;
      if (ls >> key >> value) {
        if (key == "label") data.label = value;
        if (key == "bit_depth") data.bit_depth = value;
      }
    } else if (word == "element") {
      std::string name;
      long count;
      ls >> name >> count;
      in_vertex = name == "vertex";
      if (in_vertex) vertices = count;
    } else if (word == "property") {
      if (!in_vertex) continue;
      std::string type, name;
      ls >> type >> name;
      require(type != "list", ErrorKind::kFormat, "list properties on vertices are not supported");
      if (name == "x") ix = static_cast<int>(props.size());
      if (name == "y") iy = static_cast<int>(props.size());
      if (name == "z") iz = static_cast<int>(props.size());
      if (name == "x" || name == "y" || name == "z") {
        const bool is_int = type.find("int") != std::string::npos || type == "char" || type == "uchar" ||
                            type == "short" || type == "ushort";
        data.integer = props.empty() ? is_int : (data.integer && is_int);
      }
      props.push_back(name);
    } else if (word == "end_header") {
      ended = true;
      break;
    }
  }
  require(ended, ErrorKind::kFormat, "PLY header has no end_header");
  require(vertices >= 0, ErrorKind::kFormat, "PLY header has no vertex element");
  require(ix >= 0 && iy >= 0 && iz >= 0, ErrorKind::kFormat, "PLY vertex element lacks x, y or z");
  data.points.reserve(static_cast<std::size_t>(vertices));
  std::vector<double> row(props.size());
  for (long i = 0; i < vertices; ++i) {
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::kTruncated,
            "PLY body ends after " + std::to_string(i) + " of " + std::to_string(vertices) + " vertices");
    std::istringstream ls(line);
    for (auto& v : row) {
      require(static_cast<bool>(ls >> v), ErrorKind::kFormat, "malformed PLY vertex line " + std::to_string(i));
    }
    data.points.push_back({row[ix], row[iy], row[iz]});
  }
  return data;
}

inline PointCloudF ply_to_float(const PlyData& data) {
  PointCloudF pc;
  pc.points = data.points;
  pc.label = data.label;
  require(pc.valid(), ErrorKind::kFormat, "PLY coordinates are not finite values in [-1, 1]");
  return pc;
}

inline PointCloudV ply_to_voxels(const PlyData& data, int bit_depth) {
  std::vector<Voxel> v;
  v.reserve(data.points.size());
  for (const Point& p : data.points) {
    v.push_back({static_cast<std::int32_t>(p[0]), static_cast<std::int32_t>(p[1]), static_cast<std::int32_t>(p[2])});
  }
  return PointCloudV(std::move(v), data.bit_depth.value_or(bit_depth));
}

inline void write_ply(const std::filesystem::path& path, const PointCloudF& pc) { write_text(path, to_ply(pc)); }
inline void write_ply(const std::filesystem::path& path, const PointCloudV& pc) { write_text(path, to_ply(pc)); }
inline PlyData read_ply(const std::filesystem::path& path) { return parse_ply(read_text(path)); }

// Writes one PLY per sample under dir/clouds and a manifest.json listing
// path, label and split.
inline void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir / "clouds");
  nlohmann::ordered_json manifest;
  manifest["num_classes"] = ds.spec.num_classes;
  manifest["per_class"] = ds.spec.per_class;
  manifest["points_per_cloud"] = ds.spec.points_per_cloud;
  manifest["seed"] = ds.spec.seed;
  std::vector<std::string> names;
  for (int c = 0; c < ds.spec.num_classes; ++c) names.emplace_back(kShapeNames[c]);
  manifest["class_names"] = names;
  auto clouds = nlohmann::ordered_json::array();
  for (const Sample& s : ds.samples) {
    char name[32];
    std::snprintf(name, sizeof(name), "clouds/%05zu.ply", s.id);
    write_ply(dir / name, s.cloud);
    clouds.push_back({{"id", s.id}, {"path", name}, {"label", s.cloud.label.value_or(-1)},
                      {"split", split_name(s.split)}});
  }
  manifest["clouds"] = clouds;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("dataset manifest: ") + e.what());
  }
  Dataset ds;
  try {
    ds.spec.num_classes = manifest.at("num_classes").get<int>();
    ds.spec.per_class = manifest.at("per_class").get<int>();
    ds.spec.points_per_cloud = manifest.at("points_per_cloud").get<int>();
    ds.spec.seed = manifest.at("seed").get<std::uint64_t>();
    for (const auto& entry : manifest.at("clouds")) {
      Sample s;
      s.id = entry.at("id").get<std::size_t>();
      s.split = parse_split(entry.at("split").get<std::string>());
      s.cloud = ply_to_float(read_ply(dir / entry.at("path").get<std::string>()));
      s.cloud.label = entry.at("label").get<int>();
      ds.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("dataset manifest: ") + e.what());
  }
  return ds;
}

}  // namespace lbpc::pcloud

#endif  // LBPC_PCLOUD_IO_HPP_

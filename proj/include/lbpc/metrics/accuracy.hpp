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

#ifndef LBPC_METRICS_ACCURACY_HPP_
#define LBPC_METRICS_ACCURACY_HPP_

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lbpc/core/error.hpp"

namespace lbpc::metrics {

// Percentage of examples whose label is among the first k entries of the
// ranked prediction list.
inline double topk_accuracy(std::span<const std::vector<std::size_t>> ranked, std::span<const std::size_t> truth,
                            std::size_t k) {
  require(ranked.size() == truth.size(), ErrorKind::kArgument,
          std::to_string(ranked.size()) + " predictions for " + std::to_string(truth.size()) + " labels");
  require(k >= 1, ErrorKind::kArgument, "k must be at least 1");
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto end = ranked[i].begin() + static_cast<std::ptrdiff_t>(std::min(k, ranked[i].size()));
    hits += std::find(ranked[i].begin(), end, truth[i]) != end;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace lbpc::metrics

#endif  // LBPC_METRICS_ACCURACY_HPP_

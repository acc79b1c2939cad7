/*
 * Copyright 2026 The HIM Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "him/data.hpp"
#include "him/pipeline.hpp"
#include "json.hpp"

namespace him::synth {

// Long-tail interaction log with planted user groups.
//
// Items are split into `groups` contiguous blocks. Group g puts mass
// `affinity` on its own block (Zipf(item_exponent) by rank inside the block)
// and spreads the rest uniformly over the catalog. Every positive is preceded
// by `impressions` unclicked items that follow the group distribution with
// probability `impression_affinity` and the uniform one otherwise.
struct SynthSpec {
  std::size_t users = 5000;
  std::size_t items = 500;
  double zipf_exponent = 1.1;     // per-user positive count
  std::size_t max_positives = 20;
  std::size_t groups = 5;
  double affinity = 0.9;
  double item_exponent = 0.8;
  double noise = 0.1;             // uniform random clicks
  double repeat = 0.1;            // re-click of an earlier positive
  std::size_t impressions = 2;
  double impression_affinity = 0.5;
  std::size_t categories_per_group = 4;
  std::size_t brands = 20;
  std::size_t shops = 10;
  // Activity: every user clicks at least once in the last `recent_days`;
  // later clicks land there with probability `recent_share`, otherwise
  // uniformly over the last `span_days`.
  std::int64_t span_days = 540;
  std::int64_t recent_days = 14;
  double recent_share = 0.3;
  std::int64_t end_time = 1700000000;
  std::uint64_t seed = 1;

  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys are errors.
  static SynthSpec from_json(const nlohmann::json& j);
  static SynthSpec load(const std::filesystem::path& path);

  // Item distribution of group g over the whole catalog.
  std::vector<double> preference(std::size_t g) const;
};

struct SynthData {
  std::vector<data::Interaction> records;
  std::vector<data::RawItemMeta> meta;
  std::vector<std::string> user_ids;
  std::vector<std::int64_t> user_group;  // parallel to user_ids
};

SynthData generate(const SynthSpec& spec);

RawData to_raw(const SynthData& d);

// interactions.csv (with feedback), items.csv, dataset.json and groups.csv
// (user_id,group_id).
void write(const std::filesystem::path& dir, const SynthData& d);

using GroupMap = std::unordered_map<std::string, std::int64_t>;

GroupMap load_groups(const std::filesystem::path& path);

// Best one-to-one relabeling accuracy of `predicted` against `truth`.
double group_recovery_score(const GroupMap& predicted, const GroupMap& truth);

// Maximum-weight assignment on a rectangular matrix; result[r] is the column
// given to row r, or -1.
std::vector<std::int64_t> max_assignment(const std::vector<std::vector<double>>& w);

}  // namespace him::synth

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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "him/data.hpp"
#include "him/model.hpp"

namespace him {

struct DataConfig {
  std::size_t min_user_positives = 1;
  std::size_t min_item_users = 5;
  int negative_ratio = 5;
  data::SplitMode split = data::SplitMode::RandomByUser;
  // Fixed across repetitions: negative sampling and splits use this seed.
  std::uint64_t data_seed = 1;
  // Unset: dataset.json, else true when the log carries a feedback column.
  std::optional<bool> has_real_negatives;
};

struct EvalConfig {
  std::size_t repetitions = 5;
  std::vector<model::Variant> variants{model::Variant::Base, model::Variant::Ubp,
                                       model::Variant::Him};
};

// Everything a run needs, read from a flat `key = value` file. Lines
// starting with '#' are comments. Unknown keys are errors.
struct RunConfig {
  model::HimConfig model;
  DataConfig data;
  EvalConfig eval;

  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  // Canonical key -> value form; parse(to_text()) reproduces the config.
  std::map<std::string, std::string> to_map() const;
  std::string to_text() const;
  void validate() const;
};

}  // namespace him

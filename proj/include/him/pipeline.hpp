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
#include <vector>

#include "him/config.hpp"
#include "him/data.hpp"
#include "him/model.hpp"
#include "him/params.hpp"

namespace him {

struct RawData {
  std::vector<data::Interaction> records;
  std::vector<data::RawItemMeta> meta;
  bool has_real_negatives = false;
  std::size_t lines = 0;
  std::size_t malformed = 0;
};

// Reads interactions.csv or interactions.jsonl, optional items.csv and
// dataset.json ({"has_real_negatives": bool}) from `dir`. Rating-only logs
// are labeled from ratings.
RawData load_raw(const std::filesystem::path& dir, const DataConfig& cfg);

struct Prepared {
  data::Dataset dataset;
  data::DatasetSplit split;
  std::size_t raw_records = 0;
  std::size_t kept_records = 0;
};

// Filter, index, sample negatives and split, all seeded by data_seed.
Prepared prepare(const RawData& raw, const DataConfig& cfg);
// Same, indexed against a checkpoint's item vocabularies.
Prepared prepare(const RawData& raw, const DataConfig& cfg, const data::ItemVocabularies& vocab);
Prepared prepare_dir(const std::filesystem::path& dir, const DataConfig& cfg);

// FNV-1a over every sample of the three parts, in order.
std::uint64_t split_hash(const data::DatasetSplit& split);

// train.csv, validation.csv, test.csv as user_id,item_id,timestamp,label.
void write_split(const std::filesystem::path& dir, const Prepared& p);

struct Checkpoint {
  RunConfig config;
  model::ModelShape shape;
  data::ItemVocabularies vocab;
  ag::ParamStore params;
};

void save_checkpoint(const std::filesystem::path& path, const RunConfig& cfg,
                     const model::HimModel& model, const data::Dataset& ds);
void save_checkpoint(const std::filesystem::path& path, const RunConfig& cfg,
                     const model::HimModel& model, const data::ItemVocabularies& vocab);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace him

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
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace him::data {

enum class Feedback : std::uint8_t { Positive, Negative };

struct Interaction {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp = 0;  // seconds since epoch
  Feedback feedback = Feedback::Positive;
  std::optional<int> rating;  // 1..5, raw review data only

  bool operator==(const Interaction&) const = default;
};

enum class FileFormat { Csv, Jsonl };

FileFormat format_from_path(const std::filesystem::path& path);

struct LoadResult {
  std::vector<Interaction> records;
  std::size_t lines = 0;
  std::size_t malformed = 0;
  bool has_rating = false;
  bool has_feedback = false;
};

// Reads `user_id,item_id,timestamp[,rating][,feedback]` CSV (header row
// required, columns matched by name) or JSONL with the same keys.
// Malformed records are skipped and counted; more than 10% malformed is
// fatal.
LoadResult load_interactions(const std::filesystem::path& path,
                             FileFormat format);

void write_interactions(const std::filesystem::path& path,
                        std::span<const Interaction> records,
                        FileFormat format = FileFormat::Csv);

// rating >= 4 -> Positive, rating <= 3 -> Negative. Every record needs a
// rating.
std::vector<Interaction> label_from_ratings(std::vector<Interaction> records);

// Alternates the user filter (at least `min_user_positives` positive
// records) and the item filter (at least `min_item_users` distinct users)
// until neither removes anything.
std::vector<Interaction> filter_sparse(std::span<const Interaction> records,
                                       std::size_t min_user_positives,
                                       std::size_t min_item_users);

// String -> dense index map. Index 0 is PAD/unknown.
class Vocabulary {
 public:
  explicit Vocabulary(std::string name = {});

  std::int32_t add(const std::string& key);
  // 0 when unknown.
  std::int32_t index(const std::string& key) const;
  bool contains(const std::string& key) const;
  const std::string& key(std::int32_t index) const;

  std::size_t size() const { return keys_.size(); }
  const std::string& name() const { return name_; }
  const std::vector<std::string>& keys() const { return keys_; }

  static Vocabulary from_keys(std::string name, std::vector<std::string> keys);

 private:
  std::string name_;
  std::vector<std::string> keys_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct RawItemMeta {
  std::string item_id;
  std::string category;
  std::string brand;
  std::string shop;
  std::optional<double> price;
};

// `item_id,category,brand,shop,price` CSV with header.
std::vector<RawItemMeta> load_item_meta(const std::filesystem::path& path);
void write_item_meta(const std::filesystem::path& path,
                     std::span<const RawItemMeta> items);

inline constexpr std::int32_t kPriceBuckets = 17;
// 0 for unknown price, otherwise 1 + min(15, floor(log2(1 + price))).
std::int32_t price_bucket(std::optional<double> price);

struct ItemFeatures {
  std::int32_t category = 0;
  std::int32_t brand = 0;
  std::int32_t shop = 0;
  std::int32_t price_bucket = 0;
};

struct Event {
  std::int32_t item = 0;
  std::int64_t timestamp = 0;
  Feedback feedback = Feedback::Positive;

  bool operator==(const Event&) const = default;
};

// Indexed interaction log. Histories are sorted by (timestamp, feedback,
// item); index 0 of every table is PAD.
struct Dataset {
  Vocabulary users{"user"};
  Vocabulary items{"item"};
  Vocabulary categories{"category"};
  Vocabulary brands{"brand"};
  Vocabulary shops{"shop"};
  std::vector<ItemFeatures> item_features;
  std::vector<std::vector<Event>> histories;
  bool has_real_negatives = false;
  std::int64_t max_timestamp = 0;

  std::size_t positive_count(std::int32_t user) const;
};

Dataset build_dataset(std::span<const Interaction> records,
                      std::span<const RawItemMeta> meta,
                      bool has_real_negatives);

// Item-side tables frozen at training time.
struct ItemVocabularies {
  Vocabulary items{"item"};
  Vocabulary categories{"category"};
  Vocabulary brands{"brand"};
  Vocabulary shops{"shop"};
  std::vector<ItemFeatures> features;

  static ItemVocabularies of(const Dataset& ds);
};

// Indexes `records` against fixed item vocabularies. Users are indexed
// afresh; events on unknown items are dropped.
Dataset build_dataset(std::span<const Interaction> records, bool has_real_negatives,
                      const ItemVocabularies& fixed);

struct LabeledSample {
  std::int32_t user = 0;
  std::int32_t target_item = 0;
  int label = 0;
  std::int64_t timestamp = 0;
  // The sample's history is histories[user][0, history_len): every event
  // strictly earlier than `timestamp`.
  std::uint32_t history_len = 0;

  bool operator==(const LabeledSample&) const = default;
};

std::uint32_t history_prefix(const Dataset& ds, std::int32_t user,
                             std::int64_t timestamp);

// One label-1 sample per positive event.
std::vector<LabeledSample> positive_samples(const Dataset& ds);

// `ratio` label-0 samples per positive, items uniform over the catalog
// excluding the user's positive items and PAD.
std::vector<LabeledSample> sample_negatives(
    std::span<const LabeledSample> positives, const Dataset& catalog,
    int ratio, std::uint64_t seed);

enum class SplitMode { RandomByUser, Temporal };

struct DatasetSplit {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> validation;
  std::vector<LabeledSample> test;
  SplitMode mode = SplitMode::RandomByUser;
};

// 70/10/20 by sample count. RandomByUser spreads each user's shuffled
// samples proportionally over the three parts; Temporal cuts on time.
DatasetSplit split_dataset(std::vector<LabeledSample> samples, SplitMode mode,
                           std::uint64_t seed);

}  // namespace him::data

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

#include "him/pipeline.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "him/error.hpp"

namespace him {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCheckpointFormat = "him-checkpoint";
constexpr int kCheckpointVersion = 1;

json read_json(const fs::path& path) {
  std::ifstream in(path);
  HIM_CHECK(in.good(), ErrorCode::Io, "cannot open " + path.string());
  json j = json::parse(in, nullptr, false);
  HIM_CHECK(!j.is_discarded(), ErrorCode::Parse, path.string() + ": invalid JSON");
  return j;
}

json vocab_json(const data::Vocabulary& v) { return v.keys(); }

data::Vocabulary vocab_from(const json& j, const char* name) {
  HIM_CHECK(j.contains(name) && j[name].is_array(), ErrorCode::Parse,
            std::string("checkpoint vocab lacks '") + name + "'");
  return data::Vocabulary::from_keys(name, j[name].get<std::vector<std::string>>());
}

}  // namespace

RawData load_raw(const fs::path& dir, const DataConfig& cfg) {
  HIM_CHECK(fs::is_directory(dir), ErrorCode::Io, "data directory not found: " + dir.string());
  fs::path log = dir / "interactions.csv";
  if (!fs::exists(log)) log = dir / "interactions.jsonl";
  HIM_CHECK(fs::exists(log), ErrorCode::Io,
            dir.string() + ": expected interactions.csv or interactions.jsonl");
  data::LoadResult loaded = data::load_interactions(log, data::format_from_path(log));
  RawData raw;
  raw.lines = loaded.lines;
  raw.malformed = loaded.malformed;
  raw.records = loaded.has_rating && !loaded.has_feedback
                    ? data::label_from_ratings(std::move(loaded.records))
                    : std::move(loaded.records);
  if (fs::exists(dir / "items.csv")) raw.meta = data::load_item_meta(dir / "items.csv");
  bool real = loaded.has_feedback;
  if (fs::exists(dir / "dataset.json")) {
    const json j = read_json(dir / "dataset.json");
    if (j.contains("has_real_negatives")) real = j["has_real_negatives"].get<bool>();
  }
  raw.has_real_negatives = cfg.has_real_negatives.value_or(real);
  return raw;
}

namespace {

Prepared prepare_with(const RawData& raw, const DataConfig& cfg,
                      const data::ItemVocabularies* vocab) {
  Prepared p;
  p.raw_records = raw.records.size();
  const auto kept = data::filter_sparse(raw.records, cfg.min_user_positives, cfg.min_item_users);
  p.kept_records = kept.size();
  HIM_CHECK(!kept.empty(), ErrorCode::InvalidArgument, "no interactions left after filtering");
  p.dataset = vocab ? data::build_dataset(kept, raw.has_real_negatives, *vocab)
                    : data::build_dataset(kept, raw.meta, raw.has_real_negatives);
  auto samples = data::positive_samples(p.dataset);
  const auto negatives =
      data::sample_negatives(samples, p.dataset, cfg.negative_ratio, mix_seed(cfg.data_seed, 11));
  samples.insert(samples.end(), negatives.begin(), negatives.end());
  p.split = data::split_dataset(std::move(samples), cfg.split, mix_seed(cfg.data_seed, 12));
  return p;
}

}  // namespace

Prepared prepare(const RawData& raw, const DataConfig& cfg) {
  return prepare_with(raw, cfg, nullptr);
}

Prepared prepare(const RawData& raw, const DataConfig& cfg, const data::ItemVocabularies& vocab) {
  return prepare_with(raw, cfg, &vocab);
}

Prepared prepare_dir(const fs::path& dir, const DataConfig& cfg) {
  return prepare(load_raw(dir, cfg), cfg);
}

std::uint64_t split_hash(const data::DatasetSplit& split) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ULL;
    }
  };
  for (const auto* part : {&split.train, &split.validation, &split.test}) {
    mix(part->size());
    for (const auto& s : *part) {
      mix(static_cast<std::uint64_t>(s.user));
      mix(static_cast<std::uint64_t>(s.target_item));
      mix(static_cast<std::uint64_t>(s.label));
      mix(static_cast<std::uint64_t>(s.timestamp));
    }
  }
  return h;
}

void write_split(const fs::path& dir, const Prepared& p) {
  fs::create_directories(dir);
  const auto& ds = p.dataset;
  auto write = [&](const char* name, const std::vector<data::LabeledSample>& part) {
    std::ofstream out(dir / name);
    HIM_CHECK(out.good(), ErrorCode::Io, "cannot write " + (dir / name).string());
    out << "user_id,item_id,timestamp,label\n";
    for (const auto& s : part) {
      out << ds.users.key(s.user) << ',' << ds.items.key(s.target_item) << ',' << s.timestamp
          << ',' << s.label << '\n';
    }
  };
  write("train.csv", p.split.train);
  write("validation.csv", p.split.validation);
  write("test.csv", p.split.test);
}

void save_checkpoint(const fs::path& path, const RunConfig& cfg, const model::HimModel& model,
                     const data::Dataset& ds) {
  save_checkpoint(path, cfg, model, data::ItemVocabularies::of(ds));
}

void save_checkpoint(const fs::path& path, const RunConfig& cfg, const model::HimModel& model,
                     const data::ItemVocabularies& ds) {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["config"] = cfg.to_map();
  const auto& s = model.shape();
  j["shape"] = {{"items", s.items},
                {"categories", s.categories},
                {"brands", s.brands},
                {"shops", s.shops},
                {"has_real_negatives", s.has_real_negatives}};
  json features = json::array();
  for (const auto& f : ds.features) {
    features.push_back({f.category, f.brand, f.shop, f.price_bucket});
  }
  j["vocab"] = {{"item", vocab_json(ds.items)},
                {"category", vocab_json(ds.categories)},
                {"brand", vocab_json(ds.brands)},
                {"shop", vocab_json(ds.shops)},
                {"features", features}};
  j["params"] = model.params().to_json();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  HIM_CHECK(out.good(), ErrorCode::Io, "cannot write " + path.string());
  out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const fs::path& path) {
  const json j = read_json(path);
  HIM_CHECK(j.value("format", "") == kCheckpointFormat, ErrorCode::Parse,
            path.string() + ": not a checkpoint");
  HIM_CHECK(j.value("version", 0) == kCheckpointVersion, ErrorCode::Parse,
            path.string() + ": unsupported checkpoint version");
  Checkpoint c;
  std::string text;
  for (const auto& [k, v] : j.at("config").items()) text += k + " = " + v.get<std::string>() + "\n";
  c.config = RunConfig::parse(text);
  const auto& s = j.at("shape");
  c.shape = {s.at("items").get<std::size_t>(), s.at("categories").get<std::size_t>(),
             s.at("brands").get<std::size_t>(), s.at("shops").get<std::size_t>(),
             s.at("has_real_negatives").get<bool>()};
  const auto& v = j.at("vocab");
  c.vocab.items = vocab_from(v, "item");
  c.vocab.categories = vocab_from(v, "category");
  c.vocab.brands = vocab_from(v, "brand");
  c.vocab.shops = vocab_from(v, "shop");
  for (const auto& f : v.at("features")) {
    c.vocab.features.push_back({f.at(0).get<std::int32_t>(), f.at(1).get<std::int32_t>(),
                                f.at(2).get<std::int32_t>(), f.at(3).get<std::int32_t>()});
  }
  HIM_CHECK(c.vocab.items.size() == c.shape.items &&
                c.vocab.features.size() == c.shape.items,
            ErrorCode::Parse, path.string() + ": vocabulary does not match model shape");
  c.params = ag::ParamStore::from_json(j.at("params"));
  return c;
}

}  // namespace him

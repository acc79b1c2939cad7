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

#include "him/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "him/error.hpp"
#include "him/random.hpp"

namespace him::data {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<Feedback> parse_feedback(std::string_view s) {
  if (s == "1" || s == "pos" || s == "positive") return Feedback::Positive;
  if (s == "0" || s == "neg" || s == "negative") return Feedback::Negative;
  return std::nullopt;
}

bool valid(const Interaction& r) {
  if (r.user_id.empty() || r.item_id.empty() || r.timestamp < 0) return false;
  return !r.rating || (*r.rating >= 1 && *r.rating <= 5);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  HIM_CHECK(in.good(), ErrorCode::Io, "cannot open " + path.string());
  return in;
}

void check_malformed_ratio(const LoadResult& r, const std::filesystem::path& path) {
  // More than 10% of records unparsable.
  HIM_CHECK(r.malformed * 10 <= r.lines, ErrorCode::Parse,
            path.string() + ": " + std::to_string(r.malformed) + " of " +
                std::to_string(r.lines) + " records malformed");
}

LoadResult load_csv(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  LoadResult result;
  std::string line;
  HIM_CHECK(static_cast<bool>(std::getline(in, line)), ErrorCode::Parse,
            path.string() + ": missing header row");
  const auto header = split_csv(line);
  int c_user = -1, c_item = -1, c_ts = -1, c_rating = -1, c_feedback = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto h = header[i];
    const int idx = static_cast<int>(i);
    if (h == "user_id") c_user = idx;
    if (h == "item_id") c_item = idx;
    if (h == "timestamp") c_ts = idx;
    if (h == "rating") c_rating = idx;
    if (h == "feedback") c_feedback = idx;
  }
  HIM_CHECK(c_user >= 0 && c_item >= 0 && c_ts >= 0, ErrorCode::Parse,
            path.string() + ": header must name user_id, item_id, timestamp");
  result.has_rating = c_rating >= 0;
  result.has_feedback = c_feedback >= 0;

  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++result.lines;
    const auto f = split_csv(line);
    if (f.size() != header.size()) {
      ++result.malformed;
      continue;
    }
    Interaction r;
    r.user_id = std::string(f[c_user]);
    r.item_id = std::string(f[c_item]);
    const auto ts = parse_number<std::int64_t>(f[c_ts]);
    bool ok = ts.has_value();
    if (ok) r.timestamp = *ts;
    if (ok && c_rating >= 0 && !f[c_rating].empty()) {
      const auto rating = parse_number<int>(f[c_rating]);
      ok = rating.has_value();
      if (ok) r.rating = *rating;
    }
    if (ok && c_feedback >= 0 && !f[c_feedback].empty()) {
      const auto fb = parse_feedback(f[c_feedback]);
      ok = fb.has_value();
      if (ok) r.feedback = *fb;
    }
    if (!ok || !valid(r)) {
      ++result.malformed;
      continue;
    }
    result.records.push_back(std::move(r));
  }
  return result;
}

std::optional<std::string> json_id(const nlohmann::json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<std::int64_t>());
  return std::nullopt;
}

LoadResult load_jsonl(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  LoadResult result;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++result.lines;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("user_id") ||
        !j.contains("item_id") || !j.contains("timestamp")) {
      ++result.malformed;
      continue;
    }
    Interaction r;
    const auto user = json_id(j["user_id"]);
    const auto item = json_id(j["item_id"]);
    bool ok = user && item && j["timestamp"].is_number_integer();
    if (ok) {
      r.user_id = *user;
      r.item_id = *item;
      r.timestamp = j["timestamp"].get<std::int64_t>();
    }
    if (ok && j.contains("rating") && !j["rating"].is_null()) {
      result.has_rating = true;
      ok = j["rating"].is_number_integer();
      if (ok) r.rating = j["rating"].get<int>();
    }
    if (ok && j.contains("feedback") && !j["feedback"].is_null()) {
      result.has_feedback = true;
      const auto& fj = j["feedback"];
      std::optional<Feedback> fb;
      if (fj.is_string()) fb = parse_feedback(fj.get<std::string>());
      if (fj.is_number_integer()) fb = parse_feedback(std::to_string(fj.get<int>()));
      ok = fb.has_value();
      if (ok) r.feedback = *fb;
    }
    if (!ok || !valid(r)) {
      ++result.malformed;
      continue;
    }
    result.records.push_back(std::move(r));
  }
  return result;
}

}  // namespace

FileFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".json") return FileFormat::Jsonl;
  return FileFormat::Csv;
}

LoadResult load_interactions(const std::filesystem::path& path,
                             FileFormat format) {
  HIM_CHECK(std::filesystem::exists(path), ErrorCode::Io,
            "interaction file not found: " + path.string());
  LoadResult r = format == FileFormat::Csv ? load_csv(path) : load_jsonl(path);
  check_malformed_ratio(r, path);
  return r;
}

void write_interactions(const std::filesystem::path& path,
                        std::span<const Interaction> records,
                        FileFormat format) {
  std::ofstream out(path);
  HIM_CHECK(out.good(), ErrorCode::Io, "cannot write " + path.string());
  const bool any_rating = std::any_of(records.begin(), records.end(),
                                      [](const auto& r) { return r.rating.has_value(); });
  auto fb = [](Feedback f) { return f == Feedback::Positive ? 1 : 0; };
  if (format == FileFormat::Csv) {
    out << "user_id,item_id,timestamp" << (any_rating ? ",rating" : "")
        << ",feedback\n";
    for (const auto& r : records) {
      out << r.user_id << ',' << r.item_id << ',' << r.timestamp;
      if (any_rating) {
        out << ',';
        if (r.rating) out << *r.rating;
      }
      out << ',' << fb(r.feedback) << '\n';
    }
  } else {
    for (const auto& r : records) {
      nlohmann::json j{{"user_id", r.user_id},
                       {"item_id", r.item_id},
                       {"timestamp", r.timestamp},
                       {"feedback", fb(r.feedback)}};
      if (r.rating) j["rating"] = *r.rating;
      out << j.dump() << '\n';
    }
  }
}

std::vector<Interaction> label_from_ratings(std::vector<Interaction> records) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& r = records[i];
    HIM_CHECK(r.rating.has_value(), ErrorCode::InvalidArgument,
              "label_from_ratings: record " + std::to_string(i) + " has no rating");
    r.feedback = *r.rating > 3 ? Feedback::Positive : Feedback::Negative;
  }
  return records;
}

std::vector<Interaction> filter_sparse(std::span<const Interaction> records,
                                       std::size_t min_user_positives,
                                       std::size_t min_item_users) {
  std::vector<Interaction> cur(records.begin(), records.end());
  while (true) {
    const std::size_t before = cur.size();

    std::unordered_map<std::string, std::size_t> positives;
    for (const auto& r : cur) {
      auto& n = positives[r.user_id];
      if (r.feedback == Feedback::Positive) ++n;
    }
    std::erase_if(cur, [&](const Interaction& r) {
      return positives[r.user_id] < min_user_positives;
    });

    std::unordered_map<std::string, std::unordered_set<std::string>> item_users;
    for (const auto& r : cur) item_users[r.item_id].insert(r.user_id);
    std::erase_if(cur, [&](const Interaction& r) {
      return item_users[r.item_id].size() < min_item_users;
    });

    // A round that removes nothing leaves both thresholds satisfied.
    if (cur.size() == before) return cur;
  }
}

// ---- Vocabulary -----------------------------------------------------------

Vocabulary::Vocabulary(std::string name) : name_(std::move(name)) {
  keys_.push_back("<pad>");
}

std::int32_t Vocabulary::add(const std::string& key) {
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  const auto idx = static_cast<std::int32_t>(keys_.size());
  keys_.push_back(key);
  index_.emplace(key, idx);
  return idx;
}

std::int32_t Vocabulary::index(const std::string& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? 0 : it->second;
}

bool Vocabulary::contains(const std::string& key) const {
  return index_.contains(key);
}

const std::string& Vocabulary::key(std::int32_t index) const {
  HIM_CHECK(index >= 0 && static_cast<std::size_t>(index) < keys_.size(),
            ErrorCode::InvalidArgument,
            name_ + " vocabulary: index " + std::to_string(index) + " out of range");
  return keys_[index];
}

Vocabulary Vocabulary::from_keys(std::string name, std::vector<std::string> keys) {
  Vocabulary v(std::move(name));
  HIM_CHECK(!keys.empty(), ErrorCode::Parse, "vocabulary without PAD entry");
  for (std::size_t i = 1; i < keys.size(); ++i) {
    HIM_CHECK(v.add(keys[i]) == static_cast<std::int32_t>(i), ErrorCode::Parse,
              "duplicate vocabulary key '" + keys[i] + "'");
  }
  return v;
}

// ---- Item metadata --------------------------------------------------------

std::vector<RawItemMeta> load_item_meta(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  HIM_CHECK(static_cast<bool>(std::getline(in, line)), ErrorCode::Parse,
            path.string() + ": missing header row");
  const auto header = split_csv(line);
  std::unordered_map<std::string, int> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    col[std::string(header[i])] = static_cast<int>(i);
  }
  HIM_CHECK(col.contains("item_id"), ErrorCode::Parse,
            path.string() + ": header must name item_id");
  auto get = [&](const std::vector<std::string_view>& f, const char* name) {
    auto it = col.find(name);
    return it == col.end() ? std::string() : std::string(f[it->second]);
  };
  std::vector<RawItemMeta> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) continue;
    RawItemMeta m;
    m.item_id = get(f, "item_id");
    m.category = get(f, "category");
    m.brand = get(f, "brand");
    m.shop = get(f, "shop");
    const std::string price = get(f, "price");
    if (!price.empty()) {
      const auto p = parse_number<double>(price);
      if (p && std::isfinite(*p) && *p >= 0) m.price = *p;
    }
    if (!m.item_id.empty()) out.push_back(std::move(m));
  }
  return out;
}

void write_item_meta(const std::filesystem::path& path,
                     std::span<const RawItemMeta> items) {
  std::ofstream out(path);
  HIM_CHECK(out.good(), ErrorCode::Io, "cannot write " + path.string());
  out << "item_id,category,brand,shop,price\n";
  for (const auto& m : items) {
    out << m.item_id << ',' << m.category << ',' << m.brand << ',' << m.shop << ',';
    if (m.price) out << *m.price;
    out << '\n';
  }
}

std::int32_t price_bucket(std::optional<double> price) {
  if (!price) return 0;
  const double b = std::floor(std::log2(1.0 + *price));
  return 1 + static_cast<std::int32_t>(std::clamp(b, 0.0, 15.0));
}

// ---- Dataset --------------------------------------------------------------

std::size_t Dataset::positive_count(std::int32_t user) const {
  const auto& h = histories[user];
  return static_cast<std::size_t>(std::count_if(
      h.begin(), h.end(), [](const Event& e) { return e.feedback == Feedback::Positive; }));
}

namespace {

void sort_histories(Dataset& ds) {
  for (auto& h : ds.histories) {
    std::sort(h.begin(), h.end(), [](const Event& a, const Event& b) {
      if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
      if (a.feedback != b.feedback) return a.feedback < b.feedback;
      return a.item < b.item;
    });
  }
}

}  // namespace

Dataset build_dataset(std::span<const Interaction> records,
                      std::span<const RawItemMeta> meta,
                      bool has_real_negatives) {
  Dataset ds;
  ds.has_real_negatives = has_real_negatives;
  // Sorted key order keeps indices independent of record order.
  std::set<std::string> users, items;
  for (const auto& r : records) {
    users.insert(r.user_id);
    items.insert(r.item_id);
  }
  for (const auto& u : users) ds.users.add(u);
  for (const auto& i : items) ds.items.add(i);

  ds.item_features.assign(ds.items.size(), ItemFeatures{});
  std::vector<const RawItemMeta*> sorted_meta;
  for (const auto& m : meta) {
    if (ds.items.contains(m.item_id)) sorted_meta.push_back(&m);
  }
  std::sort(sorted_meta.begin(), sorted_meta.end(),
            [](const auto* a, const auto* b) { return a->item_id < b->item_id; });
  for (const auto* m : sorted_meta) {
    ItemFeatures& f = ds.item_features[ds.items.index(m->item_id)];
    if (!m->category.empty()) f.category = ds.categories.add(m->category);
    if (!m->brand.empty()) f.brand = ds.brands.add(m->brand);
    if (!m->shop.empty()) f.shop = ds.shops.add(m->shop);
    f.price_bucket = price_bucket(m->price);
  }

  ds.histories.assign(ds.users.size(), {});
  for (const auto& r : records) {
    ds.histories[ds.users.index(r.user_id)].push_back(
        Event{ds.items.index(r.item_id), r.timestamp, r.feedback});
    ds.max_timestamp = std::max(ds.max_timestamp, r.timestamp);
  }
  sort_histories(ds);
  return ds;
}

ItemVocabularies ItemVocabularies::of(const Dataset& ds) {
  return {ds.items, ds.categories, ds.brands, ds.shops, ds.item_features};
}

Dataset build_dataset(std::span<const Interaction> records, bool has_real_negatives,
                      const ItemVocabularies& fixed) {
  HIM_CHECK(fixed.features.size() == fixed.items.size(), ErrorCode::InvalidArgument,
            "item feature table does not match the item vocabulary");
  Dataset ds;
  ds.has_real_negatives = has_real_negatives;
  ds.items = fixed.items;
  ds.categories = fixed.categories;
  ds.brands = fixed.brands;
  ds.shops = fixed.shops;
  ds.item_features = fixed.features;
  std::set<std::string> users;
  for (const auto& r : records) users.insert(r.user_id);
  for (const auto& u : users) ds.users.add(u);
  ds.histories.assign(ds.users.size(), {});
  for (const auto& r : records) {
    ds.max_timestamp = std::max(ds.max_timestamp, r.timestamp);
    const std::int32_t item = ds.items.index(r.item_id);
    if (item == 0) continue;
    ds.histories[ds.users.index(r.user_id)].push_back(Event{item, r.timestamp, r.feedback});
  }
  sort_histories(ds);
  return ds;
}

std::uint32_t history_prefix(const Dataset& ds, std::int32_t user,
                             std::int64_t timestamp) {
  const auto& h = ds.histories[user];
  const auto it = std::lower_bound(
      h.begin(), h.end(), timestamp,
      [](const Event& e, std::int64_t ts) { return e.timestamp < ts; });
  return static_cast<std::uint32_t>(it - h.begin());
}

std::vector<LabeledSample> positive_samples(const Dataset& ds) {
  std::vector<LabeledSample> out;
  for (std::size_t u = 1; u < ds.histories.size(); ++u) {
    const auto user = static_cast<std::int32_t>(u);
    for (const Event& e : ds.histories[u]) {
      if (e.feedback != Feedback::Positive) continue;
      out.push_back({user, e.item, 1, e.timestamp,
                     history_prefix(ds, user, e.timestamp)});
    }
  }
  return out;
}

std::vector<LabeledSample> sample_negatives(
    std::span<const LabeledSample> positives, const Dataset& catalog,
    int ratio, std::uint64_t seed) {
  HIM_CHECK(ratio >= 1, ErrorCode::InvalidArgument,
            "sample_negatives: ratio must be >= 1, got " + std::to_string(ratio));
  const auto n_items = static_cast<std::int64_t>(catalog.items.size()) - 1;
  HIM_CHECK(n_items > ratio, ErrorCode::InvalidArgument,
            "sample_negatives: catalog of " + std::to_string(n_items) +
                " items is not larger than ratio " + std::to_string(ratio));

  std::unordered_map<std::int32_t, std::unordered_set<std::int32_t>> liked;
  for (const auto& s : positives) {
    if (liked.contains(s.user)) continue;
    auto& set = liked[s.user];
    for (const Event& e : catalog.histories[s.user]) {
      if (e.feedback == Feedback::Positive) set.insert(e.item);
    }
  }

  Rng rng(seed);
  std::vector<LabeledSample> out;
  out.reserve(positives.size() * static_cast<std::size_t>(ratio));
  for (const auto& s : positives) {
    const auto& excluded = liked[s.user];
    HIM_CHECK(n_items - static_cast<std::int64_t>(excluded.size()) >= ratio,
              ErrorCode::InvalidArgument,
              "sample_negatives: fewer than " + std::to_string(ratio) +
                  " unliked items left for user " + catalog.users.key(s.user));
    for (int k = 0; k < ratio; ++k) {
      std::int32_t item;
      do {
        item = 1 + static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(n_items)));
      } while (excluded.contains(item));
      out.push_back({s.user, item, 0, s.timestamp, s.history_len});
    }
  }
  return out;
}

DatasetSplit split_dataset(std::vector<LabeledSample> samples, SplitMode mode,
                           std::uint64_t seed) {
  HIM_CHECK(samples.size() >= 10, ErrorCode::InvalidArgument,
            "split_dataset: need at least 10 samples, got " +
                std::to_string(samples.size()));
  const std::size_t n = samples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  if (mode == SplitMode::Temporal) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return samples[a].timestamp < samples[b].timestamp;
    });
  } else {
    // Each user's samples get evenly spaced keys (rank + offset) / count in
    // shuffled order, with a per-user random offset; sorting by key
    // interleaves users so every user lands proportionally in each part.
    Rng rng(seed);
    std::map<std::int32_t, std::vector<std::size_t>> by_user;
    for (std::size_t i = 0; i < n; ++i) by_user[samples[i].user].push_back(i);
    std::vector<double> key(n);
    for (auto& [_, ids] : by_user) {
      rng.shuffle(ids.begin(), ids.end());
      const double offset = rng.uniform();
      for (std::size_t r = 0; r < ids.size(); ++r) {
        key[ids[r]] = (static_cast<double>(r) + offset) / static_cast<double>(ids.size());
      }
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
  }

  const auto cut1 = static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(n)));
  const auto cut2 = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
  DatasetSplit split;
  split.mode = mode;
  for (std::size_t k = 0; k < n; ++k) {
    auto& dst = k < cut1 ? split.train : (k < cut2 ? split.validation : split.test);
    dst.push_back(samples[order[k]]);
  }
  return split;
}

}  // namespace him::data

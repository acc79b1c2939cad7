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

#include "him/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "him/error.hpp"

namespace him {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string bad(const std::string& key, const std::string& value, const char* want) {
  return "config key '" + key + "': cannot read '" + value + "' as " + want;
}

template <typename T>
T parse_int(const std::string& key, const std::string& v) {
  T out{};
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  HIM_CHECK(r.ec == std::errc() && r.ptr == v.data() + v.size(), ErrorCode::Parse,
            bad(key, v, "an integer"));
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  HIM_CHECK(used == v.size() && !v.empty(), ErrorCode::Parse, bad(key, v, "a number"));
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorCode::Parse, bad(key, v, "a boolean"));
}

std::optional<bool> parse_tristate(const std::string& key, const std::string& v) {
  if (v == "auto") return std::nullopt;
  return parse_bool(key, v);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(std::optional<bool> v) { return v ? fmt(*v) : "auto"; }

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  auto& m = model;
  auto z = [&] { return parse_int<std::size_t>(key, value); };
  if (key == "variant") m.variant = model::parse_variant(value);
  else if (key == "sessions") m.sessions = value;
  else if (key == "n") m.ubp.n_pos = m.ubp.n_neg = z();
  else if (key == "n_pos") m.ubp.n_pos = z();
  else if (key == "n_neg") m.ubp.n_neg = z();
  else if (key == "embed_dim") m.ubp.d = z();
  else if (key == "gru_hidden") m.ubp.h = z();
  else if (key == "tie_session_attention") m.ubp.tie_session_attention = parse_bool(key, value);
  else if (key == "positive_only") m.positive_only = parse_tristate(key, value);
  else if (key == "groups") m.ubc.k = z();
  else if (key == "group_dim") m.ubc.d_g = z();
  else if (key == "negative_users") m.ubc.p = z();
  else if (key == "stop_grad_pz") m.ubc.stop_grad_pz = parse_bool(key, value);
  else if (key == "alpha") m.alpha = parse_double(key, value);
  else if (key == "compute_group_loss") m.compute_group_loss = parse_bool(key, value);
  else if (key == "mlp_dims") {
    m.mlp_dims.clear();
    for (const auto& s : split_list(value)) m.mlp_dims.push_back(parse_int<std::size_t>(key, s));
  } else if (key == "lr") m.lr = parse_double(key, value);
  else if (key == "batch_size") m.batch_size = z();
  else if (key == "epochs") m.epochs = z();
  else if (key == "patience") m.patience = z();
  else if (key == "clip_norm") m.clip_norm = parse_double(key, value);
  else if (key == "seed") m.seed = parse_int<std::uint64_t>(key, value);
  else if (key == "base_history") m.base_history = z();
  else if (key == "segment_kind") {
    const auto kind = eval::parse_segment_kind(value);
    m.segments = eval::SegmentThresholds::defaults(kind);
  } else if (key == "segment_lo") m.segments.lo = z();
  else if (key == "segment_hi") m.segments.hi = z();
  else if (key == "min_user_positives") data.min_user_positives = z();
  else if (key == "min_item_users") data.min_item_users = z();
  else if (key == "negative_ratio") data.negative_ratio = parse_int<int>(key, value);
  else if (key == "split") {
    if (value == "random_by_user") data.split = data::SplitMode::RandomByUser;
    else if (value == "temporal") data.split = data::SplitMode::Temporal;
    else fail(ErrorCode::Parse, bad(key, value, "random_by_user|temporal"));
  } else if (key == "data_seed") data.data_seed = parse_int<std::uint64_t>(key, value);
  else if (key == "has_real_negatives") data.has_real_negatives = parse_tristate(key, value);
  else if (key == "repetitions") eval.repetitions = z();
  else if (key == "variants") {
    eval.variants.clear();
    for (const auto& s : split_list(value)) eval.variants.push_back(model::parse_variant(s));
  } else {
    fail(ErrorCode::Parse, "unknown config key '" + key + "'");
  }
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  // segment_kind resets thresholds, so apply it before explicit bounds.
  std::vector<std::pair<std::string, std::string>> entries;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    HIM_CHECK(eq != std::string::npos, ErrorCode::Parse,
              "config line " + std::to_string(lineno) + ": expected key = value");
    entries.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  std::stable_partition(entries.begin(), entries.end(),
                        [](const auto& e) { return e.first == "segment_kind"; });
  for (const auto& [k, v] : entries) cfg.set(k, v);
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  HIM_CHECK(in.good(), ErrorCode::Io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void RunConfig::validate() const {
  model.validate();
  model.ubp.validate();
  HIM_CHECK(data.negative_ratio >= 1, ErrorCode::InvalidArgument, "negative_ratio must be >= 1");
  HIM_CHECK(eval.repetitions >= 1, ErrorCode::InvalidArgument, "repetitions must be >= 1");
  HIM_CHECK(!eval.variants.empty(), ErrorCode::InvalidArgument, "variants must not be empty");
}

std::map<std::string, std::string> RunConfig::to_map() const {
  const auto& m = model;
  std::map<std::string, std::string> out;
  out["variant"] = model::variant_name(m.variant);
  out["sessions"] = m.sessions;
  out["n_pos"] = std::to_string(m.ubp.n_pos);
  out["n_neg"] = std::to_string(m.ubp.n_neg);
  out["embed_dim"] = std::to_string(m.ubp.d);
  out["gru_hidden"] = std::to_string(m.ubp.h);
  out["tie_session_attention"] = fmt(m.ubp.tie_session_attention);
  out["positive_only"] = fmt(m.positive_only);
  out["groups"] = std::to_string(m.ubc.k);
  out["group_dim"] = std::to_string(m.ubc.d_g);
  out["negative_users"] = std::to_string(m.ubc.p);
  out["stop_grad_pz"] = fmt(m.ubc.stop_grad_pz);
  out["alpha"] = fmt(m.alpha);
  out["compute_group_loss"] = fmt(m.compute_group_loss);
  std::string dims;
  for (std::size_t i = 0; i < m.mlp_dims.size(); ++i) {
    dims += (i ? "," : "") + std::to_string(m.mlp_dims[i]);
  }
  out["mlp_dims"] = dims;
  out["lr"] = fmt(m.lr);
  out["batch_size"] = std::to_string(m.batch_size);
  out["epochs"] = std::to_string(m.epochs);
  out["patience"] = std::to_string(m.patience);
  out["clip_norm"] = fmt(m.clip_norm);
  out["seed"] = std::to_string(m.seed);
  out["base_history"] = std::to_string(m.base_history);
  out["segment_kind"] = eval::segment_kind_name(m.segments.kind);
  out["segment_lo"] = std::to_string(m.segments.lo);
  out["segment_hi"] = std::to_string(m.segments.hi);
  out["min_user_positives"] = std::to_string(data.min_user_positives);
  out["min_item_users"] = std::to_string(data.min_item_users);
  out["negative_ratio"] = std::to_string(data.negative_ratio);
  out["split"] = data.split == data::SplitMode::Temporal ? "temporal" : "random_by_user";
  out["data_seed"] = std::to_string(data.data_seed);
  out["has_real_negatives"] = fmt(data.has_real_negatives);
  out["repetitions"] = std::to_string(eval.repetitions);
  std::string vs;
  for (std::size_t i = 0; i < eval.variants.size(); ++i) {
    vs += (i ? "," : "") + std::string(model::variant_name(eval.variants[i]));
  }
  out["variants"] = vs;
  return out;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : to_map()) out += k + " = " + v + "\n";
  return out;
}

}  // namespace him

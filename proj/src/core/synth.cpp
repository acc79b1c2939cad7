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

#include "him/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <limits>
#include <set>

#include "him/error.hpp"
#include "him/random.hpp"
#include "him/reorg.hpp"

namespace him::synth {

using nlohmann::json;

namespace {

std::vector<double> cumulative(const std::vector<double>& p) {
  std::vector<double> c(p.size());
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) c[i] = s += p[i];
  return c;
}

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

std::pair<std::size_t, std::size_t> block_of(const SynthSpec& s, std::size_t g) {
  return {g * s.items / s.groups, (g + 1) * s.items / s.groups};
}

}  // namespace

void SynthSpec::validate() const {
  auto check = [](bool ok, const char* msg) {
    HIM_CHECK(ok, ErrorCode::InvalidArgument, std::string("synth spec: ") + msg);
  };
  check(users >= 1, "users must be >= 1");
  check(groups >= 1, "groups must be >= 1");
  check(items >= 2 * groups, "need at least two items per group");
  check(zipf_exponent > 0, "zipf_exponent must be > 0");
  check(max_positives >= 1, "max_positives must be >= 1");
  check(affinity >= 0 && affinity <= 1, "affinity must be in [0,1]");
  check(item_exponent >= 0, "item_exponent must be >= 0");
  check(noise >= 0 && noise < 1, "noise must be in [0,1)");
  check(repeat >= 0 && repeat < 1, "repeat must be in [0,1)");
  check(impression_affinity >= 0 && impression_affinity <= 1,
        "impression_affinity must be in [0,1]");
  check(categories_per_group >= 1 && brands >= 1 && shops >= 1, "feature counts must be >= 1");
  check(recent_days >= 1 && span_days >= recent_days, "need 1 <= recent_days <= span_days");
  check(recent_share >= 0 && recent_share <= 1, "recent_share must be in [0,1]");
  check(end_time > span_days * reorg::kDay, "end_time too small for span_days");
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t h = g + 1; h < groups; ++h) {
      check(total_variation(preference(g), preference(h)) > 0.2,
            "group preferences must differ by total variation > 0.2");
    }
  }
}

std::vector<double> SynthSpec::preference(std::size_t g) const {
  std::vector<double> p(items, (1.0 - affinity) / static_cast<double>(items));
  const auto [lo, hi] = block_of(*this, g);
  double z = 0;
  for (std::size_t r = 1; r <= hi - lo; ++r) z += std::pow(static_cast<double>(r), -item_exponent);
  for (std::size_t i = lo; i < hi; ++i) {
    p[i] += affinity * std::pow(static_cast<double>(i - lo + 1), -item_exponent) / z;
  }
  return p;
}

#define HIM_SYNTH_FIELDS(X)                                                          \
  X(users) X(items) X(zipf_exponent) X(max_positives) X(groups) X(affinity)          \
  X(item_exponent) X(noise) X(repeat) X(impressions) X(impression_affinity)          \
  X(categories_per_group) X(brands) X(shops) X(span_days) X(recent_days)            \
  X(recent_share) X(end_time) X(seed)

json SynthSpec::to_json() const {
  json j;
#define X(f) j[#f] = f;
  HIM_SYNTH_FIELDS(X)
#undef X
  return j;
}

SynthSpec SynthSpec::from_json(const json& j) {
  HIM_CHECK(j.is_object(), ErrorCode::Parse, "synth spec must be a JSON object");
  SynthSpec s;
  const std::set<std::string> known{
#define X(f) #f,
      HIM_SYNTH_FIELDS(X)
#undef X
  };
  for (const auto& [k, _] : j.items()) {
    HIM_CHECK(known.contains(k), ErrorCode::Parse, "synth spec: unknown key '" + k + "'");
  }
  try {
#define X(f) \
  if (j.contains(#f)) j.at(#f).get_to(s.f);
    HIM_SYNTH_FIELDS(X)
#undef X
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

#undef HIM_SYNTH_FIELDS

SynthSpec SynthSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  HIM_CHECK(in.good(), ErrorCode::Io, "cannot open synth spec " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  return from_json(j);
}

SynthData generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SynthData out;

  std::vector<std::vector<double>> pref_cdf;
  for (std::size_t g = 0; g < spec.groups; ++g) pref_cdf.push_back(cumulative(spec.preference(g)));

  std::vector<double> count_p;
  for (std::size_t c = 1; c <= spec.max_positives; ++c) {
    count_p.push_back(std::pow(static_cast<double>(c), -spec.zipf_exponent));
  }
  const auto count_cdf = cumulative(count_p);

  // Categories follow the block, brand and shop are random.
  for (std::size_t i = 0; i < spec.items; ++i) {
    std::size_t g = 0;
    while (block_of(spec, g).second <= i) ++g;
    const std::size_t rank = i - block_of(spec, g).first;
    data::RawItemMeta m;
    m.item_id = "i" + std::to_string(i);
    m.category = "c" + std::to_string(g * spec.categories_per_group +
                                      rank % spec.categories_per_group);
    m.brand = "b" + std::to_string(rng.below(spec.brands));
    m.shop = "s" + std::to_string(rng.below(spec.shops));
    m.price = std::round(std::exp(rng.uniform(0.0, 6.0)) * 100.0) / 100.0;
    out.meta.push_back(std::move(m));
  }

  const std::int64_t day = reorg::kDay;
  for (std::size_t u = 0; u < spec.users; ++u) {
    const std::string uid = "u" + std::to_string(u);
    const auto g = static_cast<std::int64_t>(rng.below(spec.groups));
    out.user_ids.push_back(uid);
    out.user_group.push_back(g);

    const std::size_t n = 1 + rng.pick_cumulative(count_cdf);
    std::vector<std::int64_t> times;
    for (std::size_t k = 0; k < n; ++k) {
      const bool recent = k == 0 || rng.uniform() < spec.recent_share;
      const double span = static_cast<double>((recent ? spec.recent_days : spec.span_days) * day);
      times.push_back(spec.end_time - static_cast<std::int64_t>(rng.uniform(0.0, span)));
    }
    std::sort(times.begin(), times.end());

    std::vector<std::size_t> clicked;
    const auto& cdf = pref_cdf[static_cast<std::size_t>(g)];
    for (const std::int64_t t : times) {
      for (std::size_t k = 0; k < spec.impressions; ++k) {
        const std::size_t item = rng.uniform() < spec.impression_affinity
                                     ? rng.pick_cumulative(cdf)
                                     : rng.below(spec.items);
        out.records.push_back({uid, "i" + std::to_string(item),
                               t - 1 - static_cast<std::int64_t>(rng.below(600)),
                               data::Feedback::Negative, std::nullopt});
      }
      std::size_t item;
      if (!clicked.empty() && rng.uniform() < spec.repeat) {
        item = clicked[rng.below(clicked.size())];
      } else if (rng.uniform() < spec.noise) {
        item = rng.below(spec.items);
      } else {
        item = rng.pick_cumulative(cdf);
      }
      clicked.push_back(item);
      out.records.push_back(
          {uid, "i" + std::to_string(item), t, data::Feedback::Positive, std::nullopt});
    }
  }
  return out;
}

RawData to_raw(const SynthData& d) {
  RawData raw;
  raw.records = d.records;
  raw.meta = d.meta;
  raw.has_real_negatives = true;
  raw.lines = d.records.size();
  return raw;
}

void write(const std::filesystem::path& dir, const SynthData& d) {
  std::filesystem::create_directories(dir);
  data::write_interactions(dir / "interactions.csv", d.records);
  data::write_item_meta(dir / "items.csv", d.meta);
  {
    std::ofstream out(dir / "dataset.json");
    HIM_CHECK(out.good(), ErrorCode::Io, "cannot write " + (dir / "dataset.json").string());
    out << json{{"has_real_negatives", true}}.dump(2) << '\n';
  }
  std::ofstream out(dir / "groups.csv");
  HIM_CHECK(out.good(), ErrorCode::Io, "cannot write " + (dir / "groups.csv").string());
  out << "user_id,group_id\n";
  for (std::size_t u = 0; u < d.user_ids.size(); ++u) {
    out << d.user_ids[u] << ',' << d.user_group[u] << '\n';
  }
}

GroupMap load_groups(const std::filesystem::path& path) {
  std::ifstream in(path);
  HIM_CHECK(in.good(), ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  HIM_CHECK(static_cast<bool>(std::getline(in, line)) && line.rfind("user_id,", 0) == 0,
            ErrorCode::Parse, path.string() + ": expected user_id,group_id header");
  GroupMap out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    HIM_CHECK(comma != std::string::npos, ErrorCode::Parse,
              path.string() + ":" + std::to_string(lineno) + ": expected two fields");
    try {
      out[line.substr(0, comma)] = std::stoll(line.substr(comma + 1));
    } catch (const std::exception&) {
      fail(ErrorCode::Parse, path.string() + ":" + std::to_string(lineno) + ": bad group id");
    }
  }
  return out;
}

std::vector<std::int64_t> max_assignment(const std::vector<std::vector<double>>& w) {
  const std::size_t rows = w.size();
  const std::size_t cols = rows ? w[0].size() : 0;
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};
  double top = 0;
  for (const auto& r : w) {
    HIM_CHECK(r.size() == cols, ErrorCode::InvalidArgument, "assignment matrix must be rectangular");
    for (double v : r) top = std::max(top, v);
  }
  // Square min-cost form, 1-based potentials.
  auto cost = [&](std::size_t i, std::size_t j) {
    return (i < rows && j < cols) ? top - w[i][j] : top;
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0), v(n + 1, 0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::int64_t> out(rows, -1);
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t i = match[j] - 1;
    if (i < rows && j - 1 < cols) out[i] = static_cast<std::int64_t>(j - 1);
  }
  return out;
}

double group_recovery_score(const GroupMap& predicted, const GroupMap& truth) {
  HIM_CHECK(predicted.size() == truth.size(), ErrorCode::InvalidArgument,
            "group recovery: predicted and truth cover different users");
  HIM_CHECK(!truth.empty(), ErrorCode::InvalidArgument, "group recovery: no users");
  std::map<std::int64_t, std::size_t> prow, tcol;
  for (const auto& [user, g] : predicted) {
    HIM_CHECK(truth.contains(user), ErrorCode::InvalidArgument,
              "group recovery: user '" + user + "' missing from truth");
    prow.emplace(g, 0);
    tcol.emplace(truth.at(user), 0);
  }
  std::size_t k = 0;
  for (auto& [_, idx] : prow) idx = k++;
  k = 0;
  for (auto& [_, idx] : tcol) idx = k++;
  std::vector<std::vector<double>> table(prow.size(), std::vector<double>(tcol.size(), 0.0));
  for (const auto& [user, g] : predicted) table[prow[g]][tcol[truth.at(user)]] += 1.0;
  const auto assign = max_assignment(table);
  double hit = 0;
  for (std::size_t r = 0; r < assign.size(); ++r) {
    if (assign[r] >= 0) hit += table[r][static_cast<std::size_t>(assign[r])];
  }
  return hit / static_cast<double>(truth.size());
}

}  // namespace him::synth

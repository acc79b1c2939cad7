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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "him/error.hpp"
#include "him/random.hpp"

namespace him::synth {
namespace {

namespace fs = std::filesystem;

std::map<std::string, std::vector<std::size_t>> positive_items(const SynthData& d) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (const auto& r : d.records) {
    if (r.feedback == data::Feedback::Positive) {
      out[r.user_id].push_back(std::stoul(r.item_id.substr(1)));
    }
  }
  return out;
}

// Upper 5% point of chi-square (Wilson-Hilferty).
double chi2_crit95(double df) {
  const double a = 2.0 / (9.0 * df);
  return df * std::pow(1.0 - a + 1.645 * std::sqrt(a), 3.0);
}

// Homogeneity test of two item histograms; sparse columns are pooled.
bool histograms_differ(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = std::accumulate(a.begin(), a.end(), 0.0);
  const double nb = std::accumulate(b.begin(), b.end(), 0.0);
  std::vector<std::pair<double, double>> cols;
  std::pair<double, double> pool{0, 0};
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double tot = a[i] + b[i];
    if (std::min(na, nb) * tot / (na + nb) < 5) {
      pool.first += a[i];
      pool.second += b[i];
    } else {
      cols.push_back({a[i], b[i]});
    }
  }
  if (pool.first + pool.second > 0) cols.push_back(pool);
  double stat = 0;
  for (const auto& [x, y] : cols) {
    const double tot = x + y;
    const double ea = na * tot / (na + nb), eb = nb * tot / (na + nb);
    stat += (x - ea) * (x - ea) / ea + (y - eb) * (y - eb) / eb;
  }
  return stat > chi2_crit95(static_cast<double>(cols.size() - 1));
}

TEST(SynthGenerate, SingleGroupHistogramsAreHomogeneous) {
  SynthSpec s;
  s.users = 3000;
  s.items = 60;
  s.groups = 1;
  s.noise = 0;
  s.repeat = 0;
  s.seed = 3;
  const SynthData d = generate(s);
  const auto pos = positive_items(d);
  Rng rng(17);
  int rejected = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(s.items, 0), b(s.items, 0);
    for (const auto& [_, items] : pos) {
      auto& h = rng.below(2) ? a : b;
      for (auto i : items) h[i] += 1;
    }
    rejected += histograms_differ(a, b);
  }
  EXPECT_LE(rejected, 3);

  // Control: planted groups are told apart.
  s.groups = 5;
  const SynthData g = generate(s);
  const auto gpos = positive_items(g);
  std::vector<double> a(s.items, 0), b(s.items, 0);
  for (std::size_t u = 0; u < g.user_ids.size(); ++u) {
    if (g.user_group[u] > 1) continue;
    auto& h = g.user_group[u] == 0 ? a : b;
    for (auto i : gpos.at(g.user_ids[u])) h[i] += 1;
  }
  EXPECT_TRUE(histograms_differ(a, b));
}

TEST(SynthGenerate, LongTailShape) {
  SynthSpec s;
  s.users = 10000;
  s.zipf_exponent = 1.1;
  const auto pos = positive_items(generate(s));
  ASSERT_EQ(pos.size(), 10000u);
  std::size_t short_users = 0;
  for (const auto& [_, items] : pos) short_users += items.size() <= 2;
  EXPECT_GE(static_cast<double>(short_users) / 10000.0, 0.40);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(SynthGenerate, SameSeedSameFiles) {
  SynthSpec s;
  s.users = 300;
  s.items = 50;
  const fs::path root = fs::temp_directory_path() / "him_synth_det";
  fs::remove_all(root);
  write(root / "a", generate(s));
  write(root / "b", generate(s));
  s.seed = 2;
  write(root / "c", generate(s));
  for (const char* f : {"interactions.csv", "items.csv", "dataset.json", "groups.csv"}) {
    EXPECT_EQ(slurp(root / "a" / f), slurp(root / "b" / f)) << f;
  }
  EXPECT_NE(slurp(root / "a" / "interactions.csv"), slurp(root / "c" / "interactions.csv"));
  EXPECT_EQ(load_groups(root / "a" / "groups.csv").size(), 300u);
  fs::remove_all(root);
}

TEST(SynthGenerate, ActivityAndImpressions) {
  SynthSpec s;
  s.users = 200;
  s.items = 50;
  s.impressions = 3;
  const SynthData d = generate(s);
  std::map<std::string, std::int64_t> last;
  std::size_t pos = 0, neg = 0;
  for (const auto& r : d.records) {
    EXPECT_LE(r.timestamp, s.end_time);
    if (r.feedback == data::Feedback::Positive) {
      ++pos;
      last[r.user_id] = std::max(last[r.user_id], r.timestamp);
    } else {
      ++neg;
    }
  }
  EXPECT_EQ(neg, 3 * pos);
  for (const auto& [_, t] : last) EXPECT_GT(t, s.end_time - s.recent_days * 86400);
  EXPECT_EQ(d.meta.size(), 50u);
}

TEST(SynthSpec, PreferencesAreDistributionsAndDistinct) {
  SynthSpec s;
  for (std::size_t g = 0; g < s.groups; ++g) {
    const auto p = s.preference(g);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
  }
  s.affinity = 0.1;
  EXPECT_THROW(s.validate(), Error);
}

TEST(SynthSpec, Validation) {
  SynthSpec s;
  s.noise = 1.0;
  EXPECT_THROW(s.validate(), Error);
  s = SynthSpec{};
  s.items = 9;
  EXPECT_THROW(s.validate(), Error);
  s = SynthSpec{};
  s.recent_days = 600;
  EXPECT_THROW(s.validate(), Error);
}

TEST(SynthSpec, JsonRoundTrip) {
  SynthSpec s;
  s.users = 77;
  s.noise = 0.25;
  const SynthSpec t = SynthSpec::from_json(s.to_json());
  EXPECT_EQ(t.to_json(), s.to_json());
  EXPECT_THROW(SynthSpec::from_json({{"userz", 3}}), Error);
  EXPECT_THROW(SynthSpec::from_json({{"users", "many"}}), Error);
}

// ---- group recovery --------------------------------------------------------

double exhaustive_best(const std::vector<std::vector<double>>& w) {
  const std::size_t rows = w.size(), cols = w[0].size();
  const std::size_t n = std::max(rows, cols);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1;
  do {
    double s = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (perm[r] < cols) s += w[r][perm[r]];
    }
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

TEST(MaxAssignment, MatchesExhaustiveOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t rows = 1 + rng.below(6), cols = 1 + rng.below(6);
    std::vector<std::vector<double>> w(rows, std::vector<double>(cols));
    for (auto& r : w) {
      for (auto& v : r) v = static_cast<double>(rng.below(20));
    }
    const auto a = max_assignment(w);
    ASSERT_EQ(a.size(), rows);
    double got = 0;
    std::vector<bool> used(cols, false);
    for (std::size_t r = 0; r < rows; ++r) {
      if (a[r] < 0) continue;
      ASSERT_FALSE(used[a[r]]);
      used[a[r]] = true;
      got += w[r][a[r]];
    }
    EXPECT_EQ(got, exhaustive_best(w)) << "trial " << trial;
  }
}

GroupMap make_map(const std::vector<std::int64_t>& labels) {
  GroupMap m;
  for (std::size_t i = 0; i < labels.size(); ++i) m["u" + std::to_string(i)] = labels[i];
  return m;
}

TEST(GroupRecovery, IdentityAndRelabeling) {
  std::vector<std::int64_t> truth;
  for (int i = 0; i < 100; ++i) truth.push_back(i % 5);
  EXPECT_EQ(group_recovery_score(make_map(truth), make_map(truth)), 1.0);
  const std::int64_t perm[] = {3, 0, 4, 1, 2};
  std::vector<std::int64_t> relabeled;
  for (auto g : truth) relabeled.push_back(perm[g]);
  EXPECT_EQ(group_recovery_score(make_map(relabeled), make_map(truth)), 1.0);
}

TEST(GroupRecovery, KnownPartialScore) {
  // Predicted collapses everyone into one label: best match covers one group.
  std::vector<std::int64_t> truth{0, 0, 0, 1, 1, 2};
  std::vector<std::int64_t> pred(6, 7);
  EXPECT_DOUBLE_EQ(group_recovery_score(make_map(pred), make_map(truth)), 0.5);
}

TEST(GroupRecovery, UniformRandomNearChance) {
  Rng rng(11);
  std::vector<std::int64_t> truth;
  for (int i = 0; i < 1000; ++i) truth.push_back(i % 5);
  double sum = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::int64_t> pred;
    for (int i = 0; i < 1000; ++i) pred.push_back(static_cast<std::int64_t>(rng.below(5)));
    sum += group_recovery_score(make_map(pred), make_map(truth));
  }
  EXPECT_NEAR(sum / 100.0, 0.2, 0.05);
}

TEST(GroupRecovery, MismatchedUsersFail) {
  GroupMap a{{"u1", 0}, {"u2", 1}};
  GroupMap b{{"u1", 0}, {"u3", 1}};
  EXPECT_THROW(group_recovery_score(a, b), Error);
  b.erase("u3");
  EXPECT_THROW(group_recovery_score(a, b), Error);
}

}  // namespace
}  // namespace him::synth

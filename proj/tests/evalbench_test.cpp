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

#include "him/evalbench.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "gradcheck.hpp"
#include "him/error.hpp"
#include "him/random.hpp"
#include "him/synth.hpp"

namespace him::eval {
namespace {

using data::Feedback;
using data::Interaction;
using data::LabeledSample;
namespace ht = him::testing;

double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double hit = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1;
      hit += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return hit / pairs;
}

TEST(Auc, MatchesPairwiseOracle) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<double> s(n);
    std::vector<int> y(n);
    // A coarse grid forces ties.
    const std::uint64_t levels = 1 + rng.below(12);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(levels)) / 3.0;
      y[i] = static_cast<int>(rng.below(2));
    }
    y[0] = 1;
    y[1] = 0;
    ASSERT_EQ(auc(s, y), pairwise_auc(s, y)) << "trial " << trial;
  }
}

TEST(Auc, Conventions) {
  EXPECT_EQ(auc(std::vector<double>{0.9, 0.8, 0.1, 0.2}, std::vector<int>{1, 1, 0, 0}), 1.0);
  EXPECT_EQ(auc(std::vector<double>{0.1, 0.2, 0.9}, std::vector<int>{1, 1, 0}), 0.0);
  EXPECT_EQ(auc(std::vector<double>(7, 0.3), std::vector<int>{1, 0, 1, 0, 0, 1, 1}), 0.5);
  EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), Error);
  EXPECT_THROW(auc(std::vector<double>{0.1}, std::vector<int>{1, 0}), Error);
}

TEST(Segments, SequenceLengthBoundaries) {
  const SegmentThresholds t;
  EXPECT_EQ(t.classify(0), UserSegment::Tailed);
  EXPECT_EQ(t.classify(2), UserSegment::Tailed);
  EXPECT_EQ(t.classify(3), UserSegment::Body);
  EXPECT_EQ(t.classify(5), UserSegment::Body);
  EXPECT_EQ(t.classify(6), UserSegment::Head);
  const auto days = SegmentThresholds::defaults(SegmentKind::ActiveDays);
  EXPECT_EQ(days.classify(6), UserSegment::Tailed);
  EXPECT_EQ(days.classify(7), UserSegment::Body);
  EXPECT_EQ(days.classify(16), UserSegment::Head);
  SegmentThresholds bad;
  bad.lo = 6;
  EXPECT_THROW(bad.validate(), Error);
}

Interaction pos(std::string u, std::string i, std::int64_t t) {
  return {std::move(u), std::move(i), t, Feedback::Positive, std::nullopt};
}

TEST(Segments, PartitionByPositiveCount) {
  std::vector<Interaction> rec;
  auto add_user = [&](const std::string& u, int n) {
    for (int k = 0; k < n; ++k) rec.push_back(pos(u, "i" + std::to_string(k), 1000 + k));
  };
  add_user("short", 2);
  add_user("mid", 5);
  add_user("long", 6);
  rec.push_back({"short", "i9", 5000, Feedback::Negative, std::nullopt});
  const auto ds = data::build_dataset(rec, {}, true);
  const auto seg = segment_users(ds, SegmentThresholds{});
  ASSERT_EQ(seg.size(), ds.users.size());
  EXPECT_EQ(seg[ds.users.index("short")], UserSegment::Tailed);
  EXPECT_EQ(seg[ds.users.index("mid")], UserSegment::Body);
  EXPECT_EQ(seg[ds.users.index("long")], UserSegment::Head);
}

TEST(Evaluate, CountsAndSingleClassSegments) {
  const std::vector<UserSegment> seg{UserSegment::Tailed, UserSegment::Tailed, UserSegment::Body,
                                     UserSegment::Head};
  std::vector<LabeledSample> s;
  auto add = [&](std::int32_t u, int label) {
    LabeledSample x;
    x.user = u;
    x.label = label;
    s.push_back(x);
  };
  add(1, 1);
  add(1, 0);
  add(2, 1);
  add(2, 0);
  add(3, 1);
  const std::vector<double> scores{0.9, 0.1, 0.2, 0.8, 0.5};
  const EvalReport r = evaluate(scores, s, seg);
  EXPECT_EQ(r.all.n, 5u);
  EXPECT_EQ(r.at(UserSegment::Tailed).n + r.at(UserSegment::Body).n + r.at(UserSegment::Head).n,
            5u);
  EXPECT_EQ(r.at(UserSegment::Tailed).auc, 1.0);
  EXPECT_EQ(r.at(UserSegment::Body).auc, 0.0);
  EXPECT_TRUE(std::isnan(r.at(UserSegment::Head).auc));
  EXPECT_EQ(r.all.auc, pairwise_auc(scores, {1, 0, 1, 0, 1}));
  EXPECT_THROW(evaluate(std::vector<double>{0.1}, s, seg), Error);
}

// ---- Popularity -------------------------------------------------------------

LabeledSample sample(const data::Dataset& ds, const std::string& u, const std::string& i,
                     int label, std::int64_t t) {
  LabeledSample s;
  s.user = ds.users.index(u);
  s.target_item = ds.items.index(i);
  s.label = label;
  s.timestamp = t;
  s.history_len = data::history_prefix(ds, s.user, t);
  return s;
}

TEST(Popularity, MonotoneAndUnseenIsZero) {
  std::vector<Interaction> rec;
  for (int k = 0; k < 10; ++k) rec.push_back(pos("u" + std::to_string(k), "A", 100 + k));
  for (int k = 0; k < 2; ++k) rec.push_back(pos("v" + std::to_string(k), "B", 100 + k));
  rec.push_back(pos("w", "C", 100));
  const auto ds = data::build_dataset(rec, {}, false);
  std::vector<LabeledSample> train;
  for (int k = 0; k < 10; ++k) train.push_back(sample(ds, "u" + std::to_string(k), "A", 1, 200));
  for (int k = 0; k < 2; ++k) train.push_back(sample(ds, "v" + std::to_string(k), "B", 1, 200));
  train.push_back(sample(ds, "w", "C", 0, 200));
  const PopularityScorer pop(ds, train);
  const std::vector<LabeledSample> q{sample(ds, "w", "A", 1, 300), sample(ds, "w", "B", 1, 300),
                                     sample(ds, "w", "C", 1, 300)};
  const auto s = pop.score(q);
  EXPECT_EQ(s[0], 1.0);
  EXPECT_GT(s[0], s[1]);
  EXPECT_EQ(s[2], 0.0);
  EXPECT_EQ(pop.score(q), s);
  EXPECT_THROW(PopularityScorer(ds, std::vector<LabeledSample>{}), Error);
}

RunConfig small_run() {
  RunConfig cfg;
  cfg.model.sessions = "14d,6m,all";
  cfg.model.ubp.n_pos = 3;
  cfg.model.ubp.n_neg = 3;
  cfg.model.ubp.d = 4;
  cfg.model.ubp.h = 4;
  cfg.model.ubc.k = 3;
  cfg.model.ubc.d_g = 4;
  cfg.model.ubc.p = 2;
  cfg.model.mlp_dims = {8, 2};
  cfg.model.batch_size = 64;
  cfg.model.epochs = 1;
  cfg.model.patience = 1;
  cfg.model.alpha = 0.1;
  cfg.data.negative_ratio = 1;
  cfg.eval.repetitions = 1;
  return cfg;
}

Prepared small_data(std::size_t users = 200) {
  synth::SynthSpec s;
  s.users = users;
  s.items = 40;
  s.groups = 4;
  s.max_positives = 10;
  return prepare(synth::to_raw(synth::generate(s)), small_run().data);
}

TEST(Popularity, BeatsChanceOnSynthetic) {
  const Prepared p = small_data(1500);
  const PopularityScorer pop(p.dataset, p.split.train);
  std::vector<int> y;
  for (const auto& s : p.split.test) y.push_back(s.label);
  EXPECT_GT(auc(pop.score(p.split.test), y), 0.6);
}

// ---- Logistic regression ------------------------------------------------------

struct LrToy {
  data::Dataset ds;
  std::vector<LabeledSample> samples;
};

LrToy lr_toy() {
  std::vector<Interaction> rec;
  for (int k = 0; k < 10; ++k) {
    rec.push_back(pos("u" + std::to_string(k), "i" + std::to_string(k), 100));
  }
  std::vector<data::RawItemMeta> meta;
  for (int k = 0; k < 10; ++k) {
    meta.push_back({"i" + std::to_string(k), k % 2 ? "odd" : "even", "", "", std::nullopt});
  }
  LrToy toy{data::build_dataset(rec, meta, false), {}};
  for (int k = 0; k < 10; ++k) {
    toy.samples.push_back(sample(toy.ds, "u" + std::to_string(k), "i" + std::to_string((k * 3) % 10),
                                 ((k * 3) % 10) % 2, 200));
  }
  return toy;
}

TEST(LogisticRegression, ZeroWeightsScoreHalf) {
  const LrToy toy = lr_toy();
  LogisticRegression lr(toy.ds);
  for (double s : lr.score(toy.samples)) EXPECT_EQ(s, 0.5);
}

TEST(LogisticRegression, OverfitsSeparableToy) {
  const LrToy toy = lr_toy();
  LogisticRegression lr(toy.ds);
  double loss = 0;
  for (int step = 0; step < 200; ++step) loss = lr.step(toy.samples, ag::AdamOptions{0.05});
  EXPECT_LT(loss, 0.1);
}

TEST(LogisticRegression, FiniteDifference) {
  const LrToy toy = lr_toy();
  LogisticRegression lr(toy.ds);
  Rng rng(8);
  for (auto& [_, p] : lr.params().all()) {
    for (double& v : p.value.data) v = rng.uniform(-0.5, 0.5);
  }
  const std::vector<LabeledSample> three(toy.samples.begin(), toy.samples.begin() + 3);
  std::vector<int> y;
  for (const auto& s : three) y.push_back(s.label);
  const auto res = ht::check_gradients(lr.params(), [&](ag::Tape& t) {
    return ag::cross_entropy(lr.logits(t, three), y);
  });
  EXPECT_GT(res.checked, 0u);
  EXPECT_LT(res.max_rel_error, 1e-6) << res.worst;
}

TEST(LogisticRegression, FitIsDeterministic) {
  const Prepared p = small_data();
  model::HimConfig cfg = small_run().model;
  cfg.epochs = 3;
  cfg.patience = 3;
  LogisticRegression a(p.dataset), b(p.dataset);
  const auto ra = a.fit(p.split.train, p.split.validation, cfg);
  const auto rb = b.fit(p.split.train, p.split.validation, cfg);
  ASSERT_EQ(ra.trace.size(), rb.trace.size());
  EXPECT_EQ(ra.best_val_auc, rb.best_val_auc);
  EXPECT_EQ(a.score(p.split.test), b.score(p.split.test));
}

// ---- Runs -------------------------------------------------------------------

TEST(VariantConfig, UbpDropsGroupLoss) {
  const RunConfig cfg = small_run();
  const auto ubp = variant_config(cfg, model::Variant::Ubp, 9);
  EXPECT_EQ(ubp.variant, model::Variant::Ubp);
  EXPECT_EQ(ubp.alpha, 0.0);
  EXPECT_FALSE(ubp.compute_group_loss);
  EXPECT_EQ(ubp.seed, 9u);
  const auto him = variant_config(cfg, model::Variant::Him, 9);
  EXPECT_EQ(him.alpha, cfg.model.alpha);
  EXPECT_TRUE(him.compute_group_loss);
}

TEST(Ablation, SmokeGrid) {
  const RunConfig cfg = small_run();
  const Prepared p = small_data();
  std::vector<std::string> seen;
  const AblationResult r =
      run_ablation(cfg, p, [&](const VariantRun& v) { seen.push_back(model::variant_name(v.variant)); });
  EXPECT_EQ(seen, (std::vector<std::string>{"base", "ubp", "him"}));
  ASSERT_EQ(r.runs.size(), 3u);
  EXPECT_EQ(r.split_hash, split_hash(p.split));
  for (const auto& run : r.runs) {
    EXPECT_EQ(run.seed, cfg.model.seed);
    EXPECT_EQ(run.report.all.n, p.split.test.size());
  }
  std::ostringstream csv;
  write_report_csv(csv, r, cfg.eval.variants);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "variant,segment,auc_mean,auc_std,n_samples");
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 12u);
  EXPECT_EQ(rows[0].rfind("base,all,", 0), 0u);
  EXPECT_EQ(rows[5].rfind("ubp,tailed,", 0), 0u);
  EXPECT_EQ(rows[11].rfind("him,head,", 0), 0u);
  EXPECT_NE(format_grid(r, cfg.eval.variants).find("him"), std::string::npos);
}

TEST(Summarize, MeanAndSampleStd) {
  AblationResult r;
  for (double a : {0.6, 0.7, 0.8}) {
    VariantRun v;
    v.variant = model::Variant::Him;
    v.report.all.auc = a;
    v.report.all.n = 10;
    r.runs.push_back(v);
  }
  const auto cells = summarize(r, model::Variant::Him);
  EXPECT_NEAR(cells[0].mean, 0.7, 1e-12);
  EXPECT_NEAR(cells[0].std, 0.1, 1e-12);
  EXPECT_EQ(cells[0].n_samples, 10u);
  EXPECT_TRUE(std::isnan(cells[1].mean));
}

TEST(Diagnostics, GroupsAndDistances) {
  RunConfig cfg = small_run();
  const Prepared p = small_data();
  TrainedModel t = train_variant(cfg, p, model::Variant::Him, 1);
  model::BatchBuilder bb(p.dataset, t.model.config());
  const auto groups = user_groups(t.model, bb, p.dataset.max_timestamp);
  ASSERT_EQ(groups.size(), p.dataset.users.size());
  for (std::size_t u = 1; u < groups.size(); ++u) {
    ASSERT_EQ(groups[u].size(), 3u);
    for (auto g : groups[u]) EXPECT_TRUE(g >= 0 && g < 3);
  }
  std::ostringstream gcsv;
  write_groups_csv(gcsv, p.dataset, groups);
  EXPECT_EQ(gcsv.str().rfind("user,session,group\n", 0), 0u);

  const auto seg = segment_users(p.dataset, cfg.model.segments);
  const Diagnostics d = collect_diagnostics(t.model, bb, p.split.test, seg);
  std::size_t fused = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    fused += d.fusion_count[k];
    if (d.fusion_count[k] > 0) {
      EXPECT_NEAR(d.fusion_sum[k][0] + d.fusion_sum[k][1],
                  static_cast<double>(d.fusion_count[k]), 1e-9);
    }
  }
  EXPECT_EQ(fused, p.split.test.size());
  std::ostringstream dcsv, fcsv;
  write_distance_csv(dcsv, d);
  write_fusion_csv(fcsv, d);
  EXPECT_EQ(dcsv.str().rfind("segment,session,mean_distance\n", 0), 0u);
  EXPECT_EQ(fcsv.str().rfind("segment,weight_p,weight_c,n_samples\n", 0), 0u);

  model::HimModel base(variant_config(cfg, model::Variant::Base, 1),
                       model::ModelShape::of(p.dataset));
  EXPECT_THROW(user_groups(base, bb, p.dataset.max_timestamp), Error);
}

}  // namespace
}  // namespace him::eval

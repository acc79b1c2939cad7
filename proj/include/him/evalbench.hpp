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

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "him/config.hpp"
#include "him/data.hpp"
#include "him/metrics.hpp"
#include "him/model.hpp"
#include "him/params.hpp"
#include "him/pipeline.hpp"

namespace him::eval {

struct SegmentAuc {
  double auc = std::numeric_limits<double>::quiet_NaN();  // NaN: one class only
  std::size_t n = 0;
};

struct EvalReport {
  SegmentAuc all;
  std::array<SegmentAuc, 3> segments;  // tailed, body, head

  const SegmentAuc& at(UserSegment s) const {
    return segments[static_cast<std::size_t>(s) - 1];
  }
};

// `user_segments` is indexed by user id.
EvalReport evaluate(std::span<const double> scores, std::span<const data::LabeledSample> samples,
                    const std::vector<UserSegment>& user_segments);

// ---- Baselines -------------------------------------------------------------

// Train-set positive count of the target item over the largest count.
class PopularityScorer {
 public:
  PopularityScorer(const data::Dataset& ds, std::span<const data::LabeledSample> train);
  std::vector<double> score(std::span<const data::LabeledSample> samples) const;

 private:
  std::vector<double> score_;
};

// One weight per user id, item id and item category plus a bias.
class LogisticRegression {
 public:
  explicit LogisticRegression(const data::Dataset& ds);

  ag::Var logits(ag::Tape& tape, std::span<const data::LabeledSample> samples);
  std::vector<double> score(std::span<const data::LabeledSample> samples);
  // One Adam step on `batch`; returns the batch cross-entropy.
  double step(std::span<const data::LabeledSample> batch, const ag::AdamOptions& adam);
  // Epochs of shuffled mini-batches with best-validation selection, using
  // lr/batch_size/epochs/patience/seed from `cfg`.
  model::TrainResult fit(std::span<const data::LabeledSample> train,
                         std::span<const data::LabeledSample> validation,
                         const model::HimConfig& cfg);

  ag::ParamStore& params() { return params_; }

 private:
  const data::Dataset& ds_;
  ag::ParamStore params_;
};

// ---- Training runs and ablation -------------------------------------------

struct TrainedModel {
  model::HimModel model;
  model::TrainResult result;
};

// Variant-specific overrides applied to a copy of cfg.model: Ubp runs with
// alpha 0 and no group loss.
model::HimConfig variant_config(const RunConfig& cfg, model::Variant variant,
                                std::uint64_t seed);

TrainedModel train_variant(const RunConfig& cfg, const Prepared& data, model::Variant variant,
                           std::uint64_t seed, const model::EpochCallback& on_epoch = {});

struct VariantRun {
  model::Variant variant = model::Variant::Base;
  std::size_t repetition = 0;
  std::uint64_t seed = 0;
  EvalReport report;
  model::TrainResult training;
};

struct AblationResult {
  std::vector<VariantRun> runs;
  std::uint64_t split_hash = 0;
};

struct GridCell {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for one repetition
  std::size_t n_samples = 0;
};

// Repetition r uses seed cfg.model.seed + r for every variant; data and
// splits are shared.
AblationResult run_ablation(const RunConfig& cfg, const Prepared& data,
                            const std::function<void(const VariantRun&)>& progress = {});

// Segment order: all, tailed, body, head. NaN runs are left out of the mean.
std::array<GridCell, 4> summarize(const AblationResult& r, model::Variant v);

void write_report_csv(std::ostream& out, const AblationResult& r,
                      std::span<const model::Variant> variants);
std::string format_grid(const AblationResult& r, std::span<const model::Variant> variants);

// ---- Diagnostics ----------------------------------------------------------

struct Diagnostics {
  // [segment][session] sums and counts of the positive-to-negative distance.
  std::array<std::vector<double>, 3> distance_sum;
  std::array<std::vector<std::size_t>, 3> distance_count;
  // [segment] sums of the fusion weights and sample counts.
  std::array<std::array<double, 2>, 3> fusion_sum{};
  std::array<std::size_t, 3> fusion_count{};
};

Diagnostics collect_diagnostics(model::HimModel& m, const model::BatchBuilder& builder,
                                std::span<const data::LabeledSample> samples,
                                const std::vector<UserSegment>& user_segments);

// segment,session,mean_distance
void write_distance_csv(std::ostream& out, const Diagnostics& d);
// segment,weight_p,weight_c,n_samples
void write_fusion_csv(std::ostream& out, const Diagnostics& d);

// Hard group label of every user (index = user id, row 0 unused) and
// session, computed at `ref_time`.
std::vector<std::vector<std::int64_t>> user_groups(model::HimModel& m,
                                                   const model::BatchBuilder& builder,
                                                   std::int64_t ref_time);

// user,session,group
void write_groups_csv(std::ostream& out, const data::Dataset& ds,
                      const std::vector<std::vector<std::int64_t>>& groups);

}  // namespace him::eval

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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "him/error.hpp"
#include "him/random.hpp"

namespace him::eval {

using ag::Tape;
using ag::Tensor;
using ag::Var;
using data::LabeledSample;

namespace {

SegmentAuc segment_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  SegmentAuc s;
  s.n = scores.size();
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  if (pos > 0 && pos < static_cast<std::ptrdiff_t>(labels.size())) s.auc = auc(scores, labels);
  return s;
}

std::vector<int> labels_of(std::span<const LabeledSample> samples) {
  std::vector<int> y;
  y.reserve(samples.size());
  for (const auto& s : samples) y.push_back(s.label);
  return y;
}

}  // namespace

EvalReport evaluate(std::span<const double> scores, std::span<const LabeledSample> samples,
                    const std::vector<UserSegment>& user_segments) {
  HIM_CHECK(scores.size() == samples.size(), ErrorCode::InvalidArgument,
            "evaluate: score count does not match samples");
  std::array<std::vector<double>, 3> seg_scores;
  std::array<std::vector<int>, 3> seg_labels;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto u = static_cast<std::size_t>(samples[i].user);
    HIM_CHECK(u < user_segments.size(), ErrorCode::InvalidArgument, "evaluate: unknown user");
    const std::size_t k = static_cast<std::size_t>(user_segments[u]) - 1;
    seg_scores[k].push_back(scores[i]);
    seg_labels[k].push_back(samples[i].label);
  }
  EvalReport r;
  r.all = segment_auc(std::vector<double>(scores.begin(), scores.end()), labels_of(samples));
  for (std::size_t k = 0; k < 3; ++k) r.segments[k] = segment_auc(seg_scores[k], seg_labels[k]);
  return r;
}

// ---- Popularity ------------------------------------------------------------

PopularityScorer::PopularityScorer(const data::Dataset& ds, std::span<const LabeledSample> train) {
  HIM_CHECK(!train.empty(), ErrorCode::InvalidArgument, "popularity: empty training set");
  std::vector<double> count(ds.items.size(), 0.0);
  for (const auto& s : train) {
    if (s.label == 1) count.at(static_cast<std::size_t>(s.target_item)) += 1.0;
  }
  const double top = *std::max_element(count.begin(), count.end());
  score_.assign(count.size(), 0.0);
  if (top > 0) {
    for (std::size_t i = 0; i < count.size(); ++i) score_[i] = count[i] / top;
  }
}

std::vector<double> PopularityScorer::score(std::span<const LabeledSample> samples) const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    const auto i = static_cast<std::size_t>(s.target_item);
    out.push_back(i < score_.size() ? score_[i] : 0.0);
  }
  return out;
}

// ---- Logistic regression ----------------------------------------------------

LogisticRegression::LogisticRegression(const data::Dataset& ds) : ds_(ds) {
  Rng rng(0);
  params_.add("lr.user", {ds.users.size(), 1}, ag::Init::Zeros, rng);
  params_.add("lr.item", {ds.items.size(), 1}, ag::Init::Zeros, rng);
  params_.add("lr.category", {ds.categories.size(), 1}, ag::Init::Zeros, rng);
  params_.add("lr.bias", {1, 1}, ag::Init::Zeros, rng);
}

Var LogisticRegression::logits(Tape& tape, std::span<const LabeledSample> samples) {
  std::vector<std::int64_t> users, items, cats;
  for (const auto& s : samples) {
    const auto item = static_cast<std::size_t>(s.target_item) < ds_.items.size() ? s.target_item : 0;
    users.push_back(s.user);
    items.push_back(item);
    cats.push_back(ds_.item_features[static_cast<std::size_t>(item)].category);
  }
  Var z = ag::add(ag::add(ag::gather(tape, params_.get("lr.user"), users),
                          ag::gather(tape, params_.get("lr.item"), items)),
                  ag::gather(tape, params_.get("lr.category"), cats));
  z = ag::add(z, tape.param(params_.get("lr.bias")));
  std::vector<Var> two{tape.constant(Tensor({samples.size(), 1})), z};
  return ag::concat_cols(two);
}

std::vector<double> LogisticRegression::score(std::span<const LabeledSample> samples) {
  Tape tape;
  return ag::click_probability(logits(tape, samples).value());
}

double LogisticRegression::step(std::span<const LabeledSample> batch,
                                const ag::AdamOptions& adam) {
  const std::vector<int> y = labels_of(batch);
  Tape tape;
  Var loss = ag::cross_entropy(logits(tape, batch), y);
  const double v = loss.item();
  tape.backward(loss);
  params_.adam_step(adam);
  return v;
}

model::TrainResult LogisticRegression::fit(std::span<const LabeledSample> train,
                                           std::span<const LabeledSample> validation,
                                           const model::HimConfig& cfg) {
  HIM_CHECK(!train.empty() && !validation.empty(), ErrorCode::InvalidArgument,
            "logistic regression needs training and validation samples");
  Rng rng(mix_seed(cfg.seed, 2));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::vector<int> val_labels = labels_of(validation);
  model::TrainResult result;
  ag::ParamStore best = params_;
  double best_auc = -1.0;
  std::size_t stale = 0;
  std::vector<LabeledSample> chunk;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    model::EpochRecord rec;
    rec.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
      chunk.clear();
      for (std::size_t j = i; j < std::min(order.size(), i + cfg.batch_size); ++j) {
        chunk.push_back(train[order[j]]);
      }
      rec.cross_entropy += step(chunk, ag::AdamOptions{cfg.lr});
      ++batches;
    }
    rec.cross_entropy /= static_cast<double>(batches);
    rec.loss = rec.cross_entropy;
    rec.val_auc = auc(score(validation), val_labels);
    result.trace.push_back(rec);
    if (rec.val_auc > best_auc) {
      best_auc = rec.val_auc;
      best = params_;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  result.best_val_auc = best_auc;
  params_ = std::move(best);
  return result;
}

// ---- Runs ------------------------------------------------------------------

model::HimConfig variant_config(const RunConfig& cfg, model::Variant variant,
                                std::uint64_t seed) {
  model::HimConfig m = cfg.model;
  m.variant = variant;
  m.seed = seed;
  if (variant != model::Variant::Him) {
    m.alpha = 0.0;
    m.compute_group_loss = false;
  }
  return m;
}

TrainedModel train_variant(const RunConfig& cfg, const Prepared& data, model::Variant variant,
                           std::uint64_t seed, const model::EpochCallback& on_epoch) {
  const model::HimConfig m = variant_config(cfg, variant, seed);
  model::BatchBuilder builder(data.dataset, m);
  TrainedModel out{model::HimModel(m, model::ModelShape::of(data.dataset)), {}};
  out.result = model::train(out.model, builder, data.split.train, data.split.validation, on_epoch);
  return out;
}

AblationResult run_ablation(const RunConfig& cfg, const Prepared& data,
                            const std::function<void(const VariantRun&)>& progress) {
  AblationResult res;
  res.split_hash = split_hash(data.split);
  const auto segments = segment_users(data.dataset, cfg.model.segments);
  for (std::size_t rep = 0; rep < cfg.eval.repetitions; ++rep) {
    const std::uint64_t seed = cfg.model.seed + rep;
    for (model::Variant v : cfg.eval.variants) {
      TrainedModel t = train_variant(cfg, data, v, seed);
      model::BatchBuilder builder(data.dataset, t.model.config());
      const auto scores = model::predict_all(t.model, builder, data.split.test);
      VariantRun run{v, rep, seed, evaluate(scores, data.split.test, segments),
                     std::move(t.result)};
      if (progress) progress(run);
      res.runs.push_back(std::move(run));
    }
  }
  return res;
}

std::array<GridCell, 4> summarize(const AblationResult& r, model::Variant v) {
  std::array<GridCell, 4> out{};
  for (std::size_t k = 0; k < 4; ++k) {
    std::vector<double> xs;
    for (const auto& run : r.runs) {
      if (run.variant != v) continue;
      const SegmentAuc& s = k == 0 ? run.report.all : run.report.segments[k - 1];
      out[k].n_samples = s.n;
      if (!std::isnan(s.auc)) xs.push_back(s.auc);
    }
    if (xs.empty()) {
      out[k].mean = out[k].std = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    out[k].mean = mean;
    out[k].std = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
  }
  return out;
}

namespace {

constexpr const char* kSegmentColumns[] = {"all", "tailed", "body", "head"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void write_report_csv(std::ostream& out, const AblationResult& r,
                      std::span<const model::Variant> variants) {
  out << "variant,segment,auc_mean,auc_std,n_samples\n";
  for (model::Variant v : variants) {
    const auto cells = summarize(r, v);
    for (std::size_t k = 0; k < 4; ++k) {
      out << model::variant_name(v) << ',' << kSegmentColumns[k] << ',' << num(cells[k].mean)
          << ',' << num(cells[k].std) << ',' << cells[k].n_samples << '\n';
    }
  }
}

std::string format_grid(const AblationResult& r, std::span<const model::Variant> variants) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %17s %17s %17s %17s\n", "variant", "all", "tailed",
                "body", "head");
  out += line;
  for (model::Variant v : variants) {
    const auto c = summarize(r, v);
    std::snprintf(line, sizeof line,
                  "%-8s %8.4f+-%.4f  %8.4f+-%.4f  %8.4f+-%.4f  %8.4f+-%.4f\n",
                  model::variant_name(v), c[0].mean, c[0].std, c[1].mean, c[1].std, c[2].mean,
                  c[2].std, c[3].mean, c[3].std);
    out += line;
  }
  return out;
}

// ---- Diagnostics -----------------------------------------------------------

Diagnostics collect_diagnostics(model::HimModel& m, const model::BatchBuilder& builder,
                                std::span<const LabeledSample> samples,
                                const std::vector<UserSegment>& user_segments) {
  Diagnostics d;
  const std::size_t T = m.config().ubp.T, n = m.config().ubp.n_pos;
  for (auto& v : d.distance_sum) v.assign(T, 0.0);
  for (auto& v : d.distance_count) v.assign(T, 0);
  const std::size_t B = 1024;
  for (std::size_t i = 0; i < samples.size(); i += B) {
    const auto chunk = samples.subspan(i, std::min(B, samples.size() - i));
    const model::Batch batch = builder.build(chunk);
    Tape tape;
    const auto fr = m.forward(tape, batch);
    for (std::size_t b = 0; b < batch.size; ++b) {
      const std::size_t seg =
          static_cast<std::size_t>(user_segments.at(static_cast<std::size_t>(batch.users[b]))) - 1;
      for (std::size_t t = 0; t < fr.distances.size(); ++t) {
        for (std::size_t j = 0; j < n; ++j) {
          if (batch.sessions[t].pos_mask.at(b, j) == 0.0) continue;
          d.distance_sum[seg][t] += fr.distances[t].value().at(b, j);
          d.distance_count[seg][t] += 1;
        }
      }
      if (fr.fusion.valid()) {
        d.fusion_sum[seg][0] += fr.fusion.value().at(b, 0);
        d.fusion_sum[seg][1] += fr.fusion.value().at(b, 1);
        d.fusion_count[seg] += 1;
      }
    }
  }
  return d;
}

void write_distance_csv(std::ostream& out, const Diagnostics& d) {
  out << "segment,session,mean_distance\n";
  for (UserSegment s : kSegments) {
    const std::size_t k = static_cast<std::size_t>(s) - 1;
    for (std::size_t t = 0; t < d.distance_sum[k].size(); ++t) {
      const std::size_t c = d.distance_count[k][t];
      out << segment_name(s) << ',' << t + 1 << ','
          << (c ? num(d.distance_sum[k][t] / static_cast<double>(c)) : "nan") << '\n';
    }
  }
}

void write_fusion_csv(std::ostream& out, const Diagnostics& d) {
  out << "segment,weight_p,weight_c,n_samples\n";
  for (UserSegment s : kSegments) {
    const std::size_t k = static_cast<std::size_t>(s) - 1;
    const double c = static_cast<double>(d.fusion_count[k]);
    out << segment_name(s) << ',' << (c > 0 ? num(d.fusion_sum[k][0] / c) : "nan") << ','
        << (c > 0 ? num(d.fusion_sum[k][1] / c) : "nan") << ',' << d.fusion_count[k] << '\n';
  }
}

std::vector<std::vector<std::int64_t>> user_groups(model::HimModel& m,
                                                   const model::BatchBuilder& builder,
                                                   std::int64_t ref_time) {
  HIM_CHECK(m.config().variant == model::Variant::Him, ErrorCode::InvalidArgument,
            "group labels need the him variant");
  const auto& ds = builder.dataset();
  const std::size_t users = ds.users.size(), T = m.config().ubp.T;
  std::vector<std::vector<std::int64_t>> out(users, std::vector<std::int64_t>(T, 0));
  std::vector<LabeledSample> chunk;
  for (std::size_t u = 1; u < users; u += 1024) {
    chunk.clear();
    for (std::size_t v = u; v < std::min(users, u + 1024); ++v) {
      LabeledSample s;
      s.user = static_cast<std::int32_t>(v);
      s.timestamp = ref_time;
      chunk.push_back(s);
    }
    const model::Batch batch = builder.build(chunk);
    Tape tape;
    const auto fr = m.forward(tape, batch);
    for (std::size_t b = 0; b < batch.size; ++b) {
      for (std::size_t t = 0; t < T; ++t) out[u + b][t] = fr.groups[t][b];
    }
  }
  return out;
}

void write_groups_csv(std::ostream& out, const data::Dataset& ds,
                      const std::vector<std::vector<std::int64_t>>& groups) {
  out << "user,session,group\n";
  for (std::size_t u = 1; u < groups.size(); ++u) {
    for (std::size_t t = 0; t < groups[u].size(); ++t) {
      out << ds.users.key(static_cast<std::int32_t>(u)) << ',' << t + 1 << ',' << groups[u][t]
          << '\n';
    }
  }
}

}  // namespace him::eval

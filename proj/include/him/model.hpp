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
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "him/autograd.hpp"
#include "him/data.hpp"
#include "him/metrics.hpp"
#include "him/params.hpp"
#include "him/reorg.hpp"
#include "him/ubc.hpp"
#include "him/ubp.hpp"

namespace him::model {

// Base: sum-pooled positive history. Ubp: sessions + UBP, no UBC.
// Him: UBP and UBC fused by target attention.
enum class Variant { Base, Ubp, Him };

const char* variant_name(Variant v);
Variant parse_variant(std::string_view text);

inline constexpr std::size_t kLengthBuckets = 8;
inline constexpr std::size_t kSegmentIds = 4;

// 1 + index of the first bound >= count in {0, 1, 2, 5, 10, 20}, or 7.
std::int64_t length_bucket(std::size_t positives);

struct HimConfig {
  Variant variant = Variant::Him;
  std::string sessions = "14d,6m,12m,all";
  ubp::UbpConfig ubp;  // T follows `sessions`
  ubc::UbcConfig ubc;
  // Unset: follow the dataset (positive-only without real negatives).
  std::optional<bool> positive_only;
  std::vector<std::size_t> mlp_dims{256, 128, 32, 2};
  double alpha = 1e-4;
  bool compute_group_loss = true;
  double lr = 1e-3;
  std::size_t batch_size = 256;
  std::size_t epochs = 10;
  std::size_t patience = 3;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::size_t base_history = 50;
  eval::SegmentThresholds segments;

  void validate() const;
};

struct ModelShape {
  std::size_t items = 1;
  std::size_t categories = 1;
  std::size_t brands = 1;
  std::size_t shops = 1;
  bool has_real_negatives = false;

  static ModelShape of(const data::Dataset& ds);
  bool operator==(const ModelShape&) const = default;
};

struct Batch {
  std::size_t size = 0;
  std::vector<std::int32_t> users;
  std::vector<int> labels;
  std::vector<ubp::SessionInput> sessions;  // T
  ag::Tensor session_mask;                  // [B, T], any feedback present
  std::vector<std::int64_t> item, category, brand, shop, price;
  std::vector<std::int64_t> segment, length;
  std::vector<std::vector<std::int64_t>> history_items;  // [L][B], Base only
  ag::Tensor history_mask;                               // [B, L]
};

// Turns labeled samples into model inputs. Reorganized histories are
// cached per (user, timestamp); not thread-safe.
class BatchBuilder {
 public:
  BatchBuilder(const data::Dataset& ds, const HimConfig& cfg);

  Batch build(std::span<const data::LabeledSample> samples) const;
  const reorg::SessionizedHistory& history(std::int32_t user, std::int64_t ref_time) const;
  const reorg::SessionBoundaries& boundaries() const { return boundaries_; }
  const data::Dataset& dataset() const { return ds_; }

 private:
  const data::Dataset& ds_;
  HimConfig cfg_;
  reorg::SessionBoundaries boundaries_;
  mutable std::map<std::pair<std::int32_t, std::int64_t>, reorg::SessionizedHistory> cache_;
};

struct Fusion {
  ag::Var e_p;
  ag::Var e_c;
  ag::Var weights;  // [B, 2]: (weight_p, weight_c)
};

// s_p = <p_z W_p, e_t>, s_c = <c_z W_cz, e_t>, weights = softmax(s_p, s_c).
Fusion fuse(ag::Var p_z, ag::Var c_z, ag::Var e_t, ag::Var w_p, ag::Var w_cz);

// alpha * lg + ce; `lg` may be unset, giving ce.
ag::Var joint_loss(ag::Var ce, ag::Var lg, double alpha);

struct ForwardOptions {
  // Negatives for the group loss; the loss is skipped when null.
  const ubc::NegativeTable* negatives = nullptr;
};

struct ForwardResult {
  ag::Var logits;      // [B, 2]
  ag::Var group_loss;  // set when negatives were given and the variant is Him
  ag::Var fusion;      // [B, 2], Him only
  std::vector<ag::Var> distances;          // per session, [B, n_pos]
  std::vector<ag::Var> attention;          // per session, [B, n_pos] distance weights
  std::vector<ag::Var> session_weights;    // per target session, [B, T]
  std::vector<ag::Var> beta;               // per session, [B, k], Him only
  std::vector<std::vector<std::int64_t>> groups;  // [T][B], Him only
};

class HimModel {
 public:
  HimModel(HimConfig cfg, ModelShape shape);
  // Restores parameters; throws if names or shapes differ from a fresh model.
  HimModel(HimConfig cfg, ModelShape shape, ag::ParamStore params);

  ForwardResult forward(ag::Tape& tape, const Batch& batch,
                        const ForwardOptions& options = {});
  std::vector<double> predict(const Batch& batch);

  const HimConfig& config() const { return cfg_; }
  const ModelShape& shape() const { return shape_; }
  bool positive_only() const { return cfg_.ubp.positive_only; }
  ag::ParamStore& params() { return params_; }
  const ag::ParamStore& params() const { return params_; }
  std::size_t mlp_input_dim() const;

 private:
  void register_params(ag::ParamStore& store, Rng& rng) const;

  HimConfig cfg_;
  ModelShape shape_;
  ag::ParamStore params_;
};

// Prepared HimConfig copy: T from the session list, positive_only resolved.
HimConfig resolve(HimConfig cfg, const ModelShape& shape);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;        // mean joint loss over batches
  double cross_entropy = 0.0;
  double group_loss = 0.0;
  double val_auc = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> trace;
  std::size_t best_epoch = 0;
  double best_val_auc = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Seeded shuffled mini-batches, joint loss, clipping, Adam; validation AUC
// per epoch with early stopping. The model ends with the best parameters.
TrainResult train(HimModel& model, const BatchBuilder& builder,
                  std::span<const data::LabeledSample> train_set,
                  std::span<const data::LabeledSample> validation,
                  const EpochCallback& on_epoch = {});

std::vector<double> predict_all(HimModel& model, const BatchBuilder& builder,
                                std::span<const data::LabeledSample> samples,
                                std::size_t batch_size = 1024);

}  // namespace him::model

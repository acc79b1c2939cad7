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

#include "him/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "him/error.hpp"
#include "him/random.hpp"

namespace him::model {

using ag::Tape;
using ag::Tensor;
using ag::Var;

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kNegativeStream = 3;

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Base: return "base";
    case Variant::Ubp: return "ubp";
    case Variant::Him: return "him";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  if (text == "base") return Variant::Base;
  if (text == "ubp") return Variant::Ubp;
  if (text == "him") return Variant::Him;
  fail(ErrorCode::InvalidArgument, "unknown variant '" + std::string(text) + "' (base|ubp|him)");
}

std::int64_t length_bucket(std::size_t positives) {
  static constexpr std::size_t kBounds[] = {0, 1, 2, 5, 10, 20};
  for (std::size_t i = 0; i < std::size(kBounds); ++i) {
    if (positives <= kBounds[i]) return static_cast<std::int64_t>(i + 1);
  }
  return static_cast<std::int64_t>(kLengthBuckets - 1);
}

void HimConfig::validate() const {
  (void)reorg::SessionBoundaries::parse(sessions);
  ubc.validate();
  HIM_CHECK(!mlp_dims.empty() && mlp_dims.back() == 2, ErrorCode::InvalidArgument,
            "mlp_dims must end in 2");
  for (std::size_t w : mlp_dims) {
    HIM_CHECK(w > 0, ErrorCode::InvalidArgument, "mlp_dims entries must be positive");
  }
  HIM_CHECK(alpha >= 0.0 && std::isfinite(alpha), ErrorCode::InvalidArgument,
            "alpha must be >= 0");
  HIM_CHECK(lr > 0.0, ErrorCode::InvalidArgument, "lr must be positive");
  HIM_CHECK(batch_size >= 1, ErrorCode::InvalidArgument, "batch_size must be >= 1");
  HIM_CHECK(epochs >= 1, ErrorCode::InvalidArgument, "epochs must be >= 1");
  HIM_CHECK(patience >= 1, ErrorCode::InvalidArgument, "patience must be >= 1");
  HIM_CHECK(clip_norm > 0.0, ErrorCode::InvalidArgument, "clip_norm must be positive");
  HIM_CHECK(base_history >= 1, ErrorCode::InvalidArgument, "base_history must be >= 1");
  segments.validate();
}

ModelShape ModelShape::of(const data::Dataset& ds) {
  return {ds.items.size(), ds.categories.size(), ds.brands.size(), ds.shops.size(),
          ds.has_real_negatives};
}

HimConfig resolve(HimConfig cfg, const ModelShape& shape) {
  cfg.validate();
  cfg.ubp.T = reorg::SessionBoundaries::parse(cfg.sessions).session_count();
  cfg.ubp.positive_only = cfg.positive_only.value_or(!shape.has_real_negatives);
  cfg.ubp.validate();
  return cfg;
}

// ---- Batches -------------------------------------------------------------

BatchBuilder::BatchBuilder(const data::Dataset& ds, const HimConfig& cfg)
    : ds_(ds), cfg_(resolve(cfg, ModelShape::of(ds))),
      boundaries_(reorg::SessionBoundaries::parse(cfg.sessions)) {}

const reorg::SessionizedHistory& BatchBuilder::history(std::int32_t user,
                                                       std::int64_t ref_time) const {
  const auto key = std::make_pair(user, ref_time);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  const auto& events = ds_.histories.at(static_cast<std::size_t>(user));
  const std::uint32_t len = data::history_prefix(ds_, user, ref_time);
  auto h = reorg::reorganize(std::span(events).first(len), boundaries_, cfg_.ubp.n_pos,
                             std::max<std::size_t>(cfg_.ubp.n_neg, 1), ref_time);
  return cache_.emplace(key, std::move(h)).first->second;
}

Batch BatchBuilder::build(std::span<const data::LabeledSample> samples) const {
  HIM_CHECK(!samples.empty(), ErrorCode::InvalidArgument, "empty batch");
  const std::size_t B = samples.size(), T = boundaries_.session_count();
  const std::size_t np = cfg_.ubp.n_pos, nn = std::max<std::size_t>(cfg_.ubp.n_neg, 1);
  const std::size_t L = cfg_.base_history;
  const bool base = cfg_.variant == Variant::Base;

  Batch batch;
  batch.size = B;
  batch.session_mask = Tensor({B, T});
  if (!base) {
    batch.sessions.resize(T);
    for (auto& s : batch.sessions) {
      s.pos_items.assign(np, std::vector<std::int64_t>(B, 0));
      s.neg_items.assign(nn, std::vector<std::int64_t>(B, 0));
      s.pos_freq = Tensor({B, np});
      s.pos_mask = Tensor({B, np});
      s.neg_freq = Tensor({B, nn});
      s.neg_mask = Tensor({B, nn});
    }
  } else {
    batch.history_items.assign(L, std::vector<std::int64_t>(B, 0));
    batch.history_mask = Tensor({B, L});
  }

  for (std::size_t b = 0; b < B; ++b) {
    const auto& s = samples[b];
    // User 0 is the unknown user with an empty history.
    HIM_CHECK(s.user >= 0 && static_cast<std::size_t>(s.user) < ds_.histories.size(),
              ErrorCode::InvalidArgument, "sample user out of range");
    batch.users.push_back(s.user);
    batch.labels.push_back(s.label);
    const std::int32_t item =
        s.target_item >= 0 && static_cast<std::size_t>(s.target_item) < ds_.items.size()
            ? s.target_item
            : 0;
    const data::ItemFeatures f = ds_.item_features.at(static_cast<std::size_t>(item));
    batch.item.push_back(item);
    batch.category.push_back(f.category);
    batch.brand.push_back(f.brand);
    batch.shop.push_back(f.shop);
    batch.price.push_back(f.price_bucket);

    const auto& events = ds_.histories[static_cast<std::size_t>(s.user)];
    const auto prefix =
        std::span(events).first(data::history_prefix(ds_, s.user, s.timestamp));
    const std::size_t positives = eval::activity_value(
        prefix, eval::SegmentKind::SequenceLength, s.timestamp);
    batch.length.push_back(length_bucket(positives));
    batch.segment.push_back(static_cast<std::int64_t>(cfg_.segments.classify(
        eval::activity_value(prefix, cfg_.segments.kind, s.timestamp))));

    if (base) {
      std::size_t slot = 0;
      for (auto it = prefix.rbegin(); it != prefix.rend() && slot < L; ++it) {
        if (it->feedback != data::Feedback::Positive) continue;
        batch.history_items[slot][b] = it->item;
        batch.history_mask.at(b, slot) = 1.0;
        ++slot;
      }
      continue;
    }

    const auto& h = history(s.user, s.timestamp);
    for (std::size_t t = 0; t < T; ++t) {
      auto& in = batch.sessions[t];
      const auto& pos = h.positive[t];
      const auto& neg = h.negative[t];
      for (std::size_t j = 0; j < np; ++j) {
        in.pos_items[j][b] = pos.items[j];
        in.pos_freq.at(b, j) = pos.freqs[j];
        in.pos_mask.at(b, j) = pos.mask[j];
      }
      for (std::size_t j = 0; j < nn; ++j) {
        in.neg_items[j][b] = neg.items[j];
        in.neg_freq.at(b, j) = neg.freqs[j];
        in.neg_mask.at(b, j) = neg.mask[j];
      }
      batch.session_mask.at(b, t) = pos.valid_count() + neg.valid_count() > 0 ? 1.0 : 0.0;
    }
  }
  return batch;
}

// ---- Layers --------------------------------------------------------------

Fusion fuse(Var p_z, Var c_z, Var e_t, Var w_p, Var w_cz) {
  Var s_p = ag::row_dot(ag::matmul(p_z, w_p), e_t);
  Var s_c = ag::row_dot(ag::matmul(c_z, w_cz), e_t);
  std::vector<Var> scores{s_p, s_c};
  Fusion f;
  f.weights = ag::softmax_rows(ag::concat_cols(scores));
  f.e_p = ag::mul(p_z, ag::slice_cols(f.weights, 0, 1));
  f.e_c = ag::mul(c_z, ag::slice_cols(f.weights, 1, 2));
  return f;
}

Var joint_loss(Var ce, Var lg, double alpha) {
  HIM_CHECK(alpha >= 0.0, ErrorCode::InvalidArgument, "joint_loss: alpha must be >= 0");
  if (!lg.valid()) return ce;
  return ag::add(ag::scale(lg, alpha), ce);
}

// ---- Model ---------------------------------------------------------------

HimModel::HimModel(HimConfig cfg, ModelShape shape)
    : cfg_(resolve(std::move(cfg), shape)), shape_(shape) {
  Rng rng(mix_seed(cfg_.seed, kInitStream));
  register_params(params_, rng);
}

HimModel::HimModel(HimConfig cfg, ModelShape shape, ag::ParamStore params)
    : cfg_(resolve(std::move(cfg), shape)), shape_(shape) {
  ag::ParamStore fresh;
  Rng rng(0);
  register_params(fresh, rng);
  HIM_CHECK(fresh.count() == params.count(), ErrorCode::Parse,
            "checkpoint has " + std::to_string(params.count()) + " parameters, model expects " +
                std::to_string(fresh.count()));
  for (const auto& [name, p] : fresh.all()) {
    HIM_CHECK(params.contains(name), ErrorCode::Parse, "checkpoint lacks parameter " + name);
    HIM_CHECK(params.get(name).value.shape == p.value.shape, ErrorCode::Parse,
              "parameter " + name + " has shape " +
                  ag::shape_str(params.get(name).value.shape) + ", expected " +
                  ag::shape_str(p.value.shape));
  }
  params_ = std::move(params);
}

std::size_t HimModel::mlp_input_dim() const {
  const std::size_t d = cfg_.ubp.d, T = cfg_.ubp.T;
  const std::size_t tail = 5 * d + 2 * d;  // target + context
  switch (cfg_.variant) {
    case Variant::Base: return d + tail;
    case Variant::Ubp: return T * cfg_.ubp.d_p() + tail;
    case Variant::Him: return T * cfg_.ubp.d_p() + T * cfg_.ubc.d_g + tail;
  }
  return 0;
}

void HimModel::register_params(ag::ParamStore& store, Rng& rng) const {
  const std::size_t d = cfg_.ubp.d;
  store.add("emb.item", {shape_.items, d}, ag::Init::Embedding, rng, true);
  store.add("emb.category", {shape_.categories, d}, ag::Init::Embedding, rng, true);
  store.add("emb.brand", {shape_.brands, d}, ag::Init::Embedding, rng, true);
  store.add("emb.shop", {shape_.shops, d}, ag::Init::Embedding, rng, true);
  store.add("emb.price", {static_cast<std::size_t>(data::kPriceBuckets), d},
            ag::Init::Embedding, rng, true);
  store.add("emb.segment", {kSegmentIds, d}, ag::Init::Embedding, rng, true);
  store.add("emb.length", {kLengthBuckets, d}, ag::Init::Embedding, rng, true);
  if (cfg_.variant != Variant::Base) ubp::register_params(store, cfg_.ubp, rng);
  if (cfg_.variant == Variant::Him) {
    const std::size_t T = cfg_.ubp.T;
    ubc::register_params(store, cfg_.ubc, T, cfg_.ubp.d_p(), rng);
    store.add("fusion.w_p", {T * cfg_.ubp.d_p(), 5 * d}, ag::Init::Glorot, rng);
    store.add("fusion.w_cz", {T * cfg_.ubc.d_g, 5 * d}, ag::Init::Glorot, rng);
  }
  std::size_t in = mlp_input_dim();
  for (std::size_t l = 0; l < cfg_.mlp_dims.size(); ++l) {
    const std::string pre = "mlp." + std::to_string(l) + ".";
    store.add(pre + "w", {in, cfg_.mlp_dims[l]}, ag::Init::Glorot, rng);
    store.add(pre + "b", {1, cfg_.mlp_dims[l]}, ag::Init::Zeros, rng);
    in = cfg_.mlp_dims[l];
  }
}

ForwardResult HimModel::forward(Tape& tape, const Batch& batch, const ForwardOptions& options) {
  auto table = [&](const char* name) -> ag::Parameter& { return params_.get(name); };
  ForwardResult out;
  std::vector<Var> features;
  std::vector<Var> target{ag::gather(tape, table("emb.item"), batch.item),
                          ag::gather(tape, table("emb.category"), batch.category),
                          ag::gather(tape, table("emb.brand"), batch.brand),
                          ag::gather(tape, table("emb.shop"), batch.shop),
                          ag::gather(tape, table("emb.price"), batch.price)};
  Var e_t = ag::concat_cols(target);

  if (cfg_.variant == Variant::Base) {
    Var pooled;
    for (std::size_t j = 0; j < batch.history_items.size(); ++j) {
      Var e = ag::mul(ag::gather(tape, table("emb.item"), batch.history_items[j]),
                      ubp::column(tape, batch.history_mask, j));
      pooled = pooled.valid() ? ag::add(pooled, e) : e;
    }
    features.push_back(pooled);
  } else {
    const std::size_t T = cfg_.ubp.T;
    HIM_CHECK(batch.sessions.size() == T, ErrorCode::InvalidArgument,
              "batch has " + std::to_string(batch.sessions.size()) + " sessions, model " +
                  std::to_string(T));
    auto up = ubp::bind_params(tape, params_, cfg_.ubp, table("emb.item"));
    std::vector<Var> px;
    for (std::size_t i = 0; i < T; ++i) {
      auto enc = ubp::encode_session(tape, batch.sessions[i], up, cfg_.ubp);
      px.push_back(enc.p_x);
      if (enc.distances.valid()) {
        out.distances.push_back(enc.distances);
        out.attention.push_back(enc.alpha);
      }
    }
    auto att = ubp::session_self_attention(tape, px, batch.session_mask, up.session_attention);
    out.session_weights = att.weights;
    Var p_z = ag::concat_cols(att.p_z);
    if (cfg_.variant == Variant::Ubp) {
      features.push_back(p_z);
    } else {
      auto uw = ubc::bind_params(tape, params_, T);
      std::vector<Var> cz, phat;
      for (std::size_t i = 0; i < T; ++i) {
        auto g = ubc::encode_groups(px[i], uw[i]);
        auto sel = ubc::select_group(g.beta.value(), uw[i].G);
        out.beta.push_back(g.beta);
        cz.push_back(sel.c_z);
        phat.push_back(g.p_hat);
        out.groups.push_back(std::move(sel.labels));
      }
      if (options.negatives != nullptr) {
        out.group_loss = ubc::group_loss(phat, att.p_z, *options.negatives, cfg_.ubc);
      }
      Var c_z = ag::concat_cols(cz);
      Fusion f = fuse(p_z, c_z, e_t, tape.param(params_.get("fusion.w_p")),
                      tape.param(params_.get("fusion.w_cz")));
      out.fusion = f.weights;
      features.push_back(f.e_p);
      features.push_back(f.e_c);
    }
  }
  features.push_back(e_t);
  features.push_back(ag::gather(tape, table("emb.segment"), batch.segment));
  features.push_back(ag::gather(tape, table("emb.length"), batch.length));

  Var h = ag::concat_cols(features);
  const std::size_t layers = cfg_.mlp_dims.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string pre = "mlp." + std::to_string(l) + ".";
    h = ag::add(ag::matmul(h, tape.param(params_.get(pre + "w"))),
                tape.param(params_.get(pre + "b")));
    if (l + 1 < layers) h = ag::tanh(h);
  }
  out.logits = h;
  return out;
}

std::vector<double> HimModel::predict(const Batch& batch) {
  Tape tape;
  return ag::click_probability(forward(tape, batch).logits.value());
}

std::vector<double> predict_all(HimModel& model, const BatchBuilder& builder,
                                std::span<const data::LabeledSample> samples,
                                std::size_t batch_size) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); i += batch_size) {
    const auto chunk = samples.subspan(i, std::min(batch_size, samples.size() - i));
    const auto p = model.predict(builder.build(chunk));
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

// ---- Training ------------------------------------------------------------

namespace {

double validation_auc(HimModel& model, const BatchBuilder& builder,
                      std::span<const data::LabeledSample> validation) {
  const auto scores = predict_all(model, builder, validation);
  std::vector<int> labels;
  labels.reserve(validation.size());
  for (const auto& s : validation) labels.push_back(s.label);
  return eval::auc(scores, labels);
}

}  // namespace

TrainResult train(HimModel& model, const BatchBuilder& builder,
                  std::span<const data::LabeledSample> train_set,
                  std::span<const data::LabeledSample> validation,
                  const EpochCallback& on_epoch) {
  const HimConfig& cfg = model.config();
  HIM_CHECK(!train_set.empty(), ErrorCode::InvalidArgument, "empty training set");
  HIM_CHECK(!validation.empty(), ErrorCode::InvalidArgument, "empty validation set");
  Rng shuffle_rng(mix_seed(cfg.seed, kShuffleStream));
  Rng negative_rng(mix_seed(cfg.seed, kNegativeStream));
  const bool with_lg = cfg.variant == Variant::Him && cfg.compute_group_loss;
  const ag::AdamOptions adam{cfg.lr};

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<data::LabeledSample> chunk;

  TrainResult result;
  ag::ParamStore best = model.params();
  double best_auc = -1.0;
  std::size_t stale = 0;
  std::size_t batch_id = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order.begin(), order.end());
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t i = 0; i < order.size(); i += cfg.batch_size, ++batch_id) {
      chunk.clear();
      for (std::size_t j = i; j < std::min(order.size(), i + cfg.batch_size); ++j) {
        chunk.push_back(train_set[order[j]]);
      }
      const Batch batch = builder.build(chunk);
      ubc::NegativeTable negatives;
      ForwardOptions options;
      // Small trailing batches use every other row as a negative.
      const std::size_t p = std::min(cfg.ubc.p, batch.size - 1);
      if (with_lg && p > 0) {
        negatives = ubc::draw_negatives(batch.size, p, negative_rng);
        options.negatives = &negatives;
      }
      double loss_v = 0.0, ce_v = 0.0, lg_v = 0.0;
      try {
        Tape tape;
        ForwardResult fr = model.forward(tape, batch, options);
        Var ce = ag::cross_entropy(fr.logits, batch.labels);
        Var loss = joint_loss(ce, fr.group_loss, cfg.alpha);
        loss_v = loss.item();
        ce_v = ce.item();
        lg_v = fr.group_loss.valid() ? fr.group_loss.item() : 0.0;
        HIM_CHECK(std::isfinite(loss_v), ErrorCode::Numeric, "non-finite loss");
        tape.backward(loss);
      } catch (const Error& e) {
        fail(e.code(), "training aborted at epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(batch_id) + ": " + e.what());
      }
      model.params().clip_grad_norm(cfg.clip_norm);
      model.params().adam_step(adam);
      rec.loss += loss_v;
      rec.cross_entropy += ce_v;
      rec.group_loss += lg_v;
      ++batches;
    }
    rec.loss /= static_cast<double>(batches);
    rec.cross_entropy /= static_cast<double>(batches);
    rec.group_loss /= static_cast<double>(batches);
    rec.val_auc = validation_auc(model, builder, validation);
    result.trace.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.val_auc > best_auc) {
      best_auc = rec.val_auc;
      best = model.params();
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  result.best_val_auc = best_auc;
  model.params() = std::move(best);
  return result;
}

}  // namespace him::model

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

#include "him/ubp.hpp"

#include <cmath>

#include "him/error.hpp"

namespace him::ubp {

using ag::Tape;
using ag::Tensor;
using ag::Var;

void UbpConfig::validate() const {
  HIM_CHECK(n_pos >= 1, ErrorCode::InvalidArgument, "ubp: n_pos must be >= 1");
  HIM_CHECK(positive_only || n_neg >= 1, ErrorCode::InvalidArgument,
            "ubp: n_neg must be >= 1 unless positive_only");
  HIM_CHECK(d >= 1 && h >= 1, ErrorCode::InvalidArgument,
            "ubp: embedding and hidden dims must be >= 1");
  HIM_CHECK(T >= 1, ErrorCode::InvalidArgument, "ubp: need at least one session");
}

Var column(Tape& tape, const Tensor& m, std::size_t j) {
  const std::size_t rows = m.rows(), cols = m.cols();
  HIM_CHECK(j < cols, ErrorCode::InvalidArgument,
            "column " + std::to_string(j) + " out of range for " + ag::shape_str(m.shape));
  Tensor out({rows, 1});
  for (std::size_t r = 0; r < rows; ++r) out.data[r] = m.data[r * cols + j];
  return tape.constant(std::move(out));
}

namespace {

void check_slots(const char* op, std::span<const Var> e, const Tensor& freq,
                 const Tensor& mask) {
  HIM_CHECK(!e.empty(), ErrorCode::InvalidArgument, std::string(op) + ": no slots");
  const std::size_t b = e[0].rows();
  HIM_CHECK(freq.shape == ag::Shape({b, e.size()}) && mask.shape == freq.shape,
            ErrorCode::InvalidArgument,
            std::string(op) + ": frequency/mask shape " + ag::shape_str(freq.shape) +
                " does not match " + std::to_string(b) + " x " + std::to_string(e.size()));
  for (double f : freq.data) {
    HIM_CHECK(f >= 0.0 && std::isfinite(f), ErrorCode::InvalidArgument,
              std::string(op) + ": negative frequency");
  }
}

}  // namespace

std::vector<Var> frequency_scale(Tape& tape, std::span<const Var> e,
                                 const Tensor& freq, const Tensor& mask) {
  check_slots("frequency_scale", e, freq, mask);
  Tensor fm = freq;
  for (std::size_t i = 0; i < fm.data.size(); ++i) fm.data[i] *= mask.data[i] != 0.0;
  std::vector<Var> out;
  out.reserve(e.size());
  for (std::size_t j = 0; j < e.size(); ++j) {
    out.push_back(ag::mul(e[j], column(tape, fm, j)));
  }
  return out;
}

Var pool_negative(Tape& tape, std::span<const Var> e_neg, const Tensor& freq,
                  const Tensor& mask) {
  std::vector<Var> scaled = frequency_scale(tape, e_neg, freq, mask);
  Var acc = scaled[0];
  for (std::size_t j = 1; j < scaled.size(); ++j) acc = ag::add(acc, scaled[j]);
  return acc;
}

DistanceAttention distance_attention(std::span<const Var> e_pos_scaled,
                                     Var e_neg_pooled, const Tensor& mask) {
  HIM_CHECK(!e_pos_scaled.empty(), ErrorCode::InvalidArgument,
            "distance_attention: no positive slots");
  std::vector<Var> dist;
  dist.reserve(e_pos_scaled.size());
  for (const Var& e : e_pos_scaled) dist.push_back(ag::euclidean_rows(e, e_neg_pooled));
  DistanceAttention out;
  out.distances = ag::concat_cols(dist);
  out.alpha = ag::softmax_rows(out.distances, mask, ag::EmptyRows::Zero);
  return out;
}

void register_params(ag::ParamStore& store, const UbpConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t d = cfg.d, h = cfg.h;
  for (const char* gate : {"z", "r", "h"}) {
    const std::string g(gate);
    store.add("ubp.gru.w_" + g, {d, h}, ag::Init::Glorot, rng);
    store.add("ubp.gru.u_" + g, {h, h}, ag::Init::Glorot, rng);
    store.add("ubp.gru.b_" + g, {1, h}, ag::Init::Zeros, rng);
  }
  const std::size_t dp = cfg.d_p();
  if (cfg.tie_session_attention) {
    store.add("ubp.attn.shared", {dp, dp}, ag::Init::Glorot, rng);
  } else {
    for (std::size_t i = 0; i < cfg.T; ++i) {
      store.add("ubp.attn." + std::to_string(i), {dp, dp}, ag::Init::Glorot, rng);
    }
  }
}

UbpParams bind_params(Tape& tape, ag::ParamStore& store, const UbpConfig& cfg,
                      ag::Parameter& item_embedding) {
  UbpParams p;
  p.item_embedding = &item_embedding;
  auto get = [&](const std::string& n) { return tape.param(store.get(n)); };
  p.gru.w_z = get("ubp.gru.w_z");
  p.gru.u_z = get("ubp.gru.u_z");
  p.gru.b_z = get("ubp.gru.b_z");
  p.gru.w_r = get("ubp.gru.w_r");
  p.gru.u_r = get("ubp.gru.u_r");
  p.gru.b_r = get("ubp.gru.b_r");
  p.gru.w_h = get("ubp.gru.w_h");
  p.gru.u_h = get("ubp.gru.u_h");
  p.gru.b_h = get("ubp.gru.b_h");
  if (cfg.tie_session_attention) {
    p.session_attention.push_back(get("ubp.attn.shared"));
  } else {
    for (std::size_t i = 0; i < cfg.T; ++i) {
      p.session_attention.push_back(get("ubp.attn." + std::to_string(i)));
    }
  }
  return p;
}

SessionEncoding encode_session(Tape& tape, const SessionInput& in,
                               const UbpParams& params, const UbpConfig& cfg) {
  HIM_CHECK(in.pos_items.size() == cfg.n_pos, ErrorCode::InvalidArgument,
            "encode_session: expected " + std::to_string(cfg.n_pos) + " positive slots");
  HIM_CHECK(params.item_embedding != nullptr, ErrorCode::State,
            "encode_session: item embedding not bound");
  const std::size_t b = in.pos_items[0].size();
  ag::Parameter& table = *params.item_embedding;

  std::vector<Var> e_pos;
  for (const auto& slot : in.pos_items) e_pos.push_back(ag::gather(tape, table, slot));
  std::vector<Var> scaled = frequency_scale(tape, e_pos, in.pos_freq, in.pos_mask);

  SessionEncoding out;
  Var e_neg;
  std::vector<Var> weighted;
  if (cfg.positive_only) {
    e_neg = tape.constant(Tensor({b, cfg.d}));
    weighted = scaled;
  } else {
    HIM_CHECK(in.neg_items.size() == cfg.n_neg, ErrorCode::InvalidArgument,
              "encode_session: expected " + std::to_string(cfg.n_neg) + " negative slots");
    std::vector<Var> e_negs;
    for (const auto& slot : in.neg_items) e_negs.push_back(ag::gather(tape, table, slot));
    e_neg = pool_negative(tape, e_negs, in.neg_freq, in.neg_mask);
    DistanceAttention att = distance_attention(scaled, e_neg, in.pos_mask);
    out.alpha = att.alpha;
    out.distances = att.distances;
    for (std::size_t j = 0; j < cfg.n_pos; ++j) {
      weighted.push_back(ag::mul(scaled[j], ag::slice_cols(att.alpha, j, j + 1)));
    }
  }

  Var state = tape.constant(Tensor({b, cfg.h}));
  std::vector<Var> parts;
  for (std::size_t j = 0; j < cfg.n_pos; ++j) {
    Var next = ag::gru_cell(weighted[j], state, params.gru);
    // Padded slots emit zeros and leave the state untouched.
    Var keep = column(tape, in.pos_mask, j);
    Tensor inv({b, 1});
    for (std::size_t r = 0; r < b; ++r) inv.data[r] = keep.value().data[r] == 0.0;
    parts.push_back(ag::mul(next, keep));
    state = ag::add(parts.back(), ag::mul(state, tape.constant(std::move(inv))));
  }
  parts.push_back(e_neg);
  out.p_x = ag::concat_cols(parts);
  return out;
}

SelfAttentionResult session_self_attention(Tape& tape, std::span<const Var> p_x,
                                           const Tensor& session_mask,
                                           std::span<const Var> projections) {
  const std::size_t T = p_x.size();
  HIM_CHECK(T >= 1, ErrorCode::InvalidArgument, "self-attention: no sessions");
  HIM_CHECK(projections.size() == T || projections.size() == 1,
            ErrorCode::InvalidArgument,
            "self-attention: need " + std::to_string(T) + " projections or one shared");
  const std::size_t b = p_x[0].rows(), dp = p_x[0].cols();
  HIM_CHECK(session_mask.shape == ag::Shape({b, T}), ErrorCode::InvalidArgument,
            "self-attention: session mask shape " + ag::shape_str(session_mask.shape));
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dp));

  Var stacked = ag::concat_rows(p_x);
  SelfAttentionResult out;
  Var shared_proj;
  for (std::size_t i = 0; i < T; ++i) {
    Var proj;
    if (projections.size() == 1) {
      if (!shared_proj.valid()) shared_proj = ag::matmul(stacked, projections[0]);
      proj = shared_proj;
    } else {
      proj = ag::matmul(stacked, projections[i]);
    }
    std::vector<Var> keys;
    for (std::size_t t = 0; t < T; ++t) keys.push_back(ag::slice_rows(proj, t * b, (t + 1) * b));
    std::vector<Var> scores;
    for (std::size_t t = 0; t < T; ++t) {
      scores.push_back(ag::scale(ag::row_dot(keys[t], keys[i]), inv_sqrt));
    }
    Var w = ag::softmax_rows(ag::concat_cols(scores), session_mask, ag::EmptyRows::Zero);
    Var acc = ag::mul(keys[0], ag::slice_cols(w, 0, 1));
    for (std::size_t t = 1; t < T; ++t) {
      acc = ag::add(acc, ag::mul(keys[t], ag::slice_cols(w, t, t + 1)));
    }
    out.p_z.push_back(acc);
    out.weights.push_back(w);
  }
  (void)tape;
  return out;
}

}  // namespace him::ubp

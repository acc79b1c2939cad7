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
#include <span>
#include <string>
#include <vector>

#include "him/autograd.hpp"
#include "him/params.hpp"
#include "him/random.hpp"

namespace him::ubp {

struct UbpConfig {
  std::size_t n_pos = 5;  // top positives per session
  std::size_t n_neg = 5;  // top negatives per session
  std::size_t d = 8;      // item embedding dim
  std::size_t h = 8;      // GRU hidden dim
  std::size_t T = 4;      // sessions
  // Public-dataset variant: no negative pooling, no distance attention.
  bool positive_only = false;
  bool tie_session_attention = false;

  std::size_t d_p() const { return n_pos * h + d; }
  void validate() const;
};

// One session of a batch. Slot j holds the rank-j item of every row.
struct SessionInput {
  std::vector<std::vector<std::int64_t>> pos_items;  // [n_pos][B]
  ag::Tensor pos_freq;                               // [B, n_pos]
  ag::Tensor pos_mask;                               // [B, n_pos]
  std::vector<std::vector<std::int64_t>> neg_items;  // [n_neg][B]
  ag::Tensor neg_freq;                               // [B, n_neg]
  ag::Tensor neg_mask;                               // [B, n_neg]
};

// Column j of a constant matrix as a [rows, 1] tape constant.
ag::Var column(ag::Tape& tape, const ag::Tensor& m, std::size_t j);

// Row j of every slot scaled by its frequency; masked slots become zero.
std::vector<ag::Var> frequency_scale(ag::Tape& tape, std::span<const ag::Var> e,
                                     const ag::Tensor& freq, const ag::Tensor& mask);

// Frequency-weighted sum of the unmasked negative slots -> [B, d].
ag::Var pool_negative(ag::Tape& tape, std::span<const ag::Var> e_neg,
                      const ag::Tensor& freq, const ag::Tensor& mask);

struct DistanceAttention {
  ag::Var distances;  // [B, n]
  ag::Var alpha;      // [B, n], zero rows where no positive is unmasked
};

// Softmax over euclidean distances between each scaled positive and the
// pooled negative: farther positives get larger weights.
DistanceAttention distance_attention(std::span<const ag::Var> e_pos_scaled,
                                     ag::Var e_neg_pooled, const ag::Tensor& mask);

struct UbpParams {
  ag::Parameter* item_embedding = nullptr;
  ag::GruWeights gru;
  std::vector<ag::Var> session_attention;  // T matrices, or one when tied
};

// Registers GRU and session-attention parameters under "ubp.*".
void register_params(ag::ParamStore& store, const UbpConfig& cfg, Rng& rng);
UbpParams bind_params(ag::Tape& tape, ag::ParamStore& store, const UbpConfig& cfg,
                      ag::Parameter& item_embedding);

struct SessionEncoding {
  ag::Var p_x;        // [B, d_p]
  ag::Var alpha;      // [B, n_pos]; invalid in positive_only mode
  ag::Var distances;  // [B, n_pos]; invalid in positive_only mode
};

// GRU over the attention-weighted positives in rank order from a zero
// state; the n hidden states (zeroed at padded slots) are flattened and the
// pooled negative appended.
SessionEncoding encode_session(ag::Tape& tape, const SessionInput& in,
                               const UbpParams& params, const UbpConfig& cfg);

struct SelfAttentionResult {
  std::vector<ag::Var> p_z;      // T x [B, d_p]
  std::vector<ag::Var> weights;  // T x [B, T]
};

// p_z^i = sum_t a_t^i (p_x^t W^i) with a^i = softmax_t(<p_x^t W^i, p_x^i W^i>
// / sqrt(d_p)) over non-empty sessions.
SelfAttentionResult session_self_attention(ag::Tape& tape,
                                           std::span<const ag::Var> p_x,
                                           const ag::Tensor& session_mask,
                                           std::span<const ag::Var> projections);

}  // namespace him::ubp

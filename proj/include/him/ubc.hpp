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
#include <vector>

#include "him/autograd.hpp"
#include "him/params.hpp"
#include "him/random.hpp"

namespace him::ubc {

struct UbcConfig {
  std::size_t k = 5;     // groups
  std::size_t d_g = 16;  // group embedding dim
  std::size_t p = 5;     // negative users per row and session
  double margin = 1.0;
  bool stop_grad_pz = false;

  void validate() const;
};

// Weights of one session. Matrices are stored for row-vector inputs:
// w_c is [d_p, k] and w_r is [d_g, d_p].
struct SessionWeights {
  ag::Var G;    // [k, d_g]
  ag::Var w_c;  // [d_p, k]
  ag::Var b_c;  // [1, k]
  ag::Var w_r;  // [d_g, d_p]
  ag::Var b_r;  // [1, d_p]
};

// Registers "ubc.<i>.*" for sessions 0..T-1.
void register_params(ag::ParamStore& store, const UbcConfig& cfg, std::size_t T,
                     std::size_t d_p, Rng& rng);
std::vector<SessionWeights> bind_params(ag::Tape& tape, ag::ParamStore& store,
                                        std::size_t T);

struct GroupEncoding {
  ag::Var beta;   // [B, k]
  ag::Var mu;     // [B, d_g]
  ag::Var p_hat;  // [B, d_p]
};

GroupEncoding encode_groups(ag::Var p_x, const SessionWeights& w);

// Row-wise argmax; ties resolve to the lowest index.
std::vector<std::int64_t> argmax_rows(const ag::Tensor& beta);

struct GroupSelection {
  std::vector<std::int64_t> labels;  // [B]
  ag::Var c_z;                       // [B, d_g]
};

// Hard lookup: gradient reaches only the selected rows of G.
GroupSelection select_group(const ag::Tensor& beta, ag::Var G);

// negatives[j][b] is the batch row used as the j-th negative of row b.
using NegativeTable = std::vector<std::vector<std::int64_t>>;

// p distinct rows other than b for every row b, uniform without replacement.
NegativeTable draw_negatives(std::size_t batch, std::size_t p, Rng& rng);

// sum_i sum_j max(0, margin - <p_hat^i, p_z^i> + <p_hat^i, p_hat^{i,j}>) over
// unit-normalized rows, averaged over the batch. Negatives are matched by
// session.
ag::Var group_loss(std::span<const ag::Var> p_hat, std::span<const ag::Var> p_z,
                   const NegativeTable& negatives, const UbcConfig& cfg);

}  // namespace him::ubc

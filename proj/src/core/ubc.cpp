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

#include "him/ubc.hpp"

#include <string>

#include "him/error.hpp"

namespace him::ubc {

using ag::Tensor;
using ag::Var;

void UbcConfig::validate() const {
  HIM_CHECK(k >= 1, ErrorCode::InvalidArgument, "ubc: k must be >= 1");
  HIM_CHECK(d_g >= 1, ErrorCode::InvalidArgument, "ubc: d_g must be >= 1");
  HIM_CHECK(p >= 1, ErrorCode::InvalidArgument, "ubc: p must be >= 1");
  HIM_CHECK(margin > 0.0, ErrorCode::InvalidArgument, "ubc: margin must be positive");
}

void register_params(ag::ParamStore& store, const UbcConfig& cfg, std::size_t T,
                     std::size_t d_p, Rng& rng) {
  cfg.validate();
  for (std::size_t i = 0; i < T; ++i) {
    const std::string pre = "ubc." + std::to_string(i) + ".";
    store.add(pre + "G", {cfg.k, cfg.d_g}, ag::Init::Glorot, rng);
    store.add(pre + "w_c", {d_p, cfg.k}, ag::Init::Glorot, rng);
    store.add(pre + "b_c", {1, cfg.k}, ag::Init::Zeros, rng);
    store.add(pre + "w_r", {cfg.d_g, d_p}, ag::Init::Glorot, rng);
    store.add(pre + "b_r", {1, d_p}, ag::Init::Zeros, rng);
  }
}

std::vector<SessionWeights> bind_params(ag::Tape& tape, ag::ParamStore& store,
                                        std::size_t T) {
  std::vector<SessionWeights> out;
  for (std::size_t i = 0; i < T; ++i) {
    const std::string pre = "ubc." + std::to_string(i) + ".";
    SessionWeights w;
    w.G = tape.param(store.get(pre + "G"));
    w.w_c = tape.param(store.get(pre + "w_c"));
    w.b_c = tape.param(store.get(pre + "b_c"));
    w.w_r = tape.param(store.get(pre + "w_r"));
    w.b_r = tape.param(store.get(pre + "b_r"));
    out.push_back(w);
  }
  return out;
}

GroupEncoding encode_groups(Var p_x, const SessionWeights& w) {
  GroupEncoding g;
  g.beta = ag::softmax_rows(ag::add(ag::matmul(p_x, w.w_c), w.b_c));
  g.mu = ag::matmul(g.beta, w.G);
  g.p_hat = ag::sigmoid(ag::add(ag::matmul(g.mu, w.w_r), w.b_r));
  return g;
}

std::vector<std::int64_t> argmax_rows(const Tensor& beta) {
  const std::size_t rows = beta.rows(), k = beta.cols();
  std::vector<std::int64_t> out(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < k; ++s) {
      if (beta.data[r * k + s] > beta.data[r * k + best]) best = s;
    }
    out[r] = static_cast<std::int64_t>(best);
  }
  return out;
}

GroupSelection select_group(const Tensor& beta, Var G) {
  HIM_CHECK(beta.cols() == G.rows(), ErrorCode::InvalidArgument,
            "select_group: beta " + ag::shape_str(beta.shape) + " vs G " +
                ag::shape_str(G.shape()));
  GroupSelection sel;
  sel.labels = argmax_rows(beta);
  sel.c_z = ag::index_rows(G, sel.labels);
  return sel;
}

NegativeTable draw_negatives(std::size_t batch, std::size_t p, Rng& rng) {
  HIM_CHECK(batch >= p + 1, ErrorCode::InvalidArgument,
            "group loss needs batch >= p + 1 (batch " + std::to_string(batch) +
                ", p " + std::to_string(p) + ")");
  NegativeTable table(p, std::vector<std::int64_t>(batch));
  std::vector<std::int64_t> pool(batch - 1);
  for (std::size_t b = 0; b < batch; ++b) {
    // Partial Fisher-Yates over the other rows.
    for (std::size_t i = 0, v = 0; v < batch; ++v) {
      if (v != b) pool[i++] = static_cast<std::int64_t>(v);
    }
    for (std::size_t j = 0; j < p; ++j) {
      const std::size_t pick = j + rng.below(pool.size() - j);
      std::swap(pool[j], pool[pick]);
      table[j][b] = pool[j];
    }
  }
  return table;
}

Var group_loss(std::span<const Var> p_hat, std::span<const Var> p_z,
               const NegativeTable& negatives, const UbcConfig& cfg) {
  HIM_CHECK(!p_hat.empty() && p_hat.size() == p_z.size(), ErrorCode::InvalidArgument,
            "group_loss: session count mismatch");
  HIM_CHECK(!negatives.empty(), ErrorCode::InvalidArgument, "group_loss: no negatives");
  const std::size_t b = p_hat[0].rows();
  for (const auto& row : negatives) {
    HIM_CHECK(row.size() == b, ErrorCode::InvalidArgument,
              "group_loss: negative table does not match batch");
  }
  ag::Tape& tape = *p_hat[0].tape();
  Var margin = tape.constant(Tensor({1, 1}, cfg.margin));
  Var total;
  for (std::size_t i = 0; i < p_hat.size(); ++i) {
    Var nh = ag::normalize_rows(p_hat[i]);
    Var target = cfg.stop_grad_pz ? ag::stop_gradient(p_z[i]) : p_z[i];
    Var nz = ag::normalize_rows(target);
    Var base = ag::sub(margin, ag::row_dot(nh, nz));
    for (const auto& neg : negatives) {
      Var term = ag::relu(ag::add(base, ag::row_dot(nh, ag::index_rows(nh, neg))));
      Var s = ag::sum_all(term);
      total = total.valid() ? ag::add(total, s) : s;
    }
  }
  return ag::scale(total, 1.0 / static_cast<double>(b));
}

}  // namespace him::ubc

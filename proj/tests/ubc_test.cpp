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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "gradcheck.hpp"
#include "him/error.hpp"

namespace him::ubc {
namespace {

using ag::ParamStore;
using ag::Tape;
using ag::Tensor;
using ag::Var;

Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c, double s = 1.0) {
  Tensor t({r, c});
  for (auto& v : t.data) v = rng.uniform(-s, s);
  return t;
}

SessionWeights constants(Tape& t, Rng& rng, std::size_t k, std::size_t dg, std::size_t dp) {
  return {t.constant(random_matrix(rng, k, dg)), t.constant(random_matrix(rng, dp, k)),
          t.constant(random_matrix(rng, 1, k)), t.constant(random_matrix(rng, dg, dp)),
          t.constant(random_matrix(rng, 1, dp))};
}

TEST(EncodeGroups, SingleGroup) {
  Rng rng(1);
  Tape t;
  auto w = constants(t, rng, 1, 3, 4);
  auto g = encode_groups(t.constant(random_matrix(rng, 2, 4)), w);
  EXPECT_EQ(g.beta.value().data, (std::vector<double>{1.0, 1.0}));
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_DOUBLE_EQ(g.mu.value().at(b, c), w.G.value().at(0, c));
    }
  }
}

TEST(EncodeGroups, ZeroEncoderGivesUniformBeta) {
  Rng rng(2);
  Tape t;
  auto w = constants(t, rng, 4, 3, 5);
  w.w_c = t.constant(Tensor({5, 4}));
  w.b_c = t.constant(Tensor({1, 4}));
  auto g = encode_groups(t.constant(random_matrix(rng, 1, 5)), w);
  for (double b : g.beta.value().data) EXPECT_NEAR(b, 0.25, 1e-15);
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0;
    for (std::size_t s = 0; s < 4; ++s) mean += w.G.value().at(s, c) / 4;
    EXPECT_NEAR(g.mu.value().at(0, c), mean, 1e-15);
  }
}

TEST(EncodeGroups, MatchesFormulaOracle) {
  Rng rng(3);
  const std::size_t k = 3, dg = 2, dp = 4, B = 3;
  Tape t;
  auto w = constants(t, rng, k, dg, dp);
  Tensor x = random_matrix(rng, B, dp);
  auto g = encode_groups(t.constant(x), w);
  const Tensor& G = w.G.value();
  const Tensor& wc = w.w_c.value();
  const Tensor& bc = w.b_c.value();
  const Tensor& wr = w.w_r.value();
  const Tensor& br = w.b_r.value();
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<double> logit(k), beta(k), mu(dg, 0.0);
    double z = 0;
    for (std::size_t s = 0; s < k; ++s) {
      logit[s] = bc.data[s];
      for (std::size_t c = 0; c < dp; ++c) logit[s] += wc.at(c, s) * x.at(b, c);
      z += std::exp(logit[s]);
    }
    double total = 0;
    for (std::size_t s = 0; s < k; ++s) {
      beta[s] = std::exp(logit[s]) / z;
      total += g.beta.value().at(b, s);
      EXPECT_NEAR(g.beta.value().at(b, s), beta[s], 1e-12);
      for (std::size_t c = 0; c < dg; ++c) mu[c] += beta[s] * G.at(s, c);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    for (std::size_t c = 0; c < dg; ++c) EXPECT_NEAR(g.mu.value().at(b, c), mu[c], 1e-12);
    for (std::size_t o = 0; o < dp; ++o) {
      double a = br.data[o];
      for (std::size_t c = 0; c < dg; ++c) a += wr.at(c, o) * mu[c];
      EXPECT_NEAR(g.p_hat.value().at(b, o), 1.0 / (1.0 + std::exp(-a)), 1e-12);
    }
  }
}

TEST(EncodeGroups, ShapeMismatchThrows) {
  Rng rng(4);
  Tape t;
  auto w = constants(t, rng, 3, 2, 4);
  EXPECT_THROW(encode_groups(t.constant(random_matrix(rng, 1, 5)), w), Error);
}

TEST(SelectGroup, ArgmaxAndTies) {
  EXPECT_EQ(argmax_rows(Tensor::matrix(1, 3, {0.1, 0.7, 0.2})), (std::vector<std::int64_t>{1}));
  EXPECT_EQ(argmax_rows(Tensor::matrix(1, 2, {0.5, 0.5})), (std::vector<std::int64_t>{0}));
  EXPECT_EQ(argmax_rows(Tensor::matrix(2, 3, {0.2, 0.4, 0.4, 0.3, 0.3, 0.4})),
            (std::vector<std::int64_t>{1, 2}));
}

TEST(SelectGroup, InvariantUnderMonotoneLogitTransform) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Tape t;
    Var logits = t.constant(random_matrix(rng, 4, 5, 3.0));
    auto a = argmax_rows(ag::softmax_rows(logits).value());
    auto b = argmax_rows(ag::softmax_rows(ag::scale(logits, 2.0)).value());
    EXPECT_EQ(a, b);
  }
}

TEST(SelectGroup, LookupGradientHitsSelectedRowsOnly) {
  ParamStore store;
  Rng rng(6);
  auto& G = store.add("G", {3, 2}, ag::Init::Glorot, rng);
  Tape t;
  auto sel = select_group(Tensor::matrix(2, 3, {0.1, 0.1, 0.8, 0.1, 0.1, 0.8}), t.param(G));
  EXPECT_EQ(sel.labels, (std::vector<std::int64_t>{2, 2}));
  t.backward(ag::sum_all(sel.c_z));
  EXPECT_EQ(G.grad.data, (std::vector<double>{0, 0, 0, 0, 2, 2}));
}

TEST(DrawNegatives, DistinctAndNeverSelf) {
  Rng rng(7);
  auto table = draw_negatives(6, 5, rng);
  ASSERT_EQ(table.size(), 5u);
  for (std::size_t b = 0; b < 6; ++b) {
    std::set<std::int64_t> seen;
    for (const auto& row : table) {
      EXPECT_NE(row[b], static_cast<std::int64_t>(b));
      seen.insert(row[b]);
    }
    EXPECT_EQ(seen.size(), 5u);
  }
  EXPECT_THROW(draw_negatives(5, 5, rng), Error);
}

TEST(DrawNegatives, RoughlyUniform) {
  Rng rng(8);
  std::vector<int> hits(10, 0);
  const int n = 20000;
  for (int i = 0; i < n; ++i) hits[draw_negatives(10, 1, rng)[0][0]]++;
  EXPECT_EQ(hits[0], 0);
  for (int v = 1; v < 10; ++v) EXPECT_NEAR(hits[v] / double(n), 1.0 / 9, 0.01);
}

TEST(GroupLoss, SaturatedHingeIsZero) {
  Tape t;
  // Rows alternate between +e1 and -e1; p_z agrees with p_hat.
  Tensor ph = Tensor::matrix(2, 2, {1, 0, -1, 0});
  std::vector<Var> p_hat{t.constant(ph)}, p_z{t.constant(ph)};
  NegativeTable neg{{1, 0}};
  EXPECT_EQ(group_loss(p_hat, p_z, neg, UbcConfig{}).item(), 0.0);
}

TEST(GroupLoss, EqualSimilaritiesCostOnePerTerm) {
  Tape t;
  Tensor ph = Tensor::matrix(3, 2, {1, 1, 1, 1, 1, 1});
  std::vector<Var> p_hat{t.constant(ph), t.constant(ph)};
  std::vector<Var> p_z{t.constant(Tensor::matrix(3, 2, {2, 2, 3, 3, 4, 4})),
                       t.constant(ph)};
  NegativeTable neg{{1, 2, 0}, {2, 0, 1}};
  // 2 sessions x 2 negatives, each term exactly 1, averaged over the batch.
  EXPECT_NEAR(group_loss(p_hat, p_z, neg, UbcConfig{}).item(), 4.0, 1e-12);
}

double oracle_loss(const std::vector<Tensor>& ph, const std::vector<Tensor>& pz,
                   const NegativeTable& neg) {
  auto unit = [](const Tensor& m, std::size_t r) {
    std::vector<double> v(m.cols());
    double n = 0;
    for (std::size_t c = 0; c < v.size(); ++c) n += m.at(r, c) * m.at(r, c);
    n = std::sqrt(n);
    for (std::size_t c = 0; c < v.size(); ++c) v[c] = m.at(r, c) / n;
    return v;
  };
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  const std::size_t B = ph[0].rows();
  double total = 0;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < ph.size(); ++i) {
      for (const auto& row : neg) {
        const auto u = unit(ph[i], b);
        const double v = 1.0 - dot(u, unit(pz[i], b)) + dot(u, unit(ph[i], row[b]));
        total += std::max(0.0, v);
      }
    }
  }
  return total / B;
}

TEST(GroupLoss, MatchesTripleLoopOracle) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Tape t;
    std::vector<Tensor> ph, pz;
    std::vector<Var> vph, vpz;
    for (int i = 0; i < 2; ++i) {
      ph.push_back(random_matrix(rng, 4, 3));
      pz.push_back(random_matrix(rng, 4, 3));
      vph.push_back(t.constant(ph.back()));
      vpz.push_back(t.constant(pz.back()));
    }
    auto neg = draw_negatives(4, 2, rng);
    const double got = group_loss(vph, vpz, neg, UbcConfig{}).item();
    EXPECT_NEAR(got, oracle_loss(ph, pz, neg), 1e-12);
    EXPECT_GE(got, 0.0);
  }
  Tape t;
  std::vector<Var> one{t.constant(random_matrix(rng, 4, 3))};
  EXPECT_THROW(group_loss(one, {}, draw_negatives(4, 2, rng), UbcConfig{}), Error);
}

TEST(GroupLoss, FiniteDifferenceThroughEncoder) {
  UbcConfig cfg;
  cfg.k = 3;
  cfg.d_g = 2;
  cfg.p = 2;
  ParamStore store;
  Rng rng(10);
  register_params(store, cfg, 2, 4, rng);
  auto& px0 = store.add("px0", {4, 4}, ag::Init::Glorot, rng);
  auto& px1 = store.add("px1", {4, 4}, ag::Init::Glorot, rng);
  auto& pz = store.add("pz", {4, 4}, ag::Init::Glorot, rng);
  auto neg = draw_negatives(4, 2, rng);
  auto build = [&](Tape& t) {
    auto w = bind_params(t, store, 2);
    std::vector<Var> ph{encode_groups(t.param(px0), w[0]).p_hat,
                        encode_groups(t.param(px1), w[1]).p_hat};
    Var z = t.param(pz);
    std::vector<Var> zs{z, ag::scale(z, -0.5)};
    return group_loss(ph, zs, neg, cfg);
  };
  const auto res = him::testing::check_gradients(store, build);
  EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
  EXPECT_GT(res.checked, 50u);
}

TEST(GroupLoss, StopGradientBlocksTarget) {
  UbcConfig cfg;
  cfg.p = 1;
  cfg.stop_grad_pz = true;
  ParamStore store;
  Rng rng(11);
  auto& ph = store.add("ph", {3, 4}, ag::Init::Glorot, rng);
  auto& pz = store.add("pz", {3, 4}, ag::Init::Glorot, rng);
  Tape t;
  std::vector<Var> a{t.param(ph)}, b{t.param(pz)};
  t.backward(group_loss(a, b, draw_negatives(3, 1, rng), cfg));
  EXPECT_TRUE(ph.grad_ready);
  EXPECT_FALSE(pz.grad_ready);
}

TEST(UbcConfig, Validation) {
  UbcConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.k = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = UbcConfig{};
  cfg.p = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

}  // namespace
}  // namespace him::ubc

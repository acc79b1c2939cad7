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

#include "him/params.hpp"

#include <cmath>

#include "him/error.hpp"

namespace him::ag {

namespace {

void fill_init(Tensor& t, Init init, Rng& rng) {
  switch (init) {
    case Init::Zeros:
      break;
    case Init::Embedding:
      for (auto& v : t.data) v = rng.uniform(-0.05, 0.05);
      break;
    case Init::Glorot: {
      const double fan_in = static_cast<double>(t.rows());
      const double fan_out = static_cast<double>(t.cols());
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (auto& v : t.data) v = rng.uniform(-limit, limit);
      break;
    }
  }
}

}  // namespace

Parameter& ParamStore::add(const std::string& name, Shape shape, Init init,
                           Rng& rng, bool freeze_row0) {
  HIM_CHECK(!params_.contains(name), ErrorCode::InvalidArgument,
            "duplicate parameter name '" + name + "'");
  Parameter p;
  p.name = name;
  p.value = Tensor(shape);
  fill_init(p.value, init, rng);
  if (freeze_row0) {
    for (std::size_t c = 0; c < p.value.cols(); ++c) p.value.data[c] = 0.0;
  }
  p.grad = Tensor(shape);
  p.adam_m = Tensor(shape);
  p.adam_v = Tensor(shape);
  p.freeze_row0 = freeze_row0;
  return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  HIM_CHECK(it != params_.end(), ErrorCode::InvalidArgument,
            "unknown parameter '" + name + "'");
  return it->second;
}

const Parameter& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  HIM_CHECK(it != params_.end(), ErrorCode::InvalidArgument,
            "unknown parameter '" + name + "'");
  return it->second;
}

bool ParamStore::contains(const std::string& name) const {
  return params_.contains(name);
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) {
    std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
    p.grad_ready = false;
  }
}

double ParamStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& [_, p] : params_) {
    if (!p.grad_ready) continue;
    for (double g : p.grad.data) sq += g * g;
  }
  return std::sqrt(sq);
}

double ParamStore::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [_, p] : params_) {
      if (!p.grad_ready) continue;
      for (double& g : p.grad.data) g *= s;
    }
  }
  return norm;
}

void ParamStore::adam_step(const AdamOptions& o) {
  bool any = false;
  for (const auto& [_, p] : params_) any = any || p.grad_ready;
  HIM_CHECK(any, ErrorCode::State, "adam_step: no gradients populated");

  ++step_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(o.beta1, t);
  const double bc2 = 1.0 - std::pow(o.beta2, t);
  for (auto& [_, p] : params_) {
    if (!p.grad_ready) continue;
    const std::size_t skip = p.freeze_row0 ? p.value.cols() : 0;
    for (std::size_t i = skip; i < p.value.size(); ++i) {
      const double g = p.grad.data[i];
      double& m = p.adam_m.data[i];
      double& v = p.adam_v.data[i];
      m = o.beta1 * m + (1.0 - o.beta1) * g;
      v = o.beta2 * v + (1.0 - o.beta2) * g * g;
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      p.value.data[i] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
  zero_grad();
}

nlohmann::json ParamStore::to_json() const {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, p] : params_) {
    out[name] = {{"shape", p.value.shape},
                 {"values", p.value.data},
                 {"freeze_row0", p.freeze_row0}};
  }
  return out;
}

ParamStore ParamStore::from_json(const nlohmann::json& j) {
  ParamStore store;
  HIM_CHECK(j.is_object(), ErrorCode::Parse, "parameter map must be an object");
  for (const auto& [name, entry] : j.items()) {
    Parameter p;
    p.name = name;
    try {
      p.value = Tensor(entry.at("shape").get<Shape>(),
                       entry.at("values").get<std::vector<double>>());
      p.freeze_row0 = entry.value("freeze_row0", false);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::Parse, "parameter '" + name + "': " + e.what());
    }
    p.grad = Tensor(p.value.shape);
    p.adam_m = Tensor(p.value.shape);
    p.adam_v = Tensor(p.value.shape);
    store.params_.emplace(name, std::move(p));
  }
  return store;
}

}  // namespace him::ag

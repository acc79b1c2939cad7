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
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "him/random.hpp"
#include "him/tensor.hpp"

namespace him::ag {

enum class Init {
  Zeros,
  Embedding,  // uniform(-0.05, 0.05)
  Glorot,     // uniform(+-sqrt(6 / (fan_in + fan_out)))
};

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
  // Set by the tape when a backward pass writes into grad.
  bool grad_ready = false;
  // Row 0 is the PAD/unknown slot of an embedding table and is never updated.
  bool freeze_row0 = false;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class ParamStore {
 public:
  Parameter& add(const std::string& name, Shape shape, Init init, Rng& rng,
                 bool freeze_row0 = false);

  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::map<std::string, Parameter>& all() { return params_; }
  const std::map<std::string, Parameter>& all() const { return params_; }

  std::size_t count() const { return params_.size(); }
  std::size_t scalar_count() const;
  std::int64_t step() const { return step_; }

  void zero_grad();
  double grad_norm() const;
  // Rescales gradients so their global L2 norm is at most max_norm.
  // Returns the norm before clipping.
  double clip_grad_norm(double max_norm);

  // Adam with bias correction. Parameters whose gradient was not populated
  // since the last step are skipped; throws when no gradient is populated.
  void adam_step(const AdamOptions& options);

  // Parameter values only (no optimizer state), name -> {shape, values}.
  nlohmann::json to_json() const;
  static ParamStore from_json(const nlohmann::json& j);

 private:
  std::map<std::string, Parameter> params_;
  std::int64_t step_ = 0;
};

}  // namespace him::ag

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

#include "him/him.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "him/config.hpp"
#include "him/error.hpp"
#include "him/evalbench.hpp"
#include "him/pipeline.hpp"
#include "him/synth.hpp"

struct him_config {
  him::RunConfig cfg;
};

struct him_data {
  him::Prepared p;
};

struct him_model {
  him::RunConfig cfg;
  him::model::HimModel model;
  him::data::ItemVocabularies vocab;
};

struct him_ablation {
  him::eval::AblationResult result;
  std::vector<him::model::Variant> variants;
};

namespace {

thread_local std::string g_last_error;

him_status to_status(him::ErrorCode c) {
  switch (c) {
    case him::ErrorCode::InvalidArgument:
      return HIM_E_INVALID_ARGUMENT;
    case him::ErrorCode::Io:
      return HIM_E_IO;
    case him::ErrorCode::Parse:
      return HIM_E_PARSE;
    case him::ErrorCode::Numeric:
      return HIM_E_NUMERIC;
    case him::ErrorCode::State:
      return HIM_E_STATE;
    case him::ErrorCode::Internal:
      return HIM_E_INTERNAL;
  }
  return HIM_E_INTERNAL;
}

template <typename F>
him_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return HIM_OK;
  } catch (const him::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return HIM_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return HIM_E_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  HIM_CHECK(p != nullptr, him::ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

void copy_out(const std::string& s, char* buf, size_t cap, size_t* needed) {
  if (needed != nullptr) *needed = s.size() + 1;
  if (buf != nullptr && cap > 0) {
    const size_t n = std::min(cap - 1, s.size());
    std::memcpy(buf, s.data(), n);
    buf[n] = '\0';
  }
}

him::model::Variant from_c(him_variant v) {
  switch (v) {
    case HIM_VARIANT_BASE:
      return him::model::Variant::Base;
    case HIM_VARIANT_UBP:
      return him::model::Variant::Ubp;
    case HIM_VARIANT_HIM:
      return him::model::Variant::Him;
  }
  him::fail(him::ErrorCode::InvalidArgument, "unknown variant");
}

him_variant to_c(him::model::Variant v) {
  switch (v) {
    case him::model::Variant::Base:
      return HIM_VARIANT_BASE;
    case him::model::Variant::Ubp:
      return HIM_VARIANT_UBP;
    case him::model::Variant::Him:
      break;
  }
  return HIM_VARIANT_HIM;
}

him_report to_c(const him::eval::EvalReport& r) {
  him_report out;
  out.auc[0] = r.all.auc;
  out.n[0] = r.all.n;
  for (size_t k = 0; k < 3; ++k) {
    out.auc[k + 1] = r.segments[k].auc;
    out.n[k + 1] = r.segments[k].n;
  }
  return out;
}

// The model's item indices must match the data's.
void check_vocab(const him_model& m, const him::data::Dataset& ds) {
  HIM_CHECK(ds.items.keys() == m.vocab.items.keys(), him::ErrorCode::InvalidArgument,
            "data was indexed with a different item vocabulary; prepare it for this model");
}

}  // namespace

extern "C" {

const char* him_version(void) { return "1.0.0"; }

const char* him_last_error(void) { return g_last_error.c_str(); }

const char* him_status_name(him_status s) {
  switch (s) {
    case HIM_OK:
      return "ok";
    case HIM_E_INVALID_ARGUMENT:
      return "invalid argument";
    case HIM_E_IO:
      return "i/o error";
    case HIM_E_PARSE:
      return "parse error";
    case HIM_E_NUMERIC:
      return "numeric error";
    case HIM_E_STATE:
      return "state error";
    case HIM_E_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

// ---- Configuration ----------------------------------------------------------

him_status him_config_default(him_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new him_config{};
  });
}

him_status him_config_load(const char* path, him_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new him_config{him::RunConfig::load(path)};
  });
}

him_status him_config_parse(const char* text, him_config** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new him_config{him::RunConfig::parse(text)};
  });
}

him_status him_config_set(him_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    him::RunConfig next = cfg->cfg;
    next.set(key, value);
    next.validate();
    cfg->cfg = std::move(next);
  });
}

him_status him_config_get(const him_config* cfg, const char* key, char* buf, size_t cap,
                          size_t* needed) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    const auto m = cfg->cfg.to_map();
    const auto it = m.find(key);
    HIM_CHECK(it != m.end(), him::ErrorCode::InvalidArgument,
              std::string("unknown config key '") + key + "'");
    copy_out(it->second, buf, cap, needed);
  });
}

him_status him_config_to_text(const him_config* cfg, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(cfg, "cfg");
    copy_out(cfg->cfg.to_text(), buf, cap, needed);
  });
}

void him_config_free(him_config* cfg) { delete cfg; }

// ---- Synthetic data ---------------------------------------------------------

him_status him_synth_write(const char* spec_path, const char* out_dir, const uint64_t* seed) {
  return guarded([&] {
    require(spec_path, "spec_path");
    require(out_dir, "out_dir");
    him::synth::SynthSpec spec = him::synth::SynthSpec::load(spec_path);
    if (seed != nullptr) spec.seed = *seed;
    him::synth::write(out_dir, him::synth::generate(spec));
  });
}

him_status him_group_recovery(const char* groups_csv, const char* truth_csv, size_t session,
                              double* out) {
  return guarded([&] {
    require(groups_csv, "groups_csv");
    require(truth_csv, "truth_csv");
    require(out, "out");
    HIM_CHECK(session >= 1, him::ErrorCode::InvalidArgument, "session is 1-based");
    std::ifstream in(groups_csv);
    HIM_CHECK(in.good(), him::ErrorCode::Io, std::string("cannot open ") + groups_csv);
    std::string line;
    std::getline(in, line);
    HIM_CHECK(line == "user,session,group", him::ErrorCode::Parse,
              std::string(groups_csv) + ": expected user,session,group header");
    him::synth::GroupMap predicted;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string user, s, g;
      std::getline(ss, user, ',');
      std::getline(ss, s, ',');
      std::getline(ss, g, ',');
      try {
        if (std::stoul(s) == session) predicted[user] = std::stoll(g);
      } catch (const std::exception&) {
        him::fail(him::ErrorCode::Parse, std::string(groups_csv) + ": bad row '" + line + "'");
      }
    }
    HIM_CHECK(!predicted.empty(), him::ErrorCode::InvalidArgument,
              "no group labels for session " + std::to_string(session));
    const auto all_truth = him::synth::load_groups(truth_csv);
    // Users dropped by filtering are left out of the truth side.
    him::synth::GroupMap truth;
    for (const auto& [user, _] : predicted) {
      const auto it = all_truth.find(user);
      HIM_CHECK(it != all_truth.end(), him::ErrorCode::InvalidArgument,
                "user '" + user + "' missing from " + truth_csv);
      truth.emplace(user, it->second);
    }
    *out = him::synth::group_recovery_score(predicted, truth);
  });
}

// ---- Data -------------------------------------------------------------------

him_status him_data_prepare(const char* dir, const him_config* cfg, him_data** out) {
  return guarded([&] {
    require(dir, "dir");
    require(cfg, "cfg");
    require(out, "out");
    *out = new him_data{him::prepare_dir(dir, cfg->cfg.data)};
  });
}

him_status him_data_prepare_for(const char* dir, const him_model* model, him_data** out) {
  return guarded([&] {
    require(dir, "dir");
    require(model, "model");
    require(out, "out");
    const auto raw = him::load_raw(dir, model->cfg.data);
    *out = new him_data{him::prepare(raw, model->cfg.data, model->vocab)};
  });
}

him_status him_data_stats_get(const him_data* data, him_data_stats* out) {
  return guarded([&] {
    require(data, "data");
    require(out, "out");
    const auto& p = data->p;
    out->users = p.dataset.users.size() - 1;
    out->items = p.dataset.items.size() - 1;
    out->raw_records = p.raw_records;
    out->kept_records = p.kept_records;
    out->train = p.split.train.size();
    out->validation = p.split.validation.size();
    out->test = p.split.test.size();
    out->split_hash = him::split_hash(p.split);
    out->has_real_negatives = p.dataset.has_real_negatives ? 1 : 0;
  });
}

him_status him_data_write_split(const him_data* data, const char* dir) {
  return guarded([&] {
    require(data, "data");
    require(dir, "dir");
    him::write_split(dir, data->p);
  });
}

void him_data_free(him_data* data) { delete data; }

// ---- Training and inference ---------------------------------------------------

him_status him_train(const him_config* cfg, const him_data* data, him_epoch_fn on_epoch,
                     void* user, him_model** out, him_train_summary* summary) {
  return guarded([&] {
    require(cfg, "cfg");
    require(data, "data");
    require(out, "out");
    const auto& c = cfg->cfg;
    him::model::EpochCallback cb;
    if (on_epoch != nullptr) {
      cb = [&](const him::model::EpochRecord& r) {
        const him_epoch e{r.epoch, r.loss, r.cross_entropy, r.group_loss, r.val_auc};
        on_epoch(user, &e);
      };
    }
    auto trained = him::eval::train_variant(c, data->p, c.model.variant, c.model.seed, cb);
    if (summary != nullptr) {
      *summary = {trained.result.trace.size(), trained.result.best_epoch,
                  trained.result.best_val_auc};
    }
    *out = new him_model{c, std::move(trained.model),
                         him::data::ItemVocabularies::of(data->p.dataset)};
  });
}

him_status him_model_save(const him_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    him::save_checkpoint(path, model->cfg, model->model, model->vocab);
  });
}

him_status him_model_load(const char* path, him_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    him::Checkpoint c = him::load_checkpoint(path);
    him::model::HimModel m(c.config.model, c.shape, std::move(c.params));
    *out = new him_model{std::move(c.config), std::move(m), std::move(c.vocab)};
  });
}

him_status him_model_config(const him_model* model, him_config** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = new him_config{model->cfg};
  });
}

void him_model_free(him_model* model) { delete model; }

him_status him_model_evaluate(him_model* model, const him_data* data, him_report* out) {
  return guarded([&] {
    require(model, "model");
    require(data, "data");
    require(out, "out");
    const auto& p = data->p;
    check_vocab(*model, p.dataset);
    him::model::BatchBuilder bb(p.dataset, model->model.config());
    const auto scores = him::model::predict_all(model->model, bb, p.split.test);
    const auto seg = him::eval::segment_users(p.dataset, model->cfg.model.segments);
    *out = to_c(him::eval::evaluate(scores, p.split.test, seg));
  });
}

him_status him_model_write_diagnostics(him_model* model, const him_data* data, const char* dir) {
  return guarded([&] {
    require(model, "model");
    require(data, "data");
    require(dir, "dir");
    const auto& p = data->p;
    check_vocab(*model, p.dataset);
    const std::filesystem::path out(dir);
    std::filesystem::create_directories(out);
    him::model::BatchBuilder bb(p.dataset, model->model.config());
    const auto seg = him::eval::segment_users(p.dataset, model->cfg.model.segments);
    const auto d = him::eval::collect_diagnostics(model->model, bb, p.split.test, seg);
    auto open = [&](const char* name) {
      std::ofstream f(out / name);
      HIM_CHECK(f.good(), him::ErrorCode::Io, "cannot write " + (out / name).string());
      return f;
    };
    {
      auto f = open("distance.csv");
      him::eval::write_distance_csv(f, d);
    }
    {
      auto f = open("fusion.csv");
      him::eval::write_fusion_csv(f, d);
    }
    if (model->model.config().variant == him::model::Variant::Him) {
      auto f = open("groups.csv");
      him::eval::write_groups_csv(
          f, p.dataset, him::eval::user_groups(model->model, bb, p.dataset.max_timestamp));
    }
  });
}

him_status him_model_predict(him_model* model, const him_data* data, const him_query* queries,
                             size_t count, double* out) {
  return guarded([&] {
    require(model, "model");
    require(data, "data");
    if (count == 0) return;
    require(queries, "queries");
    require(out, "out");
    const auto& ds = data->p.dataset;
    check_vocab(*model, ds);
    std::vector<him::data::LabeledSample> samples;
    samples.reserve(count);
    for (size_t i = 0; i < count; ++i) {
      require(queries[i].user_id, "query user_id");
      require(queries[i].item_id, "query item_id");
      him::data::LabeledSample s;
      s.user = ds.users.index(queries[i].user_id);
      s.target_item = ds.items.index(queries[i].item_id);
      s.timestamp = queries[i].timestamp;
      s.history_len = him::data::history_prefix(ds, s.user, s.timestamp);
      samples.push_back(s);
    }
    him::model::BatchBuilder bb(ds, model->model.config());
    const auto scores = him::model::predict_all(model->model, bb, samples);
    std::copy(scores.begin(), scores.end(), out);
  });
}

him_status him_baseline_evaluate(const him_config* cfg, const him_data* data, him_baseline kind,
                                 him_report* out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(data, "data");
    require(out, "out");
    const auto& p = data->p;
    std::vector<double> scores;
    if (kind == HIM_BASELINE_POPULARITY) {
      scores = him::eval::PopularityScorer(p.dataset, p.split.train).score(p.split.test);
    } else if (kind == HIM_BASELINE_LR) {
      him::eval::LogisticRegression lr(p.dataset);
      lr.fit(p.split.train, p.split.validation, cfg->cfg.model);
      scores = lr.score(p.split.test);
    } else {
      him::fail(him::ErrorCode::InvalidArgument, "unknown baseline");
    }
    const auto seg = him::eval::segment_users(p.dataset, cfg->cfg.model.segments);
    *out = to_c(him::eval::evaluate(scores, p.split.test, seg));
  });
}

// ---- Ablation ---------------------------------------------------------------

him_status him_ablate(const him_config* cfg, const him_data* data, him_run_fn on_run, void* user,
                      him_ablation** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(data, "data");
    require(out, "out");
    std::function<void(const him::eval::VariantRun&)> progress;
    if (on_run != nullptr) {
      progress = [&](const him::eval::VariantRun& r) {
        const him_run_info info{to_c(r.variant), r.repetition, r.seed, to_c(r.report)};
        on_run(user, &info);
      };
    }
    auto res = him::eval::run_ablation(cfg->cfg, data->p, progress);
    *out = new him_ablation{std::move(res), cfg->cfg.eval.variants};
  });
}

him_status him_ablation_cell(const him_ablation* a, him_variant variant, him_segment segment,
                             him_cell* out) {
  return guarded([&] {
    require(a, "ablation");
    require(out, "out");
    const auto v = from_c(variant);
    HIM_CHECK(std::find(a->variants.begin(), a->variants.end(), v) != a->variants.end(),
              him::ErrorCode::InvalidArgument, "variant was not part of the ablation");
    const int s = static_cast<int>(segment);
    HIM_CHECK(s >= 0 && s < 4, him::ErrorCode::InvalidArgument, "unknown segment");
    const auto cell = him::eval::summarize(a->result, v)[static_cast<size_t>(s)];
    *out = {cell.mean, cell.std, cell.n_samples};
  });
}

him_status him_ablation_split_hash(const him_ablation* a, uint64_t* out) {
  return guarded([&] {
    require(a, "ablation");
    require(out, "out");
    *out = a->result.split_hash;
  });
}

him_status him_ablation_write_csv(const him_ablation* a, const char* path) {
  return guarded([&] {
    require(a, "ablation");
    require(path, "path");
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p);
    HIM_CHECK(f.good(), him::ErrorCode::Io, std::string("cannot write ") + path);
    him::eval::write_report_csv(f, a->result, a->variants);
  });
}

him_status him_ablation_grid(const him_ablation* a, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(a, "ablation");
    copy_out(him::eval::format_grid(a->result, a->variants), buf, cap, needed);
  });
}

void him_ablation_free(him_ablation* a) { delete a; }

}  // extern "C"

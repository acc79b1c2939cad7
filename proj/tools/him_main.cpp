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

// Command-line front end over the C API.

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "him/him.h"

namespace {

struct Failure {
  int code;
};

void check(him_status s) {
  if (s != HIM_OK) {
    std::fprintf(stderr, "him: %s: %s\n", him_status_name(s), him_last_error());
    throw Failure{static_cast<int>(s)};
  }
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
};

using Config = Handle<him_config, him_config_free>;
using Data = Handle<him_data, him_data_free>;
using Model = Handle<him_model, him_model_free>;
using Ablation = Handle<him_ablation, him_ablation_free>;

void load_config(Config& cfg, const std::string& path, const std::vector<std::string>& sets) {
  if (path.empty()) {
    check(him_config_default(cfg.out()));
  } else {
    check(him_config_load(path.c_str(), cfg.out()));
  }
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "him: --set expects key=value, got '%s'\n", kv.c_str());
      throw Failure{HIM_E_INVALID_ARGUMENT};
    }
    check(him_config_set(cfg.p, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
  }
}

void set_seed(Config& cfg, const char* key, const std::optional<std::uint64_t>& seed) {
  if (seed) check(him_config_set(cfg.p, key, std::to_string(*seed).c_str()));
}

void print_stats(const him_data* d) {
  him_data_stats s;
  check(him_data_stats_get(d, &s));
  std::printf("users %zu  items %zu  records %zu/%zu kept\n", s.users, s.items, s.kept_records,
              s.raw_records);
  std::printf("samples train %zu  validation %zu  test %zu  split %016llx\n", s.train,
              s.validation, s.test, static_cast<unsigned long long>(s.split_hash));
}

void print_report(const char* name, const him_report& r) {
  static const char* kSeg[] = {"all", "tailed", "body", "head"};
  for (int k = 0; k < 4; ++k) {
    std::printf("%s\t%s\t%.6f\t%zu\n", name, kSeg[k], r.auc[k], r.n[k]);
  }
}

void on_epoch(void*, const him_epoch* e) {
  std::printf("epoch %zu  loss %.6f  ce %.6f  group %.6f  val_auc %.6f\n", e->epoch, e->loss,
              e->cross_entropy, e->group_loss, e->val_auc);
  std::fflush(stdout);
}

const char* variant_label(him_variant v) {
  return v == HIM_VARIANT_BASE ? "base" : v == HIM_VARIANT_UBP ? "ubp" : "him";
}

void on_run(void*, const him_run_info* r) {
  std::printf("run %zu %-4s seed %llu  auc %.6f  tailed %.6f  body %.6f  head %.6f\n",
              r->repetition + 1, variant_label(r->variant),
              static_cast<unsigned long long>(r->seed), r->report.auc[0], r->report.auc[1],
              r->report.auc[2], r->report.auc[3]);
  std::fflush(stdout);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid interest modeling for long-tailed users"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(him_version()));

  std::string config_path, data_dir, out_path, spec_path, checkpoint, baseline, queries,
      diagnostics, groups_csv, truth_csv;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::size_t session = 1;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value configuration file")
        ->check(CLI::ExistingFile);
    sub->add_option("--set", sets, "override one config entry, key=value");
  };
  auto add_seed = [&](CLI::App* sub, const char* what) {
    sub->add_option("--seed", seed, what);
  };

  auto* prep = app.add_subcommand("prep", "filter, index, sample negatives and split a log");
  add_config(prep);
  prep->add_option("--data", data_dir, "raw data directory")->required()->check(CLI::ExistingDirectory);
  prep->add_option("--out", out_path, "directory for train/validation/test.csv")->required();
  add_seed(prep, "data seed (negative sampling and split)");

  auto* synth = app.add_subcommand("synth", "generate a synthetic long-tail log");
  synth->add_option("--spec", spec_path, "JSON generator spec")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", out_path, "output directory")->required();
  add_seed(synth, "generator seed");

  auto* train = app.add_subcommand("train", "train one model and write a checkpoint");
  add_config(train);
  train->add_option("--data", data_dir, "raw data directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", out_path, "checkpoint path")->required();
  add_seed(train, "model seed (initialization, shuffling, group negatives)");

  auto* eval = app.add_subcommand("eval", "test-split AUC of a checkpoint or a baseline");
  add_config(eval);
  eval->add_option("--data", data_dir, "raw data directory")->required()->check(CLI::ExistingDirectory);
  auto* ck = eval->add_option("--checkpoint", checkpoint, "trained checkpoint")->check(CLI::ExistingFile);
  eval->add_option("--baseline", baseline, "popularity or lr")
      ->check(CLI::IsMember({"popularity", "lr"}))
      ->excludes(ck);
  eval->add_option("--diagnostics", diagnostics, "write distance/fusion/group CSVs here")->needs(ck);
  add_seed(eval, "seed for the lr baseline");

  auto* predict = app.add_subcommand("predict", "score user,item,timestamp queries");
  predict->add_option("--checkpoint", checkpoint, "trained checkpoint")->required()->check(CLI::ExistingFile);
  predict->add_option("--data", data_dir, "raw data directory supplying histories")->required()->check(CLI::ExistingDirectory);
  predict->add_option("--queries", queries, "CSV with user_id,item_id,timestamp")->required()->check(CLI::ExistingFile);
  predict->add_option("--out", out_path, "output CSV (default stdout)");
  add_seed(predict, "accepted for uniformity; prediction is deterministic");

  auto* ablate = app.add_subcommand("ablate", "base / ubp / him ablation over repetitions");
  add_config(ablate);
  ablate->add_option("--data", data_dir, "raw data directory")->required()->check(CLI::ExistingDirectory);
  ablate->add_option("--out", out_path, "report CSV path")->required();
  add_seed(ablate, "base model seed; repetition r uses seed + r");

  auto* purity = app.add_subcommand("purity", "group recovery against planted truth");
  purity->add_option("--groups", groups_csv, "user,session,group CSV")->required()->check(CLI::ExistingFile);
  purity->add_option("--truth", truth_csv, "user_id,group_id CSV")->required()->check(CLI::ExistingFile);
  purity->add_option("--session", session, "1-based session index")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prep) {
      Config cfg;
      load_config(cfg, config_path, sets);
      set_seed(cfg, "data_seed", seed);
      Data d;
      check(him_data_prepare(data_dir.c_str(), cfg.p, d.out()));
      check(him_data_write_split(d.p, out_path.c_str()));
      print_stats(d.p);
    } else if (*synth) {
      const std::uint64_t s = seed.value_or(0);
      check(him_synth_write(spec_path.c_str(), out_path.c_str(), seed ? &s : nullptr));
      std::printf("wrote %s\n", out_path.c_str());
    } else if (*train) {
      Config cfg;
      load_config(cfg, config_path, sets);
      set_seed(cfg, "seed", seed);
      Data d;
      check(him_data_prepare(data_dir.c_str(), cfg.p, d.out()));
      print_stats(d.p);
      Model m;
      him_train_summary sum;
      check(him_train(cfg.p, d.p, on_epoch, nullptr, m.out(), &sum));
      check(him_model_save(m.p, out_path.c_str()));
      std::printf("best epoch %zu of %zu  val_auc %.6f\nwrote %s\n", sum.best_epoch,
                  sum.epochs_run, sum.best_val_auc, out_path.c_str());
    } else if (*eval) {
      him_report r;
      if (!checkpoint.empty()) {
        Model m;
        check(him_model_load(checkpoint.c_str(), m.out()));
        Data d;
        check(him_data_prepare_for(data_dir.c_str(), m.p, d.out()));
        check(him_model_evaluate(m.p, d.p, &r));
        Config cfg;
        check(him_model_config(m.p, cfg.out()));
        std::size_t n = 0;
        char name[16];
        check(him_config_get(cfg.p, "variant", name, sizeof name, &n));
        print_report(name, r);
        if (!diagnostics.empty()) check(him_model_write_diagnostics(m.p, d.p, diagnostics.c_str()));
      } else if (!baseline.empty()) {
        Config cfg;
        load_config(cfg, config_path, sets);
        set_seed(cfg, "seed", seed);
        Data d;
        check(him_data_prepare(data_dir.c_str(), cfg.p, d.out()));
        check(him_baseline_evaluate(
            cfg.p, d.p, baseline == "lr" ? HIM_BASELINE_LR : HIM_BASELINE_POPULARITY, &r));
        print_report(baseline.c_str(), r);
      } else {
        std::fprintf(stderr, "him eval: pass --checkpoint or --baseline\n");
        return HIM_E_INVALID_ARGUMENT;
      }
    } else if (*predict) {
      Model m;
      check(him_model_load(checkpoint.c_str(), m.out()));
      Data d;
      check(him_data_prepare_for(data_dir.c_str(), m.p, d.out()));
      std::ifstream in(queries);
      std::string line;
      std::getline(in, line);
      const auto header = split_csv_line(line);
      int cu = -1, ci = -1, ct = -1;
      for (int i = 0; i < static_cast<int>(header.size()); ++i) {
        if (header[i] == "user_id") cu = i;
        if (header[i] == "item_id") ci = i;
        if (header[i] == "timestamp") ct = i;
      }
      if (cu < 0 || ci < 0 || ct < 0) {
        std::fprintf(stderr, "him predict: queries need user_id,item_id,timestamp columns\n");
        return HIM_E_PARSE;
      }
      std::vector<std::vector<std::string>> rows;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        rows.push_back(split_csv_line(line));
        if (rows.back().size() != header.size()) {
          std::fprintf(stderr, "him predict: bad query row %zu\n", rows.size());
          return HIM_E_PARSE;
        }
      }
      std::vector<him_query> q;
      for (const auto& r : rows) {
        q.push_back({r[cu].c_str(), r[ci].c_str(), std::strtoll(r[ct].c_str(), nullptr, 10)});
      }
      std::vector<double> scores(q.size());
      check(him_model_predict(m.p, d.p, q.data(), q.size(), scores.data()));
      std::ofstream file;
      if (!out_path.empty()) file.open(out_path);
      std::ostream& out = out_path.empty() ? std::cout : file;
      out << "user_id,item_id,timestamp,score\n";
      char buf[32];
      for (std::size_t i = 0; i < q.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.9f", scores[i]);
        out << rows[i][cu] << ',' << rows[i][ci] << ',' << q[i].timestamp << ',' << buf << '\n';
      }
    } else if (*ablate) {
      Config cfg;
      load_config(cfg, config_path, sets);
      set_seed(cfg, "seed", seed);
      Data d;
      check(him_data_prepare(data_dir.c_str(), cfg.p, d.out()));
      print_stats(d.p);
      Ablation a;
      check(him_ablate(cfg.p, d.p, on_run, nullptr, a.out()));
      check(him_ablation_write_csv(a.p, out_path.c_str()));
      std::size_t n = 0;
      check(him_ablation_grid(a.p, nullptr, 0, &n));
      std::string grid(n, '\0');
      check(him_ablation_grid(a.p, grid.data(), n, &n));
      std::printf("%s", grid.c_str());
      std::printf("wrote %s\n", out_path.c_str());
    } else if (*purity) {
      double p = 0;
      check(him_group_recovery(groups_csv.c_str(), truth_csv.c_str(), session, &p));
      std::printf("purity %.6f\n", p);
    }
  } catch (const Failure& f) {
    return f.code;
  }
  return 0;
}

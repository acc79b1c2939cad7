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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CApi : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "him_capi_test";
    fs::remove_all(root_);
    fs::create_directories(root_);
    std::ofstream(root_ / "spec.json")
        << R"({"users": 300, "items": 40, "groups": 4, "max_positives": 10, "seed": 5})";
    ASSERT_EQ(him_synth_write((root_ / "spec.json").c_str(), (root_ / "data").c_str(), nullptr),
              HIM_OK)
        << him_last_error();
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static him_config* small_config() {
    him_config* c = nullptr;
    EXPECT_EQ(him_config_parse(R"(
sessions = 14d,6m,all
n = 3
embed_dim = 4
gru_hidden = 4
groups = 3
group_dim = 4
negative_users = 2
mlp_dims = 8,2
batch_size = 64
epochs = 2
alpha = 0.1
negative_ratio = 1
repetitions = 1
)",
                               &c),
              HIM_OK)
        << him_last_error();
    return c;
  }

  static fs::path root_;
};

fs::path CApi::root_;

TEST_F(CApi, ConfigRoundTrip) {
  him_config* c = nullptr;
  ASSERT_EQ(him_config_default(&c), HIM_OK);
  EXPECT_EQ(him_config_set(c, "groups", "7"), HIM_OK);
  char buf[64];
  size_t needed = 0;
  ASSERT_EQ(him_config_get(c, "groups", buf, sizeof buf, &needed), HIM_OK);
  EXPECT_STREQ(buf, "7");
  EXPECT_EQ(needed, 2u);

  EXPECT_EQ(him_config_set(c, "groups", "0"), HIM_E_INVALID_ARGUMENT);
  EXPECT_NE(std::string(him_last_error()).size(), 0u);
  ASSERT_EQ(him_config_get(c, "groups", buf, sizeof buf, nullptr), HIM_OK);
  EXPECT_STREQ(buf, "7");  // failed set leaves the config unchanged
  EXPECT_EQ(him_config_set(c, "no_such_key", "1"), HIM_E_PARSE);

  ASSERT_EQ(him_config_to_text(c, nullptr, 0, &needed), HIM_OK);
  std::string text(needed, '\0');
  ASSERT_EQ(him_config_to_text(c, text.data(), needed, &needed), HIM_OK);
  him_config* d = nullptr;
  ASSERT_EQ(him_config_parse(text.c_str(), &d), HIM_OK);
  std::string text2(needed, '\0');
  ASSERT_EQ(him_config_to_text(d, text2.data(), needed, nullptr), HIM_OK);
  EXPECT_EQ(text, text2);
  him_config_free(c);
  him_config_free(d);
}

TEST_F(CApi, ErrorsAreReported) {
  him_config* c = nullptr;
  EXPECT_EQ(him_config_load("/nonexistent/x.conf", &c), HIM_E_IO);
  EXPECT_EQ(c, nullptr);
  EXPECT_EQ(him_config_default(nullptr), HIM_E_INVALID_ARGUMENT);
  EXPECT_NE(std::string(him_last_error()).find("NULL"), std::string::npos);
  him_model* m = nullptr;
  EXPECT_EQ(him_model_load((root_ / "spec.json").c_str(), &m), HIM_E_PARSE);
  EXPECT_STREQ(him_status_name(HIM_E_IO), "i/o error");
  him_config_free(nullptr);
  him_model_free(nullptr);
}

TEST_F(CApi, TrainSaveLoadEvaluate) {
  him_config* c = small_config();
  him_data* d = nullptr;
  ASSERT_EQ(him_data_prepare((root_ / "data").c_str(), c, &d), HIM_OK) << him_last_error();
  him_data_stats st;
  ASSERT_EQ(him_data_stats_get(d, &st), HIM_OK);
  EXPECT_GT(st.test, 0u);
  EXPECT_EQ(st.has_real_negatives, 1);

  int epochs_seen = 0;
  him_model* m = nullptr;
  him_train_summary sum;
  ASSERT_EQ(him_train(
                c, d, [](void* u, const him_epoch*) { ++*static_cast<int*>(u); }, &epochs_seen,
                &m, &sum),
            HIM_OK)
      << him_last_error();
  EXPECT_EQ(epochs_seen, 2);
  EXPECT_EQ(sum.epochs_run, 2u);

  him_report r1;
  ASSERT_EQ(him_model_evaluate(m, d, &r1), HIM_OK) << him_last_error();
  EXPECT_EQ(r1.n[0], st.test);
  EXPECT_EQ(r1.n[1] + r1.n[2] + r1.n[3], st.test);
  EXPECT_TRUE(r1.auc[0] >= 0 && r1.auc[0] <= 1);

  const fs::path ck = root_ / "model.json";
  ASSERT_EQ(him_model_save(m, ck.c_str()), HIM_OK) << him_last_error();
  him_model* loaded = nullptr;
  ASSERT_EQ(him_model_load(ck.c_str(), &loaded), HIM_OK) << him_last_error();
  him_data* d2 = nullptr;
  ASSERT_EQ(him_data_prepare_for((root_ / "data").c_str(), loaded, &d2), HIM_OK)
      << him_last_error();
  him_data_stats st2;
  ASSERT_EQ(him_data_stats_get(d2, &st2), HIM_OK);
  EXPECT_EQ(st2.split_hash, st.split_hash);
  him_report r2;
  ASSERT_EQ(him_model_evaluate(loaded, d2, &r2), HIM_OK) << him_last_error();
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(std::isnan(r1.auc[k]), std::isnan(r2.auc[k]));
    if (!std::isnan(r1.auc[k])) {
      EXPECT_EQ(r1.auc[k], r2.auc[k]);
    }
    EXPECT_EQ(r1.n[k], r2.n[k]);
  }

  const him_query q[] = {{"u1", "i0", 1700000000}, {"nobody", "nothing", 1700000000}};
  double scores[2];
  ASSERT_EQ(him_model_predict(loaded, d2, q, 2, scores), HIM_OK) << him_last_error();
  for (double s : scores) EXPECT_TRUE(s > 0 && s < 1) << s;

  const fs::path diag = root_ / "diag";
  ASSERT_EQ(him_model_write_diagnostics(loaded, d2, diag.c_str()), HIM_OK) << him_last_error();
  double purity = -1;
  ASSERT_EQ(him_group_recovery((diag / "groups.csv").c_str(), (root_ / "data" / "groups.csv").c_str(),
                               1, &purity),
            HIM_OK)
      << him_last_error();
  EXPECT_TRUE(purity >= 0 && purity <= 1);
  EXPECT_EQ(slurp(diag / "fusion.csv").rfind("segment,weight_p,weight_c,n_samples\n", 0), 0u);

  him_model_free(m);
  him_model_free(loaded);
  him_data_free(d);
  him_data_free(d2);
  him_config_free(c);
}

TEST_F(CApi, ForeignVocabularyIsRejected) {
  him_config* c = small_config();
  him_data* d = nullptr;
  ASSERT_EQ(him_data_prepare((root_ / "data").c_str(), c, &d), HIM_OK);
  him_model* m = nullptr;
  ASSERT_EQ(him_train(c, d, nullptr, nullptr, &m, nullptr), HIM_OK) << him_last_error();
  std::ofstream(root_ / "spec2.json")
      << R"({"users": 200, "items": 30, "groups": 3, "max_positives": 8, "seed": 6})";
  ASSERT_EQ(him_synth_write((root_ / "spec2.json").c_str(), (root_ / "other").c_str(), nullptr),
            HIM_OK);
  him_data* other = nullptr;
  ASSERT_EQ(him_data_prepare((root_ / "other").c_str(), c, &other), HIM_OK);
  him_report r;
  EXPECT_EQ(him_model_evaluate(m, other, &r), HIM_E_INVALID_ARGUMENT);
  him_data_free(other);
  him_model_free(m);
  him_data_free(d);
  him_config_free(c);
}

TEST_F(CApi, SameSeedSameCheckpoint) {
  him_config* c = small_config();
  him_data* d = nullptr;
  ASSERT_EQ(him_data_prepare((root_ / "data").c_str(), c, &d), HIM_OK);
  for (const char* name : {"a.json", "b.json"}) {
    him_model* m = nullptr;
    ASSERT_EQ(him_train(c, d, nullptr, nullptr, &m, nullptr), HIM_OK);
    ASSERT_EQ(him_model_save(m, (root_ / name).c_str()), HIM_OK);
    him_model_free(m);
  }
  EXPECT_EQ(slurp(root_ / "a.json"), slurp(root_ / "b.json"));
  him_data_free(d);
  him_config_free(c);
}

TEST_F(CApi, BaselinesAndAblation) {
  him_config* c = small_config();
  him_data* d = nullptr;
  ASSERT_EQ(him_data_prepare((root_ / "data").c_str(), c, &d), HIM_OK);
  for (him_baseline b : {HIM_BASELINE_POPULARITY, HIM_BASELINE_LR}) {
    him_report r;
    ASSERT_EQ(him_baseline_evaluate(c, d, b, &r), HIM_OK) << him_last_error();
    EXPECT_TRUE(r.auc[0] >= 0 && r.auc[0] <= 1);
  }
  int runs = 0;
  him_ablation* a = nullptr;
  ASSERT_EQ(him_ablate(
                c, d, [](void* u, const him_run_info*) { ++*static_cast<int*>(u); }, &runs, &a),
            HIM_OK)
      << him_last_error();
  EXPECT_EQ(runs, 3);
  him_cell cell;
  ASSERT_EQ(him_ablation_cell(a, HIM_VARIANT_HIM, HIM_SEGMENT_ALL, &cell), HIM_OK);
  EXPECT_EQ(cell.std, 0.0);
  him_data_stats st;
  him_data_stats_get(d, &st);
  uint64_t h = 0;
  ASSERT_EQ(him_ablation_split_hash(a, &h), HIM_OK);
  EXPECT_EQ(h, st.split_hash);
  ASSERT_EQ(him_ablation_write_csv(a, (root_ / "report.csv").c_str()), HIM_OK);
  EXPECT_EQ(slurp(root_ / "report.csv").rfind("variant,segment,auc_mean,auc_std,n_samples\n", 0),
            0u);
  size_t needed = 0;
  ASSERT_EQ(him_ablation_grid(a, nullptr, 0, &needed), HIM_OK);
  EXPECT_GT(needed, 1u);
  EXPECT_EQ(him_ablation_cell(a, static_cast<him_variant>(9), HIM_SEGMENT_ALL, &cell),
            HIM_E_INVALID_ARGUMENT);
  him_ablation_free(a);
  him_data_free(d);
  him_config_free(c);
}

}  // namespace

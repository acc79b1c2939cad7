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

#include "him/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "him/error.hpp"
#include "him/reorg.hpp"

namespace him::eval {

double auc(std::span<const double> scores, std::span<const int> labels) {
  HIM_CHECK(scores.size() == labels.size(), ErrorCode::InvalidArgument,
            "auc: " + std::to_string(scores.size()) + " scores vs " +
                std::to_string(labels.size()) + " labels");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the rank sum of positives, kept integral so ties stay exact.
  std::int64_t pos = 0, twice_rank_sum = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1..j share (i+1+j)/2.
    const std::int64_t twice_avg = static_cast<std::int64_t>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      const int y = labels[order[t]];
      HIM_CHECK(y == 0 || y == 1, ErrorCode::InvalidArgument, "auc: labels must be 0/1");
      if (y == 1) {
        ++pos;
        twice_rank_sum += twice_avg;
      }
    }
    i = j;
  }
  const std::int64_t neg = static_cast<std::int64_t>(n) - pos;
  HIM_CHECK(pos > 0 && neg > 0, ErrorCode::InvalidArgument,
            "auc: need at least one positive and one negative");
  const std::int64_t twice_u = twice_rank_sum - pos * (pos + 1);
  return (static_cast<double>(twice_u) * 0.5) /
         (static_cast<double>(pos) * static_cast<double>(neg));
}

const char* segment_name(UserSegment s) {
  switch (s) {
    case UserSegment::Tailed: return "tailed";
    case UserSegment::Body: return "body";
    case UserSegment::Head: return "head";
  }
  return "?";
}

const char* segment_kind_name(SegmentKind k) {
  return k == SegmentKind::SequenceLength ? "length" : "active_days";
}

SegmentKind parse_segment_kind(std::string_view text) {
  if (text == "length") return SegmentKind::SequenceLength;
  if (text == "active_days") return SegmentKind::ActiveDays;
  fail(ErrorCode::InvalidArgument,
       "unknown segment kind '" + std::string(text) + "' (length|active_days)");
}

SegmentThresholds SegmentThresholds::defaults(SegmentKind kind) {
  if (kind == SegmentKind::ActiveDays) return {kind, 7, 15};
  return {kind, 3, 5};
}

void SegmentThresholds::validate() const {
  HIM_CHECK(lo <= hi, ErrorCode::InvalidArgument,
            "segment thresholds need lo <= hi (got " + std::to_string(lo) + ", " +
                std::to_string(hi) + ")");
}

UserSegment SegmentThresholds::classify(std::size_t value) const {
  if (value < lo) return UserSegment::Tailed;
  if (value <= hi) return UserSegment::Body;
  return UserSegment::Head;
}

std::size_t activity_value(std::span<const data::Event> history, SegmentKind kind,
                           std::int64_t ref_time) {
  if (kind == SegmentKind::SequenceLength) {
    return static_cast<std::size_t>(
        std::count_if(history.begin(), history.end(), [](const data::Event& e) {
          return e.feedback == data::Feedback::Positive;
        }));
  }
  std::set<std::int64_t> days;
  for (const auto& e : history) {
    const std::int64_t age = ref_time - e.timestamp;
    if (age >= 0 && age < reorg::kMonth) days.insert(e.timestamp / reorg::kDay);
  }
  return days.size();
}

std::vector<UserSegment> segment_users(const data::Dataset& ds,
                                       const SegmentThresholds& thresholds) {
  thresholds.validate();
  std::vector<UserSegment> out(ds.histories.size(), UserSegment::Tailed);
  for (std::size_t u = 1; u < ds.histories.size(); ++u) {
    out[u] = thresholds.classify(
        activity_value(ds.histories[u], thresholds.kind, ds.max_timestamp));
  }
  return out;
}

}  // namespace him::eval

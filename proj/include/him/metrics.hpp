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
#include <string_view>
#include <vector>

#include "him/data.hpp"

namespace him::eval {

// Area under the ROC curve from average ranks; tied scores count 1/2.
double auc(std::span<const double> scores, std::span<const int> labels);

enum class UserSegment : std::uint8_t { Tailed = 1, Body = 2, Head = 3 };
inline constexpr UserSegment kSegments[] = {UserSegment::Tailed, UserSegment::Body,
                                            UserSegment::Head};

const char* segment_name(UserSegment s);

enum class SegmentKind { SequenceLength, ActiveDays };

const char* segment_kind_name(SegmentKind k);
SegmentKind parse_segment_kind(std::string_view text);

// value < lo -> Tailed, lo <= value <= hi -> Body, value > hi -> Head.
struct SegmentThresholds {
  SegmentKind kind = SegmentKind::SequenceLength;
  std::size_t lo = 3;
  std::size_t hi = 5;

  static SegmentThresholds defaults(SegmentKind kind);
  void validate() const;
  UserSegment classify(std::size_t value) const;
};

// Positive count, or distinct active days in the 30 days up to ref_time.
std::size_t activity_value(std::span<const data::Event> history, SegmentKind kind,
                           std::int64_t ref_time);

// Indexed by user id; entry 0 (PAD) is Tailed. Uses each user's full history
// with the dataset's last timestamp as reference.
std::vector<UserSegment> segment_users(const data::Dataset& ds,
                                       const SegmentThresholds& thresholds);

}  // namespace him::eval

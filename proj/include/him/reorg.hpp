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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "him/data.hpp"

namespace him::reorg {

inline constexpr std::int64_t kDay = 86400;
inline constexpr std::int64_t kMonth = 30 * kDay;

// Backward-looking time buckets measured from a reference time. Session i
// covers ages [cut[i-1], cut[i]); with an open end ("all") the last session
// takes every older event, otherwise events at or past the last cut drop.
class SessionBoundaries {
 public:
  // Comma-separated durations: "14d,6m,12m,all" or "3d,7d,14d,30d".
  // Units: s, h, d, w, m (30 days), y (360 days).
  static SessionBoundaries parse(std::string_view text);

  SessionBoundaries(std::vector<std::int64_t> cuts, bool open_ended,
                    std::vector<std::string> labels = {});

  std::size_t session_count() const { return labels_.size(); }
  std::optional<std::size_t> session_of(std::int64_t age) const;

  const std::vector<std::int64_t>& cuts() const { return cuts_; }
  const std::vector<std::string>& labels() const { return labels_; }
  bool open_ended() const { return open_ended_; }
  std::string to_string() const;

 private:
  std::vector<std::int64_t> cuts_;
  bool open_ended_;
  std::vector<std::string> labels_;
};

// Top-n items of one session and sign, frequency-descending, padded to n.
struct RankedFeedback {
  std::vector<std::int32_t> items;
  std::vector<std::int32_t> freqs;
  std::vector<std::uint8_t> mask;

  std::size_t valid_count() const;
  bool operator==(const RankedFeedback&) const = default;
};

struct SessionizedHistory {
  std::vector<RankedFeedback> positive;
  std::vector<RankedFeedback> negative;

  std::size_t session_count() const { return positive.size(); }
  bool operator==(const SessionizedHistory&) const = default;
};

struct SessionBucket {
  std::vector<data::Event> positive;
  std::vector<data::Event> negative;
};

std::vector<SessionBucket> sessionize(std::span<const data::Event> history,
                                      const SessionBoundaries& boundaries,
                                      std::int64_t ref_time);

// Counts distinct items and orders them by (count desc, latest timestamp
// desc, item asc).
RankedFeedback frequency_rank(std::span<const data::Event> bucket, std::size_t n);

SessionizedHistory reorganize(std::span<const data::Event> history,
                              const SessionBoundaries& boundaries,
                              std::size_t n_pos, std::size_t n_neg,
                              std::int64_t ref_time);

}  // namespace him::reorg

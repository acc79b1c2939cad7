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

#include "him/reorg.hpp"

#include <algorithm>
#include <charconv>
#include <map>

#include "him/error.hpp"

namespace him::reorg {

namespace {

std::int64_t parse_duration(std::string_view token) {
  HIM_CHECK(token.size() >= 2, ErrorCode::Parse,
            "invalid session duration '" + std::string(token) + "'");
  std::int64_t count = 0;
  const auto* end = token.data() + token.size() - 1;
  const auto res = std::from_chars(token.data(), end, count);
  HIM_CHECK(res.ec == std::errc() && res.ptr == end && count > 0, ErrorCode::Parse,
            "invalid session duration '" + std::string(token) + "'");
  switch (token.back()) {
    case 's': return count;
    case 'h': return count * 3600;
    case 'd': return count * kDay;
    case 'w': return count * 7 * kDay;
    case 'm': return count * kMonth;
    case 'y': return count * 12 * kMonth;
    default:
      fail(ErrorCode::Parse, "unknown duration unit in '" + std::string(token) + "'");
  }
}

}  // namespace

SessionBoundaries SessionBoundaries::parse(std::string_view text) {
  std::vector<std::string> labels;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    auto tok = text.substr(start, comma == std::string_view::npos ? text.npos : comma - start);
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
    if (!tok.empty()) labels.emplace_back(tok);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  HIM_CHECK(!labels.empty(), ErrorCode::Parse, "empty session list");
  const bool open = labels.back() == "all";
  std::vector<std::int64_t> cuts;
  for (std::size_t i = 0; i + (open ? 1 : 0) < labels.size(); ++i) {
    HIM_CHECK(labels[i] != "all", ErrorCode::Parse, "'all' must be the last session");
    cuts.push_back(parse_duration(labels[i]));
  }
  return SessionBoundaries(std::move(cuts), open, std::move(labels));
}

SessionBoundaries::SessionBoundaries(std::vector<std::int64_t> cuts, bool open_ended,
                                     std::vector<std::string> labels)
    : cuts_(std::move(cuts)), open_ended_(open_ended), labels_(std::move(labels)) {
  for (std::size_t i = 0; i < cuts_.size(); ++i) {
    HIM_CHECK(cuts_[i] > 0, ErrorCode::InvalidArgument, "session cut must be positive");
    HIM_CHECK(i == 0 || cuts_[i] > cuts_[i - 1], ErrorCode::InvalidArgument,
              "session cuts must be strictly increasing");
  }
  const std::size_t count = cuts_.size() + (open_ended_ ? 1 : 0);
  HIM_CHECK(count >= 1, ErrorCode::InvalidArgument, "need at least one session");
  if (labels_.empty()) {
    for (auto c : cuts_) labels_.push_back(std::to_string(c) + "s");
    if (open_ended_) labels_.push_back("all");
  }
  HIM_CHECK(labels_.size() == count, ErrorCode::InvalidArgument,
            "session label count does not match boundaries");
}

std::optional<std::size_t> SessionBoundaries::session_of(std::int64_t age) const {
  for (std::size_t i = 0; i < cuts_.size(); ++i) {
    if (age < cuts_[i]) return i;
  }
  if (open_ended_) return cuts_.size();
  return std::nullopt;
}

std::string SessionBoundaries::to_string() const {
  std::string out;
  for (const auto& l : labels_) {
    if (!out.empty()) out += ',';
    out += l;
  }
  return out;
}

std::size_t RankedFeedback::valid_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

std::vector<SessionBucket> sessionize(std::span<const data::Event> history,
                                      const SessionBoundaries& boundaries,
                                      std::int64_t ref_time) {
  std::vector<SessionBucket> out(boundaries.session_count());
  for (const auto& e : history) {
    HIM_CHECK(e.timestamp <= ref_time, ErrorCode::InvalidArgument,
              "sessionize: event at " + std::to_string(e.timestamp) +
                  " is after reference time " + std::to_string(ref_time));
    const auto s = boundaries.session_of(ref_time - e.timestamp);
    if (!s) continue;
    auto& bucket = out[*s];
    (e.feedback == data::Feedback::Positive ? bucket.positive : bucket.negative).push_back(e);
  }
  return out;
}

RankedFeedback frequency_rank(std::span<const data::Event> bucket, std::size_t n) {
  struct Stat {
    std::int32_t count = 0;
    std::int64_t latest = INT64_MIN;
  };
  std::map<std::int32_t, Stat> stats;
  for (const auto& e : bucket) {
    HIM_CHECK(e.feedback == bucket.front().feedback, ErrorCode::InvalidArgument,
              "frequency_rank: bucket mixes feedback signs");
    auto& s = stats[e.item];
    ++s.count;
    s.latest = std::max(s.latest, e.timestamp);
  }
  std::vector<std::pair<std::int32_t, Stat>> ranked(stats.begin(), stats.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    if (a.second.latest != b.second.latest) return a.second.latest > b.second.latest;
    return a.first < b.first;
  });
  RankedFeedback out{std::vector<std::int32_t>(n, 0), std::vector<std::int32_t>(n, 0),
                     std::vector<std::uint8_t>(n, 0)};
  for (std::size_t i = 0; i < std::min(n, ranked.size()); ++i) {
    out.items[i] = ranked[i].first;
    out.freqs[i] = ranked[i].second.count;
    out.mask[i] = 1;
  }
  return out;
}

SessionizedHistory reorganize(std::span<const data::Event> history,
                              const SessionBoundaries& boundaries,
                              std::size_t n_pos, std::size_t n_neg,
                              std::int64_t ref_time) {
  SessionizedHistory out;
  for (const auto& bucket : sessionize(history, boundaries, ref_time)) {
    out.positive.push_back(frequency_rank(bucket.positive, n_pos));
    out.negative.push_back(frequency_rank(bucket.negative, n_neg));
  }
  return out;
}

}  // namespace him::reorg

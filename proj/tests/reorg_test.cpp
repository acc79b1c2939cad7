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
#include <map>
#include <set>
#include <tuple>

#include <gtest/gtest.h>

#include "him/error.hpp"
#include "him/random.hpp"

namespace him::reorg {
namespace {

using data::Event;
using data::Feedback;

constexpr std::int64_t kRef = 1'700'000'000;

Event ev(std::int32_t item, std::int64_t age, Feedback f = Feedback::Positive) {
  return Event{item, kRef - age, f};
}

TEST(Boundaries, ParsesPaperSessionLists) {
  const auto b = SessionBoundaries::parse("14d,6m,12m,all");
  EXPECT_EQ(b.session_count(), 4u);
  EXPECT_EQ(b.cuts(), (std::vector<std::int64_t>{14 * kDay, 180 * kDay, 360 * kDay}));
  EXPECT_EQ(b.to_string(), "14d,6m,12m,all");
  const auto ind = SessionBoundaries::parse("3d,7d,14d,30d");
  EXPECT_EQ(ind.session_count(), 4u);
  EXPECT_FALSE(ind.session_of(31 * kDay).has_value());
  EXPECT_EQ(ind.session_of(29 * kDay), 3u);
  EXPECT_THROW(SessionBoundaries::parse("6m,14d,all"), Error);
  EXPECT_THROW(SessionBoundaries::parse("all,14d"), Error);
  EXPECT_THROW(SessionBoundaries::parse("14x"), Error);
}

TEST(Sessionize, HalfOpenIntervals) {
  const auto b = SessionBoundaries::parse("14d,6m,12m,all");
  EXPECT_EQ(b.session_of(3 * kDay), 0u);
  EXPECT_EQ(b.session_of(14 * kDay), 1u);
  EXPECT_EQ(b.session_of(14 * kDay - 1), 0u);
  EXPECT_EQ(b.session_of(5000 * kDay), 3u);
}

TEST(Sessionize, MatchesLinearScanOracle) {
  const auto b = SessionBoundaries::parse("14d,6m,12m,all");
  Rng rng(4);
  std::vector<Event> h;
  for (int i = 0; i < 200; ++i) {
    h.push_back(ev(static_cast<std::int32_t>(1 + rng.below(30)),
                   static_cast<std::int64_t>(rng.below(800 * kDay)),
                   rng.below(3) ? Feedback::Positive : Feedback::Negative));
  }
  const auto buckets = sessionize(h, b, kRef);
  std::size_t pos[4] = {0, 0, 0, 0}, neg[4] = {0, 0, 0, 0};
  for (const auto& e : h) {
    const std::int64_t age = kRef - e.timestamp;
    int s = 3;
    if (age < 360 * kDay) s = 2;
    if (age < 180 * kDay) s = 1;
    if (age < 14 * kDay) s = 0;
    (e.feedback == Feedback::Positive ? pos : neg)[s]++;
  }
  for (int s = 0; s < 4; ++s) {
    EXPECT_EQ(buckets[s].positive.size(), pos[s]);
    EXPECT_EQ(buckets[s].negative.size(), neg[s]);
  }
  std::vector<Event> future{Event{1, kRef + 1, Feedback::Positive}};
  EXPECT_THROW(sessionize(future, b, kRef), Error);
}

TEST(FrequencyRank, CountsAndPads) {
  // A=1, B=2, C=3
  std::vector<Event> bucket{ev(1, 9), ev(2, 8), ev(1, 7), ev(1, 6), ev(2, 5), ev(3, 4)};
  const auto r = frequency_rank(bucket, 2);
  EXPECT_EQ(r.items, (std::vector<std::int32_t>{1, 2}));
  EXPECT_EQ(r.freqs, (std::vector<std::int32_t>{3, 2}));
  EXPECT_EQ(r.mask, (std::vector<std::uint8_t>{1, 1}));

  const auto empty = frequency_rank({}, 3);
  EXPECT_EQ(empty.items, (std::vector<std::int32_t>{0, 0, 0}));
  EXPECT_EQ(empty.freqs, (std::vector<std::int32_t>{0, 0, 0}));
  EXPECT_EQ(empty.valid_count(), 0u);
}

TEST(FrequencyRank, TieBreaksByRecencyThenIndex) {
  std::vector<Event> bucket{ev(5, 100), ev(4, 10), ev(7, 10)};
  const auto r = frequency_rank(bucket, 3);
  EXPECT_EQ(r.items, (std::vector<std::int32_t>{4, 7, 5}));
}

TEST(FrequencyRank, MatchesFullSortOracle) {
  Rng rng(13);
  std::vector<Event> bucket;
  for (int i = 0; i < 1000; ++i) {
    bucket.push_back(ev(static_cast<std::int32_t>(1 + rng.below(60)),
                        static_cast<std::int64_t>(rng.below(1000))));
  }
  std::map<std::int32_t, std::pair<int, std::int64_t>> hist;
  for (const auto& e : bucket) {
    auto& [c, latest] = hist[e.item];
    ++c;
    latest = std::max(latest, e.timestamp);
  }
  std::vector<std::tuple<int, std::int64_t, std::int32_t>> all;
  for (const auto& [item, cl] : hist) all.emplace_back(-cl.first, -cl.second, item);
  std::sort(all.begin(), all.end());
  const auto r = frequency_rank(bucket, 10);
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(r.items[i], std::get<2>(all[i]));
    EXPECT_EQ(r.freqs[i], -std::get<0>(all[i]));
  }
}

TEST(Reorganize, PositiveOnlyUserHasPaddedNegatives) {
  const auto b = SessionBoundaries::parse("14d,6m,12m,all");
  std::vector<Event> h{ev(1, kDay), ev(2, 30 * kDay)};
  const auto s = reorganize(h, b, 3, 3, kRef);
  ASSERT_EQ(s.session_count(), 4u);
  for (const auto& neg : s.negative) EXPECT_EQ(neg.valid_count(), 0u);
}

TEST(Reorganize, PaperSessionOccupancy) {
  const auto b = SessionBoundaries::parse("14d,6m,12m,all");
  std::vector<Event> h{ev(1, 3 * kDay), ev(2, 20 * kDay), ev(3, 7 * kMonth)};
  const auto s = reorganize(h, b, 2, 2, kRef);
  EXPECT_EQ(s.positive[0].valid_count(), 1u);
  EXPECT_EQ(s.positive[1].valid_count(), 1u);
  EXPECT_EQ(s.positive[2].valid_count(), 1u);
  EXPECT_EQ(s.positive[3].valid_count(), 0u);
}

std::vector<Event> random_history(Rng& rng, int n) {
  std::vector<Event> h;
  for (int i = 0; i < n; ++i) {
    // Coarse ages create frequency and recency ties.
    h.push_back(ev(static_cast<std::int32_t>(1 + rng.below(12)),
                   static_cast<std::int64_t>(rng.below(40)) * 10 * kDay,
                   rng.below(3) ? Feedback::Positive : Feedback::Negative));
  }
  return h;
}

TEST(Reorganize, PermutationInvariant) {
  const auto b = SessionBoundaries::parse("14d,6m,12m,all");
  Rng rng(99);
  auto h = random_history(rng, 60);
  const auto ref = reorganize(h, b, 4, 4, kRef);
  for (int i = 0; i < 100; ++i) {
    rng.shuffle(h.begin(), h.end());
    ASSERT_EQ(reorganize(h, b, 4, 4, kRef), ref);
  }
}

TEST(Reorganize, ConservationAndMonotoneFrequencies) {
  const auto b = SessionBoundaries::parse("14d,6m,12m,all");
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto h = random_history(rng, 80);
    std::set<std::tuple<std::size_t, std::int32_t, int>> triples;
    for (const auto& e : h) {
      triples.emplace(*b.session_of(kRef - e.timestamp), e.item,
                      static_cast<int>(e.feedback));
    }
    auto total = [](const SessionizedHistory& s) {
      std::size_t n = 0;
      for (std::size_t i = 0; i < s.session_count(); ++i) {
        n += s.positive[i].valid_count() + s.negative[i].valid_count();
      }
      return n;
    };
    const auto small = reorganize(h, b, 3, 3, kRef);
    EXPECT_LE(total(small), triples.size());
    EXPECT_EQ(total(reorganize(h, b, 100, 100, kRef)), triples.size());
    for (const auto* side : {&small.positive, &small.negative}) {
      for (const auto& r : *side) {
        EXPECT_TRUE(std::is_sorted(r.freqs.rbegin(), r.freqs.rend()));
        for (std::size_t j = 0; j < r.mask.size(); ++j) {
          EXPECT_EQ(r.mask[j] == 1, r.freqs[j] >= 1);
        }
      }
    }
  }
}

}  // namespace
}  // namespace him::reorg

#include <doctest.h>

#include <random>
#include <sstream>

#include "esdf/attribution.hpp"
#include "esdf/errors.hpp"

using namespace esdf;

namespace {

constexpr Timestamp kDay = kSecondsPerDay;

EventRecord clicked(std::uint64_t id, Timestamp click, std::optional<Timestamp> conv) {
  EventRecord r;
  r.sample_id = id;
  r.request_id = id / 4;
  r.features.entries = {{0, static_cast<std::uint32_t>(id % 3), 1.0}};
  r.clicked = true;
  r.click_ts = click;
  r.conversion_ts = conv;
  return r;
}

EventRecord unclicked(std::uint64_t id, Timestamp ts) {
  EventRecord r = clicked(id, ts, std::nullopt);
  r.clicked = false;
  return r;
}

std::vector<EventRecord> random_log(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::vector<EventRecord> log;
  for (std::size_t i = 0; i < n; ++i) {
    const Timestamp ts = static_cast<Timestamp>(rng() % (10 * kDay));
    if (rng() % 3 == 0) {
      log.push_back(unclicked(i, ts));
    } else if (rng() % 2 == 0) {
      log.push_back(clicked(i, ts, ts + static_cast<Timestamp>(rng() % (9 * kDay))));
    } else {
      log.push_back(clicked(i, ts, std::nullopt));
    }
  }
  return log;
}

const SlotConfig kSlots;

}  // namespace

TEST_CASE("a conversion three days after the click under each policy") {
  const std::vector<EventRecord> log{clicked(0, 0, 3 * kDay + 10)};
  const Timestamp observe = 1 * kDay + 5;

  auto full = snapshot(log, observe, {PolicyKind::FullCensored}, kSlots);
  REQUIRE(full.samples.size() == 1);
  CHECK(full.samples[0].y);
  CHECK_FALSE(full.samples[0].z);
  CHECK(full.samples[0].e == 1);
  CHECK(full.samples[0].t == 1);

  auto gt = snapshot(log, observe, {PolicyKind::GroundTruth, 7}, kSlots);
  REQUIRE(gt.samples.size() == 1);
  CHECK(gt.samples[0].z);
  CHECK(gt.samples[0].d == 3);

  auto naive = snapshot(log, observe, {PolicyKind::NaiveDrop}, kSlots);
  CHECK(naive.samples.empty());

  auto shift = snapshot(log, observe, {PolicyKind::Shift}, kSlots);
  REQUIRE(shift.samples.size() == 1);
  CHECK_FALSE(shift.samples[0].z);
}

TEST_CASE("ESMM day-1 labels ignore conversions after the first slot") {
  const std::vector<EventRecord> log{clicked(0, 0, 3600), clicked(1, 0, 2 * kDay)};
  const auto s = snapshot(log, 10 * kDay, {PolicyKind::EsmmDay1}, kSlots).samples;
  REQUIRE(s.size() == 2);
  CHECK(s[0].z);
  CHECK(s[0].d == 0);
  CHECK_FALSE(s[1].z);

  const auto shift = snapshot(log, 10 * kDay, {PolicyKind::Shift}, kSlots).samples;
  CHECK(shift[1].z);
  CHECK(shift[1].d == 2);
}

TEST_CASE("naive drop keeps matured negatives and every positive") {
  const std::vector<EventRecord> log{clicked(0, 0, std::nullopt),
                                     clicked(1, 5 * kDay, std::nullopt),
                                     clicked(2, 5 * kDay, 5 * kDay + 60),
                                     unclicked(3, 5 * kDay)};
  const auto s = snapshot(log, 8 * kDay, {PolicyKind::NaiveDrop}, kSlots).samples;
  REQUIRE(s.size() == 3);
  CHECK(s[0].record == 0);
  CHECK(s[0].e == 7);
  CHECK(s[1].record == 2);
  CHECK(s[2].record == 3);
}

TEST_CASE("ground truth window excludes late conversions") {
  const std::vector<EventRecord> log{clicked(0, 0, 6 * kDay), clicked(1, 0, 8 * kDay)};
  const auto s = snapshot(log, 0, {PolicyKind::GroundTruth, 7}, kSlots).samples;
  CHECK(s[0].z);
  CHECK_FALSE(s[1].z);
}

TEST_CASE("observation before the log starts yields an empty snapshot") {
  const std::vector<EventRecord> log{clicked(0, 5 * kDay, std::nullopt)};
  const auto snap = snapshot(log, kDay, {PolicyKind::FullCensored}, kSlots);
  CHECK(snap.status == SnapshotStatus::BeforeLogStart);
  CHECK(snap.samples.empty());
}

TEST_CASE("impressions after the observation time are excluded") {
  const std::vector<EventRecord> log{unclicked(0, 0), unclicked(1, 3 * kDay)};
  const auto s = snapshot(log, kDay, {PolicyKind::FullCensored}, kSlots).samples;
  REQUIRE(s.size() == 1);
  CHECK(s[0].record == 0);
}

TEST_CASE("policy names") {
  CHECK(parse_policy("ground_truth:3").window_days == 3);
  CHECK(parse_policy("ground_truth").window_days == 7);
  for (const char* name : {"esmm_day1", "naive_drop", "shift", "full_censored"}) {
    CHECK(policy_name(parse_policy(name)) == name);
  }
  CHECK_THROWS_AS(parse_policy("later"), ConfigError);
}

TEST_CASE("maturation is monotone and ground truth ignores the clock") {
  const auto log = random_log(9, 400);
  for (Timestamp t1 = kDay; t1 < 12 * kDay; t1 += kDay / 2) {
    const Timestamp t2 = t1 + kDay / 3;
    const auto a = snapshot(log, t1, {PolicyKind::FullCensored}, kSlots).samples;
    const auto b = snapshot(log, t2, {PolicyKind::FullCensored}, kSlots).samples;
    std::vector<int> z2(log.size(), -1), y2(log.size(), -1);
    for (const auto& s : b) {
      z2[s.record] = s.z;
      y2[s.record] = s.y;
    }
    for (const auto& s : a) {
      CHECK(y2[s.record] == static_cast<int>(log[s.record].clicked));
      CHECK(s.y == log[s.record].clicked);
      if (s.z) CHECK(z2[s.record] == 1);
    }
    const auto g1 = snapshot(log, t1, {PolicyKind::GroundTruth, 7}, kSlots).samples;
    const auto g2 = snapshot(log, t2, {PolicyKind::GroundTruth, 7}, kSlots).samples;
    REQUIRE(g1.size() == g2.size());
    for (std::size_t i = 0; i < g1.size(); ++i) {
      CHECK(g1[i].z == g2[i].z);
      CHECK(g1[i].d == g2[i].d);
    }
  }
}

TEST_CASE("matured unconverted samples sit in the overflow slot") {
  const auto log = random_log(3, 300);
  const auto s = snapshot(log, 30 * kDay, {PolicyKind::FullCensored}, kSlots).samples;
  for (const auto& x : s) {
    if (x.y && !x.z) CHECK(x.e == kSlots.overflow_slot());
  }
}

TEST_CASE("delay histogram") {
  std::vector<ObservedSample> s(5);
  const int d[] = {0, 0, 1, 3};
  for (int i = 0; i < 4; ++i) {
    s[i].y = s[i].z = true;
    s[i].d = d[i];
  }
  const auto h = delay_histogram(s, kSlots);
  CHECK(h == std::vector<double>{0.5, 0.25, 0, 0.25, 0, 0, 0, 0});

  std::vector<ObservedSample> same(3);
  for (auto& x : same) {
    x.y = x.z = true;
    x.d = 0;
  }
  CHECK(delay_histogram(same, kSlots) == std::vector<double>{1, 0, 0, 0, 0, 0, 0, 0});

  std::vector<ObservedSample> none(2);
  CHECK_THROWS_AS(delay_histogram(none, kSlots), UndefinedMetricError);
}

TEST_CASE("snapshot file round trip") {
  EventLog log;
  log.schema = {3, 1};
  log.records = random_log(4, 60);
  const auto samples =
      snapshot(log.records, 6 * kDay, {PolicyKind::FullCensored}, kSlots).samples;
  std::stringstream buf;
  write_snapshot(buf, log, samples, "policy=full_censored");
  const auto back = read_snapshot(buf);
  REQUIRE(back.samples.size() == samples.size());
  CHECK(back.log.schema == log.schema);
  CHECK(back.log.config_echo == "policy=full_censored");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(back.log.records[i] == log.records[samples[i].record]);
    CHECK(back.samples[i].record == i);
    CHECK(back.samples[i].y == samples[i].y);
    CHECK(back.samples[i].z == samples[i].z);
    CHECK(back.samples[i].e == samples[i].e);
    CHECK(back.samples[i].d == samples[i].d);
    CHECK(back.samples[i].t == samples[i].t);
    CHECK(back.samples[i].elapsed_seconds == samples[i].elapsed_seconds);
  }
}

#include <doctest.h>

#include <random>
#include <sstream>

#include "esdf/errors.hpp"
#include "esdf/event_io.hpp"
#include "esdf/event_model.hpp"

using namespace esdf;

namespace {

ObservedSample sample(bool y, bool z) {
  ObservedSample s;
  s.y = y;
  s.z = z;
  return s;
}

}  // namespace

TEST_CASE("day_slot floors whole days and saturates at the overflow slot") {
  const SlotConfig cfg;
  CHECK(day_slot(0, cfg) == 0);
  CHECK(day_slot(3 * 86400 + 3600, cfg) == 3);
  CHECK(day_slot(10 * 86400, cfg) == 7);
  CHECK(day_slot(86399, cfg) == 0);
  CHECK(day_slot(86400, cfg) == 1);
  CHECK_THROWS_AS(day_slot(-1, cfg), InputError);
}

TEST_CASE("day_slot is monotone in the delay") {
  const SlotConfig cfg{4, 3600};
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::int64_t> delay(0, 10 * 3600);
  for (int i = 0; i < 2000; ++i) {
    const auto a = delay(rng), b = delay(rng);
    const auto lo = std::min(a, b), hi = std::max(a, b);
    CHECK(day_slot(lo, cfg) <= day_slot(hi, cfg));
    CHECK(day_slot(hi, cfg) <= cfg.overflow_slot());
  }
}

TEST_CASE("elapsed_slots") {
  const SlotConfig cfg;
  CHECK(elapsed_slots(100, 100, cfg) == 0);
  CHECK(elapsed_slots(100, 100 + 2 * 86400 + 1, cfg) == 2);
  CHECK(elapsed_slots(0, 30 * 86400, cfg) == 7);
  CHECK(elapsed_slots(0, 7 * 86400, cfg) == 7);
  CHECK_THROWS_AS(elapsed_slots(10, 9, cfg), InputError);
}

TEST_CASE("partition") {
  std::vector<ObservedSample> batch{sample(true, true), sample(true, false),
                                    sample(false, false)};
  auto p = partition(batch);
  CHECK(p.converted == std::vector<std::size_t>{0});
  CHECK(p.pending == std::vector<std::size_t>{1});
  CHECK(p.unclicked == std::vector<std::size_t>{2});

  auto empty = partition({});
  CHECK(empty.converted.empty());
  CHECK(empty.pending.empty());
  CHECK(empty.unclicked.empty());

  std::vector<ObservedSample> bad{sample(false, true)};
  CHECK_THROWS_AS(partition(bad), InvariantError);
}

TEST_CASE("partition re-merges to the original indices") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ObservedSample> batch;
    std::size_t c11 = 0, c01 = 0, c00 = 0;
    for (int i = 0; i < 100; ++i) {
      const int kind = static_cast<int>(rng() % 3);
      batch.push_back(sample(kind != 0, kind == 2));
      (kind == 2 ? c11 : kind == 1 ? c01 : c00)++;
    }
    const auto p = partition(batch);
    CHECK(p.converted.size() == c11);
    CHECK(p.pending.size() == c01);
    CHECK(p.unclicked.size() == c00);
    std::vector<std::size_t> merged;
    for (const auto* part : {&p.converted, &p.pending, &p.unclicked}) {
      merged.insert(merged.end(), part->begin(), part->end());
    }
    std::sort(merged.begin(), merged.end());
    for (std::size_t i = 0; i < merged.size(); ++i) CHECK(merged[i] == i);
  }
}

TEST_CASE("record validation") {
  EventRecord r;
  r.click_ts = 100;
  r.conversion_ts = 200;
  CHECK_THROWS_AS(validate_record(r), InvariantError);
  r.clicked = true;
  CHECK_NOTHROW(validate_record(r));
  r.conversion_ts = 50;
  CHECK_THROWS_AS(validate_record(r), InvariantError);

  FeatureVector x{{{0, 3, 1.0}, {1, 7, 1.0}}};
  CHECK_NOTHROW(validate_features(x, {8, 2}));
  CHECK_THROWS_AS(validate_features(x, {7, 2}), InputError);
  FeatureVector dup{{{0, 1, 1.0}, {0, 2, 1.0}}};
  CHECK_THROWS_AS(validate_features(dup, {8, 2}), InputError);
}

TEST_CASE("event log round trip") {
  EventLog log;
  log.schema = {10, 2};
  log.config_echo = "k=v";
  EventRecord a;
  a.request_id = 3;
  a.sample_id = 30;
  a.features.entries = {{0, 1, 1.0}, {1, 9, 0.25}};
  a.click_ts = 1234;
  EventRecord b = a;
  b.sample_id = 31;
  b.clicked = true;
  b.conversion_ts = 99999;
  log.records = {a, b};

  std::stringstream buf;
  write_event_log(buf, log);
  const auto back = read_event_log(buf);
  CHECK(back.schema == log.schema);
  CHECK(back.config_echo == "k=v");
  CHECK(back.records == log.records);
}

TEST_CASE("event log reader rejects malformed input") {
  std::stringstream no_magic("hello\n");
  CHECK_THROWS_AS(read_event_log(no_magic), InputError);

  std::stringstream bad_row(
      "#esdf-events v1\n#config x\n#schema feature_dim=4 n_fields=1\n"
      "0\t0\t1\tnotanumber\t\t0:1:1\n");
  CHECK_THROWS_AS(read_event_log(bad_row), InputError);

  std::stringstream out_of_schema(
      "#esdf-events v1\n#config x\n#schema feature_dim=4 n_fields=1\n"
      "0\t0\t0\t5\t\t0:9:1\n");
  CHECK_THROWS_AS(read_event_log(out_of_schema), InputError);
}

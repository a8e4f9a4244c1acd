#pragma once

// Impression / click / conversion events, day-slot discretization and the
// three-way index partition used by the censored likelihood.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace esdf {

using Timestamp = std::int64_t;  // epoch seconds

inline constexpr std::int64_t kSecondsPerDay = 86400;

/// Delay discretization. Slots 0..T cover whole slots after the click,
/// slot T+1 collects everything later.
struct SlotConfig {
  int max_delay_days = 6;  // T
  std::int64_t seconds_per_slot = kSecondsPerDay;

  int num_bins() const { return max_delay_days + 2; }
  int overflow_slot() const { return max_delay_days + 1; }

  /// Throws ConfigError unless T >= 1 and seconds_per_slot > 0.
  void validate() const;

  friend bool operator==(const SlotConfig&, const SlotConfig&) = default;
};

struct FeatureEntry {
  std::uint32_t field = 0;
  std::uint32_t index = 0;
  double value = 1.0;

  friend bool operator==(const FeatureEntry&, const FeatureEntry&) = default;
};

struct FeatureSchema {
  std::uint32_t feature_dim = 0;
  std::uint32_t n_fields = 0;

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

/// Sparse feature list. One-hot fields carry at most one entry each.
struct FeatureVector {
  std::vector<FeatureEntry> entries;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Throws InputError if any index is past the schema or a field repeats.
void validate_features(const FeatureVector& x, const FeatureSchema& schema);

/// One impression. `click_ts` is the impression time; for clicked records it
/// is the click time. `conversion_ts` is set only for clicked records that
/// eventually converted.
struct EventRecord {
  std::uint64_t request_id = 0;
  std::uint64_t sample_id = 0;
  FeatureVector features;
  bool clicked = false;
  Timestamp click_ts = 0;
  std::optional<Timestamp> conversion_ts;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

/// Throws InvariantError if a conversion is attached to an unclicked record or
/// precedes its click.
void validate_record(const EventRecord& rec);

/// Training-time view of an EventRecord under some label policy.
struct ObservedSample {
  std::size_t record = 0;  // index into the owning log
  bool y = false;          // clicked
  bool z = false;          // conversion observed
  int e = 0;               // elapsed slots since click (clicked only)
  int d = -1;              // delay slot, -1 unless z
  int t = 0;               // e if !z, d if z
  double w = 0.0;          // posterior weight, filled by the E-step
  // Continuous clocks for the exponential-delay baseline.
  std::int64_t elapsed_seconds = 0;
  std::int64_t delay_seconds = -1;
};

struct IndexPartition {
  std::vector<std::size_t> converted;  // z=1, y=1
  std::vector<std::size_t> pending;    // z=0, y=1
  std::vector<std::size_t> unclicked;  // z=0, y=0
};

/// Slot holding a delay: floor(delay / seconds_per_slot), saturating at T+1.
int day_slot(std::int64_t delay_seconds, const SlotConfig& cfg);

/// Whole slots elapsed between click and observation, capped at T+1.
int elapsed_slots(Timestamp click_ts, Timestamp observe_ts,
                  const SlotConfig& cfg);

/// Splits a batch into I11 / I01 / I00 preserving input order.
IndexPartition partition(std::span<const ObservedSample> batch);

}  // namespace esdf

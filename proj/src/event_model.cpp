#include "esdf/event_model.hpp"

#include <string>
#include <vector>

#include "esdf/errors.hpp"

namespace esdf {

void SlotConfig::validate() const {
  if (max_delay_days < 1) {
    throw ConfigError("max_delay_days must be >= 1, got " +
                      std::to_string(max_delay_days));
  }
  if (seconds_per_slot <= 0) {
    throw ConfigError("seconds_per_slot must be positive, got " +
                      std::to_string(seconds_per_slot));
  }
}

void validate_features(const FeatureVector& x, const FeatureSchema& schema) {
  std::vector<bool> seen(schema.n_fields, false);
  for (const auto& entry : x.entries) {
    if (entry.index >= schema.feature_dim) {
      throw InputError("feature index " + std::to_string(entry.index) +
                       " >= feature_dim " +
                       std::to_string(schema.feature_dim));
    }
    if (entry.field >= schema.n_fields) {
      throw InputError("field id " + std::to_string(entry.field) +
                       " >= n_fields " + std::to_string(schema.n_fields));
    }
    if (seen[entry.field]) {
      throw InputError("field " + std::to_string(entry.field) +
                       " appears twice in one feature vector");
    }
    seen[entry.field] = true;
  }
}

void validate_record(const EventRecord& rec) {
  if (!rec.conversion_ts) return;
  if (!rec.clicked) {
    throw InvariantError("sample " + std::to_string(rec.sample_id) +
                         " has a conversion but no click");
  }
  if (*rec.conversion_ts < rec.click_ts) {
    throw InvariantError("sample " + std::to_string(rec.sample_id) +
                         " converts before its click");
  }
}

int day_slot(std::int64_t delay_seconds, const SlotConfig& cfg) {
  if (delay_seconds < 0) {
    throw InputError("negative delay: " + std::to_string(delay_seconds));
  }
  const std::int64_t slot = delay_seconds / cfg.seconds_per_slot;
  if (slot > cfg.max_delay_days) return cfg.overflow_slot();
  return static_cast<int>(slot);
}

int elapsed_slots(Timestamp click_ts, Timestamp observe_ts,
                  const SlotConfig& cfg) {
  if (observe_ts < click_ts) {
    throw InputError("observation at " + std::to_string(observe_ts) +
                     " precedes click at " + std::to_string(click_ts));
  }
  const std::int64_t slots = (observe_ts - click_ts) / cfg.seconds_per_slot;
  if (slots > cfg.overflow_slot()) return cfg.overflow_slot();
  return static_cast<int>(slots);
}

IndexPartition partition(std::span<const ObservedSample> batch) {
  IndexPartition out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = batch[i];
    if (s.z && !s.y) {
      throw InvariantError("sample " + std::to_string(i) +
                           " observed converted without a click");
    }
    if (s.z) {
      out.converted.push_back(i);
    } else if (s.y) {
      out.pending.push_back(i);
    } else {
      out.unclicked.push_back(i);
    }
  }
  return out;
}

}  // namespace esdf

#pragma once

// Replays an event log at an observation time and builds training or test
// labels under each compared method's labeling policy.

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "esdf/event_io.hpp"
#include "esdf/event_model.hpp"

namespace esdf {

enum class PolicyKind {
  EsmmDay1,      // only conversions inside the first slot after click count
  NaiveDrop,     // immature clicked negatives removed
  Shift,         // everything observed so far is a hard label
  FullCensored,  // (z, e, d) kept for the censored likelihood
  GroundTruth,   // attribution window applied with full hindsight
};

struct LabelPolicy {
  PolicyKind kind = PolicyKind::FullCensored;
  int window_days = 7;  // GroundTruth only

  friend bool operator==(const LabelPolicy&, const LabelPolicy&) = default;
};

/// Accepts esmm_day1, naive_drop, shift, full_censored, ground_truth and
/// ground_truth:<days>. Throws ConfigError otherwise.
LabelPolicy parse_policy(std::string_view name);
std::string policy_name(const LabelPolicy& policy);

enum class SnapshotStatus { Ok, BeforeLogStart };

struct Snapshot {
  std::vector<ObservedSample> samples;
  SnapshotStatus status = SnapshotStatus::Ok;
};

/// Labels every record known at `observe_ts` (impressions after it are
/// excluded, except under GroundTruth which ignores observe_ts).
Snapshot snapshot(std::span<const EventRecord> log, Timestamp observe_ts,
                  const LabelPolicy& policy, const SlotConfig& cfg);

/// Normalized histogram of d over slots 0..T+1. Throws UndefinedMetricError
/// when there are no conversions.
std::vector<double> delay_histogram(std::span<const ObservedSample> samples,
                                    const SlotConfig& cfg);

// Snapshot file: the event-log format under magic "#esdf-snapshot v1" with
// trailing columns z, e, d and elapsed seconds (the continuous clock used by
// the exponential-delay baseline).
inline constexpr std::string_view kSnapshotMagic = "#esdf-snapshot v1";

void write_snapshot(std::ostream& out, const EventLog& log,
                    std::span<const ObservedSample> samples,
                    const std::string& config_echo);

struct SnapshotFile {
  EventLog log;  // one record per sample, in sample order
  std::vector<ObservedSample> samples;
};
SnapshotFile read_snapshot(std::istream& in);

}  // namespace esdf

#pragma once

// Ranking and calibration metrics.

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace esdf {

/// Probability that a random positive outranks a random negative, ties
/// counted as 1/2. Rank-sum with averaged tie ranks, O(n log n).
/// Throws UndefinedMetricError unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

struct GaucResult {
  double value = 0.0;
  std::size_t used_groups = 0;
  std::size_t skipped_groups = 0;  // single-class groups
};

/// Weighted mean of per-group AUC over groups holding both classes. Each
/// group's weight is its entry in `group_weights` (impressions per request),
/// or its sample count in this input when the map is null or lacks it.
/// Throws UndefinedMetricError when no group has both classes.
GaucResult gauc(std::span<const double> scores, std::span<const int> labels,
                std::span<const std::uint64_t> group_ids,
                const std::unordered_map<std::uint64_t, double>* group_weights =
                    nullptr);

/// ((measured - 0.5) / (base - 0.5) - 1) * 100. Throws UndefinedMetricError
/// when base <= 0.5.
double rela_impr(double measured_auc, double base_auc);

/// Cross-entropy of pCTCVR overall and per conversion-delay slot. Buckets
/// hold positives only; negatives count toward `overall` alone. Empty buckets
/// are left unset.
struct DelayLossReport {
  double overall = 0.0;
  std::vector<std::optional<double>> per_slot;
  std::vector<std::size_t> counts;
};

/// `delay_slots[i]` is the conversion slot of positive i and ignored for
/// negatives.
DelayLossReport log_loss_by_delay(std::span<const double> q,
                                  std::span<const int> labels,
                                  std::span<const int> delay_slots,
                                  int num_bins);

}  // namespace esdf

#include "esdf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "esdf/errors.hpp"
#include "esdf/objectives.hpp"

namespace esdf {

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw InputError("auc: scores and labels differ in length");
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]] != 0) {
        pos_rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw UndefinedMetricError("AUC needs at least one positive and one negative");
  }
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) /
         (np * static_cast<double>(n_neg));
}

GaucResult gauc(std::span<const double> scores, std::span<const int> labels,
                std::span<const std::uint64_t> group_ids,
                const std::unordered_map<std::uint64_t, double>* group_weights) {
  if (scores.size() != labels.size() || scores.size() != group_ids.size()) {
    throw InputError("gauc: scores, labels and groups differ in length");
  }
  // Ordered map keeps the reduction order fixed.
  std::map<std::uint64_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < group_ids.size(); ++i) groups[group_ids[i]].push_back(i);

  GaucResult out;
  double num = 0.0, den = 0.0;
  std::vector<double> s;
  std::vector<int> l;
  for (const auto& [gid, members] : groups) {
    s.clear();
    l.clear();
    std::size_t pos = 0;
    for (auto i : members) {
      s.push_back(scores[i]);
      l.push_back(labels[i]);
      pos += labels[i] != 0;
    }
    if (pos == 0 || pos == members.size()) {
      ++out.skipped_groups;
      continue;
    }
    double weight = static_cast<double>(members.size());
    if (group_weights) {
      if (auto it = group_weights->find(gid); it != group_weights->end()) {
        weight = it->second;
      }
    }
    num += weight * auc(s, l);
    den += weight;
    ++out.used_groups;
  }
  if (out.used_groups == 0 || !(den > 0.0)) {
    throw UndefinedMetricError("GAUC: no group holds both classes");
  }
  out.value = num / den;
  return out;
}

double rela_impr(double measured_auc, double base_auc) {
  if (!(base_auc > 0.5)) {
    throw UndefinedMetricError("RelaImpr needs a base AUC above 0.5");
  }
  return ((measured_auc - 0.5) / (base_auc - 0.5) - 1.0) * 100.0;
}

DelayLossReport log_loss_by_delay(std::span<const double> q,
                                  std::span<const int> labels,
                                  std::span<const int> delay_slots,
                                  int num_bins) {
  if (q.size() != labels.size() || q.size() != delay_slots.size()) {
    throw InputError("log_loss_by_delay: inputs differ in length");
  }
  DelayLossReport out;
  out.per_slot.assign(static_cast<std::size_t>(num_bins), std::nullopt);
  out.counts.assign(static_cast<std::size_t>(num_bins), 0);
  std::vector<double> sums(static_cast<std::size_t>(num_bins), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double qc = std::clamp(q[i], kProbFloor, 1.0 - kProbFloor);
    if (labels[i] != 0) {
      const double loss = -std::log(qc);
      total += loss;
      const int d = delay_slots[i];
      if (d < 0 || d >= num_bins) {
        throw InputError("positive with delay slot " + std::to_string(d) +
                         " outside [0, " + std::to_string(num_bins - 1) + "]");
      }
      sums[static_cast<std::size_t>(d)] += loss;
      ++out.counts[static_cast<std::size_t>(d)];
    } else {
      total -= std::log(1.0 - qc);
    }
  }
  out.overall = q.empty() ? 0.0 : total / static_cast<double>(q.size());
  for (std::size_t b = 0; b < sums.size(); ++b) {
    if (out.counts[b] > 0) out.per_slot[b] = sums[b] / static_cast<double>(out.counts[b]);
  }
  return out;
}

}  // namespace esdf

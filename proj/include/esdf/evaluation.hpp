#pragma once

// Scoring a trained model on ground-truth-labeled held-out data, report
// files, and cross-run comparison tables.

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "esdf/event_model.hpp"
#include "esdf/model.hpp"
#include "esdf/synthgen.hpp"

namespace esdf {

struct CalibrationReport {
  double mean_pred_cvr = 0.0;                // mean r over clicked samples
  std::optional<double> mean_true_cvr;       // mean generating pCVR, if known
  double label_rate = 0.0;                   // positives / clicked
};

struct EvalReport {
  std::string objective;
  int num_bins = 0;
  std::size_t n_impressions = 0;
  std::size_t n_clicked = 0;
  std::size_t n_positive = 0;

  double auc = 0.5;        // pCVR over clicked samples
  double ctcvr_auc = 0.5;  // pCTCVR over all impressions
  double gauc = 0.5;       // pCVR grouped by request; 0.5 when undefined
  bool gauc_defined = false;
  bool gauc_sparse = false;  // fewer than 10% of groups usable
  std::size_t gauc_used_groups = 0;
  std::size_t gauc_skipped_groups = 0;

  double log_loss = 0.0;  // pCTCVR cross-entropy over all impressions
  std::vector<std::optional<double>> delay_loss;
  std::vector<std::size_t> delay_counts;
  CalibrationReport calibration;
  std::vector<double> delay_histogram;  // empty when no conversions

  std::size_t gauc_total_groups() const {
    return gauc_used_groups + gauc_skipped_groups;
  }
};

/// `samples` must be GroundTruth-policy labels over `records`. `truth`, when
/// given, is aligned with `records` and feeds the calibration report.
EvalReport evaluate(const ModelParams& params, std::span<const EventRecord> records,
                    std::span<const ObservedSample> samples,
                    std::span<const GroundTruth> truth = {});

/// Machine-readable: one "metric<TAB>value" row per metric, NA for unset.
void write_eval_report(std::ostream& out, const EvalReport& report,
                       const std::string& config_echo);
EvalReport read_eval_report(std::istream& in);

/// Human-readable table of a single report.
std::string format_eval_report(const EvalReport& report);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single run
  std::size_t n = 0;
};

MeanStd mean_std(std::span<const double> values);

struct ComparisonRow {
  std::string objective;
  MeanStd auc, gauc, log_loss, mean_pred_cvr, mean_true_cvr;
  std::optional<double> rela_impr;  // vs the esmm row's mean AUC
  std::size_t gauc_sparse_runs = 0;  // runs whose GAUC groups were too sparse
  std::vector<MeanStd> delay_loss;  // per slot over runs where it is set
};

struct ComparisonTable {
  int num_bins = 0;
  std::vector<ComparisonRow> rows;  // order of first appearance
  std::vector<double> delay_histogram;  // mean over runs
};

/// Groups reports by objective. Throws ConfigError if slot counts differ.
ComparisonTable summarize(std::span<const EvalReport> reports);

void write_comparison(std::ostream& out, const ComparisonTable& table,
                      const std::string& config_echo);
/// slot<TAB>mass, one row per slot.
void write_delay_histogram(std::ostream& out, const ComparisonTable& table,
                           const std::string& config_echo);
/// slot followed by one mean-loss column per objective.
void write_loss_by_delay(std::ostream& out, const ComparisonTable& table,
                         const std::string& config_echo);

}  // namespace esdf

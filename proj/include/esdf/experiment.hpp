#pragma once

// End-to-end desk experiment: a training log observed at the end of its
// window, a later held-out log labeled with full hindsight, and one training
// run per objective scored on it.

#include <cstdint>
#include <optional>
#include <vector>

#include "esdf/evaluation.hpp"
#include "esdf/synthgen.hpp"
#include "esdf/trainer.hpp"

namespace esdf {

struct ExperimentConfig {
  WorldOptions world;
  std::uint64_t n_train = 100000;
  std::uint64_t n_test = 100000;
  /// Length of the training log. Longer than the attribution window so the
  /// oldest clicks are fully matured at observation time.
  int train_days = 14;
  /// Held-out sampling seed. Unset derives it from the data seed; set, every
  /// replicate scores against the same held-out log.
  std::optional<std::uint64_t> test_seed;
  TrainConfig train;
};

/// World and training settings of the desk-scale objective comparison.
ExperimentConfig desk_experiment();
inline constexpr std::uint64_t kDeskTestSeed = 99;

struct ExperimentData {
  GenConfig train_gen;
  GenConfig test_gen;
  GeneratedLog train;
  GeneratedLog test;
  Timestamp observe_ts = 0;
  std::vector<ObservedSample> test_samples;  // ground-truth labels
};

/// Train log over [0, train_days) days observed at its end; test log over the
/// following day. Both share the world weights and differ only in sampling
/// seed and sample ids.
ExperimentData make_experiment_data(const ExperimentConfig& cfg,
                                    std::uint64_t data_seed);

struct ObjectiveRun {
  TrainResult result;
  EvalReport report;
};

/// Snapshots the training log under the objective's policy, trains, and
/// evaluates on the held-out set.
ObjectiveRun run_objective(const ExperimentData& data, const TrainConfig& cfg);

}  // namespace esdf

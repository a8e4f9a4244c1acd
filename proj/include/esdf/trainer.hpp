#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "esdf/attribution.hpp"
#include "esdf/event_model.hpp"
#include "esdf/gradient.hpp"
#include "esdf/model.hpp"
#include "esdf/objectives.hpp"

namespace esdf {

enum class Objective { Esdf, Esmm, Naive, Shift, Dfm };

Objective parse_objective(std::string_view name);
std::string objective_name(Objective obj);
/// Snapshot policy each objective trains on.
LabelPolicy training_policy(Objective obj);
LossFamily loss_family(Objective obj);

enum class EStepMode {
  Minibatch,  // posterior recomputed per minibatch from the current params
  FullBatch,  // posterior recomputed once per epoch over all samples
};

struct TrainConfig {
  Objective objective = Objective::Esdf;
  double learning_rate = 1e-4;
  std::size_t batch_size = 1024;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  std::size_t em_steps_per_estep = 1;
  EStepMode estep_mode = EStepMode::Minibatch;
  std::uint32_t emb_dim = 8;
  std::vector<std::uint32_t> hidden{64, 32};
  bool delay_uses_elapsed = true;
  /// Coordinates probed by the finite-difference hook at init and after the
  /// first epoch; 0 disables the hook.
  std::size_t grad_check_coords = 0;

  void validate() const;
};

/// Shape of the network trained for `cfg` on data with this schema.
ModelShape model_shape(const TrainConfig& cfg, const FeatureSchema& schema,
                       const SlotConfig& slots);

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected adaptive-moment update. Throws NumericalError on a
/// non-finite gradient, leaving params and state untouched.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double lr);

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t samples = 0;
  LossBreakdown mean_loss;  // per sample, at the pre-update params
  std::optional<double> eval_auc;
  double wall_seconds = 0.0;
};

/// Append-only, one entry per completed epoch.
struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainingData {
  std::span<const EventRecord> records;
  std::span<const ObservedSample> samples;
  LabelPolicy policy;
};

/// Ground-truth-labeled held-out data scored after every epoch.
struct EvalData {
  std::span<const EventRecord> records;
  std::span<const ObservedSample> samples;
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
  std::vector<GradCheckReport> grad_checks;
};

/// Minibatch training. ESDF runs forward -> E-step (frozen) -> gradient ->
/// Adam, repeated em_steps_per_estep times per E-step; other objectives skip
/// the E-step. Identical inputs give bit-identical results.
TrainResult train(const TrainConfig& cfg, const FeatureSchema& schema,
                  const SlotConfig& slots, const TrainingData& data,
                  const EvalData* eval = nullptr);

/// Runs `iterations` closed-form EM sweeps from q0 and returns the
/// incomplete-data log-likelihood before each sweep and after the last.
std::vector<double> run_surrogate_em(const ScalarEmSurrogate& surrogate,
                                     double q0, std::size_t iterations);

/// "epoch<TAB>samples<TAB>total<TAB>click<TAB>conversion<TAB>delay_observed
/// <TAB>delay_censored<TAB>eval_auc" rows under a magic/config header.
/// Wall-clock is left out so reruns reproduce the file exactly.
void write_history(std::ostream& out, const TrainHistory& history,
                   const std::string& config_echo);

}  // namespace esdf

#pragma once

// Exact reverse-mode gradients of the objectives through the network, plus a
// central finite-difference checker used as a training-time hook.

#include <cstdint>
#include <span>
#include <vector>

#include "esdf/event_model.hpp"
#include "esdf/model.hpp"
#include "esdf/objectives.hpp"

namespace esdf {

/// Heads for every sample, each evaluated at the sample's own elapsed slot.
std::vector<Heads> forward_batch(const ModelParams& params,
                                 std::span<const EventRecord> records,
                                 std::span<const ObservedSample> samples);

/// E-step at the current parameters.
std::vector<double> estep_weights(const ModelParams& params,
                                  std::span<const EventRecord> records,
                                  std::span<const ObservedSample> samples);

struct BatchGradient {
  LossBreakdown breakdown;
  std::vector<double> grad;  // empty unless requested
};

/// Summed loss of `family` over the batch and, optionally, its gradient.
/// For LossFamily::Esdf, `weights` freezes the posterior (no gradient flows
/// through it); when empty the E-step is run at `params` first.
/// Throws NumericalError naming the sample when a per-sample loss is not
/// finite.
BatchGradient gradient(const ModelParams& params,
                       std::span<const EventRecord> records,
                       std::span<const ObservedSample> samples,
                       LossFamily family,
                       std::span<const double> weights = {},
                       bool with_grad = true);

struct GradCheckReport {
  std::size_t probed = 0;
  std::size_t failed = 0;
  std::size_t skipped_kinks = 0;  // draws whose +-step flipped a ReLU
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;
};

/// Compares the analytic gradient with central differences on `n_coords`
/// coordinates drawn from those with a non-zero analytic gradient, plus a
/// fifth as many drawn from all coordinates. Error is
/// |analytic - numeric| / max(|analytic|, |numeric|, abs_floor).
/// A draw whose perturbation switches any hidden ReLU on or off is not
/// differentiable across the step; it is counted in skipped_kinks and
/// replaced by a fresh draw.
GradCheckReport check_gradient(const ModelParams& params,
                               std::span<const EventRecord> records,
                               std::span<const ObservedSample> samples,
                               LossFamily family, std::size_t n_coords,
                               std::uint64_t seed, double rel_tol = 1e-4,
                               double step = 1e-5, double abs_floor = 1e-4);

}  // namespace esdf

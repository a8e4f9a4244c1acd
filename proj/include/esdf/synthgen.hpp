#pragma once

// Synthetic impression/click/conversion logs with known generating
// probabilities. The ground truth doubles as the verification oracle for the
// E-step and for calibration.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "esdf/event_io.hpp"
#include "esdf/event_model.hpp"

namespace esdf {

struct GenConfig {
  std::uint64_t n_impressions = 0;
  /// Vocabulary size per one-hot field; feature indices are laid out field
  /// after field.
  std::vector<std::uint32_t> field_sizes;
  /// Leading fields drawn once per request (user-side features).
  std::uint32_t request_fields = 1;
  std::uint32_t impressions_per_request = 10;
  double zipf_exponent = 1.0;

  std::vector<double> ctr_weights;  // feature_dim
  double ctr_bias = 0.0;
  std::vector<double> cvr_weights;  // feature_dim
  double cvr_bias = 0.0;
  std::vector<double> delay_weights;  // num_bins x feature_dim, row-major
  std::vector<double> delay_bias;     // num_bins

  double day1_mass_target = 0.8;
  SlotConfig slots;

  Timestamp start_ts = 0;
  std::int64_t span_seconds = kSecondsPerDay;
  std::uint64_t first_sample_id = 0;
  std::uint64_t seed = 0;

  std::uint32_t n_fields() const {
    return static_cast<std::uint32_t>(field_sizes.size());
  }
  std::uint32_t feature_dim() const;
  FeatureSchema schema() const { return {feature_dim(), n_fields()}; }

  /// Throws ConfigError on any dimension mismatch or out-of-range knob.
  void validate() const;
};

/// Per-record generating probabilities and latent outcome.
struct GroundTruth {
  std::uint64_t sample_id = 0;
  bool clicked = false;
  double p_ctr = 0.0;
  double p_cvr = 0.0;
  std::vector<double> delay_dist;  // num_bins, sums to 1
  bool converts = false;           // latent C
  int delay_slot = -1;             // latent D when converts
};

struct GeneratedLog {
  EventLog log;
  std::vector<GroundTruth> truth;
};

/// Knobs for building a GenConfig with structured random weights.
///
/// One field (`delay_field`) drives conversion speed: each of its values
/// shifts the slot-0 delay logit and adds a bump on one later slot, so the
/// delay distribution is feature dependent and not exponential. Its CVR
/// weights are coupled to the speed shift (`speed_cvr_coupling` < 0 makes slow
/// items convert more often).
struct WorldOptions {
  std::vector<std::uint32_t> field_sizes{40, 24, 60, 30, 16};
  std::uint32_t request_fields = 1;
  std::uint32_t impressions_per_request = 10;
  double zipf_exponent = 1.0;
  std::uint32_t delay_field = 1;

  double ctr_bias = -0.6;
  double ctr_scale = 0.6;
  double cvr_bias = -1.2;
  double cvr_scale = 0.7;

  double speed_scale = 1.6;
  double speed_cvr_coupling = -0.5;
  double late_bump = 1.5;
  int late_bump_min_slot = 1;  // bumps land uniformly in [this, T]
  double overflow_bias = -1.0;
  double delay_noise = 0.15;

  double day1_mass_target = 0.8;
  SlotConfig slots;
  std::uint64_t world_seed = 1;
};

/// Draws weights from `opts.world_seed` and calibrates the slot-0 delay bias
/// to the day-1 mass target. Sampling fields (n, seed, time span) are left at
/// their defaults for the caller to fill in.
GenConfig make_gen_config(const WorldOptions& opts);

/// Fraction of conversions landing in slot 0, in expectation over the
/// feature distribution (weighted by pCTR * pCVR).
double expected_day1_mass(const GenConfig& cfg, std::uint64_t n_probe = 20000);

/// Sets delay_bias[0] so expected_day1_mass matches day1_mass_target.
void calibrate_day1_bias(GenConfig& cfg, std::uint64_t n_probe = 20000);

/// Records [begin, end) of the stream defined by cfg. Each record uses its own
/// derived seed, so concatenating shards reproduces generate() exactly.
GeneratedLog generate_range(const GenConfig& cfg, std::uint64_t begin,
                            std::uint64_t end);

GeneratedLog generate(const GenConfig& cfg);

/// Delay mass strictly after slot e.
double truth_tail(const GroundTruth& gt, int e);

/// P(C=1 | clicked, not converted after e slots) from the generating process.
/// Throws InvariantError for unclicked records.
double oracle_posterior(const GroundTruth& gt, int e);

// Ground-truth file: "#esdf-truth v1", "#config ...", "#bins N", then rows
// sample_id clicked p_ctr p_cvr c d f_0..f_{N-1}, tab separated.
void write_ground_truth(std::ostream& out, const std::vector<GroundTruth>& truth,
                        int num_bins, const std::string& config_echo);
std::vector<GroundTruth> read_ground_truth(std::istream& in);

}  // namespace esdf

#pragma once

// Training objectives over network heads.
//
// All losses are negated log-likelihoods (minimized). Each per-sample routine
// adds its value into a LossBreakdown and, when `grad` is non-null, writes the
// derivative of that sample's loss with respect to the head logits.
//
// Probabilities entering a log are clamped to [kProbFloor, 1 - kProbFloor];
// a clamped factor contributes zero gradient.

#include <span>
#include <vector>

#include "esdf/event_model.hpp"
#include "esdf/model.hpp"

namespace esdf {

inline constexpr double kProbFloor = 1e-7;

enum class LossFamily { Esdf, Esmm, Dfm };

struct LossBreakdown {
  double click = 0.0;
  double conversion = 0.0;
  double delay_observed = 0.0;
  double delay_censored = 0.0;
  double total = 0.0;

  void add(const LossBreakdown& o);
  double sum_of_terms() const {
    return click + conversion + delay_observed + delay_censored;
  }
};

struct HeadGrad {
  double ctr_logit = 0.0;
  double cvr_logit = 0.0;
  std::vector<double> delay;  // sized like Heads::delay_logits
};

struct EStepWeights {
  std::vector<double> w;
};

/// Posterior P(C=1 | z, y, x, e) for one sample under the current heads:
/// 1 on observed conversions, 0 on unclicked, and
/// q*tail(e) / (p - q + q*tail(e)) on clicked unconverted samples.
double estep_weight(const Heads& h, const ObservedSample& s);

/// Batch E-step. heads[i] must have been computed with samples[i].e.
EStepWeights e_step(std::span<const Heads> heads,
                    std::span<const ObservedSample> samples,
                    const IndexPartition& part);

/// One sample of the expected complete-data log-likelihood (negated), with w
/// treated as a constant.
void esdf_sample_loss(const Heads& h, const ObservedSample& s, double w,
                      LossBreakdown& acc, HeadGrad* grad);

LossBreakdown esdf_loss(std::span<const Heads> heads, const EStepWeights& weights,
                        std::span<const ObservedSample> samples);

/// Cross-entropy on p against y plus cross-entropy on q against y AND z.
void esmm_sample_loss(const Heads& h, const ObservedSample& s,
                      LossBreakdown& acc, HeadGrad* grad);

double esmm_loss(std::span<const Heads> heads,
                 std::span<const ObservedSample> samples);

/// Exponential-delay baseline; needs heads from an ExponentialRate model.
/// Delays and elapsed times are measured in days.
void dfm_sample_loss(const Heads& h, const ObservedSample& s,
                     LossBreakdown& acc, HeadGrad* grad);

double dfm_loss(std::span<const Heads> heads,
                std::span<const ObservedSample> samples);

/// Total probability of every outcome observable at elapsed slot e:
/// unclicked + converted in slots 0..e + clicked-and-still-unconverted.
/// Equals 1 for any valid heads.
double likelihood_outcome_check(const Heads& h, int e);

/// Incomplete-data log-likelihood of one sample (not negated).
double incomplete_log_likelihood(const Heads& h, const ObservedSample& s);

/// EM on a model whose only free parameter is a shared scalar q, with p and
/// every sample's delay distribution held fixed. The M-step is closed-form:
/// q <- p * sum(w) / #clicked.
class ScalarEmSurrogate {
 public:
  /// `delays[i]` is the fixed delay distribution of samples[i].
  ScalarEmSurrogate(double p, std::vector<std::vector<double>> delays,
                    std::vector<ObservedSample> samples);

  double log_likelihood(double q) const;
  double em_step(double q) const;

 private:
  double p_;
  std::vector<std::vector<double>> delays_;
  std::vector<ObservedSample> samples_;
};

}  // namespace esdf

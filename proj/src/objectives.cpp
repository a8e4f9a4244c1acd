#include "esdf/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "esdf/errors.hpp"
#include "esdf/numeric.hpp"

namespace esdf {

namespace {

struct ClampedLog {
  double value;
  bool free;  // false when the argument hit a clamp bound
};

ClampedLog clamped_log(double x) {
  if (x < kProbFloor) return {std::log(kProbFloor), false};
  if (x > 1.0 - kProbFloor) return {std::log1p(-kProbFloor), false};
  return {std::log(x), true};
}

void reset(HeadGrad* grad, const Heads& h) {
  if (!grad) return;
  grad->ctr_logit = 0.0;
  grad->cvr_logit = 0.0;
  grad->delay.assign(h.delay_logits.size(), 0.0);
}

void check_slot(int t, std::size_t bins, const char* what) {
  if (t < 0 || static_cast<std::size_t>(t) >= bins) {
    throw InputError(std::string(what) + " slot " + std::to_string(t) +
                     " outside the delay head");
  }
}

// -[y log p + (1-y) log(1-p)] and its logit derivative.
void click_cross_entropy(const Heads& h, bool y, double& term, HeadGrad* grad) {
  if (y) {
    const auto lp = clamped_log(h.p);
    term -= lp.value;
    if (grad && lp.free) grad->ctr_logit -= 1.0 - h.p;
  } else {
    const auto l1p = clamped_log(1.0 - h.p);
    term -= l1p.value;
    if (grad && l1p.free) grad->ctr_logit += h.p;
  }
}

}  // namespace

void LossBreakdown::add(const LossBreakdown& o) {
  click += o.click;
  conversion += o.conversion;
  delay_observed += o.delay_observed;
  delay_censored += o.delay_censored;
  total += o.total;
}

double estep_weight(const Heads& h, const ObservedSample& s) {
  if (s.z) {
    if (!s.y) throw InvariantError("converted sample without click");
    return 1.0;
  }
  if (!s.y) return 0.0;
  const double tail = survival_tail(h.f, s.e);
  const double num = h.q * tail;
  const double den = h.p - h.q + num;
  if (!(den > 0.0)) {
    throw NumericalError("E-step denominator " + std::to_string(den) +
                         " for record " + std::to_string(s.record));
  }
  return num / den;
}

EStepWeights e_step(std::span<const Heads> heads,
                    std::span<const ObservedSample> samples,
                    const IndexPartition& part) {
  if (heads.size() != samples.size()) {
    throw InputError("e_step: heads and samples differ in length");
  }
  EStepWeights out;
  out.w.assign(samples.size(), 0.0);
  for (auto i : part.converted) out.w[i] = 1.0;
  for (auto i : part.pending) out.w[i] = estep_weight(heads[i], samples[i]);
  return out;
}

void esdf_sample_loss(const Heads& h, const ObservedSample& s, double w,
                      LossBreakdown& acc, HeadGrad* grad) {
  reset(grad, h);
  LossBreakdown local;
  if (!s.y) {
    // (1-w)(1-y) log(1-p) with w = 0.
    click_cross_entropy(h, false, local.click, grad);
  } else {
    const auto lp = clamped_log(h.p);
    const auto lr = clamped_log(h.r);
    const auto l1r = clamped_log(1.0 - h.r);
    const double dlp = lp.free ? 1.0 - h.p : 0.0;

    // w log q, q = p r
    local.conversion -= w * (lp.value + lr.value);
    // (1-w) log(p - q), p - q = p (1 - r)
    local.click -= (1.0 - w) * (lp.value + l1r.value);
    if (grad) {
      grad->ctr_logit -= dlp;  // w + (1-w)
      grad->cvr_logit -= w * (lr.free ? 1.0 - h.r : 0.0);
      grad->cvr_logit -= (1.0 - w) * (l1r.free ? -h.r : 0.0);
    }

    if (w > 0.0) {
      if (h.f.empty()) throw ConfigError("ESDF loss needs a softmax delay head");
      const std::size_t bins = h.f.size();
      check_slot(s.t, bins, s.z ? "delay" : "elapsed");
      const auto t = static_cast<std::size_t>(s.t);
      if (s.z) {
        const auto lf = clamped_log(h.f[t]);
        local.delay_observed -= w * lf.value;
        if (grad && lf.free) {
          for (std::size_t k = 0; k < bins; ++k) {
            grad->delay[k] -= w * ((k == t ? 1.0 : 0.0) - h.f[k]);
          }
        }
      } else {
        double tail = 0.0;
        for (std::size_t k = t + 1; k < bins; ++k) tail += h.f[k];
        const auto lt = clamped_log(tail);
        local.delay_censored -= w * lt.value;
        if (grad && lt.free) {
          for (std::size_t k = 0; k < bins; ++k) {
            const double in_tail = k > t ? h.f[k] / tail : 0.0;
            grad->delay[k] -= w * (in_tail - h.f[k]);
          }
        }
      }
    }
  }
  local.total = local.sum_of_terms();
  acc.add(local);
}

LossBreakdown esdf_loss(std::span<const Heads> heads, const EStepWeights& weights,
                        std::span<const ObservedSample> samples) {
  if (heads.size() != samples.size() || weights.w.size() != samples.size()) {
    throw InputError("esdf_loss: heads, weights and samples differ in length");
  }
  LossBreakdown acc;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    esdf_sample_loss(heads[i], samples[i], weights.w[i], acc, nullptr);
  }
  return acc;
}

void esmm_sample_loss(const Heads& h, const ObservedSample& s,
                      LossBreakdown& acc, HeadGrad* grad) {
  reset(grad, h);
  LossBreakdown local;
  click_cross_entropy(h, s.y, local.click, grad);
  if (s.y && s.z) {
    const auto lp = clamped_log(h.p);
    const auto lr = clamped_log(h.r);
    local.conversion -= lp.value + lr.value;
    if (grad) {
      if (lp.free) grad->ctr_logit -= 1.0 - h.p;
      if (lr.free) grad->cvr_logit -= 1.0 - h.r;
    }
  } else {
    const auto l1q = clamped_log(1.0 - h.q);
    local.conversion -= l1q.value;
    if (grad && l1q.free) {
      const double scale = h.q / (1.0 - h.q);
      grad->ctr_logit += scale * (1.0 - h.p);
      grad->cvr_logit += scale * (1.0 - h.r);
    }
  }
  local.total = local.sum_of_terms();
  acc.add(local);
}

double esmm_loss(std::span<const Heads> heads,
                 std::span<const ObservedSample> samples) {
  if (heads.size() != samples.size()) {
    throw InputError("esmm_loss: heads and samples differ in length");
  }
  LossBreakdown acc;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    esmm_sample_loss(heads[i], samples[i], acc, nullptr);
  }
  return acc.total;
}

void dfm_sample_loss(const Heads& h, const ObservedSample& s,
                     LossBreakdown& acc, HeadGrad* grad) {
  reset(grad, h);
  LossBreakdown local;
  click_cross_entropy(h, s.y, local.click, grad);
  if (s.y) {
    if (h.delay_logits.size() != 1) {
      throw ConfigError("DFM loss needs an exponential-rate delay head");
    }
    const double lambda = h.rate;
    if (!(lambda > 0.0)) {
      throw NumericalError("non-positive delay rate " + std::to_string(lambda) +
                           " for record " + std::to_string(s.record));
    }
    const double dlambda = sigmoid(h.delay_logits[0]);
    const auto lr = clamped_log(h.r);
    if (s.z) {
      const double u = static_cast<double>(s.delay_seconds) / kSecondsPerDay;
      local.conversion -= lr.value;
      local.delay_observed -= std::log(lambda) - lambda * u;
      if (grad) {
        if (lr.free) grad->cvr_logit -= 1.0 - h.r;
        grad->delay[0] += (u - 1.0 / lambda) * dlambda;
      }
    } else {
      const double u = static_cast<double>(s.elapsed_seconds) / kSecondsPerDay;
      const double surv = std::exp(-lambda * u);
      const double r = std::clamp(h.r, kProbFloor, 1.0 - kProbFloor);
      const double a = 1.0 - r + r * surv;
      local.delay_censored -= std::log(a);
      if (grad) {
        if (lr.free) grad->cvr_logit -= r * (1.0 - r) * (surv - 1.0) / a;
        grad->delay[0] += r * u * surv / a * dlambda;
      }
    }
  }
  local.total = local.sum_of_terms();
  acc.add(local);
}

double dfm_loss(std::span<const Heads> heads,
                std::span<const ObservedSample> samples) {
  if (heads.size() != samples.size()) {
    throw InputError("dfm_loss: heads and samples differ in length");
  }
  LossBreakdown acc;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    dfm_sample_loss(heads[i], samples[i], acc, nullptr);
  }
  return acc.total;
}

double likelihood_outcome_check(const Heads& h, int e) {
  if (e < 0) throw InputError("negative elapsed slot");
  const int last = static_cast<int>(h.f.size()) - 1;
  const int upto = std::min(e, last);
  double converted = 0.0;
  for (int d = 0; d <= upto; ++d) converted += h.q * h.f[d];
  const double tail = e >= last ? 0.0 : survival_tail(h.f, e);
  const double pending = h.p - h.q + h.q * tail;
  return (1.0 - h.p) + converted + pending;
}

double incomplete_log_likelihood(const Heads& h, const ObservedSample& s) {
  if (!s.y) return std::log(1.0 - h.p);
  if (s.z) {
    check_slot(s.d, h.f.size(), "delay");
    return std::log(h.q) + std::log(h.f[static_cast<std::size_t>(s.d)]);
  }
  return std::log(h.p - h.q + h.q * survival_tail(h.f, s.e));
}

ScalarEmSurrogate::ScalarEmSurrogate(double p,
                                     std::vector<std::vector<double>> delays,
                                     std::vector<ObservedSample> samples)
    : p_(p), delays_(std::move(delays)), samples_(std::move(samples)) {
  if (delays_.size() != samples_.size()) {
    throw InputError("surrogate: one delay distribution per sample required");
  }
  if (!(p_ > 0.0 && p_ < 1.0)) throw InputError("surrogate: p must be in (0,1)");
}

double ScalarEmSurrogate::log_likelihood(double q) const {
  double ll = 0.0;
  Heads h;
  h.p = p_;
  h.q = q;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    h.f = delays_[i];
    ll += incomplete_log_likelihood(h, samples_[i]);
  }
  return ll;
}

double ScalarEmSurrogate::em_step(double q) const {
  Heads h;
  h.p = p_;
  h.q = q;
  double weight_sum = 0.0;
  std::size_t clicked = 0;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (!s.y) continue;
    ++clicked;
    h.f = delays_[i];
    weight_sum += estep_weight(h, s);
  }
  if (clicked == 0) return q;
  return p_ * weight_sum / static_cast<double>(clicked);
}

}  // namespace esdf

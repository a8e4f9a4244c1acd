#include "esdf/gradient.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "esdf/errors.hpp"
#include "esdf/numeric.hpp"

namespace esdf {

namespace {

void check_sample_finite(const LossBreakdown& l, const ObservedSample& s,
                         const Heads& h) {
  if (std::isfinite(l.total)) return;
  std::ostringstream msg;
  msg << "non-finite loss at record " << s.record << " (y=" << s.y
      << " z=" << s.z << " e=" << s.e << " t=" << s.t << "): click=" << l.click
      << " conversion=" << l.conversion << " delay_observed=" << l.delay_observed
      << " delay_censored=" << l.delay_censored << " p=" << h.p << " r=" << h.r;
  throw NumericalError(msg.str());
}

void sample_loss(LossFamily family, const Heads& h, const ObservedSample& s,
                 double w, LossBreakdown& acc, HeadGrad* grad) {
  switch (family) {
    case LossFamily::Esdf: esdf_sample_loss(h, s, w, acc, grad); break;
    case LossFamily::Esmm: esmm_sample_loss(h, s, acc, grad); break;
    case LossFamily::Dfm: dfm_sample_loss(h, s, acc, grad); break;
  }
}

}  // namespace

std::vector<Heads> forward_batch(const ModelParams& params,
                                 std::span<const EventRecord> records,
                                 std::span<const ObservedSample> samples) {
  Network net(params);
  ForwardCache cache;
  std::vector<Heads> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    net.forward(records[s.record].features, s.e, cache);
    out.push_back(cache.heads);
  }
  return out;
}

std::vector<double> estep_weights(const ModelParams& params,
                                  std::span<const EventRecord> records,
                                  std::span<const ObservedSample> samples) {
  Network net(params);
  ForwardCache cache;
  std::vector<double> w(samples.size(), 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!s.y) continue;
    if (s.z) {
      w[i] = 1.0;
      continue;
    }
    net.forward(records[s.record].features, s.e, cache);
    w[i] = estep_weight(cache.heads, s);
  }
  return w;
}

BatchGradient gradient(const ModelParams& params,
                       std::span<const EventRecord> records,
                       std::span<const ObservedSample> samples,
                       LossFamily family, std::span<const double> weights,
                       bool with_grad) {
  if (!weights.empty() && weights.size() != samples.size()) {
    throw InputError("gradient: one weight per sample required");
  }
  Network net(params);
  ForwardCache cache;
  HeadGrad head_grad;
  BatchGradient out;
  if (with_grad) out.grad.assign(params.values.size(), 0.0);

  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const auto& x = records[s.record].features;
    net.forward(x, s.e, cache);
    double w = 0.0;
    if (family == LossFamily::Esdf) {
      w = weights.empty() ? estep_weight(cache.heads, s) : weights[i];
    }
    LossBreakdown local;
    sample_loss(family, cache.heads, s, w, local, with_grad ? &head_grad : nullptr);
    check_sample_finite(local, s, cache.heads);
    out.breakdown.add(local);
    if (with_grad) {
      net.backward(x, cache, head_grad.ctr_logit, head_grad.cvr_logit,
                   head_grad.delay, out.grad);
    }
  }
  return out;
}

namespace {

// Loss of the batch plus the on/off state of every hidden ReLU it touched.
double probe_loss(const ModelParams& params, std::span<const EventRecord> records,
                  std::span<const ObservedSample> samples, LossFamily family,
                  std::span<const double> frozen, std::vector<bool>& pattern) {
  Network net(params);
  ForwardCache cache;
  LossBreakdown acc;
  pattern.clear();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    net.forward(records[s.record].features, s.e, cache);
    sample_loss(family, cache.heads, s, frozen.empty() ? 0.0 : frozen[i], acc, nullptr);
    for (const auto& tower : cache.acts) {
      for (const auto& layer : tower) {
        for (double a : layer) pattern.push_back(a > 0.0);
      }
    }
  }
  return acc.total;
}

}  // namespace

GradCheckReport check_gradient(const ModelParams& params,
                               std::span<const EventRecord> records,
                               std::span<const ObservedSample> samples,
                               LossFamily family, std::size_t n_coords,
                               std::uint64_t seed, double rel_tol, double step,
                               double abs_floor) {
  std::vector<double> frozen;
  if (family == LossFamily::Esdf) frozen = estep_weights(params, records, samples);
  const auto analytic = gradient(params, records, samples, family, frozen, true);
  std::vector<bool> base_pattern, pattern;
  probe_loss(params, records, samples, family, frozen, base_pattern);

  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < analytic.grad.size(); ++j) {
    if (analytic.grad[j] != 0.0) active.push_back(j);
  }
  std::mt19937_64 rng(mix_seed(seed, 0x6c3c));

  GradCheckReport report;
  ModelParams probe = params;
  // Returns false when the central difference straddles a ReLU kink.
  auto probe_coordinate = [&](std::size_t j) {
    const double base = probe.values[j];
    probe.values[j] = base + step;
    const double up = probe_loss(probe, records, samples, family, frozen, pattern);
    const bool up_smooth = pattern == base_pattern;
    probe.values[j] = base - step;
    const double down = probe_loss(probe, records, samples, family, frozen, pattern);
    const bool down_smooth = pattern == base_pattern;
    probe.values[j] = base;
    if (!up_smooth || !down_smooth) {
      ++report.skipped_kinks;
      return false;
    }
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericalError("non-finite loss while probing coordinate " +
                           std::to_string(j));
    }
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.grad[j];
    const double err = std::abs(a - numeric) /
                       std::max({std::abs(a), std::abs(numeric), abs_floor});
    ++report.probed;
    if (err > rel_tol) ++report.failed;
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_coordinate = j;
    }
    return true;
  };
  auto draw = [&](const std::vector<std::size_t>& pool, std::size_t want) {
    if (pool.empty()) return;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::size_t done = 0;
    for (std::size_t tries = 0; done < want && tries < 50 * want; ++tries) {
      done += probe_coordinate(pool[pick(rng)]);
    }
  };
  std::vector<std::size_t> all(analytic.grad.size());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
  draw(active, n_coords);
  draw(all, std::max<std::size_t>(1, n_coords / 5));
  return report;
}

}  // namespace esdf

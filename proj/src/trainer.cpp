#include "esdf/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "esdf/errors.hpp"
#include "esdf/metrics.hpp"
#include "esdf/numeric.hpp"
#include "text_format.hpp"

namespace esdf {

Objective parse_objective(std::string_view name) {
  if (name == "esdf") return Objective::Esdf;
  if (name == "esmm") return Objective::Esmm;
  if (name == "naive") return Objective::Naive;
  if (name == "shift") return Objective::Shift;
  if (name == "dfm") return Objective::Dfm;
  throw ConfigError("unknown objective '" + std::string(name) + "'");
}

std::string objective_name(Objective obj) {
  switch (obj) {
    case Objective::Esdf: return "esdf";
    case Objective::Esmm: return "esmm";
    case Objective::Naive: return "naive";
    case Objective::Shift: return "shift";
    case Objective::Dfm: return "dfm";
  }
  return "unknown";
}

LabelPolicy training_policy(Objective obj) {
  switch (obj) {
    case Objective::Esmm: return {PolicyKind::EsmmDay1};
    case Objective::Naive: return {PolicyKind::NaiveDrop};
    case Objective::Shift: return {PolicyKind::Shift};
    case Objective::Esdf:
    case Objective::Dfm: return {PolicyKind::FullCensored};
  }
  return {};
}

LossFamily loss_family(Objective obj) {
  switch (obj) {
    case Objective::Esdf: return LossFamily::Esdf;
    case Objective::Dfm: return LossFamily::Dfm;
    default: return LossFamily::Esmm;
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (em_steps_per_estep == 0) {
    throw ConfigError("em_steps_per_estep must be positive");
  }
  if (emb_dim == 0) throw ConfigError("emb_dim must be positive");
}

ModelShape model_shape(const TrainConfig& cfg, const FeatureSchema& schema,
                       const SlotConfig& slots) {
  ModelShape shape;
  shape.feature_dim = schema.feature_dim;
  shape.n_fields = schema.n_fields;
  shape.emb_dim = cfg.emb_dim;
  shape.hidden = cfg.hidden;
  shape.slots = slots;
  if (cfg.objective == Objective::Dfm) {
    shape.delay_head = DelayHead::ExponentialRate;
    shape.delay_uses_elapsed = false;
  } else {
    shape.delay_head = DelayHead::Softmax;
    shape.delay_uses_elapsed = cfg.delay_uses_elapsed;
  }
  return shape;
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double lr) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw InputError("adam_step: parameter, gradient and moment sizes differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericalError("non-finite gradient at coordinate " +
                           std::to_string(i) + " on step " +
                           std::to_string(state.step + 1));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(kAdamBeta1, t);
  const double bc2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * g;
    state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
  }
}

namespace {

// Fixed probe batch for the gradient-check hook: up to 8 samples of each
// index set, in data order.
std::vector<ObservedSample> probe_batch(std::span<const ObservedSample> samples) {
  std::vector<ObservedSample> out;
  std::size_t n11 = 0, n01 = 0, n00 = 0;
  for (const auto& s : samples) {
    std::size_t& n = s.z ? n11 : (s.y ? n01 : n00);
    if (n < 8) {
      out.push_back(s);
      ++n;
    }
  }
  return out;
}

double eval_auc(const ModelParams& params, const EvalData& eval) {
  Network net(params);
  ForwardCache cache;
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& s : eval.samples) {
    if (!s.y) continue;
    net.forward(eval.records[s.record].features, 0, cache);
    scores.push_back(cache.heads.r);
    labels.push_back(s.z ? 1 : 0);
  }
  return auc(scores, labels);
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const FeatureSchema& schema,
                  const SlotConfig& slots, const TrainingData& data,
                  const EvalData* eval) {
  cfg.validate();
  const LabelPolicy expected = training_policy(cfg.objective);
  if (data.policy.kind != expected.kind) {
    throw ConfigError("objective " + objective_name(cfg.objective) +
                      " trains on " + policy_name(expected) +
                      " snapshots, got " + policy_name(data.policy));
  }
  const LossFamily family = loss_family(cfg.objective);

  TrainResult result;
  result.params = init_params(model_shape(cfg, schema, slots), cfg.seed);
  auto& params = result.params;
  AdamState adam(params.values.size());

  const auto probe = probe_batch(data.samples);
  auto run_grad_check = [&](std::uint64_t salt) {
    if (cfg.grad_check_coords == 0 || probe.empty()) return;
    result.grad_checks.push_back(check_gradient(params, data.records, probe, family,
                                                cfg.grad_check_coords,
                                                mix_seed(cfg.seed, salt)));
  };
  run_grad_check(1);

  std::vector<std::size_t> order(data.samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0x5f1e));
  std::vector<ObservedSample> batch;
  std::vector<double> batch_w;
  std::vector<double> all_w;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    if (family == LossFamily::Esdf && cfg.estep_mode == EStepMode::FullBatch) {
      all_w = estep_weights(params, data.records, data.samples);
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(data.samples[order[k]]);
      const double scale = 1.0 / static_cast<double>(batch.size());

      std::span<const double> frozen;
      if (family == LossFamily::Esdf) {
        if (cfg.estep_mode == EStepMode::FullBatch) {
          batch_w.clear();
          for (std::size_t k = start; k < end; ++k) batch_w.push_back(all_w[order[k]]);
          frozen = batch_w;
        } else if (cfg.em_steps_per_estep > 1) {
          batch_w = estep_weights(params, data.records, batch);
          frozen = batch_w;
        }
        // Otherwise gradient() runs the E-step inline at the current params.
      }

      for (std::size_t m = 0; m < cfg.em_steps_per_estep; ++m) {
        auto g = gradient(params, data.records, batch, family, frozen, true);
        if (m == 0) {
          rec.mean_loss.add(g.breakdown);
          rec.samples += batch.size();
        }
        for (double& v : g.grad) v *= scale;
        adam_step(params.values, g.grad, adam, cfg.learning_rate);
      }
    }
    if (rec.samples > 0) {
      const double inv = 1.0 / static_cast<double>(rec.samples);
      auto& l = rec.mean_loss;
      l.click *= inv;
      l.conversion *= inv;
      l.delay_observed *= inv;
      l.delay_censored *= inv;
      l.total *= inv;
    }
    if (eval) {
      try {
        rec.eval_auc = eval_auc(params, *eval);
      } catch (const UndefinedMetricError&) {
        rec.eval_auc.reset();
      }
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.epochs.push_back(rec);
    if (epoch == 0) run_grad_check(2);
  }
  return result;
}

std::vector<double> run_surrogate_em(const ScalarEmSurrogate& surrogate,
                                     double q0, std::size_t iterations) {
  std::vector<double> ll;
  ll.reserve(iterations + 1);
  double q = q0;
  ll.push_back(surrogate.log_likelihood(q));
  for (std::size_t i = 0; i < iterations; ++i) {
    q = surrogate.em_step(q);
    ll.push_back(surrogate.log_likelihood(q));
  }
  return ll;
}

void write_history(std::ostream& out, const TrainHistory& history,
                   const std::string& config_echo) {
  out << "#esdf-history v1\n#config " << config_echo << '\n';
  out << "epoch\tsamples\ttotal\tclick\tconversion\tdelay_observed\t"
         "delay_censored\teval_auc\n";
  for (const auto& e : history.epochs) {
    const auto& l = e.mean_loss;
    out << e.epoch << '\t' << e.samples << '\t' << text::fmt(l.total) << '\t'
        << text::fmt(l.click) << '\t' << text::fmt(l.conversion) << '\t'
        << text::fmt(l.delay_observed) << '\t' << text::fmt(l.delay_censored)
        << '\t' << (e.eval_auc ? text::fmt(*e.eval_auc) : std::string("NA"))
        << '\n';
  }
}

}  // namespace esdf

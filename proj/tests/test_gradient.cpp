#include <doctest.h>

#include <cmath>
#include <limits>

#include "esdf/attribution.hpp"
#include "esdf/errors.hpp"
#include "esdf/gradient.hpp"
#include "esdf/synthgen.hpp"
#include "esdf/trainer.hpp"

using namespace esdf;

namespace {

struct Fixture {
  GeneratedLog gen;
  std::vector<ObservedSample> censored;
  std::vector<ObservedSample> esmm;
};

Fixture make_fixture() {
  WorldOptions w;
  w.field_sizes = {6, 5, 7};
  auto cfg = make_gen_config(w);
  cfg.n_impressions = 400;
  cfg.seed = 9;
  cfg.span_seconds = 10 * kSecondsPerDay;
  Fixture f;
  f.gen = generate(cfg);
  const Timestamp observe = 10 * kSecondsPerDay;
  f.censored = snapshot(f.gen.log.records, observe, {PolicyKind::FullCensored},
                        cfg.slots).samples;
  f.esmm =
      snapshot(f.gen.log.records, observe, {PolicyKind::EsmmDay1}, cfg.slots).samples;
  // A probe batch small enough that summed-loss rounding stays far below the
  // tolerance.
  f.censored.resize(80);
  f.esmm.resize(80);
  return f;
}

ModelParams params_for(const Fixture& f, Objective obj, std::uint64_t seed) {
  TrainConfig tc;
  tc.objective = obj;
  tc.emb_dim = 4;
  tc.hidden = {6, 5};
  return init_params(model_shape(tc, f.gen.log.schema, SlotConfig{}), seed);
}

}  // namespace

TEST_CASE("analytic gradients match central differences for every objective") {
  const auto f = make_fixture();
  struct Case {
    Objective obj;
    LossFamily family;
    const std::vector<ObservedSample>* samples;
  };
  const Case cases[] = {{Objective::Esdf, LossFamily::Esdf, &f.censored},
                        {Objective::Esmm, LossFamily::Esmm, &f.esmm},
                        {Objective::Dfm, LossFamily::Dfm, &f.censored}};
  for (const auto& c : cases) {
    CAPTURE(objective_name(c.obj));
    const auto params = params_for(f, c.obj, 5);
    const auto rep = check_gradient(params, f.gen.log.records, *c.samples, c.family,
                                    60, 77);
    CHECK(rep.probed >= 60);
    CHECK(rep.failed == 0);
    CHECK(rep.max_rel_error < 1e-4);
    CHECK(rep.skipped_kinks < rep.probed);
  }
}

TEST_CASE("gradient of a three-sample ESDF batch") {
  const auto f = make_fixture();
  std::vector<ObservedSample> batch;
  bool have[3] = {false, false, false};
  for (const auto& s : f.censored) {
    const int k = s.z ? 0 : (s.y ? 1 : 2);
    if (!have[k]) {
      batch.push_back(s);
      have[k] = true;
    }
  }
  REQUIRE(batch.size() == 3);
  const auto params = params_for(f, Objective::Esdf, 12);
  const auto rep =
      check_gradient(params, f.gen.log.records, batch, LossFamily::Esdf, 50, 3);
  CHECK(rep.failed == 0);
}

TEST_CASE("an empty batch has zero loss and zero gradient") {
  const auto f = make_fixture();
  const auto params = params_for(f, Objective::Esdf, 1);
  const auto g = gradient(params, f.gen.log.records, {}, LossFamily::Esdf);
  CHECK(g.breakdown.total == 0.0);
  REQUIRE(g.grad.size() == params.values.size());
  for (double v : g.grad) CHECK(v == 0.0);
}

TEST_CASE("click cross-entropy gradient is p - 1 for a click") {
  Heads h;
  h.ctr_logit = 0.3;
  h.p = 1.0 / (1.0 + std::exp(-0.3));
  h.cvr_logit = -0.2;
  h.r = 1.0 / (1.0 + std::exp(0.2));
  h.q = h.p * h.r;
  h.rate = 0.7;
  h.delay_logits = {std::log(std::expm1(0.7))};
  ObservedSample s;
  s.y = s.z = true;
  s.d = 0;
  s.delay_seconds = 100;
  LossBreakdown acc;
  HeadGrad g;
  dfm_sample_loss(h, s, acc, &g);
  CHECK(g.ctr_logit == doctest::Approx(h.p - 1.0).epsilon(1e-15));
}

TEST_CASE("non-finite losses name the sample") {
  const auto f = make_fixture();
  auto params = params_for(f, Objective::Esmm, 1);
  for (double& v : params.values) v = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(gradient(params, f.gen.log.records, f.esmm, LossFamily::Esmm),
                  NumericalError);
}

TEST_CASE("frozen posterior weights match the inline E-step") {
  const auto f = make_fixture();
  const auto params = params_for(f, Objective::Esdf, 4);
  const auto w = estep_weights(params, f.gen.log.records, f.censored);
  const auto inline_g = gradient(params, f.gen.log.records, f.censored, LossFamily::Esdf);
  const auto frozen_g =
      gradient(params, f.gen.log.records, f.censored, LossFamily::Esdf, w);
  CHECK(inline_g.breakdown.total == frozen_g.breakdown.total);
  CHECK(inline_g.grad == frozen_g.grad);
}

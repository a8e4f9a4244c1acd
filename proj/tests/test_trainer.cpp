#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "esdf/attribution.hpp"
#include "esdf/errors.hpp"
#include "esdf/synthgen.hpp"
#include "esdf/trainer.hpp"

using namespace esdf;

namespace {

struct Data {
  GeneratedLog gen;
  SlotConfig slots;
  Timestamp observe = 0;
};

const Data& data() {
  static const Data d = [] {
    WorldOptions w;
    w.field_sizes = {8, 6, 10};
    auto cfg = make_gen_config(w);
    cfg.n_impressions = 3000;
    cfg.seed = 12;
    cfg.span_seconds = 10 * kSecondsPerDay;
    return Data{generate(cfg), cfg.slots, 10 * kSecondsPerDay};
  }();
  return d;
}

TrainConfig small_config(Objective obj) {
  TrainConfig tc;
  tc.objective = obj;
  tc.learning_rate = 3e-3;
  tc.batch_size = 128;
  tc.epochs = 2;
  tc.seed = 5;
  tc.emb_dim = 4;
  tc.hidden = {8, 6};
  return tc;
}

TrainResult run(const TrainConfig& tc, std::vector<ObservedSample>* keep = nullptr) {
  const auto& d = data();
  const auto policy = training_policy(tc.objective);
  auto samples = snapshot(d.gen.log.records, d.observe, policy, d.slots).samples;
  auto result = train(tc, d.gen.log.schema, d.slots, {d.gen.log.records, samples, policy});
  if (keep) *keep = std::move(samples);
  return result;
}

std::string history_text(const TrainResult& r) {
  std::ostringstream out;
  write_history(out, r.history, "x");
  return out.str();
}

}  // namespace

TEST_CASE("Adam: zero gradient leaves parameters and decays moments") {
  std::vector<double> x{1.0, -2.0};
  AdamState st(2);
  adam_step(x, std::vector<double>{0.5, -0.5}, st, 0.1);
  const auto after_first = x;
  const auto m = st.m, v = st.v;
  adam_step(x, std::vector<double>{0.0, 0.0}, st, 0.1);
  for (int i = 0; i < 2; ++i) {
    CHECK(st.m[i] == doctest::Approx(kAdamBeta1 * m[i]).epsilon(1e-15));
    CHECK(st.v[i] == doctest::Approx(kAdamBeta2 * v[i]).epsilon(1e-15));
  }
  // The first moment still carries momentum, so only a fresh state stays put.
  std::vector<double> y{3.0};
  AdamState fresh(1);
  adam_step(y, std::vector<double>{0.0}, fresh, 0.1);
  CHECK(y[0] == 3.0);
  CHECK(after_first[0] != 1.0);
}

TEST_CASE("Adam: first step moves by the learning rate against the gradient sign") {
  for (double g : {2.5, -0.003, 40.0}) {
    std::vector<double> x{0.0};
    AdamState st(1);
    adam_step(x, std::vector<double>{g}, st, 0.01);
    CHECK(x[0] == doctest::Approx(-0.01 * (g > 0 ? 1 : -1)).epsilon(1e-5));
  }
}

TEST_CASE("Adam: 100 steps on x^2 follow the scalar recurrence") {
  std::vector<double> x{1.0};
  AdamState st(1);
  double xr = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 100; ++t) {
    const double g = 2.0 * x[0];
    adam_step(x, std::vector<double>{g}, st, 0.1);
    const double gr = 2.0 * xr;
    m = 0.9 * m + 0.1 * gr;
    v = 0.999 * v + 0.001 * gr * gr;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    xr -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(x[0] == doctest::Approx(xr).epsilon(1e-12));
  }
  CHECK(std::abs(x[0]) < 0.1);
}

TEST_CASE("Adam: non-finite gradient aborts without touching state") {
  std::vector<double> x{1.0, 2.0};
  AdamState st(2);
  CHECK_THROWS_AS(adam_step(x, std::vector<double>{0.1, std::nan("")}, st, 0.1),
                  NumericalError);
  CHECK(x == std::vector<double>{1.0, 2.0});
  CHECK(st.step == 0);
  CHECK(st.m == std::vector<double>{0.0, 0.0});
}

TEST_CASE("zero epochs return the initialization") {
  auto tc = small_config(Objective::Esdf);
  tc.epochs = 0;
  const auto r = run(tc);
  const auto shape = model_shape(tc, data().gen.log.schema, data().slots);
  CHECK(r.params == init_params(shape, tc.seed));
  CHECK(r.history.epochs.empty());
}

TEST_CASE("training is bit-reproducible") {
  for (auto obj : {Objective::Esdf, Objective::Dfm, Objective::Naive}) {
    const auto tc = small_config(obj);
    const auto a = run(tc);
    const auto b = run(tc);
    CHECK(a.params == b.params);
    CHECK(history_text(a) == history_text(b));
    auto other = tc;
    other.seed = 6;
    CHECK(run(other).params.values != a.params.values);
  }
}

TEST_CASE("training lowers the loss") {
  for (auto obj : {Objective::Esdf, Objective::Esmm, Objective::Shift, Objective::Dfm}) {
    auto tc = small_config(obj);
    tc.epochs = 4;
    const auto r = run(tc);
    REQUIRE(r.history.epochs.size() == 4);
    CHECK(r.history.epochs.back().mean_loss.total <
          r.history.epochs.front().mean_loss.total);
    for (const auto& e : r.history.epochs) {
      CHECK(e.samples > 0);
      CHECK(e.mean_loss.total ==
            doctest::Approx(e.mean_loss.sum_of_terms()).epsilon(1e-9));
    }
  }
}

TEST_CASE("E-step schedules") {
  auto tc = small_config(Objective::Esdf);
  tc.estep_mode = EStepMode::FullBatch;
  const auto full = run(tc);
  CHECK(full.params == run(tc).params);
  tc.estep_mode = EStepMode::Minibatch;
  tc.em_steps_per_estep = 3;
  const auto multi = run(tc);
  CHECK(multi.params == run(tc).params);
  CHECK(multi.params.values != full.params.values);
}

TEST_CASE("objective and label policy must agree") {
  const auto& d = data();
  const auto samples = snapshot(d.gen.log.records, d.observe, {PolicyKind::Shift},
                                d.slots).samples;
  CHECK_THROWS_AS(train(small_config(Objective::Esdf), d.gen.log.schema, d.slots,
                        {d.gen.log.records, samples, {PolicyKind::Shift}}),
                  ConfigError);
}

TEST_CASE("gradient-check hook runs at init and after the first epoch") {
  for (auto obj : {Objective::Esdf, Objective::Esmm, Objective::Dfm}) {
    auto tc = small_config(obj);
    tc.grad_check_coords = 50;
    const auto r = run(tc);
    REQUIRE(r.grad_checks.size() == 2);
    for (const auto& g : r.grad_checks) {
      CHECK(g.probed >= 50);
      CHECK(g.failed == 0);
    }
  }
}

TEST_CASE("objective and policy names") {
  for (auto obj : {Objective::Esdf, Objective::Esmm, Objective::Naive, Objective::Shift,
                   Objective::Dfm}) {
    CHECK(parse_objective(objective_name(obj)) == obj);
  }
  CHECK(training_policy(Objective::Esmm).kind == PolicyKind::EsmmDay1);
  CHECK(training_policy(Objective::Naive).kind == PolicyKind::NaiveDrop);
  CHECK(training_policy(Objective::Shift).kind == PolicyKind::Shift);
  CHECK(training_policy(Objective::Dfm).kind == PolicyKind::FullCensored);
  CHECK_THROWS_AS(parse_objective("fm"), ConfigError);
}

TEST_CASE("surrogate EM sequence is non-decreasing") {
  std::vector<std::vector<double>> delays;
  std::vector<ObservedSample> samples;
  for (int i = 0; i < 60; ++i) {
    ObservedSample s;
    s.y = i % 5 != 0;
    s.z = i % 5 == 1;
    s.e = i % 8;
    s.d = s.z ? 0 : -1;
    samples.push_back(s);
    std::vector<double> f(8, 0.05);
    f[i % 8] += 0.6;
    delays.push_back(f);
  }
  const ScalarEmSurrogate em(0.3, delays, samples);
  const auto ll = run_surrogate_em(em, 0.05, 50);
  REQUIRE(ll.size() == 51);
  for (std::size_t i = 1; i < ll.size(); ++i) CHECK(ll[i] >= ll[i - 1] - 1e-12);
}

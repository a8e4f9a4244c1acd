#include <doctest.h>

#include <cmath>
#include <random>

#include "esdf/errors.hpp"
#include "esdf/objectives.hpp"

using namespace esdf;

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

Heads heads(double p, double r, std::vector<double> f) {
  Heads h;
  h.p = p;
  h.r = r;
  h.q = p * r;
  h.ctr_logit = logit(p);
  h.cvr_logit = logit(r);
  for (double v : f) h.delay_logits.push_back(std::log(std::max(v, 1e-300)));
  h.f = std::move(f);
  return h;
}

Heads rate_heads(double p, double r, double lambda) {
  Heads h = heads(p, r, {});
  h.rate = lambda;
  h.delay_logits = {std::log(std::expm1(lambda))};  // inverse softplus
  return h;
}

ObservedSample obs(bool y, bool z, int e, int d = -1) {
  ObservedSample s;
  s.y = y;
  s.z = z;
  s.e = e;
  s.d = d;
  s.t = z ? d : e;
  return s;
}

std::vector<double> random_simplex(std::mt19937_64& rng, int n) {
  std::gamma_distribution<double> g(0.7, 1.0);
  std::vector<double> f(n);
  double sum = 0;
  for (double& v : f) sum += v = g(rng) + 1e-12;
  for (double& v : f) v /= sum;
  return f;
}

Heads random_heads(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.001, 0.999);
  return heads(u(rng), u(rng), random_simplex(rng, 8));
}

}  // namespace

TEST_CASE("E-step weights") {
  const std::vector<double> f{0.5, 0.25, 0.25, 0, 0, 0, 0, 0};
  CHECK(estep_weight(heads(0.3, 0.4, f), obs(true, true, 2, 1)) == 1.0);
  CHECK(estep_weight(heads(0.3, 0.4, f), obs(false, false, 0)) == 0.0);
  CHECK(estep_weight(heads(0.3, 0.4, f), obs(true, false, 2)) == 0.0);
  // p = 0.1, q = 0.02, tail(0) = 0.5 -> 0.01 / (0.08 + 0.01)
  CHECK(estep_weight(heads(0.1, 0.2, f), obs(true, false, 0)) ==
        doctest::Approx(0.01 / 0.09).epsilon(1e-12));
}

TEST_CASE("batch E-step follows the partition") {
  const std::vector<double> f{0.5, 0.25, 0.25, 0, 0, 0, 0, 0};
  std::vector<Heads> h(3, heads(0.1, 0.2, f));
  std::vector<ObservedSample> s{obs(true, true, 0, 0), obs(true, false, 0),
                                obs(false, false, 0)};
  const auto w = e_step(h, s, partition(s)).w;
  REQUIRE(w.size() == 3);
  CHECK(w[0] == 1.0);
  CHECK(w[1] == doctest::Approx(0.01 / 0.09).epsilon(1e-12));
  CHECK(w[2] == 0.0);
}

TEST_CASE("E-step weights lie in [0, 1] and shrink as time passes") {
  std::mt19937_64 rng(19);
  for (int i = 0; i < 500; ++i) {
    const auto h = random_heads(rng);
    double prev = 1.0;
    for (int e = 0; e < 8; ++e) {
      const double w = estep_weight(h, obs(true, false, e));
      CHECK(w >= 0.0);
      CHECK(w <= 1.0);
      CHECK(w <= prev + 1e-15);
      prev = w;
    }
    CHECK(prev == 0.0);
  }
}

TEST_CASE("ESDF loss hand values") {
  const std::vector<double> uniform4{0.25, 0.25, 0.25, 0.25, 0, 0, 0, 0};
  LossBreakdown a;
  esdf_sample_loss(heads(0.625, 0.8, uniform4), obs(true, true, 3, 2), 1.0, a,
                   nullptr);
  // q = 0.625 * 0.8 = 0.5
  CHECK(a.total == doctest::Approx(-(std::log(0.5) + std::log(0.25))).epsilon(1e-14));
  CHECK(a.total == doctest::Approx(2.0794415).epsilon(1e-7));
  CHECK(a.click == 0.0);
  CHECK(a.delay_censored == 0.0);

  LossBreakdown b;
  esdf_sample_loss(heads(0.5, 0.5, uniform4), obs(false, false, 0), 0.0, b, nullptr);
  CHECK(b.total == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  LossBreakdown c;
  esdf_sample_loss(heads(0.5, 0.5, uniform4), obs(true, false, 1), 0.0, c, nullptr);
  CHECK(c.total == doctest::Approx(-std::log(0.25)).epsilon(1e-14));
  CHECK(c.total == doctest::Approx(1.3862944).epsilon(1e-7));
  CHECK(c.total == doctest::Approx(c.sum_of_terms()).epsilon(1e-15));
}

TEST_CASE("censored ESDF terms weigh both explanations") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const auto h = random_heads(rng);
    const int e = static_cast<int>(rng() % 7);
    const double w = std::uniform_real_distribution<double>(0, 1)(rng);
    LossBreakdown l;
    esdf_sample_loss(h, obs(true, false, e), w, l, nullptr);
    double tail = 0;
    for (int t = e + 1; t < 8; ++t) tail += h.f[t];
    const double expected = -w * std::log(h.q) - (1 - w) * std::log(h.p - h.q) -
                            w * std::log(std::max(tail, kProbFloor));
    CHECK(l.total == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("on fully observed batches ESDF is ESMM with the joint outcome and the delay term") {
  // ESDF scores I11 with -log q and I00 with -log(1-p); the two-cross-entropy
  // ESMM loss adds -log p on I11 and -log(1-q) on I00.
  std::mt19937_64 rng(31);
  std::vector<Heads> hs;
  std::vector<ObservedSample> ss;
  double extra = 0.0, delay = 0.0;
  for (int i = 0; i < 40; ++i) {
    auto h = random_heads(rng);
    if (i % 2 == 0) {
      const int d = static_cast<int>(rng() % 8);
      ss.push_back(obs(true, true, 7, d));
      extra += -std::log(h.p);
      delay += -std::log(std::max(h.f[d], kProbFloor));
    } else {
      ss.push_back(obs(false, false, 0));
      extra += -std::log(1 - h.q);
    }
    hs.push_back(h);
  }
  const auto w = e_step(hs, ss, partition(ss));
  const auto esdf = esdf_loss(hs, w, ss);
  const double esmm = esmm_loss(hs, ss);
  CHECK(esdf.total == doctest::Approx(esmm - extra + delay).epsilon(1e-12));
  CHECK(esdf.delay_observed == doctest::Approx(delay).epsilon(1e-12));
  CHECK(esdf.delay_censored == 0.0);
}

TEST_CASE("ESMM loss") {
  const std::vector<double> f(8, 0.125);
  LossBreakdown l;
  esmm_sample_loss(heads(0.5, 0.5, f), obs(true, true, 0, 0), l, nullptr);
  CHECK(l.total == doctest::Approx(-std::log(0.5) - std::log(0.25)).epsilon(1e-14));

  LossBreakdown perfect;
  esmm_sample_loss(heads(1 - 1e-12, 1 - 1e-12, f), obs(true, true, 0, 0), perfect,
                   nullptr);
  esmm_sample_loss(heads(1e-12, 1e-12, f), obs(false, false, 0), perfect, nullptr);
  CHECK(perfect.total < 1e-6);
}

TEST_CASE("exponential-delay loss") {
  auto unconverted = obs(true, false, 1);
  unconverted.elapsed_seconds = kSecondsPerDay;
  LossBreakdown a;
  dfm_sample_loss(rate_heads(0.5, 0.5, 1.0), unconverted, a, nullptr);
  CHECK(a.delay_censored ==
        doctest::Approx(-std::log(0.5 + 0.5 * std::exp(-1.0))).epsilon(1e-12));
  CHECK(a.delay_censored == doctest::Approx(0.379885).epsilon(1e-6));
  // The still-pending conversion mass r * exp(-lambda u) is 0.1839.
  CHECK(0.5 * std::exp(-1.0) == doctest::Approx(0.1839).epsilon(1e-3));

  auto converted = obs(true, true, 0, 0);
  converted.delay_seconds = 0;
  LossBreakdown b;
  dfm_sample_loss(rate_heads(0.5, 1 - 1e-12, 1.0), converted, b, nullptr);
  CHECK(std::abs(b.conversion + b.delay_observed) < 1e-6);

  LossBreakdown c;
  dfm_sample_loss(rate_heads(0.5, 0.5, 60.0), unconverted, c, nullptr);
  CHECK(c.delay_censored == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  LossBreakdown d;
  auto bad = rate_heads(0.5, 0.5, 1.0);
  bad.rate = 0.0;
  CHECK_THROWS_AS(dfm_sample_loss(bad, unconverted, d, nullptr), NumericalError);
}

TEST_CASE("outcome probabilities sum to one at every elapsed slot") {
  std::mt19937_64 rng(23);
  const auto h0 = random_heads(rng);
  CHECK(likelihood_outcome_check(h0, 7) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(likelihood_outcome_check(h0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  for (int i = 0; i < 1000; ++i) {
    const auto h = random_heads(rng);
    const int e = static_cast<int>(rng() % 12);
    CHECK(std::abs(likelihood_outcome_check(h, e) - 1.0) < 1e-9);
  }
}

TEST_CASE("scalar EM never lowers the observed-data likelihood") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<double>> delays;
    std::vector<ObservedSample> samples;
    for (int i = 0; i < 300; ++i) {
      delays.push_back(random_simplex(rng, 8));
      const int kind = static_cast<int>(rng() % 4);
      const int e = static_cast<int>(rng() % 8);
      if (kind == 0) {
        samples.push_back(obs(false, false, 0));
      } else if (kind == 1) {
        samples.push_back(obs(true, true, e, static_cast<int>(rng() % (e + 1))));
      } else {
        samples.push_back(obs(true, false, e));
      }
    }
    const ScalarEmSurrogate em(0.4, delays, samples);
    double q = 0.01 + 0.38 * std::uniform_real_distribution<double>(0, 1)(rng);
    double ll = em.log_likelihood(q);
    for (int it = 0; it < 50; ++it) {
      q = em.em_step(q);
      const double next = em.log_likelihood(q);
      CHECK(next >= ll - 1e-12);
      ll = next;
    }
  }
}

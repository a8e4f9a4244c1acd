#include "esdf/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

#include "esdf/errors.hpp"
#include "esdf/numeric.hpp"
#include "text_format.hpp"

namespace esdf {

namespace {

constexpr std::uint64_t kRequestStream = 0x5eedf00dULL;
constexpr std::uint64_t kProbeStream = 0xca11b8a7eULL;

/// Zipf-like categorical sampler per field.
class FeatureSampler {
 public:
  FeatureSampler(const std::vector<std::uint32_t>& sizes, double exponent) {
    std::uint32_t offset = 0;
    for (auto size : sizes) {
      std::vector<double> cdf(size);
      double acc = 0.0;
      for (std::uint32_t k = 0; k < size; ++k) {
        acc += 1.0 / std::pow(static_cast<double>(k + 1), exponent);
        cdf[k] = acc;
      }
      for (double& c : cdf) c /= acc;
      cdfs_.push_back(std::move(cdf));
      offsets_.push_back(offset);
      offset += size;
    }
  }

  template <typename Rng>
  FeatureEntry draw(std::uint32_t field, Rng& rng) const {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto& cdf = cdfs_[field];
    const double u = unif(rng);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const auto k = static_cast<std::uint32_t>(
        std::min<std::ptrdiff_t>(it - cdf.begin(), cdf.size() - 1));
    return {field, offsets_[field] + k, 1.0};
  }

  std::uint32_t offset(std::uint32_t field) const { return offsets_[field]; }

 private:
  std::vector<std::vector<double>> cdfs_;
  std::vector<std::uint32_t> offsets_;
};

double dot(const std::vector<double>& w, const FeatureVector& x,
           std::size_t row_offset = 0) {
  double s = 0.0;
  for (const auto& f : x.entries) s += w[row_offset + f.index] * f.value;
  return s;
}

struct TrueProbs {
  double p_ctr;
  double p_cvr;
  std::vector<double> delay;
};

TrueProbs true_probs(const GenConfig& cfg, const FeatureVector& x) {
  TrueProbs out;
  out.p_ctr = sigmoid(cfg.ctr_bias + dot(cfg.ctr_weights, x));
  out.p_cvr = sigmoid(cfg.cvr_bias + dot(cfg.cvr_weights, x));
  const auto bins = static_cast<std::size_t>(cfg.slots.num_bins());
  const std::size_t dim = cfg.feature_dim();
  out.delay.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out.delay[b] = cfg.delay_bias[b] + dot(cfg.delay_weights, x, b * dim);
  }
  softmax_inplace(out.delay);
  return out;
}

FeatureVector draw_features(const GenConfig& cfg, const FeatureSampler& sampler,
                            std::mt19937_64& request_rng,
                            std::mt19937_64& record_rng) {
  FeatureVector x;
  x.entries.reserve(cfg.field_sizes.size());
  for (std::uint32_t f = 0; f < cfg.n_fields(); ++f) {
    x.entries.push_back(f < cfg.request_fields ? sampler.draw(f, request_rng)
                                               : sampler.draw(f, record_rng));
  }
  return x;
}

}  // namespace

std::uint32_t GenConfig::feature_dim() const {
  return std::accumulate(field_sizes.begin(), field_sizes.end(), 0u);
}

void GenConfig::validate() const {
  slots.validate();
  if (field_sizes.empty()) throw ConfigError("at least one field is required");
  for (auto s : field_sizes) {
    if (s == 0) throw ConfigError("field vocabulary sizes must be positive");
  }
  const std::size_t dim = feature_dim();
  const std::size_t bins = static_cast<std::size_t>(slots.num_bins());
  if (ctr_weights.size() != dim) {
    throw ConfigError("ctr_weights has " + std::to_string(ctr_weights.size()) +
                      " entries, feature_dim is " + std::to_string(dim));
  }
  if (cvr_weights.size() != dim) {
    throw ConfigError("cvr_weights has " + std::to_string(cvr_weights.size()) +
                      " entries, feature_dim is " + std::to_string(dim));
  }
  if (delay_weights.size() != dim * bins) {
    throw ConfigError("delay_weights must be num_bins x feature_dim = " +
                      std::to_string(dim * bins));
  }
  if (delay_bias.size() != bins) {
    throw ConfigError("delay_bias must have num_bins = " +
                      std::to_string(bins) + " entries");
  }
  if (!(day1_mass_target > 0.0 && day1_mass_target < 1.0)) {
    throw ConfigError("day1_mass_target must lie in (0, 1)");
  }
  if (request_fields > field_sizes.size()) {
    throw ConfigError("request_fields exceeds the number of fields");
  }
  if (impressions_per_request == 0) {
    throw ConfigError("impressions_per_request must be positive");
  }
  if (span_seconds <= 0) throw ConfigError("span_seconds must be positive");
}

GenConfig make_gen_config(const WorldOptions& opts) {
  GenConfig cfg;
  cfg.field_sizes = opts.field_sizes;
  cfg.request_fields = opts.request_fields;
  cfg.impressions_per_request = opts.impressions_per_request;
  cfg.zipf_exponent = opts.zipf_exponent;
  cfg.slots = opts.slots;
  cfg.day1_mass_target = opts.day1_mass_target;
  cfg.slots.validate();
  if (opts.delay_field >= opts.field_sizes.size()) {
    throw ConfigError("delay_field out of range");
  }

  const std::size_t dim = cfg.feature_dim();
  const int bins = cfg.slots.num_bins();
  const int T = cfg.slots.max_delay_days;
  std::mt19937_64 rng(mix_seed(opts.world_seed, 0));
  std::normal_distribution<double> normal(0.0, 1.0);

  cfg.ctr_bias = opts.ctr_bias;
  cfg.cvr_bias = opts.cvr_bias;
  cfg.ctr_weights.resize(dim);
  cfg.cvr_weights.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    cfg.ctr_weights[j] = opts.ctr_scale * normal(rng);
    cfg.cvr_weights[j] = opts.cvr_scale * normal(rng);
  }

  cfg.delay_bias.assign(bins, 0.0);
  cfg.delay_bias[bins - 1] = opts.overflow_bias;
  cfg.delay_weights.assign(dim * bins, 0.0);
  for (std::size_t j = 0; j < dim; ++j) {
    for (int b = 0; b < bins; ++b) {
      cfg.delay_weights[b * dim + j] = opts.delay_noise * normal(rng);
    }
  }

  // Speed field: slot-0 shift plus a bump on one later slot per value.
  FeatureSampler layout(cfg.field_sizes, cfg.zipf_exponent);
  const std::uint32_t start = layout.offset(opts.delay_field);
  if (opts.late_bump_min_slot < 1 || opts.late_bump_min_slot > T) {
    throw ConfigError("late_bump_min_slot must lie in [1, T]");
  }
  std::uniform_int_distribution<int> bump_slot(opts.late_bump_min_slot, T);
  for (std::uint32_t k = 0; k < cfg.field_sizes[opts.delay_field]; ++k) {
    const std::size_t j = start + k;
    const double speed = opts.speed_scale * normal(rng);
    cfg.delay_weights[j] += speed;
    cfg.delay_weights[static_cast<std::size_t>(bump_slot(rng)) * dim + j] +=
        opts.late_bump;
    cfg.cvr_weights[j] += opts.speed_cvr_coupling * speed;
  }

  calibrate_day1_bias(cfg);
  return cfg;
}

double expected_day1_mass(const GenConfig& cfg, std::uint64_t n_probe) {
  FeatureSampler sampler(cfg.field_sizes, cfg.zipf_exponent);
  double num = 0.0, den = 0.0;
  for (std::uint64_t i = 0; i < n_probe; ++i) {
    std::mt19937_64 rng(mix_seed(kProbeStream, i));
    const auto x = draw_features(cfg, sampler, rng, rng);
    const auto probs = true_probs(cfg, x);
    const double weight = probs.p_ctr * probs.p_cvr;
    num += weight * probs.delay[0];
    den += weight;
  }
  return num / den;
}

void calibrate_day1_bias(GenConfig& cfg, std::uint64_t n_probe) {
  if (cfg.delay_bias.empty()) throw ConfigError("delay_bias is empty");
  double lo = -30.0, hi = 30.0;
  for (int it = 0; it < 60; ++it) {
    cfg.delay_bias[0] = 0.5 * (lo + hi);
    if (expected_day1_mass(cfg, n_probe) < cfg.day1_mass_target) {
      lo = cfg.delay_bias[0];
    } else {
      hi = cfg.delay_bias[0];
    }
  }
  cfg.delay_bias[0] = 0.5 * (lo + hi);
}

GeneratedLog generate_range(const GenConfig& cfg, std::uint64_t begin,
                            std::uint64_t end) {
  cfg.validate();
  if (end > cfg.n_impressions || begin > end) {
    throw ConfigError("record range outside [0, n_impressions]");
  }
  FeatureSampler sampler(cfg.field_sizes, cfg.zipf_exponent);
  const std::int64_t sps = cfg.slots.seconds_per_slot;

  GeneratedLog out;
  out.log.schema = cfg.schema();
  out.log.records.reserve(end - begin);
  out.truth.reserve(end - begin);

  for (std::uint64_t i = begin; i < end; ++i) {
    const std::uint64_t sample_id = cfg.first_sample_id + i;
    const std::uint64_t request_id = sample_id / cfg.impressions_per_request;
    std::mt19937_64 request_rng(
        mix_seed(cfg.seed ^ kRequestStream, request_id));
    std::mt19937_64 rng(mix_seed(cfg.seed, sample_id));
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    EventRecord rec;
    rec.request_id = request_id;
    rec.sample_id = sample_id;
    rec.features = draw_features(cfg, sampler, request_rng, rng);
    rec.click_ts = cfg.start_ts + std::uniform_int_distribution<std::int64_t>(
                                      0, cfg.span_seconds - 1)(rng);

    auto probs = true_probs(cfg, rec.features);
    GroundTruth gt;
    gt.sample_id = sample_id;
    gt.p_ctr = probs.p_ctr;
    gt.p_cvr = probs.p_cvr;

    rec.clicked = unif(rng) < probs.p_ctr;
    if (rec.clicked && unif(rng) < probs.p_cvr) {
      gt.converts = true;
      const double u = unif(rng);
      double acc = 0.0;
      int slot = static_cast<int>(probs.delay.size()) - 1;
      for (std::size_t b = 0; b < probs.delay.size(); ++b) {
        acc += probs.delay[b];
        if (u < acc) {
          slot = static_cast<int>(b);
          break;
        }
      }
      gt.delay_slot = slot;
      const auto jitter =
          std::uniform_int_distribution<std::int64_t>(0, sps - 1)(rng);
      rec.conversion_ts = rec.click_ts + slot * sps + jitter;
    }
    gt.clicked = rec.clicked;
    gt.delay_dist = std::move(probs.delay);
    out.log.records.push_back(std::move(rec));
    out.truth.push_back(std::move(gt));
  }
  return out;
}

GeneratedLog generate(const GenConfig& cfg) {
  return generate_range(cfg, 0, cfg.n_impressions);
}

double truth_tail(const GroundTruth& gt, int e) {
  const int bins = static_cast<int>(gt.delay_dist.size());
  if (e < 0 || e >= bins) {
    throw InputError("elapsed slot " + std::to_string(e) + " out of range");
  }
  double tail = 0.0;
  for (int t = e + 1; t < bins; ++t) tail += gt.delay_dist[t];
  return tail;
}

double oracle_posterior(const GroundTruth& gt, int e) {
  if (!gt.clicked) {
    throw InvariantError("posterior requested for unclicked sample " +
                         std::to_string(gt.sample_id));
  }
  const double tail = truth_tail(gt, e);
  const double num = gt.p_cvr * tail;
  return num / (1.0 - gt.p_cvr + num);
}

void write_ground_truth(std::ostream& out, const std::vector<GroundTruth>& truth,
                        int num_bins, const std::string& config_echo) {
  out << "#esdf-truth v1\n#config " << config_echo << "\n#bins " << num_bins
      << '\n';
  for (const auto& gt : truth) {
    out << gt.sample_id << '\t' << (gt.clicked ? 1 : 0) << '\t'
        << text::fmt(gt.p_ctr) << '\t' << text::fmt(gt.p_cvr) << '\t'
        << (gt.converts ? 1 : 0) << '\t' << gt.delay_slot;
    for (double f : gt.delay_dist) out << '\t' << text::fmt(f);
    out << '\n';
  }
}

std::vector<GroundTruth> read_ground_truth(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "#esdf-truth v1") {
    throw InputError("missing ground-truth magic line");
  }
  if (!std::getline(in, line) || line.rfind("#config", 0) != 0) {
    throw InputError("line 2: expected #config header");
  }
  if (!std::getline(in, line) || line.rfind("#bins ", 0) != 0) {
    throw InputError("line 3: expected #bins header");
  }
  const int bins = text::parse<int>(std::string_view(line).substr(6), 3, "bins");
  std::vector<GroundTruth> out;
  std::size_t line_no = 3;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = text::split(line, '\t');
    if (cols.size() != static_cast<std::size_t>(6 + bins)) {
      throw InputError("line " + std::to_string(line_no) +
                       ": wrong column count in ground-truth row");
    }
    GroundTruth gt;
    gt.sample_id = text::parse<std::uint64_t>(cols[0], line_no, "sample_id");
    gt.clicked = text::parse<int>(cols[1], line_no, "clicked") != 0;
    gt.p_ctr = text::parse<double>(cols[2], line_no, "p_ctr");
    gt.p_cvr = text::parse<double>(cols[3], line_no, "p_cvr");
    gt.converts = text::parse<int>(cols[4], line_no, "c") != 0;
    gt.delay_slot = text::parse<int>(cols[5], line_no, "d");
    for (int b = 0; b < bins; ++b) {
      gt.delay_dist.push_back(text::parse<double>(cols[6 + b], line_no, "f"));
    }
    out.push_back(std::move(gt));
  }
  return out;
}

}  // namespace esdf

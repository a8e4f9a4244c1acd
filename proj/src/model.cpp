#include "esdf/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "esdf/errors.hpp"
#include "esdf/numeric.hpp"

namespace esdf {

std::uint32_t ModelShape::delay_input_width() const {
  return embed_width() +
         (delay_uses_elapsed ? static_cast<std::uint32_t>(slots.num_bins()) : 0u);
}

std::uint32_t ModelShape::delay_output_width() const {
  return delay_head == DelayHead::Softmax
             ? static_cast<std::uint32_t>(slots.num_bins())
             : 1u;
}

void ModelShape::validate() const {
  slots.validate();
  if (feature_dim == 0 || n_fields == 0) {
    throw ConfigError("model needs a positive feature_dim and n_fields");
  }
  if (emb_dim == 0) throw ConfigError("emb_dim must be positive");
  for (auto h : hidden) {
    if (h == 0) throw ConfigError("hidden layer widths must be positive");
  }
}

ParamLayout::ParamLayout(const ModelShape& shape) {
  std::size_t offset = 0;
  embedding = offset;
  offset += static_cast<std::size_t>(shape.feature_dim) * shape.emb_dim;
  for (int t = 0; t < 3; ++t) {
    std::uint32_t in =
        t == kDelay ? shape.delay_input_width() : shape.embed_width();
    std::vector<std::uint32_t> widths = shape.hidden;
    widths.push_back(t == kDelay ? shape.delay_output_width() : 1u);
    for (auto out : widths) {
      Layer layer;
      layer.in = in;
      layer.out = out;
      layer.weight = offset;
      offset += static_cast<std::size_t>(in) * out;
      layer.bias = offset;
      offset += out;
      towers[t].push_back(layer);
      in = out;
    }
  }
  total = offset;
}

ModelParams init_params(const ModelShape& shape, std::uint64_t seed) {
  shape.validate();
  ModelParams params;
  params.shape = shape;
  params.seed = seed;
  const ParamLayout layout(shape);
  params.values.assign(layout.total, 0.0);

  std::mt19937_64 rng(mix_seed(seed, 0x1417));
  std::uniform_real_distribution<double> emb(-0.01, 0.01);
  const std::size_t n_emb = static_cast<std::size_t>(shape.feature_dim) * shape.emb_dim;
  for (std::size_t i = 0; i < n_emb; ++i) params.values[layout.embedding + i] = emb(rng);
  for (const auto& tower : layout.towers) {
    for (const auto& layer : tower) {
      const double limit = std::sqrt(3.0 / layer.in);
      std::uniform_real_distribution<double> w(-limit, limit);
      const std::size_t n = static_cast<std::size_t>(layer.in) * layer.out;
      for (std::size_t i = 0; i < n; ++i) params.values[layer.weight + i] = w(rng);
    }
  }
  return params;
}

Network::Network(const ModelParams& params)
    : params_(params), layout_(params.shape) {
  if (params.values.size() != layout_.total) {
    throw ConfigError("parameter vector has " +
                      std::to_string(params.values.size()) +
                      " values, shape needs " + std::to_string(layout_.total));
  }
}

void Network::run_tower(int tower, std::span<const double> input,
                        std::vector<std::vector<double>>& acts,
                        std::span<double> out) const {
  const auto& layers = layout_.towers[tower];
  const double* w = params_.values.data();
  acts.resize(layers.size() - 1);
  std::span<const double> cur = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const bool last = l + 1 == layers.size();
    std::span<double> dst;
    if (last) {
      dst = out;
    } else {
      acts[l].resize(layer.out);
      dst = acts[l];
    }
    for (std::uint32_t o = 0; o < layer.out; ++o) {
      const double* row = w + layer.weight + static_cast<std::size_t>(o) * layer.in;
      double s = w[layer.bias + o];
      for (std::uint32_t i = 0; i < layer.in; ++i) s += row[i] * cur[i];
      dst[o] = last ? s : std::max(s, 0.0);
    }
    cur = dst;
  }
}

void Network::forward(const FeatureVector& x, int e, ForwardCache& cache) const {
  const auto& shape = params_.shape;
  if (e < 0 || e > shape.slots.overflow_slot()) {
    throw InputError("elapsed slot " + std::to_string(e) + " outside [0, T+1]");
  }
  const std::uint32_t emb = shape.emb_dim;
  cache.embed.assign(shape.embed_width(), 0.0);
  for (const auto& entry : x.entries) {
    if (entry.index >= shape.feature_dim || entry.field >= shape.n_fields) {
      throw InputError("feature (" + std::to_string(entry.field) + ", " +
                       std::to_string(entry.index) + ") outside model schema");
    }
    const double* row = params_.values.data() + layout_.embedding +
                        static_cast<std::size_t>(entry.index) * emb;
    double* dst = cache.embed.data() + static_cast<std::size_t>(entry.field) * emb;
    for (std::uint32_t k = 0; k < emb; ++k) dst[k] += entry.value * row[k];
  }

  Heads& h = cache.heads;
  double logit = 0.0;
  run_tower(ParamLayout::kCtr, cache.embed, cache.acts[0], {&logit, 1});
  h.ctr_logit = logit;
  run_tower(ParamLayout::kCvr, cache.embed, cache.acts[1], {&logit, 1});
  h.cvr_logit = logit;
  h.p = sigmoid(h.ctr_logit);
  h.r = sigmoid(h.cvr_logit);
  h.q = h.p * h.r;

  cache.delay_input.assign(cache.embed.begin(), cache.embed.end());
  if (shape.delay_uses_elapsed) {
    cache.delay_input.resize(shape.delay_input_width(), 0.0);
    cache.delay_input[shape.embed_width() + static_cast<std::uint32_t>(e)] = 1.0;
  }
  h.delay_logits.resize(shape.delay_output_width());
  run_tower(ParamLayout::kDelay, cache.delay_input, cache.acts[2], h.delay_logits);
  if (shape.delay_head == DelayHead::Softmax) {
    h.f.assign(h.delay_logits.begin(), h.delay_logits.end());
    softmax_inplace(h.f);
    h.rate = 0.0;
  } else {
    h.f.clear();
    h.rate = softplus(h.delay_logits[0]);
  }
}

void Network::back_tower(int tower, std::span<const double> input,
                         const std::vector<std::vector<double>>& acts,
                         std::span<const double> d_out, std::span<double> d_input,
                         ForwardCache& cache, std::span<double> grad) const {
  const auto& layers = layout_.towers[tower];
  const double* w = params_.values.data();
  cache.d_cur.assign(d_out.begin(), d_out.end());
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& layer = layers[l];
    std::span<const double> in_act =
        l == 0 ? input : std::span<const double>(acts[l - 1]);
    auto& d_prev = cache.d_prev;
    d_prev.assign(layer.in, 0.0);
    for (std::uint32_t o = 0; o < layer.out; ++o) {
      const double g = cache.d_cur[o];
      if (g == 0.0) continue;
      const std::size_t row = layer.weight + static_cast<std::size_t>(o) * layer.in;
      double* grow = grad.data() + row;
      const double* wrow = w + row;
      for (std::uint32_t i = 0; i < layer.in; ++i) {
        grow[i] += g * in_act[i];
        d_prev[i] += g * wrow[i];
      }
      grad[layer.bias + o] += g;
    }
    if (l == 0) {
      for (std::uint32_t i = 0; i < layer.in; ++i) d_input[i] += d_prev[i];
    } else {
      for (std::uint32_t i = 0; i < layer.in; ++i) {
        if (in_act[i] <= 0.0) d_prev[i] = 0.0;
      }
      std::swap(cache.d_cur, cache.d_prev);
    }
  }
}

void Network::backward(const FeatureVector& x, ForwardCache& cache,
                       double d_ctr_logit, double d_cvr_logit,
                       std::span<const double> d_delay_logits,
                       std::span<double> grad) const {
  const auto& shape = params_.shape;
  cache.d_embed.assign(shape.embed_width(), 0.0);
  const std::span<const double> embed = cache.embed;
  if (d_ctr_logit != 0.0) {
    back_tower(ParamLayout::kCtr, embed, cache.acts[0], {&d_ctr_logit, 1},
               cache.d_embed, cache, grad);
  }
  if (d_cvr_logit != 0.0) {
    back_tower(ParamLayout::kCvr, embed, cache.acts[1], {&d_cvr_logit, 1},
               cache.d_embed, cache, grad);
  }
  bool any_delay = false;
  for (double g : d_delay_logits) any_delay = any_delay || g != 0.0;
  if (any_delay) {
    cache.d_delay_input.assign(shape.delay_input_width(), 0.0);
    back_tower(ParamLayout::kDelay, cache.delay_input, cache.acts[2],
               d_delay_logits, cache.d_delay_input, cache, grad);
    for (std::uint32_t i = 0; i < shape.embed_width(); ++i) {
      cache.d_embed[i] += cache.d_delay_input[i];
    }
  }
  const std::uint32_t emb = shape.emb_dim;
  for (const auto& entry : x.entries) {
    double* g = grad.data() + layout_.embedding +
                static_cast<std::size_t>(entry.index) * emb;
    const double* d = cache.d_embed.data() + static_cast<std::size_t>(entry.field) * emb;
    for (std::uint32_t k = 0; k < emb; ++k) g[k] += entry.value * d[k];
  }
}

Heads forward(const ModelParams& params, const FeatureVector& x, int e) {
  Network net(params);
  ForwardCache cache;
  net.forward(x, e, cache);
  return cache.heads;
}

double survival_tail(std::span<const double> f, int e) {
  const int bins = static_cast<int>(f.size());
  if (e < 0 || e >= bins) {
    throw InputError("elapsed slot " + std::to_string(e) + " outside [0, " +
                     std::to_string(bins - 1) + "]");
  }
  double tail = 0.0;
  for (int t = e + 1; t < bins; ++t) tail += f[t];
  return tail;
}

}  // namespace esdf

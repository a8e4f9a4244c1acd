#pragma once

// Shared-embedding multi-tower network.
//
// Three MLP towers read the same concatenation of per-field embeddings:
//   ctr tower   -> p = sigmoid(.)            pCTR
//   cvr tower   -> r = sigmoid(.)            conditional pCVR, q = p * r
//   delay tower -> f = softmax(.) over T+2 slots, or a single positive rate
//                  lambda = softplus(.) for the exponential-delay baseline.
// Only the delay tower sees the elapsed slot e (as a one-hot appended to its
// input), so p, r and q never depend on e.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "esdf/event_model.hpp"

namespace esdf {

enum class DelayHead { Softmax, ExponentialRate };

struct ModelShape {
  std::uint32_t feature_dim = 0;
  std::uint32_t n_fields = 0;
  std::uint32_t emb_dim = 8;
  std::vector<std::uint32_t> hidden{64, 32};
  SlotConfig slots;
  DelayHead delay_head = DelayHead::Softmax;
  bool delay_uses_elapsed = true;

  std::uint32_t embed_width() const { return n_fields * emb_dim; }
  std::uint32_t delay_input_width() const;
  std::uint32_t delay_output_width() const;
  void validate() const;

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// Offsets of every parameter block inside the flat parameter vector.
struct ParamLayout {
  struct Layer {
    std::size_t weight = 0;  // row-major [out][in]
    std::size_t bias = 0;
    std::uint32_t in = 0;
    std::uint32_t out = 0;
  };
  enum Tower { kCtr = 0, kCvr = 1, kDelay = 2 };

  std::size_t embedding = 0;
  std::vector<Layer> towers[3];
  std::size_t total = 0;

  explicit ParamLayout(const ModelShape& shape);
};

struct ModelParams {
  ModelShape shape;
  std::uint64_t seed = 0;
  std::vector<double> values;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Embeddings uniform in [-0.01, 0.01]; tower weights uniform in
/// +-sqrt(3 / fan_in); biases zero.
ModelParams init_params(const ModelShape& shape, std::uint64_t seed);

struct Heads {
  double ctr_logit = 0.0;
  double cvr_logit = 0.0;
  double p = 0.5;
  double r = 0.5;
  double q = 0.25;
  std::vector<double> delay_logits;
  std::vector<double> f;  // softmax head only
  double rate = 0.0;      // exponential head only
};

/// Activations of one forward pass, reused for backpropagation. Also holds
/// the scratch buffers backward() needs, so one cache per thread suffices.
struct ForwardCache {
  std::vector<double> embed;
  std::vector<double> delay_input;
  std::vector<std::vector<double>> acts[3];  // per tower, per hidden layer
  Heads heads;

  std::vector<double> d_embed, d_delay_input, d_cur, d_prev;
};

/// Stateless evaluator over a fixed parameter set.
class Network {
 public:
  explicit Network(const ModelParams& params);

  /// Throws InputError for out-of-range features or e outside [0, T+1].
  void forward(const FeatureVector& x, int e, ForwardCache& cache) const;

  /// Accumulates d(loss)/d(params) into `grad` given loss gradients with
  /// respect to the three heads' logits.
  void backward(const FeatureVector& x, ForwardCache& cache,
                double d_ctr_logit, double d_cvr_logit,
                std::span<const double> d_delay_logits,
                std::span<double> grad) const;

  const ParamLayout& layout() const { return layout_; }
  const ModelShape& shape() const { return params_.shape; }

 private:
  void run_tower(int tower, std::span<const double> input,
                 std::vector<std::vector<double>>& acts,
                 std::span<double> out) const;
  void back_tower(int tower, std::span<const double> input,
                  const std::vector<std::vector<double>>& acts,
                  std::span<const double> d_out, std::span<double> d_input,
                  ForwardCache& cache, std::span<double> grad) const;

  const ModelParams& params_;
  ParamLayout layout_;
};

Heads forward(const ModelParams& params, const FeatureVector& x, int e);

/// Sum of f over slots e+1..T+1; zero when e = T+1.
double survival_tail(std::span<const double> f, int e);

// Checkpoint: "#esdf-checkpoint v1", "#config ...", shape and seed lines, then
// one shortest-round-trip decimal per parameter. Round trips bit-exactly.
void write_checkpoint(std::ostream& out, const ModelParams& params,
                      const std::string& config_echo);
ModelParams read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::string& config_echo);
ModelParams load_checkpoint(const std::string& path);

}  // namespace esdf

#pragma once

// Single-convolutional-layer text classifier: parallel 1-D convolutions of
// several window widths over the embedded sequence, global max-pool, ReLU,
// dropout, and a dense softmax head with a temperature.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "advtext/matrix.hpp"

namespace advtext {

struct ModelConfig {
  std::vector<std::size_t> kernel_widths{3, 4, 5};
  std::size_t filters_per_width = 100;
  double dropout_rate = 0.5;
  double temperature = 1.0;
  std::size_t embedding_dim = 300;
  std::size_t num_classes = 2;
};

// Convolution weights for one window width. Row index k * d + j holds the
// weight of embedding coordinate j at window offset k; columns are filters.
struct ConvBlock {
  std::size_t width = 0;
  Matrix weights;
  Vector bias;

  friend bool operator==(const ConvBlock&, const ConvBlock&) = default;
};

struct ClassifierModel {
  std::vector<std::size_t> kernel_widths;
  std::size_t filters_per_width = 0;
  std::vector<ConvBlock> conv;
  Matrix dense_weights;  // pooled_width() x num_classes
  Vector dense_bias;
  double dropout_rate = 0.5;
  double temperature = 1.0;
  std::size_t embedding_dim = 0;
  std::size_t num_classes = 0;

  // All weights zero.
  static ClassifierModel zeros(const ModelConfig& config);
  // Glorot-uniform weights, zero biases.
  static ClassifierModel initialize(const ModelConfig& config, std::uint64_t seed);

  ModelConfig config() const;
  std::size_t pooled_width() const { return kernel_widths.size() * filters_per_width; }
  std::size_t max_kernel_width() const;

  // Throws std::invalid_argument when a structural invariant is broken.
  void validate() const;

  friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;
};

enum class Mode { train, eval };

struct ForwardTrace {
  std::size_t input_rows = 0;
  std::size_t padded_rows = 0;
  std::vector<Matrix> pre_activation;             // per width: positions x filters
  std::vector<std::vector<std::size_t>> argmax;   // per width: position per filter
  Vector pooled_max;                              // before ReLU
  Vector pooled;                                  // after ReLU and dropout
  Vector dropout_mask;                            // empty in eval mode
  Vector logits;
  Vector probabilities;
};

struct GradientSet {
  std::vector<Matrix> conv_weights;
  std::vector<Vector> conv_bias;
  Matrix dense_weights;
  Vector dense_bias;
  Matrix input_gradient;  // n x d

  static GradientSet zeros_like(const ClassifierModel& model, std::size_t input_rows = 0);
  // this += scale * other (weights only; input gradients are per-document).
  void accumulate(const GradientSet& other, double scale = 1.0);
  bool all_finite() const;
};

// y_i = exp(l_i / T) / sum_k exp(l_k / T), computed with max subtraction.
Vector softmax_with_temperature(std::span<const double> logits, double temperature);

// log y_i for every class, via log-sum-exp.
Vector log_softmax_with_temperature(std::span<const double> logits, double temperature);

inline constexpr double kCrossEntropyFloor = 1e-12;

// -sum t_i ln(max(p_i, 1e-12)).
double cross_entropy(std::span<const double> predicted, std::span<const double> target);

ForwardTrace forward(const ClassifierModel& model, const Matrix& embedded,
                     Mode mode = Mode::eval,
                     std::optional<std::uint64_t> rng_seed = std::nullopt);

// Exact gradients of cross_entropy(forward(...).probabilities, target) with
// respect to every weight and to the input rows.
GradientSet backward(const ClassifierModel& model, const Matrix& embedded,
                     const ForwardTrace& trace, std::span<const double> target);

std::size_t argmax(std::span<const double> values);
std::size_t predict(const ClassifierModel& model, const Matrix& embedded);
Vector one_hot(std::size_t label, std::size_t num_classes);

// ---------------------------------------------------------------------------
// Training

struct Example {
  Matrix embedded;
  Vector target;       // probability vector (one-hot for hard labels)
  std::size_t label = 0;
};

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  std::size_t epochs = 10;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double accuracy = 0.0;  // train-mode predictions against example labels
};

struct TrainResult {
  ClassifierModel model;
  std::vector<EpochLog> log;
};

// Mini-batch training on the mean per-example cross-entropy at the model's
// own temperature. Deterministic for a fixed seed.
TrainResult train(ClassifierModel model, std::span<const Example> dataset,
                  const TrainConfig& config);

// Initialises a model from config.seed and trains it; the shuffle/dropout
// stream uses a seed derived from the same value.
TrainResult train_from_scratch(const ModelConfig& architecture, std::span<const Example> dataset,
                               const TrainConfig& config);

// Fraction of examples whose eval-mode prediction equals the label.
double accuracy(const ClassifierModel& model, std::span<const Example> examples);

}  // namespace advtext

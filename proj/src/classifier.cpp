#include "advtext/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "advtext/rng.hpp"

namespace advtext {

bool Matrix::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

namespace {

bool finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void check_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("temperature must be a positive finite number, got " +
                                std::to_string(temperature));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ClassifierModel

ClassifierModel ClassifierModel::zeros(const ModelConfig& config) {
  ClassifierModel model;
  model.kernel_widths = config.kernel_widths;
  model.filters_per_width = config.filters_per_width;
  model.dropout_rate = config.dropout_rate;
  model.temperature = config.temperature;
  model.embedding_dim = config.embedding_dim;
  model.num_classes = config.num_classes;
  for (std::size_t width : config.kernel_widths) {
    model.conv.push_back(ConvBlock{width,
                                   Matrix(width * config.embedding_dim, config.filters_per_width),
                                   Vector(config.filters_per_width, 0.0)});
  }
  model.dense_weights = Matrix(model.pooled_width(), config.num_classes);
  model.dense_bias = Vector(config.num_classes, 0.0);
  model.validate();
  return model;
}

ClassifierModel ClassifierModel::initialize(const ModelConfig& config, std::uint64_t seed) {
  ClassifierModel model = zeros(config);
  Rng rng(seed);
  for (ConvBlock& block : model.conv) {
    const double fan_in = static_cast<double>(block.weights.rows());
    const double fan_out = static_cast<double>(block.weights.cols());
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& w : block.weights.values()) w = rng.uniform(-limit, limit);
  }
  const double limit = std::sqrt(
      6.0 / static_cast<double>(model.dense_weights.rows() + model.dense_weights.cols()));
  for (double& w : model.dense_weights.values()) w = rng.uniform(-limit, limit);
  return model;
}

ModelConfig ClassifierModel::config() const {
  return ModelConfig{kernel_widths, filters_per_width, dropout_rate,
                     temperature,   embedding_dim,     num_classes};
}

std::size_t ClassifierModel::max_kernel_width() const {
  return kernel_widths.empty() ? 0 : *std::max_element(kernel_widths.begin(), kernel_widths.end());
}

void ClassifierModel::validate() const {
  if (kernel_widths.empty()) throw std::invalid_argument("model needs at least one kernel width");
  if (std::find(kernel_widths.begin(), kernel_widths.end(), 0u) != kernel_widths.end()) {
    throw std::invalid_argument("kernel widths must be positive");
  }
  if (filters_per_width == 0) throw std::invalid_argument("filters_per_width must be positive");
  if (embedding_dim == 0) throw std::invalid_argument("embedding_dim must be positive");
  if (num_classes < 2) throw std::invalid_argument("num_classes must be at least 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout_rate must lie in [0, 1)");
  }
  check_temperature(temperature);
  if (conv.size() != kernel_widths.size()) throw std::invalid_argument("conv block count mismatch");
  for (std::size_t b = 0; b < conv.size(); ++b) {
    const ConvBlock& block = conv[b];
    if (block.width != kernel_widths[b] ||
        block.weights.rows() != block.width * embedding_dim ||
        block.weights.cols() != filters_per_width || block.bias.size() != filters_per_width) {
      throw std::invalid_argument("conv block " + std::to_string(b) + " has wrong shape");
    }
    if (!block.weights.all_finite() || !finite(block.bias)) {
      throw std::invalid_argument("conv block " + std::to_string(b) + " has non-finite weights");
    }
  }
  if (dense_weights.rows() != pooled_width() || dense_weights.cols() != num_classes ||
      dense_bias.size() != num_classes) {
    throw std::invalid_argument("dense layer has wrong shape");
  }
  if (!dense_weights.all_finite() || !finite(dense_bias)) {
    throw std::invalid_argument("dense layer has non-finite weights");
  }
}

// ---------------------------------------------------------------------------
// GradientSet

GradientSet GradientSet::zeros_like(const ClassifierModel& model, std::size_t input_rows) {
  GradientSet g;
  for (const ConvBlock& block : model.conv) {
    g.conv_weights.emplace_back(block.weights.rows(), block.weights.cols());
    g.conv_bias.emplace_back(block.bias.size(), 0.0);
  }
  g.dense_weights = Matrix(model.dense_weights.rows(), model.dense_weights.cols());
  g.dense_bias = Vector(model.dense_bias.size(), 0.0);
  g.input_gradient = Matrix(input_rows, model.embedding_dim);
  return g;
}

void GradientSet::accumulate(const GradientSet& other, double scale) {
  for (std::size_t b = 0; b < conv_weights.size(); ++b) {
    auto& dst = conv_weights[b].values();
    const auto& src = other.conv_weights[b].values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
    for (std::size_t i = 0; i < conv_bias[b].size(); ++i) {
      conv_bias[b][i] += scale * other.conv_bias[b][i];
    }
  }
  auto& dw = dense_weights.values();
  const auto& sw = other.dense_weights.values();
  for (std::size_t i = 0; i < dw.size(); ++i) dw[i] += scale * sw[i];
  for (std::size_t i = 0; i < dense_bias.size(); ++i) dense_bias[i] += scale * other.dense_bias[i];
}

bool GradientSet::all_finite() const {
  for (std::size_t b = 0; b < conv_weights.size(); ++b) {
    if (!conv_weights[b].all_finite() || !finite(conv_bias[b])) return false;
  }
  return dense_weights.all_finite() && finite(dense_bias) && input_gradient.all_finite();
}

// ---------------------------------------------------------------------------
// Softmax and loss

Vector softmax_with_temperature(std::span<const double> logits, double temperature) {
  check_temperature(temperature);
  if (logits.empty()) throw std::invalid_argument("softmax of an empty vector");
  if (!finite(logits)) throw std::invalid_argument("softmax: logits must be finite");
  const double top = *std::max_element(logits.begin(), logits.end());
  Vector out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - top) / temperature);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

Vector log_softmax_with_temperature(std::span<const double> logits, double temperature) {
  check_temperature(temperature);
  if (logits.empty()) throw std::invalid_argument("log-softmax of an empty vector");
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double l : logits) total += std::exp((l - top) / temperature);
  const double log_total = std::log(total);
  Vector out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = (logits[i] - top) / temperature - log_total;
  return out;
}

double cross_entropy(std::span<const double> predicted, std::span<const double> target) {
  if (predicted.size() != target.size()) {
    throw std::invalid_argument("cross_entropy: length mismatch (" +
                                std::to_string(predicted.size()) + " vs " +
                                std::to_string(target.size()) + ")");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (target[i] != 0.0) loss -= target[i] * std::log(std::max(predicted[i], kCrossEntropyFloor));
  }
  return loss;
}

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

Vector one_hot(std::size_t label, std::size_t num_classes) {
  if (label >= num_classes) throw std::invalid_argument("one_hot: label out of range");
  Vector v(num_classes, 0.0);
  v[label] = 1.0;
  return v;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

// Row r of the zero-padded input; rows past the real input read as zeros.
inline const double* padded_row(const Matrix& embedded, std::size_t r, const Vector& zero_row) {
  return r < embedded.rows() ? embedded.row(r).data() : zero_row.data();
}

}  // namespace

ForwardTrace forward(const ClassifierModel& model, const Matrix& embedded, Mode mode,
                     std::optional<std::uint64_t> rng_seed) {
  if (embedded.rows() == 0) throw std::invalid_argument("forward: input has no rows");
  if (embedded.cols() != model.embedding_dim) {
    throw std::invalid_argument("forward: input dimension " + std::to_string(embedded.cols()) +
                                " does not match model embedding_dim " +
                                std::to_string(model.embedding_dim));
  }
  const std::size_t d = model.embedding_dim;
  const std::size_t filters = model.filters_per_width;
  const Vector zero_row(d, 0.0);

  ForwardTrace trace;
  trace.input_rows = embedded.rows();
  trace.padded_rows = std::max(embedded.rows(), model.max_kernel_width());
  trace.pooled_max.assign(model.pooled_width(), 0.0);

  for (std::size_t b = 0; b < model.conv.size(); ++b) {
    const ConvBlock& block = model.conv[b];
    const std::size_t positions = trace.padded_rows - block.width + 1;
    Matrix pre(positions, filters);
    for (std::size_t p = 0; p < positions; ++p) {
      std::span<double> out = pre.row(p);
      std::copy(block.bias.begin(), block.bias.end(), out.begin());
      for (std::size_t k = 0; k < block.width; ++k) {
        const double* x = padded_row(embedded, p + k, zero_row);
        for (std::size_t j = 0; j < d; ++j) {
          const double xj = x[j];
          if (xj == 0.0) continue;
          const double* w = block.weights.row(k * d + j).data();
          for (std::size_t f = 0; f < filters; ++f) out[f] += xj * w[f];
        }
      }
    }
    // Global max-pool; ties go to the earliest position.
    std::vector<std::size_t> best(filters, 0);
    for (std::size_t f = 0; f < filters; ++f) {
      double top = pre(0, f);
      for (std::size_t p = 1; p < positions; ++p) {
        if (pre(p, f) > top) {
          top = pre(p, f);
          best[f] = p;
        }
      }
      trace.pooled_max[b * filters + f] = top;
    }
    trace.pre_activation.push_back(std::move(pre));
    trace.argmax.push_back(std::move(best));
  }

  trace.pooled.resize(trace.pooled_max.size());
  for (std::size_t i = 0; i < trace.pooled.size(); ++i) {
    trace.pooled[i] = std::max(trace.pooled_max[i], 0.0);
  }
  if (mode == Mode::train && model.dropout_rate > 0.0) {
    Rng rng(rng_seed.value_or(0));
    const double keep_scale = 1.0 / (1.0 - model.dropout_rate);
    trace.dropout_mask.resize(trace.pooled.size());
    for (std::size_t i = 0; i < trace.pooled.size(); ++i) {
      trace.dropout_mask[i] = rng.uniform() < model.dropout_rate ? 0.0 : keep_scale;
      trace.pooled[i] *= trace.dropout_mask[i];
    }
  }

  trace.logits = model.dense_bias;
  for (std::size_t i = 0; i < trace.pooled.size(); ++i) {
    const double z = trace.pooled[i];
    if (z == 0.0) continue;
    std::span<const double> w = model.dense_weights.row(i);
    for (std::size_t c = 0; c < model.num_classes; ++c) trace.logits[c] += z * w[c];
  }
  trace.probabilities = softmax_with_temperature(trace.logits, model.temperature);
  return trace;
}

GradientSet backward(const ClassifierModel& model, const Matrix& embedded,
                     const ForwardTrace& trace, std::span<const double> target) {
  const std::size_t d = model.embedding_dim;
  const std::size_t filters = model.filters_per_width;
  if (trace.input_rows != embedded.rows() || embedded.cols() != d ||
      trace.pre_activation.size() != model.conv.size() ||
      trace.pooled.size() != model.pooled_width() ||
      trace.logits.size() != model.num_classes ||
      (!trace.dropout_mask.empty() && trace.dropout_mask.size() != model.pooled_width())) {
    throw std::invalid_argument("backward: trace does not match model/input (stale trace)");
  }
  if (target.size() != model.num_classes) {
    throw std::invalid_argument("backward: target length does not match num_classes");
  }
  for (std::size_t b = 0; b < model.conv.size(); ++b) {
    if (trace.pre_activation[b].rows() != trace.padded_rows - model.conv[b].width + 1 ||
        trace.pre_activation[b].cols() != filters) {
      throw std::invalid_argument("backward: trace does not match model/input (stale trace)");
    }
  }

  GradientSet grad = GradientSet::zeros_like(model, embedded.rows());

  // d loss / d logit_c = (p_c - t_c) / T for a target that sums to one.
  Vector dlogits(model.num_classes);
  double target_mass = 0.0;
  for (double t : target) target_mass += t;
  for (std::size_t c = 0; c < model.num_classes; ++c) {
    dlogits[c] = (trace.probabilities[c] * target_mass - target[c]) / model.temperature;
  }

  grad.dense_bias = dlogits;
  for (std::size_t i = 0; i < trace.pooled.size(); ++i) {
    const double z = trace.pooled[i];
    std::span<double> g = grad.dense_weights.row(i);
    for (std::size_t c = 0; c < model.num_classes; ++c) g[c] = z * dlogits[c];
  }

  const Vector zero_row(d, 0.0);
  for (std::size_t b = 0; b < model.conv.size(); ++b) {
    const ConvBlock& block = model.conv[b];
    Matrix& gw = grad.conv_weights[b];
    Vector& gb = grad.conv_bias[b];
    for (std::size_t f = 0; f < filters; ++f) {
      const std::size_t unit = b * filters + f;
      if (!(trace.pooled_max[unit] > 0.0)) continue;  // ReLU inactive
      const double mask = trace.dropout_mask.empty() ? 1.0 : trace.dropout_mask[unit];
      if (mask == 0.0) continue;
      std::span<const double> w_out = model.dense_weights.row(unit);
      double dz = 0.0;
      for (std::size_t c = 0; c < model.num_classes; ++c) dz += w_out[c] * dlogits[c];
      const double ds = dz * mask;
      if (ds == 0.0) continue;
      const std::size_t p = trace.argmax[b][f];
      gb[f] += ds;
      for (std::size_t k = 0; k < block.width; ++k) {
        const std::size_t r = p + k;
        const double* x = padded_row(embedded, r, zero_row);
        for (std::size_t j = 0; j < d; ++j) {
          gw(k * d + j, f) += ds * x[j];
          if (r < embedded.rows()) grad.input_gradient(r, j) += ds * block.weights(k * d + j, f);
        }
      }
    }
  }
  return grad;
}

std::size_t predict(const ClassifierModel& model, const Matrix& embedded) {
  return argmax(forward(model, embedded, Mode::eval).probabilities);
}

TrainResult train_from_scratch(const ModelConfig& architecture, std::span<const Example> dataset,
                               const TrainConfig& config) {
  TrainConfig stream = config;
  stream.seed = config.seed ^ 0x9e3779b97f4a7c15ULL;
  return train(ClassifierModel::initialize(architecture, config.seed), dataset, stream);
}

double accuracy(const ClassifierModel& model, std::span<const Example> examples) {
  if (examples.empty()) throw std::invalid_argument("accuracy: no examples");
  std::size_t correct = 0;
  for (const Example& ex : examples) {
    if (predict(model, ex.embedded) == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

// ---------------------------------------------------------------------------
// Training

namespace {

// Flat views over every trainable parameter, kept in a fixed order so the
// optimizer update and its moment buffers line up.
std::vector<std::span<double>> parameter_views(ClassifierModel& m) {
  std::vector<std::span<double>> views;
  for (ConvBlock& block : m.conv) {
    views.emplace_back(block.weights.values());
    views.emplace_back(block.bias);
  }
  views.emplace_back(m.dense_weights.values());
  views.emplace_back(m.dense_bias);
  return views;
}

std::vector<std::span<double>> gradient_views(GradientSet& g) {
  std::vector<std::span<double>> views;
  for (std::size_t b = 0; b < g.conv_weights.size(); ++b) {
    views.emplace_back(g.conv_weights[b].values());
    views.emplace_back(g.conv_bias[b]);
  }
  views.emplace_back(g.dense_weights.values());
  views.emplace_back(g.dense_bias);
  return views;
}

class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, ClassifierModel& model) : config_(config) {
    for (std::span<double> v : parameter_views(model)) {
      first_.emplace_back(v.size(), 0.0);
      second_.emplace_back(v.size(), 0.0);
    }
  }

  void step(ClassifierModel& model, GradientSet& grad) {
    ++steps_;
    auto params = parameter_views(model);
    auto grads = gradient_views(grad);
    const double lr = config_.learning_rate;
    if (config_.kind == OptimizerKind::sgd) {
      for (std::size_t v = 0; v < params.size(); ++v) {
        for (std::size_t i = 0; i < params[v].size(); ++i) params[v][i] -= lr * grads[v][i];
      }
      return;
    }
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (std::size_t v = 0; v < params.size(); ++v) {
      for (std::size_t i = 0; i < params[v].size(); ++i) {
        const double g = grads[v][i];
        first_[v][i] = b1 * first_[v][i] + (1.0 - b1) * g;
        second_[v][i] = b2 * second_[v][i] + (1.0 - b2) * g * g;
        const double m_hat = first_[v][i] / correction1;
        const double v_hat = second_[v][i] / correction2;
        params[v][i] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
      }
    }
  }

 private:
  OptimizerConfig config_;
  std::vector<Vector> first_;
  std::vector<Vector> second_;
  std::size_t steps_ = 0;
};

}  // namespace

TrainResult train(ClassifierModel model, std::span<const Example> dataset,
                  const TrainConfig& config) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  if (config.epochs == 0) throw std::invalid_argument("train: epochs must be >= 1");
  if (config.optimizer.batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");
  model.validate();
  for (const Example& ex : dataset) {
    if (ex.target.size() != model.num_classes) {
      throw std::invalid_argument("train: example target length does not match num_classes");
    }
  }

  Rng rng(config.seed);
  Optimizer optimizer(config.optimizer, model);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.optimizer.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.optimizer.batch_size);
      GradientSet batch = GradientSet::zeros_like(model);
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const Example& ex = dataset[order[i]];
        const ForwardTrace trace = forward(model, ex.embedded, Mode::train, rng.next());
        loss_sum += cross_entropy(trace.probabilities, ex.target);
        if (argmax(trace.probabilities) == ex.label) ++correct;
        batch.accumulate(backward(model, ex.embedded, trace, ex.target), scale);
      }
      optimizer.step(model, batch);
    }
    const double n = static_cast<double>(dataset.size());
    result.log.push_back(EpochLog{epoch, loss_sum / n, static_cast<double>(correct) / n});
  }
  result.model = std::move(model);
  return result;
}

}  // namespace advtext

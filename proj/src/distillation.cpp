#include "advtext/distillation.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "advtext/text_pipeline.hpp"

namespace advtext {

void DistillationConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("distillation temperature must be positive");
  }
  if (hard_weight < 0.0 || soft_weight < 0.0 || std::abs(hard_weight + soft_weight - 1.0) > 1e-12) {
    throw std::invalid_argument("hard_weight and soft_weight must be non-negative and sum to 1");
  }
  if (epochs == 0) throw std::invalid_argument("distillation epochs must be >= 1");
}

SoftLabelSet compute_soft_labels(const ClassifierModel& teacher, std::span<const Example> train,
                                 double temperature) {
  SoftLabelSet labels;
  labels.temperature = temperature;
  labels.soft.reserve(train.size());
  labels.hard.reserve(train.size());
  for (const Example& ex : train) {
    const ForwardTrace trace = forward(teacher, ex.embedded, Mode::eval);
    labels.soft.push_back(softmax_with_temperature(trace.logits, temperature));
    labels.hard.push_back(ex.label);
  }
  return labels;
}

Vector mixed_target(std::size_t hard, std::span<const double> soft, double hard_weight,
                    double soft_weight, std::size_t num_classes) {
  if (soft.size() != num_classes) throw std::invalid_argument("soft label has wrong length");
  Vector target = one_hot(hard, num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    target[c] = hard_weight * target[c] + soft_weight * soft[c];
  }
  return target;
}

ClassifierModel train_distilled(std::span<const Example> train, const SoftLabelSet& soft_labels,
                                const DistillationConfig& config, const ModelConfig& architecture,
                                std::uint64_t seed, std::vector<EpochLog>* log) {
  config.validate();
  if (soft_labels.temperature != config.temperature) {
    throw std::invalid_argument("soft labels were computed at T=" +
                                std::to_string(soft_labels.temperature) +
                                " but distillation runs at T=" + std::to_string(config.temperature));
  }
  if (soft_labels.soft.size() != train.size() || soft_labels.hard.size() != train.size()) {
    throw std::invalid_argument("soft label set does not cover the training set");
  }
  std::vector<Example> mixed;
  mixed.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (soft_labels.hard[i] != train[i].label) {
      throw std::invalid_argument("soft label set was computed for a different training set");
    }
    mixed.push_back(Example{train[i].embedded,
                            mixed_target(train[i].label, soft_labels.soft[i], config.hard_weight,
                                         config.soft_weight, architecture.num_classes),
                            train[i].label});
  }
  ModelConfig student_arch = architecture;
  student_arch.temperature = config.temperature;
  TrainResult trained =
      train_from_scratch(student_arch, mixed, TrainConfig{config.epochs, config.optimizer, seed});
  if (log) *log = std::move(trained.log);
  trained.model.temperature = 1.0;
  return std::move(trained.model);
}

DistillationOutcome distillation_pipeline(std::span<const Example> train,
                                          std::span<const Example> test,
                                          const ModelConfig& architecture,
                                          const DistillationConfig& config,
                                          std::uint64_t teacher_seed, std::uint64_t student_seed) {
  config.validate();
  ModelConfig teacher_arch = architecture;
  teacher_arch.temperature = 1.0;
  DistillationOutcome out;
  out.teacher =
      train_from_scratch(teacher_arch, train, TrainConfig{config.epochs, config.optimizer, teacher_seed})
          .model;
  const SoftLabelSet soft = compute_soft_labels(out.teacher, train, config.temperature);
  out.student = train_distilled(train, soft, config, teacher_arch, student_seed);
  out.report = DistillationReport{config.temperature, accuracy(out.teacher, test),
                                  accuracy(out.student, test)};
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void put_number(std::string& out, double value) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  out.append(buf.data(), ptr);
}

void put_row(std::string& out, std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ' ';
    put_number(out, values[i]);
  }
  out += '\n';
}

class LineReader {
 public:
  LineReader(const std::string& text, std::string origin) : in_(text), origin_(std::move(origin)) {}

  std::vector<std::string> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::istringstream words(line);
      std::vector<std::string> parts;
      for (std::string w; words >> w;) parts.push_back(w);
      if (!parts.empty()) return parts;
    }
    fail("unexpected end of file");
  }

  std::vector<std::string> expect(const std::string& key, std::size_t values) {
    auto parts = next();
    if (parts[0] != key || (values != kAny && parts.size() != values + 1)) {
      fail("expected '" + key + "'" +
           (values == kAny ? "" : " with " + std::to_string(values) + " value(s)"));
    }
    return parts;
  }

  double number(const std::string& s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
      fail("bad number '" + s + "'");
    }
    return v;
  }

  std::size_t count(const std::string& s) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail("bad count '" + s + "'");
    return v;
  }

  void row(std::span<double> out) {
    const auto parts = next();
    if (parts.size() != out.size()) {
      fail("expected " + std::to_string(out.size()) + " values, found " +
           std::to_string(parts.size()));
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = number(parts[i]);
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(origin_, line_, what); }

  static constexpr std::size_t kAny = static_cast<std::size_t>(-1);

 private:
  std::istringstream in_;
  std::string origin_;
  std::size_t line_ = 0;
};

}  // namespace

std::string serialize_model(const ClassifierModel& model) {
  model.validate();
  std::string out = "advtext-model\nformat_version " + std::to_string(kModelFormatVersion) + "\n";
  out += "embedding_dim " + std::to_string(model.embedding_dim) + "\n";
  out += "num_classes " + std::to_string(model.num_classes) + "\n";
  out += "kernel_widths";
  for (std::size_t w : model.kernel_widths) out += " " + std::to_string(w);
  out += "\nfilters_per_width " + std::to_string(model.filters_per_width) + "\n";
  out += "dropout_rate ";
  put_number(out, model.dropout_rate);
  out += "\ntemperature ";
  put_number(out, model.temperature);
  out += "\n";
  for (const ConvBlock& block : model.conv) {
    out += "conv " + std::to_string(block.width) + "\n";
    for (std::size_t r = 0; r < block.weights.rows(); ++r) put_row(out, block.weights.row(r));
    out += "bias ";
    put_row(out, block.bias);
  }
  out += "dense\n";
  for (std::size_t r = 0; r < model.dense_weights.rows(); ++r) put_row(out, model.dense_weights.row(r));
  out += "dense_bias ";
  put_row(out, model.dense_bias);
  out += "end\n";
  return out;
}

ClassifierModel parse_model(const std::string& text, const std::string& origin) {
  LineReader in(text, origin);
  if (in.next() != std::vector<std::string>{"advtext-model"}) in.fail("not an advtext model file");
  const auto version = in.expect("format_version", 1);
  if (in.count(version[1]) != static_cast<std::size_t>(kModelFormatVersion)) {
    in.fail("unsupported format_version " + version[1]);
  }
  ModelConfig config;
  config.embedding_dim = in.count(in.expect("embedding_dim", 1)[1]);
  config.num_classes = in.count(in.expect("num_classes", 1)[1]);
  const auto widths = in.expect("kernel_widths", LineReader::kAny);
  config.kernel_widths.clear();
  for (std::size_t i = 1; i < widths.size(); ++i) config.kernel_widths.push_back(in.count(widths[i]));
  config.filters_per_width = in.count(in.expect("filters_per_width", 1)[1]);
  config.dropout_rate = in.number(in.expect("dropout_rate", 1)[1]);
  config.temperature = in.number(in.expect("temperature", 1)[1]);

  ClassifierModel model;
  try {
    model = ClassifierModel::zeros(config);
  } catch (const std::invalid_argument& e) {
    in.fail(std::string("invalid architecture: ") + e.what());
  }
  for (ConvBlock& block : model.conv) {
    if (in.count(in.expect("conv", 1)[1]) != block.width) in.fail("conv section width mismatch");
    for (std::size_t r = 0; r < block.weights.rows(); ++r) in.row(block.weights.row(r));
    const auto bias = in.expect("bias", block.bias.size());
    for (std::size_t f = 0; f < block.bias.size(); ++f) block.bias[f] = in.number(bias[f + 1]);
  }
  in.expect("dense", 0);
  for (std::size_t r = 0; r < model.dense_weights.rows(); ++r) in.row(model.dense_weights.row(r));
  const auto bias = in.expect("dense_bias", model.dense_bias.size());
  for (std::size_t c = 0; c < model.dense_bias.size(); ++c) model.dense_bias[c] = in.number(bias[c + 1]);
  in.expect("end", 0);
  return model;
}

void save_model(const ClassifierModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize_model(model);
}

ClassifierModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_model(buffer.str(), path.string());
}

}  // namespace advtext

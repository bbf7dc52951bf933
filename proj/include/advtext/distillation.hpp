#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "advtext/classifier.hpp"

namespace advtext {

struct SoftLabelSet {
  std::vector<Vector> soft;        // one distribution per training example
  std::vector<std::size_t> hard;   // original labels
  double temperature = 1.0;
};

struct DistillationConfig {
  double temperature = 20.0;
  double hard_weight = 0.10;
  double soft_weight = 0.90;
  std::size_t epochs = 10;
  OptimizerConfig optimizer;

  void validate() const;
};

// Teacher eval-mode logits softened at `temperature`.
SoftLabelSet compute_soft_labels(const ClassifierModel& teacher, std::span<const Example> train,
                                 double temperature);

// hard_weight * one_hot(hard) + soft_weight * soft. Cross-entropy is linear in
// its target, so training against this equals the weighted mix of the two losses.
Vector mixed_target(std::size_t hard, std::span<const double> soft, double hard_weight,
                    double soft_weight, std::size_t num_classes);

// Fresh student of the given architecture, trained at config.temperature on
// the mixed loss and returned with its temperature reset to 1.
ClassifierModel train_distilled(std::span<const Example> train, const SoftLabelSet& soft_labels,
                                const DistillationConfig& config, const ModelConfig& architecture,
                                std::uint64_t seed, std::vector<EpochLog>* log = nullptr);

struct DistillationReport {
  double temperature = 0.0;
  double teacher_accuracy = 0.0;
  double student_accuracy = 0.0;
};

struct DistillationOutcome {
  ClassifierModel teacher;
  ClassifierModel student;
  DistillationReport report;
};

// Teacher trained at T = 1, soft labels at config.temperature, student
// trained on the same training set; both evaluated on `test` at T = 1.
DistillationOutcome distillation_pipeline(std::span<const Example> train,
                                          std::span<const Example> test,
                                          const ModelConfig& architecture,
                                          const DistillationConfig& config,
                                          std::uint64_t teacher_seed, std::uint64_t student_seed);

// ---------------------------------------------------------------------------
// Model files
//
//   advtext-model
//   format_version 1
//   embedding_dim <d>
//   num_classes <c>
//   kernel_widths <w1> <w2> ...
//   filters_per_width <f>
//   dropout_rate <p>
//   temperature <T>
//   conv <width>            (one section per width, in kernel_widths order)
//   <width*d lines of f weights>   row k*d + j = offset k, coordinate j
//   bias <f values>
//   dense
//   <pooled_width lines of num_classes weights>
//   dense_bias <c values>
//   end
//
// Numbers are shortest round-trip decimal representations, so save/load is
// an identity.

inline constexpr int kModelFormatVersion = 1;

std::string serialize_model(const ClassifierModel& model);
ClassifierModel parse_model(const std::string& text, const std::string& origin = "<model>");
void save_model(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_model(const std::filesystem::path& path);

}  // namespace advtext

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advtext/attack.hpp"
#include "advtext/candidate_pool.hpp"
#include "advtext/classifier.hpp"
#include "advtext/distillation.hpp"
#include "advtext/text_pipeline.hpp"

namespace advtext {

struct ChangeSummary {
  double mean = 0.0;
  std::size_t median = 0;  // lower middle for even counts
  std::size_t mode = 0;    // smallest of the most frequent values

  friend bool operator==(const ChangeSummary&, const ChangeSummary&) = default;
};

ChangeSummary summarize_changes(std::span<const std::size_t> changes);

struct CampaignReport {
  std::string dataset;
  std::optional<double> temperature;  // nullopt: model trained without distillation
  std::size_t test_documents = 0;
  std::size_t attempted = 0;          // correctly classified documents
  std::size_t successes = 0;
  double success_rate = 0.0;
  std::optional<ChangeSummary> changes;           // over successful attacks only
  std::optional<double> mean_length_successful;   // tokens in the originals
  std::map<std::size_t, std::size_t> change_histogram;
};

struct Campaign {
  CampaignReport report;
  std::vector<AttackResult> results;  // one per attempted document, test order
};

// Attacks every test document the model classifies correctly. Documents are
// independent, so `threads` > 1 spreads them over workers without changing
// the result.
Campaign run_campaign(const ClassifierModel& model, std::span<const Document> test,
                      const CandidatePool& pool, const EmbeddingTable& table,
                      std::size_t max_rounds, std::string dataset = {},
                      std::optional<double> temperature = std::nullopt, std::size_t threads = 1);

struct TransferOutcome {
  std::size_t source_total = 0;   // successful source attacks offered
  std::size_t number_tested = 0;  // ... whose clean original the target gets right
  std::size_t successes = 0;      // ... whose adversarial version the target gets wrong
  double success_rate = 0.0;

  friend bool operator==(const TransferOutcome&, const TransferOutcome&) = default;
};

TransferOutcome run_transfer(std::span<const AttackResult> source_results,
                             const ClassifierModel& target_model, const EmbeddingTable& table);

struct TransferReport {
  std::string dataset;
  double temperature = 0.0;
  TransferOutcome distilled;
  TransferOutcome baseline;  // same examples against the retrained undistilled model
};

// Documents that embed to at least one row, as training examples with
// one-hot targets. `dropped` receives the number of unusable documents.
std::vector<Example> make_examples(std::span<const Document> docs, const EmbeddingTable& table,
                                   std::size_t num_classes, std::size_t* dropped = nullptr);

struct ProtocolConfig {
  std::string dataset = "amazon";
  ModelConfig architecture;
  std::size_t epochs = 10;
  OptimizerConfig optimizer;
  std::vector<double> temperatures{10.0, 20.0, 30.0, 40.0};
  double hard_weight = 0.10;
  double soft_weight = 0.90;
  std::size_t max_rounds = kDefaultMaxRounds;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct ModelSummary {
  std::string name;
  std::optional<double> temperature;
  std::uint64_t seed = 0;
  double test_accuracy = 0.0;
  std::vector<EpochLog> log;
  ClassifierModel model;
};

struct ProtocolResult {
  ProtocolConfig config;
  std::vector<std::string> class_names;
  std::size_t train_documents = 0;
  std::size_t test_documents = 0;
  std::size_t dropped_train = 0;

  ModelSummary base;
  std::optional<ModelSummary> retrained;  // only when temperatures are given
  std::vector<ModelSummary> distilled;    // one per temperature, same order

  Campaign base_campaign;
  std::vector<Campaign> distilled_campaigns;
  std::vector<TransferReport> transfers;
};

// Base model, one distilled model per temperature (base as teacher), a
// campaign on each, and transfer of the base model's adversarial examples
// to every distilled model and to a retrained undistilled model.
ProtocolResult run_full_protocol(const DatasetSplit& split, const EmbeddingTable& table,
                                 const CandidatePool& pool, const ProtocolConfig& config);

}  // namespace advtext

#include "advtext/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <thread>

namespace advtext {

ChangeSummary summarize_changes(std::span<const std::size_t> changes) {
  if (changes.empty()) throw std::invalid_argument("summarize_changes: empty list");
  std::vector<std::size_t> sorted(changes.begin(), changes.end());
  std::sort(sorted.begin(), sorted.end());

  std::size_t total = 0;
  for (std::size_t c : sorted) total += c;

  ChangeSummary summary;
  summary.mean = static_cast<double>(total) / static_cast<double>(sorted.size());
  summary.median = sorted[(sorted.size() - 1) / 2];

  std::size_t best_count = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    if (j - i > best_count) {
      best_count = j - i;
      summary.mode = sorted[i];
    }
    i = j;
  }
  return summary;
}

Campaign run_campaign(const ClassifierModel& model, std::span<const Document> test,
                      const CandidatePool& pool, const EmbeddingTable& table,
                      std::size_t max_rounds, std::string dataset,
                      std::optional<double> temperature, std::size_t threads) {
  std::vector<const Document*> eligible;
  for (const Document& doc : test) {
    std::optional<EmbeddedDocument> embedded;
    try {
      embedded = embed(doc, table);
    } catch (const std::invalid_argument&) {
      continue;
    }
    if (predict(model, embedded->matrix) == doc.label) eligible.push_back(&doc);
  }
  if (eligible.empty()) {
    throw std::runtime_error("run_campaign: the model classifies no test document correctly");
  }

  Campaign campaign;
  campaign.results.resize(eligible.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < eligible.size(); i = next++) {
      campaign.results[i] = attack(model, *eligible[i], pool, table, max_rounds);
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, eligible.size());
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool_threads;
    for (std::size_t t = 0; t < workers; ++t) pool_threads.emplace_back(worker);
  }

  CampaignReport& report = campaign.report;
  report.dataset = std::move(dataset);
  report.temperature = temperature;
  report.test_documents = test.size();
  report.attempted = eligible.size();
  std::vector<std::size_t> changes;
  std::size_t length_total = 0;
  for (const AttackResult& r : campaign.results) {
    if (!r.success) continue;
    changes.push_back(r.num_changes);
    length_total += r.original_document.tokens.size();
    ++report.change_histogram[r.num_changes];
  }
  report.successes = changes.size();
  report.success_rate =
      static_cast<double>(report.successes) / static_cast<double>(report.attempted);
  if (!changes.empty()) {
    report.changes = summarize_changes(changes);
    report.mean_length_successful =
        static_cast<double>(length_total) / static_cast<double>(changes.size());
  }
  return campaign;
}

namespace {

std::optional<std::size_t> prediction_for(const ClassifierModel& model, const Document& doc,
                                          const EmbeddingTable& table) {
  try {
    return predict(model, embed(doc, table).matrix);
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

}  // namespace

TransferOutcome run_transfer(std::span<const AttackResult> source_results,
                             const ClassifierModel& target_model, const EmbeddingTable& table) {
  TransferOutcome out;
  for (const AttackResult& r : source_results) {
    if (!r.success) continue;
    ++out.source_total;
    if (prediction_for(target_model, r.original_document, table) != r.original_class) continue;
    ++out.number_tested;
    const auto adversarial = prediction_for(target_model, r.final_document, table);
    if (adversarial && *adversarial != r.original_class) ++out.successes;
  }
  if (out.number_tested == 0) {
    throw std::runtime_error(
        "run_transfer: the target model classifies none of the clean originals correctly");
  }
  out.success_rate = static_cast<double>(out.successes) / static_cast<double>(out.number_tested);
  return out;
}

std::vector<Example> make_examples(std::span<const Document> docs, const EmbeddingTable& table,
                                   std::size_t num_classes, std::size_t* dropped) {
  std::vector<Example> examples;
  examples.reserve(docs.size());
  std::size_t skipped = 0;
  for (const Document& doc : docs) {
    try {
      examples.push_back(
          Example{embed(doc, table).matrix, one_hot(doc.label, num_classes), doc.label});
    } catch (const std::invalid_argument&) {
      ++skipped;
    }
  }
  if (dropped) *dropped = skipped;
  return examples;
}

ProtocolResult run_full_protocol(const DatasetSplit& split, const EmbeddingTable& table,
                                 const CandidatePool& pool, const ProtocolConfig& config) {
  ProtocolResult result;
  result.config = config;
  result.class_names = split.class_names;
  ModelConfig arch = config.architecture;
  arch.num_classes = split.class_names.size();
  arch.embedding_dim = table.dim();
  arch.temperature = 1.0;
  result.config.architecture = arch;

  const std::vector<Example> train = make_examples(split.train, table, arch.num_classes,
                                                   &result.dropped_train);
  const std::vector<Example> test = make_examples(split.test, table, arch.num_classes);
  result.train_documents = train.size();
  result.test_documents = split.test.size();
  if (train.empty()) throw std::runtime_error("run_full_protocol: no embeddable training document");

  const auto train_model = [&](std::string name, std::uint64_t seed) {
    TrainResult trained =
        train_from_scratch(arch, train, TrainConfig{config.epochs, config.optimizer, seed});
    ModelSummary summary;
    summary.name = std::move(name);
    summary.seed = seed;
    summary.test_accuracy = accuracy(trained.model, test);
    summary.log = std::move(trained.log);
    summary.model = std::move(trained.model);
    return summary;
  };

  result.base = train_model("base", config.seed);
  result.base_campaign = run_campaign(result.base.model, split.test, pool, table, config.max_rounds,
                                      config.dataset, std::nullopt, config.threads);
  if (config.temperatures.empty()) return result;

  result.retrained = train_model("retrained", config.seed + 1);
  const TransferOutcome baseline =
      run_transfer(result.base_campaign.results, result.retrained->model, table);

  for (std::size_t k = 0; k < config.temperatures.size(); ++k) {
    const double temperature = config.temperatures[k];
    DistillationConfig dc;
    dc.temperature = temperature;
    dc.hard_weight = config.hard_weight;
    dc.soft_weight = config.soft_weight;
    dc.epochs = config.epochs;
    dc.optimizer = config.optimizer;
    const SoftLabelSet soft = compute_soft_labels(result.base.model, train, temperature);

    ModelSummary summary;
    summary.name = "distilled";
    summary.temperature = temperature;
    summary.seed = config.seed + 100 + k;
    summary.model = train_distilled(train, soft, dc, arch, summary.seed, &summary.log);
    summary.test_accuracy = accuracy(summary.model, test);

    result.distilled_campaigns.push_back(run_campaign(summary.model, split.test, pool, table,
                                                      config.max_rounds, config.dataset,
                                                      temperature, config.threads));
    result.transfers.push_back(TransferReport{
        config.dataset, temperature,
        run_transfer(result.base_campaign.results, summary.model, table), baseline});
    result.distilled.push_back(std::move(summary));
  }
  return result;
}

}  // namespace advtext

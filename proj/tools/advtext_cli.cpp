// advtext: train, distill, attack and evaluate small convolutional text
// classifiers from the command line.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "advtext/attack.hpp"
#include "advtext/candidate_pool.hpp"
#include "advtext/classifier.hpp"
#include "advtext/distillation.hpp"
#include "advtext/experiments.hpp"
#include "advtext/report_io.hpp"
#include "advtext/text_pipeline.hpp"

namespace fs = std::filesystem;
using namespace advtext;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Options {
  std::string dataset = "amazon";
  std::string data;
  std::string embeddings;
  std::string synonyms;
  std::string typos;
  std::string pos_lexicon;
  std::string model;
  std::string attacks;
  std::string out;
  double temperature = 20.0;
  std::string temperatures = "10,20,30,40";
  std::size_t epochs = 10;
  std::size_t max_rounds = kDefaultMaxRounds;
  std::uint64_t seed = 0;
  std::size_t per_class_train = 0;  // 0: dataset default
  std::size_t per_class_test = 0;
  std::size_t filters = 100;
  double dropout = 0.5;
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
  std::string oov = "skip";
  std::size_t threads = 1;
};

std::vector<double> parse_temperatures(const std::string& csv) {
  std::vector<double> out;
  std::stringstream in(csv);
  for (std::string item; std::getline(in, item, ',');) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const double t = std::stod(item, &used);
    if (used != item.size() || !(t > 0.0)) {
      throw CLI::ValidationError("--temperatures", "bad temperature '" + item + "'");
    }
    out.push_back(t);
  }
  return out;
}

PosLexicon lexicon_of(const Options& o) {
  return o.pos_lexicon.empty() ? PosLexicon{} : PosLexicon::load(o.pos_lexicon);
}

DatasetSplit load_split(const Options& o, const PosLexicon& lexicon) {
  if (o.dataset == "ag") {
    return load_ag(o.data, lexicon, o.per_class_train ? o.per_class_train : 4000,
                   o.per_class_test ? o.per_class_test : 400);
  }
  return load_amazon(o.data, lexicon, o.per_class_train ? o.per_class_train : 2000,
                     o.per_class_test ? o.per_class_test : 200);
}

EmbeddingTable table_of(const Options& o) {
  const EmbeddingTable table =
      EmbeddingTable::load(o.embeddings, o.oov == "hash" ? OovPolicy::hash : OovPolicy::skip);
  if (table.duplicate_count() > 0) {
    std::cerr << "warning: " << table.duplicate_count()
              << " duplicate embedding token(s); last occurrence kept\n";
  }
  return table;
}

ModelConfig architecture_of(const Options& o, const DatasetSplit& split, const EmbeddingTable& t) {
  ModelConfig config;
  config.filters_per_width = o.filters;
  config.dropout_rate = o.dropout;
  config.embedding_dim = t.dim();
  config.num_classes = split.class_names.size();
  return config;
}

OptimizerConfig optimizer_of(const Options& o) {
  OptimizerConfig config;
  config.learning_rate = o.learning_rate;
  config.batch_size = o.batch_size;
  return config;
}

CandidatePool pool_of(const Options& o, const DatasetSplit& split, const PosLexicon& lexicon) {
  const WordListFile synonyms = o.synonyms.empty() ? WordListFile{} : load_word_list(o.synonyms);
  const WordListFile typos = o.typos.empty() ? WordListFile{} : load_word_list(o.typos);
  return build_pool(synonyms, typos, extract_class_keywords(split.train, split.class_names.size()),
                    lexicon);
}

Json config_echo(const Options& o, const std::string& command) {
  return Json{{"command", command},
              {"version", kVersion},
              {"dataset", o.dataset},
              {"data", o.data},
              {"embeddings", o.embeddings},
              {"synonyms", o.synonyms},
              {"typos", o.typos},
              {"pos_lexicon", o.pos_lexicon},
              {"model", o.model},
              {"temperature", o.temperature},
              {"temperatures", parse_temperatures(o.temperatures)},
              {"epochs", o.epochs},
              {"max_rounds", o.max_rounds},
              {"seed", o.seed},
              {"per_class_train", o.per_class_train},
              {"per_class_test", o.per_class_test},
              {"filters", o.filters},
              {"dropout", o.dropout},
              {"learning_rate", o.learning_rate},
              {"batch_size", o.batch_size},
              {"oov", o.oov}};
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw CLI::RequiredError(flag);
}

fs::path out_dir(const Options& o) {
  require(o.out, "--out");
  fs::create_directories(o.out);
  return o.out;
}

int run_train(const Options& o) {
  require(o.data, "--data");
  require(o.embeddings, "--embeddings");
  require(o.model, "--model");
  const PosLexicon lexicon = lexicon_of(o);
  const DatasetSplit split = load_split(o, lexicon);
  const EmbeddingTable table = table_of(o);
  const ModelConfig arch = architecture_of(o, split, table);
  std::size_t dropped = 0;
  const auto train = make_examples(split.train, table, arch.num_classes, &dropped);
  const auto test = make_examples(split.test, table, arch.num_classes);
  TrainResult trained = train_from_scratch(arch, train, TrainConfig{o.epochs, optimizer_of(o), o.seed});
  if (const fs::path parent = fs::path(o.model).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  save_model(trained.model, o.model);
  const double acc = accuracy(trained.model, test);
  for (const EpochLog& e : trained.log) {
    std::cout << "epoch " << e.epoch << " loss " << format_number(e.mean_loss) << " train_acc "
              << format_number(e.accuracy) << "\n";
  }
  std::cout << "test accuracy " << format_number(acc) << "\n";
  if (!o.out.empty()) {
    Json log = Json::array();
    for (const EpochLog& e : trained.log) {
      log.push_back(Json{{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"train_accuracy", e.accuracy}});
    }
    const Json report{{"format", kReportFormat}, {"version", kReportVersion},
                      {"config", config_echo(o, "train")}, {"train_documents", train.size()},
                      {"dropped_train_documents", dropped}, {"test_accuracy", acc},
                      {"training_log", log}};
    write_text_file(out_dir(o) / "train_report.json", report.dump(2) + "\n");
  }
  return 0;
}

int run_distill(const Options& o) {
  require(o.data, "--data");
  require(o.embeddings, "--embeddings");
  const fs::path out = out_dir(o);
  const PosLexicon lexicon = lexicon_of(o);
  const DatasetSplit split = load_split(o, lexicon);
  const EmbeddingTable table = table_of(o);
  const ModelConfig arch = architecture_of(o, split, table);
  const auto train = make_examples(split.train, table, arch.num_classes);
  const auto test = make_examples(split.test, table, arch.num_classes);

  DistillationConfig config;
  config.temperature = o.temperature;
  config.epochs = o.epochs;
  config.optimizer = optimizer_of(o);
  const ClassifierModel teacher =
      o.model.empty()
          ? train_from_scratch(arch, train, TrainConfig{o.epochs, config.optimizer, o.seed}).model
          : load_model(o.model);
  const SoftLabelSet soft = compute_soft_labels(teacher, train, config.temperature);
  const ClassifierModel student = train_distilled(train, soft, config, arch, o.seed + 100);
  save_model(teacher, out / "teacher.model");
  save_model(student, out / "student.model");

  const double teacher_acc = accuracy(teacher, test);
  const double student_acc = accuracy(student, test);
  const Json report{{"format", kReportFormat}, {"version", kReportVersion},
                    {"config", config_echo(o, "distill")}, {"temperature", config.temperature},
                    {"teacher_accuracy", teacher_acc}, {"student_accuracy", student_acc}};
  write_text_file(out / "distillation.json", report.dump(2) + "\n");
  write_text_file(out / "table1_accuracy.csv",
                  "dataset,T=" + format_number(config.temperature) + ",w/o distillation\n" +
                      o.dataset + "," + format_number(student_acc) + "," +
                      format_number(teacher_acc) + "\n");
  std::cout << "teacher accuracy " << format_number(teacher_acc) << "\nstudent accuracy (T="
            << format_number(config.temperature) << ") " << format_number(student_acc) << "\n";
  return 0;
}

int run_attack(const Options& o) {
  require(o.data, "--data");
  require(o.embeddings, "--embeddings");
  require(o.model, "--model");
  const fs::path out = out_dir(o);
  const PosLexicon lexicon = lexicon_of(o);
  const DatasetSplit split = load_split(o, lexicon);
  const EmbeddingTable table = table_of(o);
  const CandidatePool pool = pool_of(o, split, lexicon);
  const ClassifierModel model = load_model(o.model);
  const Campaign campaign =
      run_campaign(model, split.test, pool, table, o.max_rounds, o.dataset, std::nullopt, o.threads);
  const Json report{{"format", kReportFormat}, {"version", kReportVersion},
                    {"config", config_echo(o, "attack")}, {"campaign", to_json(campaign.report)}};
  write_text_file(out / "report.json", report.dump(2) + "\n");
  write_attack_results(out / "attacks.jsonl", campaign.results);
  write_histogram_csv(out / "changes.csv", campaign.report.change_histogram);
  std::cout << "attempted " << campaign.report.attempted << " successes "
            << campaign.report.successes << " success_rate "
            << format_number(campaign.report.success_rate) << "\n";
  return 0;
}

int run_transfer_command(const Options& o) {
  require(o.embeddings, "--embeddings");
  require(o.model, "--model");
  require(o.attacks, "--attacks");
  const fs::path out = out_dir(o);
  const EmbeddingTable table = table_of(o);
  const ClassifierModel target = load_model(o.model);
  const std::vector<AttackResult> source = read_attack_results(o.attacks);
  const TransferOutcome outcome = run_transfer(source, target, table);
  const Json report{{"format", kReportFormat}, {"version", kReportVersion},
                    {"config", config_echo(o, "transfer")}, {"attacks", o.attacks},
                    {"transfer", to_json(outcome)}};
  write_text_file(out / "transfer.json", report.dump(2) + "\n");
  std::cout << "source_total " << outcome.source_total << " number_tested "
            << outcome.number_tested << " success_rate " << format_number(outcome.success_rate)
            << "\n";
  return 0;
}

int run_protocol(const Options& o) {
  require(o.data, "--data");
  require(o.embeddings, "--embeddings");
  const fs::path out = out_dir(o);
  const PosLexicon lexicon = lexicon_of(o);
  const DatasetSplit split = load_split(o, lexicon);
  const EmbeddingTable table = table_of(o);
  const CandidatePool pool = pool_of(o, split, lexicon);

  ProtocolConfig config;
  config.dataset = o.dataset;
  config.architecture = architecture_of(o, split, table);
  config.epochs = o.epochs;
  config.optimizer = optimizer_of(o);
  config.temperatures = parse_temperatures(o.temperatures);
  config.max_rounds = o.max_rounds;
  config.seed = o.seed;
  config.threads = o.threads;
  const ProtocolResult result = run_full_protocol(split, table, pool, config);
  write_protocol_outputs(result, out, config_echo(o, "protocol"));

  std::cout << "base accuracy " << format_number(result.base.test_accuracy)
            << " attack success " << format_number(result.base_campaign.report.success_rate)
            << "\n";
  for (std::size_t k = 0; k < result.distilled.size(); ++k) {
    std::cout << "T=" << format_number(config.temperatures[k]) << " accuracy "
              << format_number(result.distilled[k].test_accuracy) << " attack success "
              << format_number(result.distilled_campaigns[k].report.success_rate)
              << " transfer " << format_number(result.transfers[k].distilled.success_rate)
              << " (baseline " << format_number(result.transfers[k].baseline.success_rate)
              << ")\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial text examples against defensively distilled CNN classifiers"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Options o;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--dataset", o.dataset, "Dataset format")
        ->check(CLI::IsMember({"ag", "amazon"}));
    cmd->add_option("--data", o.data, "Dataset file");
    cmd->add_option("--embeddings", o.embeddings, "Embedding file (\"<count> <dim>\" header)");
    cmd->add_option("--pos-lexicon", o.pos_lexicon, "POS lexicon TSV");
    cmd->add_option("--seed", o.seed, "Random seed");
    cmd->add_option("--per-class-train", o.per_class_train,
                    "Training documents per class (default 4000 ag / 2000 amazon)");
    cmd->add_option("--per-class-test", o.per_class_test,
                    "Test documents per class (default 400 ag / 200 amazon)");
    cmd->add_option("--oov", o.oov, "Out-of-vocabulary policy")
        ->check(CLI::IsMember({"skip", "hash"}));
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--model", o.model, "Model file");
  };
  const auto add_training = [&](CLI::App* cmd) {
    cmd->add_option("--epochs", o.epochs, "Training epochs")->check(CLI::PositiveNumber);
    cmd->add_option("--filters", o.filters, "Filters per kernel width")->check(CLI::PositiveNumber);
    cmd->add_option("--dropout", o.dropout, "Dropout rate")->check(CLI::Range(0.0, 0.999));
    cmd->add_option("--learning-rate", o.learning_rate, "Adam learning rate");
    cmd->add_option("--batch-size", o.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
  };
  const auto add_attack = [&](CLI::App* cmd) {
    cmd->add_option("--synonyms", o.synonyms, "Synonym list TSV");
    cmd->add_option("--typos", o.typos, "Typo list TSV");
    cmd->add_option("--max-rounds", o.max_rounds, "Maximum edits per attack")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--threads", o.threads, "Worker threads for campaigns")
        ->check(CLI::PositiveNumber);
  };

  CLI::App* train = app.add_subcommand("train", "Train an undistilled classifier");
  add_common(train);
  add_training(train);
  CLI::App* distill = app.add_subcommand("distill", "Train a defensively distilled student");
  add_common(distill);
  add_training(distill);
  distill->add_option("--temperature", o.temperature, "Distillation temperature")
      ->check(CLI::PositiveNumber);
  CLI::App* attack_cmd = app.add_subcommand("attack", "Run an attack campaign on the test split");
  add_common(attack_cmd);
  add_attack(attack_cmd);
  CLI::App* transfer = app.add_subcommand("transfer", "Evaluate transferability to a target model");
  add_common(transfer);
  transfer->add_option("--attacks", o.attacks, "Attack result file (JSON Lines)");
  CLI::App* protocol = app.add_subcommand("protocol", "Run the full distillation experiment");
  add_common(protocol);
  add_training(protocol);
  add_attack(protocol);
  protocol->add_option("--temperatures", o.temperatures, "Comma-separated temperatures");

  CLI11_PARSE(app, argc, argv);
  try {
    if (train->parsed()) return run_train(o);
    if (distill->parsed()) return run_distill(o);
    if (attack_cmd->parsed()) return run_attack(o);
    if (transfer->parsed()) return run_transfer_command(o);
    if (protocol->parsed()) return run_protocol(o);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

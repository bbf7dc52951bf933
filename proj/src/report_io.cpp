#include "advtext/report_io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace advtext {

std::string format_number(double value) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

namespace {

Json tokens_json(const std::vector<Token>& tokens) {
  Json arr = Json::array();
  for (const Token& t : tokens) {
    arr.push_back(Json{{"surface", t.surface}, {"pos", std::string(to_string(t.pos))}});
  }
  return arr;
}

std::vector<Token> tokens_from_json(const Json& arr) {
  std::vector<Token> tokens;
  for (const Json& t : arr) {
    const auto pos = parse_pos_tag(t.at("pos").get<std::string>());
    if (!pos) throw std::runtime_error("unknown POS tag in attack record");
    tokens.push_back(Token{t.at("surface").get<std::string>(), *pos});
  }
  return tokens;
}

Json temperature_json(const std::optional<double>& t) {
  return t ? Json(*t) : Json("none");
}

std::string temperature_label(double t) { return "T" + format_number(t); }

Json histogram_json(const std::map<std::size_t, std::size_t>& histogram) {
  Json arr = Json::array();
  for (const auto& [changes, count] : histogram) {
    arr.push_back(Json{{"num_changes", changes}, {"count", count}});
  }
  return arr;
}

Json log_json(const std::vector<EpochLog>& log) {
  Json arr = Json::array();
  for (const EpochLog& e : log) {
    arr.push_back(Json{{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"train_accuracy", e.accuracy}});
  }
  return arr;
}

Json model_json(const ModelSummary& m) {
  return Json{{"name", m.name},
              {"temperature", temperature_json(m.temperature)},
              {"seed", m.seed},
              {"test_accuracy", m.test_accuracy},
              {"training_log", log_json(m.log)}};
}

std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

}  // namespace

Json to_json(const Document& doc) {
  return Json{{"source_id", doc.source_id}, {"label", doc.label}, {"tokens", tokens_json(doc.tokens)}};
}

Json to_json(const AttackResult& r) {
  Json edits = Json::array();
  for (const EditOp& e : r.edits) {
    Json op{{"kind", std::string(to_string(e.kind))}, {"position", e.position}};
    op["new_word"] = e.new_word ? Json{{"surface", e.new_word->surface},
                                       {"pos", std::string(to_string(e.new_word->pos))}}
                                : Json(nullptr);
    op["source"] = e.source ? Json(std::string(to_string(*e.source))) : Json(nullptr);
    edits.push_back(std::move(op));
  }
  return Json{{"source_id", r.original_document.source_id},
              {"original_class", r.original_class},
              {"final_class", r.final_class},
              {"success", r.success},
              {"num_changes", r.num_changes},
              {"original_tokens", tokens_json(r.original_document.tokens)},
              {"edits", std::move(edits)},
              {"final_tokens", tokens_json(r.final_document.tokens)},
              {"true_class_probability", r.true_class_probability}};
}

AttackResult attack_result_from_json(const Json& j) {
  AttackResult r;
  r.original_class = j.at("original_class").get<std::size_t>();
  r.final_class = j.at("final_class").get<std::size_t>();
  r.success = j.at("success").get<bool>();
  r.num_changes = j.at("num_changes").get<std::size_t>();
  const std::string source_id = j.at("source_id").get<std::string>();
  r.original_document = Document{tokens_from_json(j.at("original_tokens")), r.original_class, source_id};
  r.final_document = Document{tokens_from_json(j.at("final_tokens")), r.original_class, source_id};
  for (const Json& e : j.at("edits")) {
    EditOp op;
    const auto kind = parse_edit_kind(e.at("kind").get<std::string>());
    if (!kind) throw std::runtime_error("unknown edit kind in attack record");
    op.kind = *kind;
    op.position = e.at("position").get<std::size_t>();
    if (!e.at("new_word").is_null()) {
      const auto pos = parse_pos_tag(e["new_word"].at("pos").get<std::string>());
      if (!pos) throw std::runtime_error("unknown POS tag in attack record");
      op.new_word = Token{e["new_word"].at("surface").get<std::string>(), *pos};
    }
    if (!e.at("source").is_null()) op.source = parse_candidate_source(e["source"].get<std::string>());
    r.edits.push_back(std::move(op));
  }
  if (j.contains("true_class_probability")) {
    r.true_class_probability = j["true_class_probability"].get<std::vector<double>>();
  }
  if (r.num_changes != r.edits.size()) throw std::runtime_error("num_changes != number of edits");
  return r;
}

Json to_json(const CampaignReport& report) {
  Json j{{"dataset", report.dataset},
         {"temperature", temperature_json(report.temperature)},
         {"test_documents", report.test_documents},
         {"attempted", report.attempted},
         {"successes", report.successes},
         {"success_rate", report.success_rate}};
  if (report.changes) {
    j["mean_changes"] = report.changes->mean;
    j["median_changes"] = report.changes->median;
    j["mode_changes"] = report.changes->mode;
  } else {
    j["mean_changes"] = nullptr;
    j["median_changes"] = nullptr;
    j["mode_changes"] = nullptr;
  }
  j["mean_length_successful"] =
      report.mean_length_successful ? Json(*report.mean_length_successful) : Json(nullptr);
  j["change_histogram"] = histogram_json(report.change_histogram);
  return j;
}

Json to_json(const TransferOutcome& o) {
  return Json{{"source_total", o.source_total},
              {"number_tested", o.number_tested},
              {"successes", o.successes},
              {"success_rate", o.success_rate}};
}

Json to_json(const TransferReport& r) {
  return Json{{"dataset", r.dataset},
              {"temperature", r.temperature},
              {"source_total", r.distilled.source_total},
              {"number_tested", r.distilled.number_tested},
              {"success_rate", r.distilled.success_rate},
              {"baseline_number_tested", r.baseline.number_tested},
              {"baseline_success_rate", r.baseline.success_rate},
              {"distilled", to_json(r.distilled)},
              {"baseline", to_json(r.baseline)}};
}

void write_attack_results(const std::filesystem::path& path, std::span<const AttackResult> results) {
  std::string out;
  for (const AttackResult& r : results) {
    out += to_json(r).dump();
    out += '\n';
  }
  write_text_file(path, out);
}

std::vector<AttackResult> read_attack_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<AttackResult> results;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      results.push_back(attack_result_from_json(Json::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return results;
}

void write_histogram_csv(const std::filesystem::path& path,
                         const std::map<std::size_t, std::size_t>& histogram) {
  std::string out = "num_changes,count\n";
  for (const auto& [changes, count] : histogram) {
    out += std::to_string(changes) + "," + std::to_string(count) + "\n";
  }
  write_text_file(path, out);
}

void write_protocol_outputs(const ProtocolResult& result, const std::filesystem::path& out_dir,
                            const Json& config_echo) {
  std::filesystem::create_directories(out_dir);
  const ProtocolConfig& config = result.config;

  Json report{{"format", kReportFormat}, {"version", kReportVersion}, {"config", config_echo}};
  report["data"] = Json{{"dataset", config.dataset},
                        {"class_names", result.class_names},
                        {"train_documents", result.train_documents},
                        {"dropped_train_documents", result.dropped_train},
                        {"test_documents", result.test_documents}};
  Json models = Json::array();
  models.push_back(model_json(result.base));
  if (result.retrained) models.push_back(model_json(*result.retrained));
  for (const ModelSummary& m : result.distilled) models.push_back(model_json(m));
  report["models"] = std::move(models);

  Json campaigns = Json::array();
  campaigns.push_back(to_json(result.base_campaign.report));
  for (const Campaign& c : result.distilled_campaigns) campaigns.push_back(to_json(c.report));
  report["campaigns"] = std::move(campaigns);

  if (!result.transfers.empty()) {
    Json transfers = Json::array();
    for (const TransferReport& t : result.transfers) transfers.push_back(to_json(t));
    report["transfer"] = std::move(transfers);
  }
  write_text_file(out_dir / "report.json", report.dump(2) + "\n");

  // table1: accuracies, table2: attack success rates.
  std::string header = "dataset";
  for (double t : config.temperatures) header += ",T=" + format_number(t);
  header += ",w/o distillation\n";
  std::string accuracy_row = config.dataset;
  std::string success_row = config.dataset;
  for (std::size_t k = 0; k < result.distilled.size(); ++k) {
    accuracy_row += "," + format_number(result.distilled[k].test_accuracy);
    success_row += "," + format_number(result.distilled_campaigns[k].report.success_rate);
  }
  accuracy_row += "," + format_number(result.base.test_accuracy) + "\n";
  success_row += "," + format_number(result.base_campaign.report.success_rate) + "\n";
  write_text_file(out_dir / "table1_accuracy.csv", header + accuracy_row);
  write_text_file(out_dir / "table2_success_rate.csv", header + success_row);

  // table3: change statistics, distilled next to undistilled.
  const auto stats = [](const CampaignReport& r) {
    std::string s = opt_number(r.mean_length_successful) + ",";
    if (r.changes) {
      s += format_number(r.changes->mean) + "," + std::to_string(r.changes->median) + "," +
           std::to_string(r.changes->mode);
    } else {
      s += ",,";
    }
    return s;
  };
  std::string table3 =
      "T,dataset,mean_length_successful,mean_changes,median_changes,mode_changes,"
      "base_mean_length_successful,base_mean_changes,base_median_changes,base_mode_changes\n";
  const std::string base_stats = stats(result.base_campaign.report);
  if (result.distilled_campaigns.empty()) {
    table3 += "none," + config.dataset + "," + base_stats + "," + base_stats + "\n";
  }
  for (std::size_t k = 0; k < result.distilled_campaigns.size(); ++k) {
    table3 += format_number(config.temperatures[k]) + "," + config.dataset + "," +
              stats(result.distilled_campaigns[k].report) + "," + base_stats + "\n";
  }
  write_text_file(out_dir / "table3_changes.csv", table3);

  if (!result.transfers.empty()) {
    std::string table4 =
        "T,dataset,source_total,number_tested,success_rate,baseline_number_tested,"
        "baseline_success_rate\n";
    for (const TransferReport& t : result.transfers) {
      table4 += format_number(t.temperature) + "," + t.dataset + "," +
                std::to_string(t.distilled.source_total) + "," +
                std::to_string(t.distilled.number_tested) + "," +
                format_number(t.distilled.success_rate) + "," +
                std::to_string(t.baseline.number_tested) + "," +
                format_number(t.baseline.success_rate) + "\n";
    }
    write_text_file(out_dir / "table4_transfer.csv", table4);
  }

  write_histogram_csv(out_dir / "changes_base.csv", result.base_campaign.report.change_histogram);
  write_attack_results(out_dir / "attacks_base.jsonl", result.base_campaign.results);
  save_model(result.base.model, out_dir / "base.model");
  if (result.retrained) save_model(result.retrained->model, out_dir / "retrained.model");
  for (std::size_t k = 0; k < result.distilled.size(); ++k) {
    const std::string label = temperature_label(config.temperatures[k]);
    write_histogram_csv(out_dir / ("changes_" + label + ".csv"),
                        result.distilled_campaigns[k].report.change_histogram);
    write_attack_results(out_dir / ("attacks_" + label + ".jsonl"),
                         result.distilled_campaigns[k].results);
    save_model(result.distilled[k].model, out_dir / ("distilled_" + label + ".model"));
  }
}

}  // namespace advtext

#pragma once

// On-disk forms of experiment outputs: the JSON report object, JSON Lines
// attack-result sets, and CSV renderings of the result tables.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "advtext/experiments.hpp"
#include "json.hpp"

namespace advtext {

using Json = nlohmann::ordered_json;

inline constexpr const char* kReportFormat = "advtext-report";
inline constexpr int kReportVersion = 1;

Json to_json(const Document& doc);
Json to_json(const AttackResult& result);
Json to_json(const CampaignReport& report);
Json to_json(const TransferOutcome& outcome);
Json to_json(const TransferReport& report);

AttackResult attack_result_from_json(const Json& record);

// One JSON object per line.
void write_attack_results(const std::filesystem::path& path, std::span<const AttackResult> results);
std::vector<AttackResult> read_attack_results(const std::filesystem::path& path);

// "num_changes,count"
void write_histogram_csv(const std::filesystem::path& path,
                         const std::map<std::size_t, std::size_t>& histogram);

// Shortest round-trip decimal form.
std::string format_number(double value);

void write_text_file(const std::filesystem::path& path, const std::string& contents);

// report.json, table1_accuracy.csv ... table4_transfer.csv, histograms,
// attack sets and the trained models, all under out_dir.
void write_protocol_outputs(const ProtocolResult& result, const std::filesystem::path& out_dir,
                            const Json& config_echo);

}  // namespace advtext

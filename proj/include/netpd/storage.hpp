#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "netpd/game.hpp"
#include "netpd/runner.hpp"

namespace netpd {

// {"round", "actions": ["C", ...], "paid", "gained", "net",
//  "edge_flows": [[from, to, points], ...]}
nlohmann::json to_json(const RoundRecord& record);
RoundRecord record_from_json(const nlohmann::json& j);

// Results layout:
//   <dir>/config.json
//   <dir>/rep-000/records.jsonl      one RoundRecord per line (plus "graph"
//                                    for well-mixed rounds)
//   <dir>/rep-000/transcripts.jsonl  one transcript event per line
//   <dir>/rep-000/status.json
void write_result(const ExperimentResult& result, const std::filesystem::path& dir);
// Throws InputError on missing files, IntegrityError on unparsable records.
ExperimentResult read_result(const std::filesystem::path& dir);
bool has_result(const std::filesystem::path& dir);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json(const std::filesystem::path& path);
// Hex FNV-1a of a file's bytes.
std::string file_hash(const std::filesystem::path& path);

}  // namespace netpd

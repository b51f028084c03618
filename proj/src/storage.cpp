#include "netpd/storage.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "netpd/errors.hpp"

namespace netpd {

namespace fs = std::filesystem;

nlohmann::json to_json(const RoundRecord& r) {
  auto actions = nlohmann::json::array();
  for (Action a : r.actions) actions.push_back(to_string(a));
  auto flows = nlohmann::json::array();
  for (const auto& f : r.edge_flows) flows.push_back({f.from, f.to, f.points});
  return {{"round", r.round_index}, {"actions", std::move(actions)}, {"paid", r.paid},
          {"gained", r.gained},     {"net", r.net},                  {"edge_flows", std::move(flows)}};
}

RoundRecord record_from_json(const nlohmann::json& j) {
  RoundRecord r;
  r.round_index = j.at("round").get<int>();
  for (const auto& a : j.at("actions")) {
    auto action = action_from_string(a.get<std::string>());
    if (!action) throw IntegrityError("bad action '" + a.get<std::string>() + "'", r.round_index);
    r.actions.push_back(*action);
  }
  r.paid = j.at("paid").get<std::vector<Points>>();
  r.gained = j.at("gained").get<std::vector<Points>>();
  r.net = j.at("net").get<std::vector<Points>>();
  for (const auto& f : j.at("edge_flows")) {
    r.edge_flows.push_back({f.at(0).get<NodeId>(), f.at(1).get<NodeId>(), f.at(2).get<Points>()});
  }
  return r;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  // Write then rename so an interrupted run never leaves a half-written file.
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
  }
  fs::rename(tmp, path);
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string file_hash(const fs::path& path) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(read_text(path))));
  return buf;
}

namespace {

std::string rep_dir_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "rep-%03d", index);
  return buf;
}

}  // namespace

void write_result(const ExperimentResult& result, const fs::path& dir) {
  fs::create_directories(dir);
  const bool well_mixed = result.config.topology.mode == TopologyMode::WellMixed;
  for (const auto& rep : result.repetitions) {
    const fs::path rd = dir / rep_dir_name(rep.index);
    std::string records;
    for (std::size_t r = 0; r < rep.records.size(); ++r) {
      auto j = to_json(rep.records[r]);
      if (well_mixed) to_json(j["graph"], rep.graphs.at(r));
      records += j.dump() + "\n";
    }
    write_text(rd / "records.jsonl", records);
    std::string transcript;
    for (const auto& e : rep.transcript) {
      nlohmann::json j;
      llm::to_json(j, e);
      transcript += j.dump() + "\n";
    }
    write_text(rd / "transcripts.jsonl", transcript);
    auto status = to_json(rep.status);
    status["index"] = rep.index;
    status["seed"] = rep.seed;
    status["rounds"] = rep.records.size();
    write_text(rd / "status.json", status.dump(2) + "\n");
  }
  // Written last: its presence marks a finished result directory.
  write_text(dir / "config.json", to_json(result.config).dump(2) + "\n");
}

bool has_result(const fs::path& dir) { return fs::exists(dir / "config.json"); }

ExperimentResult read_result(const fs::path& dir) {
  if (!has_result(dir)) throw InputError("no results in " + dir.string());
  ExperimentResult result;
  result.id = dir.filename().string();
  result.config = parse_config(read_json(dir / "config.json"));
  const auto& topo = result.config.topology;
  Graph fixed;
  if (topo.mode == TopologyMode::FixedRing) fixed = circulant(topo.n, topo.k);
  if (topo.mode == TopologyMode::Star) fixed = star(topo.n - 1);
  for (int index = 0; index < result.config.repetitions; ++index) {
    const fs::path rd = dir / rep_dir_name(index);
    if (!fs::exists(rd / "status.json")) throw InputError("missing " + (rd / "status.json").string());
    RepetitionResult rep;
    rep.index = index;
    const auto status = read_json(rd / "status.json");
    rep.status = status_from_json(status);
    rep.seed = status.at("seed").get<std::uint64_t>();
    std::istringstream records(read_text(rd / "records.jsonl"));
    std::string line;
    int line_no = 0;
    while (std::getline(records, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        rep.records.push_back(record_from_json(j));
        if (j.contains("graph")) {
          rep.graphs.push_back(j.at("graph").get<Graph>());
        } else {
          rep.graphs.push_back(fixed);
        }
      } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("unreadable record: ") + e.what(), line_no);
      } catch (const ConfigError& e) {
        throw IntegrityError(std::string("unreadable graph: ") + e.what(), line_no);
      }
    }
    if (fs::exists(rd / "transcripts.jsonl")) {
      std::istringstream transcript(read_text(rd / "transcripts.jsonl"));
      while (std::getline(transcript, line)) {
        if (line.empty()) continue;
        rep.transcript.push_back(nlohmann::json::parse(line).get<llm::TranscriptEvent>());
      }
    }
    result.repetitions.push_back(std::move(rep));
  }
  return result;
}

}  // namespace netpd

#include "netpd/grid.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <mutex>
#include <set>
#include <thread>

#include "netpd/errors.hpp"
#include "netpd/json_util.hpp"
#include "netpd/rng.hpp"
#include "netpd/storage.hpp"

namespace netpd {

using namespace json_util;
namespace fs = std::filesystem;

namespace {

const std::initializer_list<std::string_view> kShared = {
    "name", "master_seed", "params", "failure_policy", "human_timeout", "announced_rounds",
    "shuffle_labels", "operator_window", "max_parallel"};

// Shared options re-parsed through the single-config parser so the rules
// stay in one place.
nlohmann::json shared_options(const nlohmann::json& j) {
  nlohmann::json out = nlohmann::json::object();
  for (auto key : kShared) {
    if (key == "name" || key == "master_seed") continue;
    if (j.contains(std::string(key))) out[std::string(key)] = j.at(std::string(key));
  }
  return out;
}

template <typename T>
std::vector<T> list_of(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError("missing required key", key);
  const auto& v = j.at(key);
  if (!v.is_array() || v.empty()) throw ConfigError("expected a non-empty array", key);
  try {
    return v.get<std::vector<T>>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("wrong element type", key);
  }
}

std::vector<GridCell> expand_network(const GridSpec& g) {
  const auto& j = g.document;
  std::vector<std::string_view> allowed(kShared);
  for (auto key : {"k", "bc_ratio", "modes", "rosters", "regimes"}) allowed.push_back(key);
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "'", key);
    }
  }
  const auto ks = list_of<long long>(j, "k");
  const auto bcs = list_of<long long>(j, "bc_ratio");
  const auto modes = j.contains("modes") ? list_of<std::string>(j, "modes")
                                         : std::vector<std::string>{"fixed_ring"};
  if (!j.contains("rosters") || !j.at("rosters").is_object() || j.at("rosters").empty()) {
    throw ConfigError("expected a non-empty object of named rosters", "rosters");
  }
  std::vector<std::pair<std::string, std::vector<AgentSpec>>> rosters;
  for (const auto& [name, entries] : j.at("rosters").items()) {
    auto roster = parse_roster(entries, "rosters." + name);
    if (roster.empty()) throw ConfigError("roster is empty", "rosters." + name);
    rosters.emplace_back(name, std::move(roster));
  }
  if (!j.contains("regimes") || !j.at("regimes").is_array() || j.at("regimes").empty()) {
    throw ConfigError("expected a non-empty array", "regimes");
  }
  std::vector<Regime> regimes;
  for (std::size_t i = 0; i < j.at("regimes").size(); ++i) {
    const auto& rj = j.at("regimes")[i];
    const auto path = index("regimes", i);
    reject_unknown(rj, {"name", "n", "rounds", "repetitions"}, path);
    Regime r;
    r.name = get<std::string>(rj, "name", path);
    const auto n = get_int(rj, "n", path);
    if (n < 3) throw ConfigError("must be >= 3", join(path, "n"));
    r.n = static_cast<std::size_t>(n);
    r.rounds = static_cast<int>(get_int(rj, "rounds", path));
    r.repetitions = static_cast<int>(get_int(rj, "repetitions", path));
    regimes.push_back(r);
  }

  const auto shared = shared_options(j);
  std::vector<GridCell> cells;
  for (const auto& regime : regimes) {
    for (const auto& mode : modes) {
      for (long long k : ks) {
        for (long long bc : bcs) {
          for (const auto& [roster_name, roster] : rosters) {
            const std::string name = regime.name + "-" + mode + "-k" + std::to_string(k) + "-bc" +
                                     std::to_string(bc) + "-" + roster_name;
            nlohmann::json doc = shared;
            doc["name"] = name;
            doc["master_seed"] = cell_seed(g.master_seed, name);
            doc["topology"] = {{"n", regime.n}, {"k", k}, {"mode", mode}};
            doc["rounds"] = regime.rounds;
            doc["repetitions"] = regime.repetitions;
            doc["params"]["bc_ratio"] = bc;
            auto agents = nlohmann::json::array();
            for (std::size_t i = 0; i < regime.n; ++i) agents.push_back(to_json(roster[i % roster.size()]));
            doc["agents"] = std::move(agents);
            GridCell cell;
            cell.name = name;
            try {
              cell.config = parse_config(doc);
            } catch (const ConfigError& e) {
              throw ConfigError(e.detail() + " (cell " + name + ")", e.field());
            }
            cell.meta = {{"regime", regime.name}, {"mode", mode},  {"k", k},
                         {"bc_ratio", bc},        {"roster", roster_name}, {"n", regime.n}};
            cells.push_back(std::move(cell));
          }
        }
      }
    }
  }
  return cells;
}

std::vector<GridCell> expand_stimulus(const GridSpec& g) {
  const auto& j = g.document;
  std::vector<std::string_view> allowed(kShared);
  for (auto key : {"stimulus", "post_change_cooperators", "focal"}) allowed.push_back(key);
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "'", key);
    }
  }
  const auto posts = list_of<int>(j, "post_change_cooperators");
  if (!j.contains("focal") || !j.at("focal").is_object() || j.at("focal").empty()) {
    throw ConfigError("expected a non-empty object of named focal agents", "focal");
  }
  const auto shared = shared_options(j);
  std::vector<GridCell> cells;
  for (const auto& [focal_name, focal] : j.at("focal").items()) {
    for (int post : posts) {
      const std::string name = "stimulus-" + focal_name + "-post" + std::to_string(post);
      nlohmann::json doc = shared;
      doc["name"] = name;
      doc["master_seed"] = cell_seed(g.master_seed, name);
      doc["stimulus"] = j.at("stimulus");
      doc["stimulus"]["post_change_cooperators"] = post;
      doc["agents"] = nlohmann::json::array({focal});
      GridCell cell;
      cell.name = name;
      try {
        cell.config = parse_config(doc);
      } catch (const ConfigError& e) {
        throw ConfigError(e.detail() + " (cell " + name + ")", e.field());
      }
      cell.meta = {{"focal", focal_name}, {"post_change_cooperators", post}};
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

}  // namespace

bool is_grid_document(const nlohmann::json& j) {
  return j.is_object() && (j.contains("regimes") || j.contains("focal"));
}

GridSpec parse_grid(const nlohmann::json& j) {
  require_object(j, "");
  GridSpec g;
  g.document = j;
  g.name = get_or<std::string>(j, "name", g.name, "");
  if (j.contains("master_seed")) {
    const auto& seed = j.at("master_seed");
    if (!seed.is_number_unsigned()) throw ConfigError("expected a non-negative integer", "master_seed");
    g.master_seed = seed.get<std::uint64_t>();
  }
  g.expand();  // validates every cell
  return g;
}

std::vector<GridCell> GridSpec::expand() const {
  return document.contains("focal") ? expand_stimulus(*this) : expand_network(*this);
}

std::uint64_t cell_seed(std::uint64_t master_seed, const std::string& cell_name) {
  return derive_seed(master_seed, fnv1a64(cell_name));
}

void apply_overrides(ExperimentConfig& config, const Overrides& o) {
  if (o.seed) config.master_seed = *o.seed;
  if (o.max_parallel) config.max_parallel = *o.max_parallel;
  if (config.stimulus) {
    auto spec = *config.stimulus;
    if (o.repetitions) spec.runs = *o.repetitions;
    if (o.rounds) spec.rounds = *o.rounds;
    if (o.repetitions || o.rounds) {
      auto rebuilt = make_stimulus_config(spec, config.agents.front(), config.params, config.master_seed);
      rebuilt.name = config.name;
      rebuilt.failure_policy = config.failure_policy;
      rebuilt.human_timeout_s = config.human_timeout_s;
      rebuilt.announced_rounds = config.announced_rounds;
      rebuilt.shuffle_labels = config.shuffle_labels;
      rebuilt.operator_window_s = config.operator_window_s;
      rebuilt.max_parallel = config.max_parallel;
      config = std::move(rebuilt);
    }
  } else {
    if (o.repetitions) config.repetitions = *o.repetitions;
    if (o.rounds) config.rounds = *o.rounds;
  }
  config.validate();
}

std::string config_hash(const ExperimentConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json(config).dump())));
  return buf;
}

namespace {

struct CellSummary {
  std::size_t repetitions = 0;
  std::size_t completed = 0;
  bool skipped = false;
};

bool already_done(const GridCell& cell, const fs::path& dir, CellSummary& summary) {
  if (!has_result(dir)) return false;
  try {
    const auto stored = parse_config(read_json(dir / "config.json"));
    if (config_hash(stored) != config_hash(cell.config)) return false;
    const auto result = read_result(dir);
    if (!result.all_completed()) return false;
    summary.repetitions = summary.completed = result.repetitions.size();
    summary.skipped = true;
    return true;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

BatchOutcome run_cells(const std::vector<GridCell>& cells, const fs::path& out,
                       const std::string& grid_name, const BatchOptions& options) {
  fs::create_directories(out);
  std::vector<CellSummary> summaries(cells.size());
  std::mutex log_mu;
  auto log = [&](const std::string& line) {
    if (!options.log) return;
    std::lock_guard lock(log_mu);
    options.log(line);
  };
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex err_mu;
  auto worker = [&] {
    for (std::size_t c = next++; c < cells.size(); c = next++) {
      const auto& cell = cells[c];
      const fs::path dir = out / cell.name;
      auto& summary = summaries[c];
      if (already_done(cell, dir, summary)) {
        log(cell.name + ": up to date");
        continue;
      }
      try {
        if (fs::exists(dir)) fs::remove_all(dir);
        auto result = run_experiment(cell.config, options.run);
        result.id = cell.name;
        write_result(result, dir);
        summary.repetitions = result.repetitions.size();
        for (const auto& rep : result.repetitions) summary.completed += rep.status.completed ? 1 : 0;
        log(cell.name + ": " + std::to_string(summary.completed) + "/" +
            std::to_string(summary.repetitions) + " repetitions completed");
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(cells.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int i = 0; i < jobs; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  BatchOutcome outcome;
  outcome.cells = cells.size();
  auto entries = nlohmann::json::array();
  std::set<std::string> regimes;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& s = summaries[c];
    outcome.skipped += s.skipped ? 1 : 0;
    outcome.repetitions += s.repetitions;
    outcome.completed_repetitions += s.completed;
    if (cells[c].meta.contains("regime")) regimes.insert(cells[c].meta["regime"].get<std::string>());
    nlohmann::json e = cells[c].meta;
    e["name"] = cells[c].name;
    e["hash"] = config_hash(cells[c].config);
    e["rounds"] = cells[c].config.rounds;
    e["repetitions"] = s.repetitions;
    e["completed_repetitions"] = s.completed;
    entries.push_back(std::move(e));
  }
  nlohmann::json manifest;
  manifest["grid"] = grid_name;
  manifest["cells"] = std::move(entries);
  manifest["totals"] = {{"cells", outcome.cells},
                        {"regimes", regimes.size()},
                        {"repetitions", outcome.repetitions},
                        {"completed_repetitions", outcome.completed_repetitions}};
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  if (error) std::rethrow_exception(error);
  return outcome;
}

}  // namespace netpd

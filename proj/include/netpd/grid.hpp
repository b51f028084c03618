#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "netpd/config.hpp"
#include "netpd/runner.hpp"

namespace netpd {

struct Regime {
  std::string name;
  std::size_t n = 8;
  int rounds = 25;
  int repetitions = 5;
};

struct GridCell {
  std::string name;
  ExperimentConfig config;
  // Cell coordinates for the manifest ("regime", "k", "bc_ratio", ...).
  nlohmann::json meta = nlohmann::json::object();
};

// A cross product of experiment cells sharing one master seed. Two forms:
//
//   network grid:  {"k": [...], "bc_ratio": [...], "modes": [...],
//                   "rosters": {"name": [agent specs, cycled to fill n]},
//                   "regimes": [{"name", "n", "rounds", "repetitions"}]}
//   stimulus grid: {"stimulus": {...}, "post_change_cooperators": [...],
//                   "focal": {"name": agent spec}}
//
// Both accept "name", "master_seed", "params" and the shared experiment
// options (failure_policy, human_timeout, announced_rounds, shuffle_labels,
// operator_window, max_parallel).
struct GridSpec {
  nlohmann::json document;
  std::string name = "grid";
  std::uint64_t master_seed = 0;

  std::vector<GridCell> expand() const;
};

GridSpec parse_grid(const nlohmann::json& j);
// True if the document looks like a grid rather than a single config.
bool is_grid_document(const nlohmann::json& j);

std::uint64_t cell_seed(std::uint64_t master_seed, const std::string& cell_name);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> repetitions;
  std::optional<int> rounds;
  std::optional<int> max_parallel;
};

// Applies overrides to a single config (stimulus configs are rebuilt so the
// leaf schedules follow the new round count).
void apply_overrides(ExperimentConfig& config, const Overrides& overrides);

struct BatchOptions {
  int jobs = 1;
  RunOptions run;
  std::function<void(const std::string&)> log;
};

struct BatchOutcome {
  std::size_t cells = 0;
  std::size_t skipped = 0;
  std::size_t repetitions = 0;
  std::size_t completed_repetitions = 0;
  bool all_completed() const noexcept { return repetitions == completed_repetitions; }
};

// Runs every cell into <out>/<cell name>/ and writes <out>/manifest.json.
// A cell whose stored config has the same content hash and whose
// repetitions all completed is skipped.
BatchOutcome run_cells(const std::vector<GridCell>& cells, const std::filesystem::path& out,
                       const std::string& grid_name, const BatchOptions& options = {});

// Hash of a config's canonical JSON.
std::string config_hash(const ExperimentConfig& config);

}  // namespace netpd

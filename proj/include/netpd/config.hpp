#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "netpd/agents.hpp"
#include "netpd/game.hpp"
#include "netpd/llm/chat.hpp"
#include "netpd/topology.hpp"

namespace netpd {

// One roster entry. Which fields matter depends on `kind` (and `strategy`).
struct AgentSpec {
  AgentKind kind = AgentKind::Scripted;
  std::string id;
  // scripted: all_c | all_d | random | tit_for_tat_majority | grim | fermi_imitate
  std::string strategy = "all_c";
  double p = 0.5;                  // random
  double beta = 1.0;               // fermi_imitate
  double initial_cooperate = 1.0;  // fermi_imitate
  std::vector<Action> trace;       // replay
  llm::ProviderConfig provider;    // chat
  nlohmann::json script;           // chat with a mock provider

  friend bool operator==(const AgentSpec&, const AgentSpec&);
};

struct FailurePolicy {
  enum class Kind { FailRun, Substitute };
  Kind kind = Kind::FailRun;
  Action substitute = Action::Defect;
};

// Focal agent with `neighbor_count` scripted leaves. The first
// `pre_change_cooperators` leaves cooperate through `change_round`; from the
// next round on only the first `post_change_cooperators` do.
struct StimulusSpec {
  int neighbor_count = 4;
  int pre_change_cooperators = 4;
  int post_change_cooperators = 3;
  int change_round = 5;
  int rounds = 25;
  int runs = 10;

  void validate() const;
};

struct ExperimentConfig {
  std::string name = "experiment";
  TopologySpec topology;
  GameParams params;
  int rounds = 15;
  int repetitions = 5;
  std::uint64_t master_seed = 0;
  std::vector<AgentSpec> agents;
  FailurePolicy failure_policy;
  double human_timeout_s = 120.0;
  std::optional<StimulusSpec> stimulus;
  // Round count quoted in the tutorial ("about N rounds").
  int announced_rounds = 15;
  // Shuffle which neighbor gets which "Neighbor i" label.
  bool shuffle_labels = true;
  // How long a flagged dialogue waits for an operator clarification.
  double operator_window_s = 0.0;
  // Concurrent decide() calls for chat and human agents.
  int max_parallel = 8;

  void validate() const;
  // Nodes whose behaviour is under study: the focal agent in stimulus
  // experiments, everyone otherwise.
  std::vector<NodeId> subjects() const;
};

// Strict parsing: unknown keys, wrong types and invalid values throw
// ConfigError naming the field. A document with "stimulus" lists only the
// focal agent and omits topology, rounds and repetitions; the leaves are
// expanded here.
ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);
AgentSpec parse_agent_spec(const nlohmann::json& j, const std::string& field);
nlohmann::json to_json(const AgentSpec& spec);
// Expands "repeat" entries.
std::vector<AgentSpec> parse_roster(const nlohmann::json& j, const std::string& field);
GameParams parse_params(const nlohmann::json& j, const std::string& field,
                        GameParams base = {});
nlohmann::json to_json(const GameParams& params);

// Concrete config of a stimulus experiment: star topology, focal node 0,
// replay leaves carrying the change schedule.
ExperimentConfig make_stimulus_config(const StimulusSpec& spec, const AgentSpec& focal,
                                      const GameParams& params, std::uint64_t master_seed = 0);

std::vector<Action> parse_trace(const std::string& text, const std::string& field);
std::string trace_string(const std::vector<Action>& trace);

}  // namespace netpd

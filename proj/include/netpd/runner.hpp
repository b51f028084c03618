#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "netpd/agents.hpp"
#include "netpd/config.hpp"
#include "netpd/events.hpp"
#include "netpd/game.hpp"
#include "netpd/llm/chat.hpp"
#include "netpd/llm/rectify.hpp"
#include "netpd/topology.hpp"

namespace netpd {

struct RepetitionStatus {
  bool completed = false;
  // "rectification", "transport", "human_timeout", "aborted" or "error".
  std::string reason;
  std::string message;
  int round = 0;

  friend bool operator==(const RepetitionStatus&, const RepetitionStatus&) = default;
};

nlohmann::json to_json(const RepetitionStatus& status);
RepetitionStatus status_from_json(const nlohmann::json& j);

struct RepetitionResult {
  int index = 0;
  std::uint64_t seed = 0;
  std::vector<RoundRecord> records;
  // Graph of each recorded round.
  std::vector<Graph> graphs;
  std::vector<llm::TranscriptEvent> transcript;
  RepetitionStatus status;
};

struct ExperimentResult {
  std::string id;
  ExperimentConfig config;
  std::vector<RepetitionResult> repetitions;

  bool all_completed() const;
  std::vector<const RepetitionResult*> completed() const;
};

// Live handles into a running experiment: human inboxes, dialogue controls
// and abort. Shared between the runner and control surfaces.
class RunControl {
 public:
  std::shared_ptr<HumanInbox> inbox(const std::string& agent_id);
  std::shared_ptr<llm::DialogueControl> dialogue(const std::string& agent_id);
  // nullptr if no such agent has been registered.
  std::shared_ptr<HumanInbox> find_inbox(const std::string& agent_id) const;
  std::shared_ptr<llm::DialogueControl> find_dialogue(const std::string& agent_id) const;

  void abort();
  bool aborted() const noexcept { return aborted_->load(); }
  // Also raised by abort(), so agents blocked on a repetition's own flag wake.
  void watch(const CancelFlag& flag);
  const CancelFlag& cancel_flag() const noexcept { return aborted_; }

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<HumanInbox>> inboxes_;
  std::map<std::string, std::shared_ptr<llm::DialogueControl>> dialogues_;
  std::vector<std::weak_ptr<std::atomic<bool>>> watched_;
  CancelFlag aborted_ = std::make_shared<std::atomic<bool>>(false);
};

struct RunOptions {
  // Time source for chat clients (rate limiting, backoff, transcript stamps).
  std::shared_ptr<llm::Clock> clock;
  // Overrides transport construction for chat agents (tests). Called once
  // per chat agent per repetition.
  std::function<std::shared_ptr<llm::ChatTransport>(const AgentSpec&)> transport_factory;
  EventLog* events = nullptr;
  std::shared_ptr<RunControl> control;
  // Repetitions run concurrently, used only when every agent is scripted or
  // replayed.
  int jobs = 1;
};

// Agent id of roster slot i ("a<i>" unless the spec names one).
std::string agent_id(const ExperimentConfig& config, std::size_t node);

// Positional neighbor labels: entry i lists node i's neighbors in label order.
std::vector<std::vector<NodeId>> neighbor_labels(const Graph& graph, std::uint64_t seed,
                                                 bool shuffle);

RepetitionResult run_repetition(const ExperimentConfig& config, int index,
                                const RunOptions& options = {});
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// Per-round cooperation frequency of the focal agent (node 0), averaged over
// completed repetitions.
std::vector<double> focal_cooperation(const ExperimentResult& result);
std::vector<double> run_stimulus(const StimulusSpec& spec, const AgentSpec& focal,
                                 const GameParams& params, std::uint64_t master_seed = 0,
                                 const RunOptions& options = {});

// Re-executes every repetition with replay agents (recorded actions, stored
// graphs) and checks the result against the recorded rounds and, for chat
// agents, against the transcript. Throws IntegrityError naming the first
// divergent round.
ExperimentResult replay(const ExperimentResult& result);

// An experiment running on its own thread, as driven by the HTTP surface.
class ExperimentRun {
 public:
  enum class State { Running, Completed, Failed, Aborted };

  ExperimentRun(std::string id, ExperimentConfig config, RunOptions options = {});
  ~ExperimentRun();
  ExperimentRun(const ExperimentRun&) = delete;
  ExperimentRun& operator=(const ExperimentRun&) = delete;

  const std::string& id() const noexcept { return id_; }
  const ExperimentConfig& config() const noexcept { return config_; }
  EventLog& events() noexcept { return events_; }
  RunControl& control() noexcept { return *control_; }
  State state() const;
  // Available once the run has finished.
  std::optional<ExperimentResult> result() const;
  void abort();
  void join();

 private:
  std::string id_;
  ExperimentConfig config_;
  EventLog events_;
  std::shared_ptr<RunControl> control_;
  mutable std::mutex mu_;
  State state_ = State::Running;
  std::optional<ExperimentResult> result_;
  std::thread thread_;
};

const char* to_string(ExperimentRun::State state);

}  // namespace netpd

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netpd/game.hpp"
#include "netpd/rng.hpp"
#include "netpd/topology.hpp"

namespace netpd {

// What one player learns after a round. Every number here is exactly what the
// feedback prompt renders.
struct NeighborView {
  int label = 0;  // 1-based "Neighbor i" label
  NodeId node = 0;
  Action action = Action::Defect;
  Points paid = 0;
  Points gained_from_me = 0;
  Points gained_from_others = 0;
  Points net = 0;

  friend bool operator==(const NeighborView&, const NeighborView&) = default;
};

struct Observation {
  int round_index = 0;
  Action my_action = Action::Defect;
  Points my_paid = 0;
  Points my_gained = 0;
  Points my_net = 0;
  std::vector<NeighborView> neighbors;

  friend bool operator==(const Observation&, const Observation&) = default;
};

// `labelled` lists the node's neighbors in label order (label i at index i-1).
Observation make_observation(const RoundRecord& record, NodeId node,
                             std::span<const NodeId> labelled, const GameParams& params);

using CancelFlag = std::shared_ptr<std::atomic<bool>>;

struct AgentContext {
  std::string agent_id;
  NodeId node = 0;
  GameParams params;
  TopologySpec topology;
  int rounds = 1;
  int announced_rounds = 15;
  CancelFlag cancel;
};

enum class AgentKind { Scripted, Replay, Human, Chat };

// Uniform agent contract. decide(r) may only follow observe(r - 1), and
// observe(r) may only follow decide(r); violations throw ProtocolError.
class Agent {
 public:
  virtual ~Agent() = default;

  void start(const AgentContext& context);
  Action decide(int round_index);
  void observe(const Observation& obs);

  const AgentContext& context() const noexcept { return context_; }
  virtual AgentKind kind() const noexcept = 0;

 protected:
  virtual void on_start() {}
  virtual Action do_decide(int round_index) = 0;
  virtual void do_observe(const Observation& obs) = 0;

 private:
  AgentContext context_;
  int decided_ = 0;
  int observed_ = 0;
};

class ScriptedAgent : public Agent {
 public:
  AgentKind kind() const noexcept override { return AgentKind::Scripted; }
};

std::unique_ptr<Agent> make_all_c();
std::unique_ptr<Agent> make_all_d();
std::unique_ptr<Agent> make_random(double p_cooperate, Rng rng);
// Cooperates iff at least half the neighbors cooperated last round; opens with C.
std::unique_ptr<Agent> make_tit_for_tat_majority();
// Cooperates until the first observed neighbor defection, then defects forever.
std::unique_ptr<Agent> make_grim();
// Pairwise-comparison imitation. Round-1 action is C with probability
// `initial_cooperate` (1.0 = always C).
std::unique_ptr<Agent> make_fermi_imitate(double beta, Rng rng, double initial_cooperate = 1.0);

// 1 / (1 + exp(-beta * (theirs - mine) / scale))
double fermi_adoption_probability(double beta, Points mine, Points theirs, Points scale);

// Plays trace[r - 1] in round r; ignores observations.
class ReplayAgent : public Agent {
 public:
  explicit ReplayAgent(std::vector<Action> trace) : trace_(std::move(trace)) {}
  AgentKind kind() const noexcept override { return AgentKind::Replay; }

 protected:
  Action do_decide(int round_index) override;
  void do_observe(const Observation&) override {}

 private:
  std::vector<Action> trace_;
};

// Mailbox between a waiting human agent and the control surface.
class HumanInbox {
 public:
  enum class SubmitResult { Accepted, NotAwaiting, Expired };

  SubmitResult submit(Action action);
  bool awaiting() const;
  std::optional<int> awaiting_round() const;

  // Starts accepting a submission for `round_index` before the agent blocks,
  // so a client told about the wait cannot race the agent.
  void open(int round_index);
  // Blocks until submit() or the deadline. nullopt on timeout or cancel.
  std::optional<Action> await(int round_index, std::chrono::milliseconds timeout,
                              const CancelFlag& cancel);
  void wake();

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::optional<int> awaiting_round_;
  std::optional<int> expired_round_;
  std::optional<Action> pending_;
};

class HumanAgent : public Agent {
 public:
  HumanAgent(std::shared_ptr<HumanInbox> inbox, std::chrono::milliseconds timeout)
      : inbox_(std::move(inbox)), timeout_(timeout) {}
  AgentKind kind() const noexcept override { return AgentKind::Human; }
  const std::optional<Observation>& last_observation() const noexcept { return last_; }

 protected:
  Action do_decide(int round_index) override;
  void do_observe(const Observation& obs) override { last_ = obs; }

 private:
  std::shared_ptr<HumanInbox> inbox_;
  std::chrono::milliseconds timeout_;
  std::optional<Observation> last_;
};

}  // namespace netpd

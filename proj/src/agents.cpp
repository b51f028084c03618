#include "netpd/agents.hpp"

#include <cmath>

#include "netpd/errors.hpp"

namespace netpd {

Observation make_observation(const RoundRecord& record, NodeId node,
                             std::span<const NodeId> labelled, const GameParams& params) {
  Observation obs;
  obs.round_index = record.round_index;
  obs.my_action = record.actions.at(node);
  obs.my_paid = record.paid.at(node);
  obs.my_gained = record.gained.at(node);
  obs.my_net = record.net.at(node);
  const Points from_me = obs.my_action == Action::Cooperate ? params.benefit_per_edge() : 0;
  int label = 1;
  for (NodeId j : labelled) {
    NeighborView v;
    v.label = label++;
    v.node = j;
    v.action = record.actions.at(j);
    v.paid = record.paid.at(j);
    v.gained_from_me = from_me;
    v.gained_from_others = record.gained.at(j) - from_me;
    v.net = record.net.at(j);
    obs.neighbors.push_back(v);
  }
  return obs;
}

void Agent::start(const AgentContext& context) {
  context_ = context;
  decided_ = 0;
  observed_ = 0;
  on_start();
}

Action Agent::decide(int round_index) {
  if (round_index != observed_ + 1 || decided_ != observed_) {
    throw ProtocolError("decide(" + std::to_string(round_index) + ") after observing round " +
                        std::to_string(observed_));
  }
  // The slot counts as used even if do_decide throws, so a substituted
  // action can still be observed.
  decided_ = round_index;
  return do_decide(round_index);
}

void Agent::observe(const Observation& obs) {
  if (obs.round_index != decided_ || observed_ + 1 != decided_) {
    throw ProtocolError("out-of-order observation for round " +
                        std::to_string(obs.round_index));
  }
  do_observe(obs);
  observed_ = obs.round_index;
}

namespace {

class Constant final : public ScriptedAgent {
 public:
  explicit Constant(Action a) : action_(a) {}

 protected:
  Action do_decide(int) override { return action_; }
  void do_observe(const Observation&) override {}

 private:
  Action action_;
};

class RandomStrategy final : public ScriptedAgent {
 public:
  RandomStrategy(double p, Rng rng) : p_(p), rng_(rng) {}

 protected:
  Action do_decide(int) override {
    return rng_.bernoulli(p_) ? Action::Cooperate : Action::Defect;
  }
  void do_observe(const Observation&) override {}

 private:
  double p_;
  Rng rng_;
};

class TitForTatMajority final : public ScriptedAgent {
 protected:
  Action do_decide(int) override { return next_; }
  void do_observe(const Observation& obs) override {
    std::size_t c = 0;
    for (const auto& v : obs.neighbors) c += v.action == Action::Cooperate;
    // Ties go to C.
    next_ = 2 * c >= obs.neighbors.size() ? Action::Cooperate : Action::Defect;
  }

 private:
  Action next_ = Action::Cooperate;
};

class Grim final : public ScriptedAgent {
 protected:
  Action do_decide(int) override { return triggered_ ? Action::Defect : Action::Cooperate; }
  void do_observe(const Observation& obs) override {
    for (const auto& v : obs.neighbors) triggered_ |= v.action == Action::Defect;
  }

 private:
  bool triggered_ = false;
};

class FermiImitate final : public ScriptedAgent {
 public:
  FermiImitate(double beta, Rng rng, double initial) : beta_(beta), rng_(rng), initial_(initial) {}

 protected:
  void on_start() override { scale_ = context().params.benefit_per_edge(); }

  Action do_decide(int round_index) override {
    if (round_index == 1) {
      current_ = initial_ >= 1.0 || rng_.bernoulli(initial_) ? Action::Cooperate : Action::Defect;
      return current_;
    }
    if (last_.neighbors.empty()) return current_;
    const auto& other = last_.neighbors[rng_.index(last_.neighbors.size())];
    const double p = fermi_adoption_probability(beta_, last_.my_net, other.net, scale_);
    if (rng_.bernoulli(p)) current_ = other.action;
    return current_;
  }
  void do_observe(const Observation& obs) override {
    last_ = obs;
    current_ = obs.my_action;
  }

 private:
  double beta_;
  Rng rng_;
  double initial_;
  Points scale_ = 1;
  Action current_ = Action::Cooperate;
  Observation last_;
};

}  // namespace

std::unique_ptr<Agent> make_all_c() { return std::make_unique<Constant>(Action::Cooperate); }
std::unique_ptr<Agent> make_all_d() { return std::make_unique<Constant>(Action::Defect); }
std::unique_ptr<Agent> make_random(double p, Rng rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p must lie in [0, 1]", "p");
  return std::make_unique<RandomStrategy>(p, rng);
}
std::unique_ptr<Agent> make_tit_for_tat_majority() { return std::make_unique<TitForTatMajority>(); }
std::unique_ptr<Agent> make_grim() { return std::make_unique<Grim>(); }
std::unique_ptr<Agent> make_fermi_imitate(double beta, Rng rng, double initial_cooperate) {
  if (!(beta >= 0.0)) throw ConfigError("beta must be non-negative", "beta");
  if (!(initial_cooperate >= 0.0 && initial_cooperate <= 1.0)) {
    throw ConfigError("initial_cooperate must lie in [0, 1]", "initial_cooperate");
  }
  return std::make_unique<FermiImitate>(beta, rng, initial_cooperate);
}

double fermi_adoption_probability(double beta, Points mine, Points theirs, Points scale) {
  const double diff = static_cast<double>(theirs - mine) / static_cast<double>(scale);
  return 1.0 / (1.0 + std::exp(-beta * diff));
}

Action ReplayAgent::do_decide(int round_index) {
  if (round_index < 1 || static_cast<std::size_t>(round_index) > trace_.size()) {
    throw ProtocolError("replay trace has no action for round " + std::to_string(round_index));
  }
  return trace_[round_index - 1];
}

HumanInbox::SubmitResult HumanInbox::submit(Action action) {
  std::lock_guard lock(mu_);
  if (!awaiting_round_ || pending_) {
    return expired_round_ && !awaiting_round_ ? SubmitResult::Expired : SubmitResult::NotAwaiting;
  }
  pending_ = action;
  cv_.notify_all();
  return SubmitResult::Accepted;
}

bool HumanInbox::awaiting() const {
  std::lock_guard lock(mu_);
  return awaiting_round_.has_value() && !pending_;
}

std::optional<int> HumanInbox::awaiting_round() const {
  std::lock_guard lock(mu_);
  return pending_ ? std::nullopt : awaiting_round_;
}

std::optional<Action> HumanInbox::await(int round_index, std::chrono::milliseconds timeout,
                                        const CancelFlag& cancel) {
  std::unique_lock lock(mu_);
  if (awaiting_round_ != round_index) {
    awaiting_round_ = round_index;
    pending_.reset();
  }
  expired_round_.reset();
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  cv_.wait_until(lock, deadline,
                 [&] { return pending_.has_value() || (cancel && cancel->load()); });
  std::optional<Action> got = pending_;
  if (!got) expired_round_ = round_index;
  awaiting_round_.reset();
  pending_.reset();
  return got;
}

void HumanInbox::open(int round_index) {
  std::lock_guard lock(mu_);
  awaiting_round_ = round_index;
  expired_round_.reset();
  pending_.reset();
}

void HumanInbox::wake() {
  std::lock_guard lock(mu_);
  cv_.notify_all();
}

Action HumanAgent::do_decide(int round_index) {
  auto got = inbox_->await(round_index, timeout_, context().cancel);
  if (!got) {
    if (context().cancel && context().cancel->load()) throw Aborted();
    throw HumanTimeout(context().agent_id, round_index);
  }
  return *got;
}

}  // namespace netpd

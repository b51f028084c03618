#include "netpd/runner.hpp"

#include <algorithm>
#include <future>
#include <semaphore>

#include "netpd/errors.hpp"
#include "netpd/llm/chat_agent.hpp"
#include "netpd/llm/http_transport.hpp"
#include "netpd/llm/parse.hpp"
#include "netpd/llm/prompts.hpp"

namespace netpd {

nlohmann::json to_json(const RepetitionStatus& s) {
  nlohmann::json j{{"completed", s.completed}};
  if (!s.completed) {
    j["reason"] = s.reason;
    j["message"] = s.message;
    j["round"] = s.round;
  }
  return j;
}

RepetitionStatus status_from_json(const nlohmann::json& j) {
  RepetitionStatus s;
  s.completed = j.at("completed").get<bool>();
  if (!s.completed) {
    s.reason = j.value("reason", "");
    s.message = j.value("message", "");
    s.round = j.value("round", 0);
  }
  return s;
}

bool ExperimentResult::all_completed() const {
  return std::all_of(repetitions.begin(), repetitions.end(),
                     [](const RepetitionResult& r) { return r.status.completed; });
}

std::vector<const RepetitionResult*> ExperimentResult::completed() const {
  std::vector<const RepetitionResult*> out;
  for (const auto& r : repetitions) {
    if (r.status.completed) out.push_back(&r);
  }
  return out;
}

std::shared_ptr<HumanInbox> RunControl::inbox(const std::string& agent_id) {
  std::lock_guard lock(mu_);
  auto& slot = inboxes_[agent_id];
  if (!slot) slot = std::make_shared<HumanInbox>();
  return slot;
}

std::shared_ptr<llm::DialogueControl> RunControl::dialogue(const std::string& agent_id) {
  std::lock_guard lock(mu_);
  auto& slot = dialogues_[agent_id];
  if (!slot) slot = std::make_shared<llm::DialogueControl>();
  return slot;
}

std::shared_ptr<HumanInbox> RunControl::find_inbox(const std::string& agent_id) const {
  std::lock_guard lock(mu_);
  auto it = inboxes_.find(agent_id);
  return it == inboxes_.end() ? nullptr : it->second;
}

std::shared_ptr<llm::DialogueControl> RunControl::find_dialogue(const std::string& agent_id) const {
  std::lock_guard lock(mu_);
  auto it = dialogues_.find(agent_id);
  return it == dialogues_.end() ? nullptr : it->second;
}

void RunControl::abort() {
  aborted_->store(true);
  std::lock_guard lock(mu_);
  for (auto& w : watched_) {
    if (auto flag = w.lock()) flag->store(true);
  }
  for (auto& [id, inbox] : inboxes_) inbox->wake();
}

void RunControl::watch(const CancelFlag& flag) {
  std::lock_guard lock(mu_);
  std::erase_if(watched_, [](const auto& w) { return w.expired(); });
  watched_.push_back(flag);
  if (aborted_->load()) flag->store(true);
}

std::string agent_id(const ExperimentConfig& config, std::size_t node) {
  const auto& id = config.agents.at(node).id;
  return id.empty() ? "a" + std::to_string(node) : id;
}

std::vector<std::vector<NodeId>> neighbor_labels(const Graph& graph, std::uint64_t seed,
                                                 bool shuffle) {
  std::vector<std::vector<NodeId>> out(graph.size());
  for (NodeId i = 0; i < graph.size(); ++i) {
    auto nb = graph.neighbors(i);
    out[i].assign(nb.begin(), nb.end());
    if (shuffle) {
      Rng rng(derive_seed(seed, i));
      rng.shuffle(std::span<NodeId>(out[i]));
    }
  }
  return out;
}

namespace {

bool all_offline(const ExperimentConfig& config) {
  return std::all_of(config.agents.begin(), config.agents.end(), [](const AgentSpec& a) {
    return a.kind == AgentKind::Scripted || a.kind == AgentKind::Replay;
  });
}

// Rate limiters are shared by every client of the same remote provider.
std::shared_ptr<llm::RateLimiter> shared_limiter(const llm::ProviderConfig& p) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<llm::RateLimiter>> limiters;
  if (p.type == "mock") {
    // Local scripted provider; there is no quota to protect.
    return std::make_shared<llm::RateLimiter>(1e12);
  }
  std::lock_guard lock(mu);
  auto& slot = limiters[p.endpoint + "|" + p.model + "|" + std::to_string(p.rate_limit_rpm)];
  if (!slot) slot = std::make_shared<llm::RateLimiter>(p.rate_limit_rpm);
  return slot;
}

std::unique_ptr<Agent> make_scripted(const AgentSpec& spec, Rng rng) {
  const auto& s = spec.strategy;
  if (s == "all_c") return make_all_c();
  if (s == "all_d") return make_all_d();
  if (s == "random") return make_random(spec.p, rng);
  if (s == "tit_for_tat_majority") return make_tit_for_tat_majority();
  if (s == "grim") return make_grim();
  if (s == "fermi_imitate") return make_fermi_imitate(spec.beta, rng, spec.initial_cooperate);
  throw ConfigError("unknown strategy '" + s + "'", "strategy");
}

struct Decision {
  Action action = Action::Defect;
  bool substituted = false;
};

class Repetition {
 public:
  Repetition(const ExperimentConfig& config, int index, const RunOptions& options)
      : config_(config), options_(options), index_(index) {
    result_.index = index;
    result_.seed = derive_seed(config.master_seed, static_cast<std::uint64_t>(index));
    control_ = options.control ? options.control : std::make_shared<RunControl>();
    cancel_ = std::make_shared<std::atomic<bool>>(false);
    control_->watch(cancel_);
    transcript_ = std::make_shared<llm::Transcript>();
  }

  RepetitionResult run() {
    emit("repetition_started", 0, {{"seed", result_.seed}});
    try {
      build_agents();
      play();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      fail("error", e.what(), static_cast<int>(result_.records.size()) + 1);
    }
    for (std::size_t i = 0; i < config_.agents.size(); ++i) {
      if (config_.agents[i].kind == AgentKind::Chat) {
        control_->dialogue(agent_id(config_, i))->set_listener(nullptr);
      }
    }
    result_.transcript = transcript_->events();
    result_.status.completed = result_.status.reason.empty();
    emit("repetition_finished", 0, to_json(result_.status));
    return std::move(result_);
  }

 private:
  void emit(const char* type, int round, nlohmann::json data) {
    if (options_.events) options_.events->append(type, index_, round, std::move(data));
  }

  void fail(std::string reason, std::string message, int round) {
    if (!result_.status.reason.empty()) return;
    result_.status.reason = std::move(reason);
    result_.status.message = std::move(message);
    result_.status.round = round;
  }

  void build_agents() {
    const std::size_t n = config_.topology.n;
    if (options_.events) {
      auto* events = options_.events;
      const int rep = index_;
      transcript_->set_listener([events, rep](const llm::TranscriptEvent& e) {
        nlohmann::json j;
        llm::to_json(j, e);
        events->append("dialogue", rep, e.round, std::move(j));
      });
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& spec = config_.agents[i];
      const std::string id = agent_id(config_, i);
      std::unique_ptr<Agent> agent;
      switch (spec.kind) {
        case AgentKind::Scripted:
          agent = make_scripted(spec, Rng(derive_seed(result_.seed, Stream::Agent, i)));
          break;
        case AgentKind::Replay:
          agent = std::make_unique<ReplayAgent>(spec.trace);
          break;
        case AgentKind::Human:
          agent = std::make_unique<HumanAgent>(
              control_->inbox(id),
              std::chrono::milliseconds(static_cast<std::int64_t>(config_.human_timeout_s * 1000)));
          break;
        case AgentKind::Chat: {
          auto transport = options_.transport_factory
                               ? options_.transport_factory(spec)
                               : llm::make_transport(spec.provider, &spec.script);
          auto client = std::make_shared<llm::ChatClient>(
              spec.provider, std::move(transport), shared_limiter(spec.provider),
              options_.clock ? options_.clock : llm::system_clock());
          auto dialogue = control_->dialogue(id);
          if (options_.events) {
            auto* events = options_.events;
            const int rep = index_;
            dialogue->set_listener([events, rep, id, this](int attempts, bool failed) {
              events->append("dialogue_flagged", rep, current_round_,
                             {{"agent", id}, {"attempts", attempts}, {"failed", failed}});
            });
          }
          agent = std::make_unique<llm::ChatAgent>(
              std::move(client), transcript_, dialogue, llm::PromptTemplateSet::defaults(),
              std::chrono::milliseconds(static_cast<std::int64_t>(config_.operator_window_s * 1000)));
          break;
        }
      }
      AgentContext ctx{id, i, config_.params, config_.topology, config_.rounds,
                       config_.announced_rounds, cancel_};
      agent->start(ctx);
      agents_.push_back(std::move(agent));
    }
  }

  Graph base_graph() const {
    const auto& t = config_.topology;
    switch (t.mode) {
      case TopologyMode::FixedRing: return circulant(t.n, t.k);
      case TopologyMode::Star: return star(t.n - 1);
      case TopologyMode::WellMixed: break;
    }
    return {};
  }

  void cancel_round() {
    cancel_->store(true);
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      if (agents_[i]->kind() == AgentKind::Human) control_->inbox(agent_id(config_, i))->wake();
    }
  }

  // Collects every decision of round r; nullopt if the repetition failed.
  std::optional<std::vector<Decision>> collect(int r) {
    const std::size_t n = agents_.size();
    std::vector<Decision> decisions(n);
    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < n; ++i) {
      const auto kind = agents_[i]->kind();
      if (kind == AgentKind::Human || kind == AgentKind::Chat) {
        live.push_back(i);
      } else {
        decisions[i].action = agents_[i]->decide(r);
      }
    }
    if (live.empty()) return decisions;

    for (std::size_t i : live) {
      if (agents_[i]->kind() == AgentKind::Human) {
        const auto id = agent_id(config_, i);
        control_->inbox(id)->open(r);
        emit("awaiting_input", r, {{"agent", id}});
      }
    }
    auto slots = std::make_shared<std::counting_semaphore<>>(config_.max_parallel);
    std::vector<std::future<Decision>> futures;
    for (std::size_t i : live) {
      futures.push_back(std::async(std::launch::async, [this, i, r, slots]() -> Decision {
        slots->acquire();
        struct Release {
          std::counting_semaphore<>* s;
          ~Release() { s->release(); }
        } release{slots.get()};
        try {
          return {agents_[i]->decide(r), false};
        } catch (const HumanTimeout&) {
          if (config_.failure_policy.kind == FailurePolicy::Kind::Substitute) {
            return {config_.failure_policy.substitute, true};
          }
          cancel_round();
          throw;
        } catch (const Aborted&) {
          throw;
        } catch (...) {
          cancel_round();
          throw;
        }
      }));
    }
    // Failure of the lowest-index agent wins; an abort caused by another
    // agent's failure is not a reason of its own.
    std::optional<RepetitionStatus> failure;
    bool aborted = false;
    for (std::size_t f = 0; f < futures.size(); ++f) {
      const auto id = agent_id(config_, live[f]);
      try {
        decisions[live[f]] = futures[f].get();
        continue;
      } catch (const RectificationFailure& e) {
        if (!failure) failure = RepetitionStatus{false, "rectification", id + ": " + e.what(), r};
      } catch (const TransportError& e) {
        if (!failure) failure = RepetitionStatus{false, "transport", id + ": " + e.what(), r};
      } catch (const HumanTimeout& e) {
        if (!failure) failure = RepetitionStatus{false, "human_timeout", e.what(), r};
      } catch (const Aborted&) {
        aborted = true;
      } catch (const std::exception& e) {
        if (!failure) failure = RepetitionStatus{false, "error", id + ": " + e.what(), r};
      }
    }
    if (failure) {
      fail(failure->reason, failure->message, r);
      return std::nullopt;
    }
    if (aborted || control_->aborted()) {
      fail("aborted", "aborted by operator", r);
      return std::nullopt;
    }
    return decisions;
  }

  void play() {
    const std::size_t n = config_.topology.n;
    const bool well_mixed = config_.topology.mode == TopologyMode::WellMixed;
    Graph graph = well_mixed ? Graph{} : base_graph();
    std::vector<std::vector<NodeId>> labels;
    if (!well_mixed) {
      labels = neighbor_labels(graph, derive_seed(result_.seed, Stream::Labels, 0),
                               config_.shuffle_labels);
    }
    for (int r = 1; r <= config_.rounds; ++r) {
      current_round_ = r;
      if (control_->aborted()) {
        fail("aborted", "aborted by operator", r);
        return;
      }
      if (well_mixed) {
        Rng rng(derive_seed(result_.seed, Stream::Topology, static_cast<std::uint64_t>(r)));
        graph = sample_regular(n, config_.topology.k, rng);
        labels = neighbor_labels(graph,
                                 derive_seed(result_.seed, Stream::Labels, static_cast<std::uint64_t>(r)),
                                 config_.shuffle_labels);
      }
      if (options_.events) {
        nlohmann::json g;
        to_json(g, graph);
        emit("round_started", r, {{"graph", std::move(g)}});
      }
      auto decisions = collect(r);
      if (!decisions) return;
      std::vector<Action> actions(n);
      for (std::size_t i = 0; i < n; ++i) {
        actions[i] = (*decisions)[i].action;
        const auto id = agent_id(config_, i);
        if ((*decisions)[i].substituted) {
          emit("action_substituted", r, {{"agent", id}, {"action", to_string(actions[i])}});
        }
        emit("action_recorded", r, {{"agent", id}, {"node", i}, {"action", to_string(actions[i])}});
      }
      RoundRecord record = resolve_round(actions, graph, config_.params, r);
      emit("round_resolved", r,
           {{"cooperation", cooperation_fraction(record.actions)}, {"net", record.net}});
      for (std::size_t i = 0; i < n; ++i) {
        auto obs = make_observation(record, i, labels[i], config_.params);
        if (agents_[i]->kind() == AgentKind::Human && options_.events) {
          emit("observation", r,
               {{"agent", agent_id(config_, i)},
                {"feedback", llm::render_feedback(obs, config_.params).content}});
        }
        agents_[i]->observe(obs);
      }
      result_.records.push_back(std::move(record));
      result_.graphs.push_back(graph);
    }
  }

  const ExperimentConfig& config_;
  const RunOptions& options_;
  int index_;
  std::shared_ptr<RunControl> control_;
  CancelFlag cancel_;
  std::shared_ptr<llm::Transcript> transcript_;
  std::vector<std::unique_ptr<Agent>> agents_;
  RepetitionResult result_;
  std::atomic<int> current_round_{0};
};

}  // namespace

RepetitionResult run_repetition(const ExperimentConfig& config, int index, const RunOptions& options) {
  return Repetition(config, index, options).run();
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  ExperimentResult result;
  result.config = config;
  result.repetitions.resize(static_cast<std::size_t>(config.repetitions));
  if (options.events) {
    options.events->append("experiment_started", -1, 0, {{"config", to_json(config)}});
  }
  const int jobs = all_offline(config) ? std::max(1, options.jobs) : 1;
  if (jobs == 1) {
    for (int r = 0; r < config.repetitions; ++r) {
      result.repetitions[static_cast<std::size_t>(r)] = run_repetition(config, r, options);
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    std::mutex err_mu;
    std::exception_ptr error;
    for (int w = 0; w < std::min(jobs, config.repetitions); ++w) {
      workers.emplace_back([&] {
        for (int r = next++; r < config.repetitions; r = next++) {
          try {
            result.repetitions[static_cast<std::size_t>(r)] = run_repetition(config, r, options);
          } catch (...) {
            std::lock_guard lock(err_mu);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
    for (auto& w : workers) w.join();
    if (error) std::rethrow_exception(error);
  }
  if (options.events) {
    int done = 0;
    for (const auto& r : result.repetitions) done += r.status.completed ? 1 : 0;
    options.events->append("experiment_finished", -1, 0,
                           {{"completed_repetitions", done},
                            {"repetitions", config.repetitions}});
  }
  return result;
}

std::vector<double> focal_cooperation(const ExperimentResult& result) {
  const auto done = result.completed();
  if (done.empty()) throw InputError("no completed repetitions");
  std::vector<double> series(static_cast<std::size_t>(result.config.rounds), 0.0);
  for (const auto* rep : done) {
    for (std::size_t r = 0; r < series.size(); ++r) {
      series[r] += rep->records.at(r).actions.at(0) == Action::Cooperate ? 1.0 : 0.0;
    }
  }
  for (auto& v : series) v /= static_cast<double>(done.size());
  return series;
}

std::vector<double> run_stimulus(const StimulusSpec& spec, const AgentSpec& focal,
                                 const GameParams& params, std::uint64_t master_seed,
                                 const RunOptions& options) {
  return focal_cooperation(
      run_experiment(make_stimulus_config(spec, focal, params, master_seed), options));
}

namespace {

void check_transcript(const ExperimentConfig& config, const RepetitionResult& rep) {
  for (std::size_t i = 0; i < config.agents.size(); ++i) {
    if (config.agents[i].kind != AgentKind::Chat) continue;
    const auto id = agent_id(config, i);
    for (const auto& record : rep.records) {
      std::optional<Action> said;
      for (const auto& e : rep.transcript) {
        if (e.agent == id && e.round == record.round_index && e.dir == "in" && e.role == "agent") {
          said = llm::parse_action(e.content);
        }
      }
      if (!said) {
        throw IntegrityError("transcript of " + id + " has no decision", record.round_index);
      }
      if (*said != record.actions.at(i)) {
        throw IntegrityError("transcript of " + id + " disagrees with the recorded action",
                             record.round_index);
      }
    }
  }
}

}  // namespace

ExperimentResult replay(const ExperimentResult& recorded) {
  const auto& config = recorded.config;
  const std::size_t n = config.topology.n;
  ExperimentResult out;
  out.id = recorded.id;
  out.config = config;
  for (const auto& rep : recorded.repetitions) {
    RepetitionResult replayed;
    replayed.index = rep.index;
    replayed.seed = rep.seed;
    replayed.status = rep.status;
    replayed.transcript = rep.transcript;
    if (rep.seed != derive_seed(config.master_seed, static_cast<std::uint64_t>(rep.index))) {
      throw IntegrityError("repetition " + std::to_string(rep.index) + " seed does not match", 1);
    }
    const std::size_t expected = rep.status.completed ? static_cast<std::size_t>(config.rounds)
                                                      : static_cast<std::size_t>(rep.status.round - 1);
    if (rep.records.size() != expected) {
      const int first_missing = static_cast<int>(std::min(rep.records.size(), expected)) + 1;
      throw IntegrityError("repetition " + std::to_string(rep.index) + " is truncated", first_missing);
    }
    if (rep.graphs.size() != rep.records.size()) {
      throw IntegrityError("graph count differs from record count",
                           static_cast<int>(std::min(rep.graphs.size(), rep.records.size())) + 1);
    }
    std::vector<std::unique_ptr<Agent>> agents;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<Action> trace;
      for (const auto& rec : rep.records) {
        if (rec.actions.size() != n) throw IntegrityError("wrong action count", rec.round_index);
        trace.push_back(rec.actions[i]);
      }
      agents.push_back(std::make_unique<ReplayAgent>(std::move(trace)));
      agents.back()->start({agent_id(config, i), i, config.params, config.topology, config.rounds,
                            config.announced_rounds, nullptr});
    }
    for (std::size_t r = 0; r < rep.records.size(); ++r) {
      const int round = static_cast<int>(r) + 1;
      const auto& stored = rep.records[r];
      if (stored.round_index != round) throw IntegrityError("round index out of sequence", round);
      Graph expected_graph;
      switch (config.topology.mode) {
        case TopologyMode::FixedRing:
          expected_graph = circulant(n, config.topology.k);
          break;
        case TopologyMode::Star:
          expected_graph = star(n - 1);
          break;
        case TopologyMode::WellMixed: {
          Rng rng(derive_seed(rep.seed, Stream::Topology, static_cast<std::uint64_t>(round)));
          expected_graph = sample_regular(n, config.topology.k, rng);
          break;
        }
      }
      if (!(rep.graphs[r] == expected_graph)) throw IntegrityError("graph does not match the seed", round);
      std::vector<Action> actions(n);
      for (std::size_t i = 0; i < n; ++i) actions[i] = agents[i]->decide(round);
      RoundRecord record = resolve_round(actions, rep.graphs[r], config.params, round);
      if (!(record == stored)) throw IntegrityError("recorded round differs from its re-execution", round);
      for (std::size_t i = 0; i < n; ++i) {
        auto nb = rep.graphs[r].neighbors(i);
        std::vector<NodeId> order(nb.begin(), nb.end());
        agents[i]->observe(make_observation(record, i, order, config.params));
      }
      replayed.records.push_back(std::move(record));
      replayed.graphs.push_back(rep.graphs[r]);
    }
    check_transcript(config, rep);
    out.repetitions.push_back(std::move(replayed));
  }
  return out;
}

const char* to_string(ExperimentRun::State state) {
  switch (state) {
    case ExperimentRun::State::Running: return "running";
    case ExperimentRun::State::Completed: return "completed";
    case ExperimentRun::State::Failed: return "failed";
    case ExperimentRun::State::Aborted: return "aborted";
  }
  return "?";
}

ExperimentRun::ExperimentRun(std::string id, ExperimentConfig config, RunOptions options)
    : id_(std::move(id)), config_(std::move(config)) {
  config_.validate();
  control_ = options.control ? options.control : std::make_shared<RunControl>();
  // Register handles up front so control requests can find them immediately.
  for (std::size_t i = 0; i < config_.agents.size(); ++i) {
    if (config_.agents[i].kind == AgentKind::Human) control_->inbox(agent_id(config_, i));
    if (config_.agents[i].kind == AgentKind::Chat) control_->dialogue(agent_id(config_, i));
  }
  options.events = &events_;
  options.control = control_;
  thread_ = std::thread([this, options] {
    State final_state = State::Failed;
    std::optional<ExperimentResult> result;
    try {
      result = run_experiment(config_, options);
      result->id = id_;
      if (control_->aborted()) {
        final_state = State::Aborted;
      } else if (result->all_completed()) {
        final_state = State::Completed;
      }
    } catch (const std::exception& e) {
      events_.append("experiment_finished", -1, 0, {{"error", e.what()}});
    }
    {
      std::lock_guard lock(mu_);
      state_ = final_state;
      result_ = std::move(result);
    }
    events_.close();
  });
}

ExperimentRun::~ExperimentRun() {
  abort();
  join();
}

ExperimentRun::State ExperimentRun::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

std::optional<ExperimentResult> ExperimentRun::result() const {
  std::lock_guard lock(mu_);
  return result_;
}

void ExperimentRun::abort() {
  if (state() == State::Running) control_->abort();
}

void ExperimentRun::join() {
  if (thread_.joinable()) thread_.join();
}

}  // namespace netpd

#include "netpd/config.hpp"

#include <set>

#include "netpd/errors.hpp"
#include "netpd/json_util.hpp"
#include "netpd/llm/mock.hpp"

namespace netpd {

using namespace json_util;

bool operator==(const AgentSpec& a, const AgentSpec& b) {
  return to_json(a) == to_json(b);
}

namespace {

const char* kind_name(AgentKind kind) {
  switch (kind) {
    case AgentKind::Scripted: return "scripted";
    case AgentKind::Replay: return "replay";
    case AgentKind::Human: return "human";
    case AgentKind::Chat: return "chat";
  }
  return "?";
}

AgentKind kind_from(const std::string& text, const std::string& field) {
  if (text == "scripted") return AgentKind::Scripted;
  if (text == "replay") return AgentKind::Replay;
  if (text == "human") return AgentKind::Human;
  if (text == "chat") return AgentKind::Chat;
  throw ConfigError("unknown agent kind '" + text + "'", field);
}

llm::ProviderConfig parse_provider(const nlohmann::json& j, const std::string& field) {
  reject_unknown(j, {"type", "endpoint", "model", "temperature", "seed", "timeout_s",
                     "max_retries", "rate_limit_rpm", "credential_env"},
                 field);
  llm::ProviderConfig p;
  p.type = get_or<std::string>(j, "type", p.type, field);
  p.endpoint = get_or<std::string>(j, "endpoint", p.endpoint, field);
  p.model = get_or<std::string>(j, "model", p.model, field);
  p.temperature = get_or<double>(j, "temperature", p.temperature, field);
  if (j.contains("seed") && !j.at("seed").is_null()) p.seed = get_int(j, "seed", field);
  p.timeout_s = get_or<double>(j, "timeout_s", p.timeout_s, field);
  p.max_retries = static_cast<int>(get_int_or(j, "max_retries", p.max_retries, field));
  p.rate_limit_rpm = get_or<double>(j, "rate_limit_rpm", p.rate_limit_rpm, field);
  p.credential_env = get_or<std::string>(j, "credential_env", p.credential_env, field);
  try {
    p.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(e.detail(), field);
  }
  return p;
}

nlohmann::json provider_json(const llm::ProviderConfig& p) {
  nlohmann::json j{{"type", p.type},           {"model", p.model},
                   {"temperature", p.temperature}, {"timeout_s", p.timeout_s},
                   {"max_retries", p.max_retries}, {"rate_limit_rpm", p.rate_limit_rpm}};
  if (!p.endpoint.empty()) j["endpoint"] = p.endpoint;
  if (p.seed) j["seed"] = *p.seed;
  if (!p.credential_env.empty()) j["credential_env"] = p.credential_env;
  return j;
}

StimulusSpec parse_stimulus(const nlohmann::json& j, const std::string& field) {
  reject_unknown(j, {"neighbor_count", "pre_change_cooperators", "post_change_cooperators",
                     "change_round", "rounds", "runs"},
                 field);
  StimulusSpec s;
  s.neighbor_count = static_cast<int>(get_int_or(j, "neighbor_count", s.neighbor_count, field));
  s.pre_change_cooperators =
      static_cast<int>(get_int_or(j, "pre_change_cooperators", s.pre_change_cooperators, field));
  s.post_change_cooperators =
      static_cast<int>(get_int_or(j, "post_change_cooperators", s.post_change_cooperators, field));
  s.change_round = static_cast<int>(get_int_or(j, "change_round", s.change_round, field));
  s.rounds = static_cast<int>(get_int_or(j, "rounds", s.rounds, field));
  s.runs = static_cast<int>(get_int_or(j, "runs", s.runs, field));
  s.validate();
  return s;
}

nlohmann::json stimulus_json(const StimulusSpec& s) {
  return {{"neighbor_count", s.neighbor_count},
          {"pre_change_cooperators", s.pre_change_cooperators},
          {"post_change_cooperators", s.post_change_cooperators},
          {"change_round", s.change_round},
          {"rounds", s.rounds},
          {"runs", s.runs}};
}

}  // namespace

std::vector<Action> parse_trace(const std::string& text, const std::string& field) {
  std::vector<Action> out;
  for (char c : text) {
    if (c == 'C') {
      out.push_back(Action::Cooperate);
    } else if (c == 'D') {
      out.push_back(Action::Defect);
    } else {
      throw ConfigError("trace may contain only 'C' and 'D'", field);
    }
  }
  return out;
}

std::string trace_string(const std::vector<Action>& trace) {
  std::string s;
  for (Action a : trace) s += to_char(a);
  return s;
}

void StimulusSpec::validate() const {
  const std::string f = "stimulus";
  if (neighbor_count < 1) throw ConfigError("must be >= 1", f + ".neighbor_count");
  if (pre_change_cooperators < 0 || pre_change_cooperators > neighbor_count) {
    throw ConfigError("must lie in [0, neighbor_count]", f + ".pre_change_cooperators");
  }
  if (post_change_cooperators < 0 || post_change_cooperators > pre_change_cooperators) {
    throw ConfigError("must lie in [0, pre_change_cooperators]", f + ".post_change_cooperators");
  }
  if (rounds < 1) throw ConfigError("must be >= 1", f + ".rounds");
  if (change_round < 0 || change_round >= rounds) {
    throw ConfigError("must be below rounds", f + ".change_round");
  }
  if (runs < 1) throw ConfigError("must be >= 1", f + ".runs");
}

GameParams parse_params(const nlohmann::json& j, const std::string& field, GameParams base) {
  reject_unknown(j, {"cost_per_edge", "bc_ratio", "points_per_dollar", "floor_currency"}, field);
  base.cost_per_edge = get_int_or(j, "cost_per_edge", base.cost_per_edge, field);
  base.bc_ratio = get_int_or(j, "bc_ratio", base.bc_ratio, field);
  base.points_per_dollar = get_int_or(j, "points_per_dollar", base.points_per_dollar, field);
  base.floor_currency = get_or<bool>(j, "floor_currency", base.floor_currency, field);
  base.validate();
  return base;
}

nlohmann::json to_json(const GameParams& p) {
  return {{"cost_per_edge", p.cost_per_edge},
          {"bc_ratio", p.bc_ratio},
          {"points_per_dollar", p.points_per_dollar},
          {"floor_currency", p.floor_currency}};
}

AgentSpec parse_agent_spec(const nlohmann::json& j, const std::string& field) {
  require_object(j, field);
  AgentSpec s;
  s.kind = kind_from(get<std::string>(j, "kind", field), join(field, "kind"));
  s.id = get_or<std::string>(j, "id", "", field);
  switch (s.kind) {
    case AgentKind::Scripted: {
      s.strategy = get<std::string>(j, "strategy", field);
      if (s.strategy == "random") {
        reject_unknown(j, {"kind", "id", "repeat", "strategy", "p"}, field);
        s.p = get<double>(j, "p", field);
        if (!(s.p >= 0.0 && s.p <= 1.0)) throw ConfigError("must lie in [0, 1]", join(field, "p"));
      } else if (s.strategy == "fermi_imitate") {
        reject_unknown(j, {"kind", "id", "repeat", "strategy", "beta", "initial_cooperate"}, field);
        s.beta = get_or<double>(j, "beta", s.beta, field);
        s.initial_cooperate = get_or<double>(j, "initial_cooperate", s.initial_cooperate, field);
        if (!(s.beta >= 0.0)) throw ConfigError("must be non-negative", join(field, "beta"));
        if (!(s.initial_cooperate >= 0.0 && s.initial_cooperate <= 1.0)) {
          throw ConfigError("must lie in [0, 1]", join(field, "initial_cooperate"));
        }
      } else if (s.strategy == "all_c" || s.strategy == "all_d" ||
                 s.strategy == "tit_for_tat_majority" || s.strategy == "grim") {
        reject_unknown(j, {"kind", "id", "repeat", "strategy"}, field);
      } else {
        throw ConfigError("unknown strategy '" + s.strategy + "'", join(field, "strategy"));
      }
      break;
    }
    case AgentKind::Replay:
      reject_unknown(j, {"kind", "id", "repeat", "trace"}, field);
      s.trace = parse_trace(get<std::string>(j, "trace", field), join(field, "trace"));
      break;
    case AgentKind::Human:
      reject_unknown(j, {"kind", "id", "repeat"}, field);
      break;
    case AgentKind::Chat:
      reject_unknown(j, {"kind", "id", "repeat", "provider", "script"}, field);
      s.provider = j.contains("provider") ? parse_provider(j.at("provider"), join(field, "provider"))
                                          : llm::ProviderConfig{};
      if (j.contains("script")) {
        s.script = j.at("script");
        llm::parse_mock_scenario(s.script, join(field, "script"));
      }
      if (s.provider.type == "mock" && s.script.is_null()) {
        throw ConfigError("a mock provider needs a script", join(field, "script"));
      }
      break;
  }
  return s;
}

nlohmann::json to_json(const AgentSpec& s) {
  nlohmann::json j{{"kind", kind_name(s.kind)}};
  if (!s.id.empty()) j["id"] = s.id;
  switch (s.kind) {
    case AgentKind::Scripted:
      j["strategy"] = s.strategy;
      if (s.strategy == "random") j["p"] = s.p;
      if (s.strategy == "fermi_imitate") {
        j["beta"] = s.beta;
        j["initial_cooperate"] = s.initial_cooperate;
      }
      break;
    case AgentKind::Replay:
      j["trace"] = trace_string(s.trace);
      break;
    case AgentKind::Human:
      break;
    case AgentKind::Chat:
      j["provider"] = provider_json(s.provider);
      if (!s.script.is_null()) j["script"] = s.script;
      break;
  }
  return j;
}

std::vector<AgentSpec> parse_roster(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError("expected an array", field);
  std::vector<AgentSpec> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto path = index(field, i);
    auto spec = parse_agent_spec(j[i], path);
    const auto repeat = get_int_or(j[i], "repeat", 1, path);
    if (repeat < 1) throw ConfigError("must be >= 1", join(path, "repeat"));
    if (repeat > 1 && !spec.id.empty()) throw ConfigError("'id' cannot be combined with 'repeat'", path);
    out.insert(out.end(), static_cast<std::size_t>(repeat), spec);
  }
  return out;
}

ExperimentConfig make_stimulus_config(const StimulusSpec& spec, const AgentSpec& focal,
                                      const GameParams& params, std::uint64_t master_seed) {
  spec.validate();
  ExperimentConfig c;
  c.name = "stimulus";
  c.topology = {static_cast<std::size_t>(spec.neighbor_count + 1),
                static_cast<std::size_t>(spec.neighbor_count), TopologyMode::Star};
  c.params = params;
  c.rounds = spec.rounds;
  c.repetitions = spec.runs;
  c.master_seed = master_seed;
  c.stimulus = spec;
  AgentSpec f = focal;
  if (f.id.empty()) f.id = "focal";
  c.agents.push_back(f);
  for (int leaf = 1; leaf <= spec.neighbor_count; ++leaf) {
    AgentSpec s;
    s.kind = AgentKind::Replay;
    s.id = "neighbor" + std::to_string(leaf);
    for (int r = 1; r <= spec.rounds; ++r) {
      const int cooperators = r <= spec.change_round ? spec.pre_change_cooperators
                                                     : spec.post_change_cooperators;
      s.trace.push_back(leaf <= cooperators ? Action::Cooperate : Action::Defect);
    }
    c.agents.push_back(std::move(s));
  }
  return c;
}

void ExperimentConfig::validate() const {
  topology.validate();
  params.validate();
  if (rounds < 1) throw ConfigError("must be >= 1", "rounds");
  if (repetitions < 1) throw ConfigError("must be >= 1", "repetitions");
  if (agents.size() != topology.n) {
    throw ConfigError("roster has " + std::to_string(agents.size()) + " agents but topology.n is " +
                          std::to_string(topology.n),
                      "agents");
  }
  if (topology.mode == TopologyMode::Star && !stimulus) {
    throw ConfigError("star topology is reserved for stimulus experiments", "topology.mode");
  }
  if (!(human_timeout_s > 0)) throw ConfigError("must be positive", "human_timeout");
  if (announced_rounds < 1) throw ConfigError("must be >= 1", "announced_rounds");
  if (!(operator_window_s >= 0)) throw ConfigError("must be non-negative", "operator_window");
  if (max_parallel < 1) throw ConfigError("must be >= 1", "max_parallel");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    const std::string id = a.id.empty() ? "a" + std::to_string(i) : a.id;
    if (!ids.insert(id).second) throw ConfigError("duplicate agent id '" + id + "'", index("agents", i));
    if (a.kind == AgentKind::Replay && a.trace.size() < static_cast<std::size_t>(rounds)) {
      throw ConfigError("trace shorter than the number of rounds", index("agents", i) + ".trace");
    }
  }
  if (stimulus) stimulus->validate();
}

std::vector<NodeId> ExperimentConfig::subjects() const {
  if (stimulus) return {0};
  std::vector<NodeId> all(topology.n);
  for (NodeId i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

ExperimentConfig parse_config(const nlohmann::json& j) {
  reject_unknown(j, {"name", "topology", "params", "rounds", "repetitions", "master_seed", "agents",
                     "failure_policy", "human_timeout", "stimulus", "announced_rounds",
                     "shuffle_labels", "operator_window", "max_parallel"},
                 "");
  ExperimentConfig c;
  c.name = get_or<std::string>(j, "name", c.name, "");
  if (j.contains("params")) c.params = parse_params(j.at("params"), "params");
  if (j.contains("master_seed")) {
    const auto& seed = j.at("master_seed");
    if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned() &&
                                      seed.get<std::int64_t>() < 0)) {
      throw ConfigError("expected a non-negative integer", "master_seed");
    }
    c.master_seed = seed.get<std::uint64_t>();
  }
  if (j.contains("failure_policy")) {
    const auto& fp = j.at("failure_policy");
    if (fp.is_string() && fp.get<std::string>() == "fail_run") {
      c.failure_policy = {};
    } else if (fp.is_object()) {
      reject_unknown(fp, {"substitute"}, "failure_policy");
      auto a = action_from_string(get<std::string>(fp, "substitute", "failure_policy"));
      if (!a) throw ConfigError("must be \"C\" or \"D\"", "failure_policy.substitute");
      c.failure_policy = {FailurePolicy::Kind::Substitute, *a};
    } else {
      throw ConfigError("expected \"fail_run\" or {\"substitute\": \"C\"|\"D\"}", "failure_policy");
    }
  }
  c.human_timeout_s = get_or<double>(j, "human_timeout", c.human_timeout_s, "");
  c.announced_rounds = static_cast<int>(get_int_or(j, "announced_rounds", c.announced_rounds, ""));
  c.shuffle_labels = get_or<bool>(j, "shuffle_labels", c.shuffle_labels, "");
  c.operator_window_s = get_or<double>(j, "operator_window", c.operator_window_s, "");
  c.max_parallel = static_cast<int>(get_int_or(j, "max_parallel", c.max_parallel, ""));

  if (!j.contains("agents")) throw ConfigError("missing required key", "agents");
  auto roster = parse_roster(j.at("agents"), "agents");

  if (j.contains("stimulus")) {
    for (const char* key : {"topology", "rounds", "repetitions"}) {
      if (j.contains(key)) {
        throw ConfigError("not allowed with 'stimulus' (taken from the stimulus block)", key);
      }
    }
    if (roster.size() != 1) throw ConfigError("stimulus experiments list only the focal agent", "agents");
    auto spec = parse_stimulus(j.at("stimulus"), "stimulus");
    auto expanded = make_stimulus_config(spec, roster.front(), c.params, c.master_seed);
    expanded.name = c.name;
    expanded.failure_policy = c.failure_policy;
    expanded.human_timeout_s = c.human_timeout_s;
    expanded.announced_rounds = c.announced_rounds;
    expanded.shuffle_labels = c.shuffle_labels;
    expanded.operator_window_s = c.operator_window_s;
    expanded.max_parallel = c.max_parallel;
    expanded.validate();
    return expanded;
  }

  if (!j.contains("topology")) throw ConfigError("missing required key", "topology");
  const auto& t = j.at("topology");
  reject_unknown(t, {"n", "k", "mode"}, "topology");
  const auto n = get_int(t, "n", "topology");
  const auto k = get_int(t, "k", "topology");
  if (n < 0) throw ConfigError("must be positive", "topology.n");
  if (k < 0) throw ConfigError("must be positive", "topology.k");
  c.topology.n = static_cast<std::size_t>(n);
  c.topology.k = static_cast<std::size_t>(k);
  try {
    c.topology.mode = topology_mode_from_string(get_or<std::string>(t, "mode", "fixed_ring", "topology"));
  } catch (const ConfigError& e) {
    throw ConfigError(e.detail(), "topology.mode");
  }
  c.rounds = static_cast<int>(get_int(j, "rounds", ""));
  c.repetitions = static_cast<int>(get_int(j, "repetitions", ""));
  c.agents = std::move(roster);
  c.validate();
  return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["name"] = c.name;
  j["params"] = to_json(c.params);
  j["master_seed"] = c.master_seed;
  j["failure_policy"] = c.failure_policy.kind == FailurePolicy::Kind::FailRun
                            ? nlohmann::json("fail_run")
                            : nlohmann::json{{"substitute", to_string(c.failure_policy.substitute)}};
  j["human_timeout"] = c.human_timeout_s;
  j["announced_rounds"] = c.announced_rounds;
  j["shuffle_labels"] = c.shuffle_labels;
  j["operator_window"] = c.operator_window_s;
  j["max_parallel"] = c.max_parallel;
  auto agents = nlohmann::json::array();
  if (c.stimulus) {
    j["stimulus"] = stimulus_json(*c.stimulus);
    agents.push_back(to_json(c.agents.front()));
  } else {
    j["topology"] = {{"n", c.topology.n}, {"k", c.topology.k}, {"mode", to_string(c.topology.mode)}};
    j["rounds"] = c.rounds;
    j["repetitions"] = c.repetitions;
    for (const auto& a : c.agents) agents.push_back(to_json(a));
  }
  j["agents"] = std::move(agents);
  return j;
}

}  // namespace netpd

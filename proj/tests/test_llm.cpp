#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "netpd/errors.hpp"
#include "netpd/llm/chat_agent.hpp"
#include "netpd/llm/http_transport.hpp"
#include "netpd/llm/mock.hpp"
#include "netpd/llm/parse.hpp"
#include "netpd/llm/prompts.hpp"
#include "netpd/llm/rectify.hpp"

using namespace netpd;
using namespace netpd::llm;
using namespace std::chrono_literals;
using nlohmann::json;

namespace {

std::vector<std::string> read_fixture_turns(const std::string& name) {
  std::ifstream in(std::string(NETPD_FIXTURE_DIR) + "/" + name);
  REQUIRE(in);
  std::vector<std::string> turns;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("--- ", 0) == 0) {
      turns.push_back(line.substr(4));
    } else if (!turns.empty()) {
      turns.back() += "\n" + line;
    }
  }
  return turns;
}

MockScenario replies(std::vector<std::string> texts) {
  MockScenario s;
  for (auto& t : texts) s.replies.push_back({std::move(t), std::nullopt});
  return s;
}

struct Fixture {
  std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>();
  std::shared_ptr<MockTransport> transport;
  std::shared_ptr<Transcript> transcript = std::make_shared<Transcript>();
  std::shared_ptr<DialogueControl> control = std::make_shared<DialogueControl>();
  std::shared_ptr<ChatClient> client;

  explicit Fixture(MockScenario scenario, ProviderConfig config = {}) {
    transport = std::make_shared<MockTransport>(std::move(scenario));
    client = std::make_shared<ChatClient>(config, transport, nullptr, clock);
  }
};

}  // namespace

TEST_CASE("strict action parsing") {
  CHECK(parse_action("C") == Action::Cooperate);
  CHECK(parse_action("D") == Action::Defect);
  CHECK(parse_action("c") == Action::Cooperate);
  CHECK(parse_action("  C.  ") == Action::Cooperate);
  CHECK(parse_action("\"D.\"") == Action::Defect);
  CHECK(parse_action("D. I will defect this round.") == Action::Defect);
  CHECK(parse_action("C. Let's cooperate") == Action::Cooperate);
  CHECK_FALSE(parse_action("I choose to cooperate"));
  CHECK_FALSE(parse_action("I will choose C"));
  CHECK_FALSE(parse_action("cooperate"));
  CHECK_FALSE(parse_action("CD"));
  CHECK_FALSE(parse_action("ok!"));
  CHECK_FALSE(parse_action(""));
  CHECK_FALSE(parse_action("   "));
  CHECK_FALSE(parse_action("C or D"));
}

TEST_CASE("opening matches the reference dialogue") {
  const auto turns = read_fixture_turns("prompting_dialogue.txt");
  REQUIRE(turns.size() == 14);
  GameParams p;
  p.bc_ratio = 2;
  const auto opening = render_opening(PromptTemplateSet::defaults(), p, 15);
  REQUIRE(opening.size() == 5);
  for (std::size_t i = 0; i < opening.size(); ++i) CHECK(opening[i] == turns[2 * i]);
  CHECK(PromptTemplateSet::defaults().action_request == turns[10]);
}

TEST_CASE("feedback matches the reference dialogue") {
  const auto turns = read_fixture_turns("prompting_dialogue.txt");
  const auto g = circulant(8, 2);
  std::vector<Action> a(8, Action::Defect);
  a[0] = a[1] = a[2] = a[7] = Action::Cooperate;
  GameParams p;
  p.bc_ratio = 2;
  const auto rec = resolve_round(a, g, p);
  const std::vector<NodeId> labels{1, 7};
  const auto msg = render_feedback(make_observation(rec, 0, labels, p), p,
                                   PromptTemplateSet::defaults(), 2);
  CHECK(msg.role == Role::Experimenter);
  CHECK(msg.content == turns[12]);
}

TEST_CASE("feedback rejects wrong neighbor count") {
  Observation o;
  o.round_index = 1;
  o.neighbors.resize(1);
  o.neighbors[0].label = 1;
  CHECK_THROWS_AS(render_feedback(o, GameParams{}, PromptTemplateSet::defaults(), 2),
                  TemplateError);
  o.neighbors[0].label = 2;
  CHECK_THROWS_AS(render_feedback(o, GameParams{}, PromptTemplateSet::defaults(), 1),
                  TemplateError);
}

TEST_CASE("template substitution") {
  CHECK(substitute("pay {cost} for {n}", {{"cost", "10"}, {"n", "x"}}) == "pay 10 for x");
  CHECK_THROWS_AS(substitute("{missing}", {}), TemplateError);
  CHECK_THROWS_AS(substitute("open {brace", {{"brace", "x"}}), TemplateError);
}

TEST_CASE("rectification resolves on the third reply") {
  Fixture f(replies({"ok!", "sure", "C"}));
  Dialogue d("focal", f.client, f.transcript, f.control);
  std::vector<std::pair<int, bool>> flags;
  f.control->set_listener([&](int n, bool failed) { flags.emplace_back(n, failed); });
  const auto s = request_action(d, "Please make a choice.", 1);
  CHECK(s.resolved());
  CHECK(s.action == Action::Cooperate);
  CHECK(s.attempts_used == 2);
  CHECK(flags == std::vector<std::pair<int, bool>>{{1, false}, {2, false}});
  CHECK_FALSE(f.control->flagged());
  int clarifications = 0;
  for (const auto& m : d.history()) {
    clarifications += m.content == "Please only reply with 'D' or 'C'.";
  }
  CHECK(clarifications == 2);
}

TEST_CASE("three ambiguous replies fail") {
  Fixture f(replies({"?", "?", "?", "C"}));
  Dialogue d("focal", f.client, f.transcript, f.control);
  const auto s = request_action(d, "Please make a choice.", 1);
  CHECK(s.failed());
  CHECK(s.attempts_used == 3);
  CHECK(f.transport->requests() == 3);
  CHECK(f.control->inject("C please") == DialogueControl::InjectResult::Gone);
}

TEST_CASE("a clean reply needs no rectification") {
  Fixture f(replies({"D"}));
  Dialogue d("focal", f.client, f.transcript, f.control);
  const auto s = request_action(d, "Please make a choice.", 1);
  CHECK(s.resolved());
  CHECK(s.action == Action::Defect);
  CHECK(s.attempts_used == 0);
  CHECK(f.control->inject("x") == DialogueControl::InjectResult::NotFlagged);
}

TEST_CASE("operator injection replaces the clarification") {
  Fixture f(replies({"hmm", "D"}));
  Dialogue d("focal", f.client, f.transcript, f.control, PromptTemplateSet::defaults(), 2000ms);
  f.control->set_listener([&](int, bool failed) {
    if (!failed) {
      CHECK(f.control->inject("Just the letter, please.") ==
            DialogueControl::InjectResult::Accepted);
    }
  });
  const auto s = request_action(d, "Please make a choice.", 1);
  CHECK(s.action == Action::Defect);
  const auto events = f.transcript->events();
  bool seen = false;
  for (const auto& e : events) {
    if (e.content == "Just the letter, please.") {
      CHECK(e.origin == "operator");
      CHECK(e.dir == "out");
      seen = true;
    }
  }
  CHECK(seen);
}

TEST_CASE("rate limiter spaces requests on virtual time") {
  ManualClock clock;
  RateLimiter limiter(30.0);
  for (int i = 0; i < 10; ++i) limiter.acquire(clock);
  CHECK(clock.now() >= 18s);
  CHECK(clock.now() < 19s);
}

TEST_CASE("client retries with exponential backoff") {
  MockScenario s;
  s.replies.push_back({std::nullopt, "timeout"});
  s.replies.push_back({std::nullopt, "timeout"});
  s.replies.push_back({"C.", std::nullopt});
  ProviderConfig cfg;
  cfg.rate_limit_rpm = 1e9;
  Fixture f(s, cfg);
  const std::vector<ChatMessage> msgs{{Role::Experimenter, "choose", "engine"}};
  Transcript t;
  const auto reply = f.client->chat(msgs, {"a", 1, &t});
  CHECK(reply.content == "C.");
  CHECK(f.transport->requests() == 3);
  CHECK(f.clock->now() >= 3s);
  CHECK(f.clock->now() < 3100ms);
  int errors = 0;
  for (const auto& e : t.events()) errors += e.role == "error";
  CHECK(errors == 2);
}

TEST_CASE("client gives up after max retries") {
  MockScenario s;
  s.replies.assign(5, {std::nullopt, "boom"});
  ProviderConfig cfg;
  cfg.max_retries = 3;
  cfg.rate_limit_rpm = 1e9;
  Fixture f(s, cfg);
  const std::vector<ChatMessage> msgs{{Role::Experimenter, "choose", "engine"}};
  CHECK_THROWS_AS(f.client->chat(msgs), TransportError);
  CHECK(f.transport->requests() == 4);
  CHECK(f.clock->now() >= 7s);
}

TEST_CASE("client rejects empty input") {
  Fixture f(replies({"C"}));
  CHECK_THROWS_AS(f.client->chat(std::vector<ChatMessage>{}), ProtocolError);
  const std::vector<ChatMessage> msgs{{Role::Experimenter, "", "engine"}};
  CHECK_THROWS_AS(f.client->chat(msgs), ProtocolError);
}

TEST_CASE("wire request body") {
  ProviderConfig cfg;
  cfg.model = "m1";
  cfg.temperature = 0.5;
  const std::vector<ChatMessage> msgs{{Role::System, "sys", "engine"},
                                      {Role::Experimenter, "hi", "engine"},
                                      {Role::Agent, "C", "provider"}};
  auto body = make_request_body(cfg, msgs);
  CHECK(body["model"] == "m1");
  CHECK(body["temperature"] == 0.5);
  CHECK_FALSE(body.contains("seed"));
  CHECK(body["messages"][1] == json{{"role", "user"}, {"content", "hi"}});
  CHECK(body["messages"][2]["role"] == "assistant");
  cfg.seed = 7;
  CHECK(make_request_body(cfg, msgs)["seed"] == 7);
}

TEST_CASE("mock scenario parsing") {
  auto s = parse_mock_scenario(json::parse(
      R"({"replies": ["C.", {"error": "timeout"}], "rules": [{"contains": "ready", "reply": "Yes."}], "fallback": "D"})"));
  CHECK(s.replies.size() == 2);
  CHECK(s.replies[1].error == "timeout");
  CHECK(s.rules.size() == 1);
  CHECK_THROWS_AS(parse_mock_scenario(json::parse(R"({"replys": []})")), ConfigError);
  MockTransport t(s);
  const json ready{{"model", "m"}, {"messages", {{{"role", "user"}, {"content", "are you ready?"}}}}};
  CHECK(t.send(ready, 0ms) == "Yes.");
  const json other{{"model", "m"}, {"messages", {{{"role", "user"}, {"content", "choose"}}}}};
  CHECK(t.send(other, 0ms) == "C.");
  CHECK_THROWS_AS(t.send(other, 0ms), TransportError);
  CHECK(t.send(other, 0ms) == "D");
}

TEST_CASE("http transport speaks the wire protocol") {
  MockProviderServer server(replies({"C.", "D"}));
  const auto endpoint = server.start();
  ::setenv("NETPD_TEST_TOKEN", "sekrit", 1);
  ProviderConfig cfg;
  cfg.type = "http";
  cfg.endpoint = endpoint;
  cfg.model = "remote";
  cfg.credential_env = "NETPD_TEST_TOKEN";
  cfg.rate_limit_rpm = 1e9;
  auto transport = make_transport(cfg, nullptr);
  ChatClient client(cfg, transport, nullptr, std::make_shared<ManualClock>());
  const std::vector<ChatMessage> msgs{{Role::Experimenter, "choose", "engine"}};
  CHECK(client.chat(msgs).content == "C.");
  CHECK(client.chat(msgs).content == "D");
  const auto got = server.received();
  REQUIRE(got.size() == 2);
  CHECK(got[0]["authorization"] == "Bearer sekrit");
  CHECK(got[0]["model"] == "remote");
  CHECK(got[0]["messages"][0]["content"] == "choose");
  server.stop();
}

TEST_CASE("http transport failures surface as transport errors") {
  MockProviderServer server(MockScenario{});
  const auto endpoint = server.start();
  HttpTransport t(endpoint);
  const json body{{"model", "m"}, {"messages", {{{"role", "user"}, {"content", "x"}}}}};
  CHECK_THROWS_AS(t.send(body, 2000ms), TransportError);
  server.stop();
  CHECK_THROWS_AS(t.send(body, 500ms), TransportError);
}

TEST_CASE("transport factory validates credentials and scripts") {
  ProviderConfig cfg;
  cfg.type = "http";
  cfg.endpoint = "http://127.0.0.1:9/v1";
  cfg.credential_env = "NETPD_TEST_UNSET_VARIABLE";
  ::unsetenv("NETPD_TEST_UNSET_VARIABLE");
  CHECK_THROWS_AS(make_transport(cfg, nullptr), ConfigError);
  ProviderConfig mock;
  CHECK_THROWS_AS(make_transport(mock, nullptr), ConfigError);
  cfg.endpoint = "not a url";
  cfg.credential_env.clear();
  CHECK_THROWS_AS(make_transport(cfg, nullptr), ConfigError);
}

TEST_CASE("chat agent plays the reference dialogue") {
  const auto turns = read_fixture_turns("prompting_dialogue.txt");
  std::vector<std::string> agent_turns;
  for (std::size_t i = 1; i < turns.size(); i += 2) agent_turns.push_back(turns[i]);
  Fixture f(replies(agent_turns));
  ChatAgent agent(f.client, f.transcript, f.control);
  AgentContext ctx;
  ctx.agent_id = "focal";
  ctx.params.bc_ratio = 2;
  ctx.rounds = 2;
  agent.start(ctx);
  CHECK(agent.decide(1) == Action::Cooperate);

  const auto g = circulant(8, 2);
  std::vector<Action> a(8, Action::Defect);
  a[0] = a[1] = a[2] = a[7] = Action::Cooperate;
  const auto rec = resolve_round(a, g, ctx.params);
  const std::vector<NodeId> labels{1, 7};
  agent.observe(make_observation(rec, 0, labels, ctx.params));
  CHECK(agent.decide(2) == Action::Cooperate);
  auto second = rec;
  second.round_index = 2;
  agent.observe(make_observation(second, 0, labels, ctx.params));
  CHECK(agent.pending_feedback().has_value());

  std::vector<std::string> seen;
  for (const auto& e : f.transcript->events()) seen.push_back(e.content);
  CHECK(seen == turns);
}

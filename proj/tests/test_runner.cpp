#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "netpd/config.hpp"
#include "netpd/errors.hpp"
#include "netpd/events.hpp"
#include "netpd/runner.hpp"
#include "netpd/storage.hpp"

using namespace netpd;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

ExperimentConfig scripted(std::size_t n, std::size_t k, std::vector<json> roster, int rounds,
                          int reps, long long bc = 2, const char* mode = "fixed_ring") {
  json doc = {{"topology", {{"n", n}, {"k", k}, {"mode", mode}}},
              {"params", {{"bc_ratio", bc}}},
              {"rounds", rounds},
              {"repetitions", reps},
              {"master_seed", 42},
              {"agents", roster}};
  return parse_config(doc);
}

json strat(const char* s) { return {{"kind", "scripted"}, {"strategy", s}}; }

ExperimentConfig mock_dialogue() {
  std::ifstream in(std::string(NETPD_PRESET_DIR) + "/mock-dialogue.json");
  REQUIRE(in);
  return parse_config(json::parse(in));
}

std::vector<std::string> fixture_turns() {
  std::ifstream in(std::string(NETPD_FIXTURE_DIR) + "/prompting_dialogue.txt");
  std::vector<std::string> turns;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("--- ", 0) == 0) turns.push_back(line.substr(4));
  }
  return turns;
}

RunOptions virtual_time() {
  RunOptions o;
  o.clock = std::make_shared<llm::ManualClock>();
  return o;
}

}  // namespace

TEST_CASE("all cooperators earn the benefit minus the cost every round") {
  const auto c = scripted(8, 4, {{{"kind", "scripted"}, {"strategy", "all_c"}, {"repeat", 8}}}, 5, 1, 6);
  const auto r = run_experiment(c);
  REQUIRE(r.repetitions.size() == 1);
  const auto& rep = r.repetitions[0];
  CHECK(rep.status.completed);
  REQUIRE(rep.records.size() == 5);
  for (const auto& rec : rep.records) {
    for (auto v : rec.net) CHECK(v == 4 * (60 - 10));
  }
}

TEST_CASE("alternating cooperators and defectors") {
  std::vector<json> roster;
  for (int i = 0; i < 8; ++i) roster.push_back(strat(i % 2 ? "all_d" : "all_c"));
  const auto r = run_experiment(scripted(8, 2, roster, 3, 1, 6));
  for (const auto& rec : r.repetitions[0].records) {
    for (std::size_t i = 0; i < 8; ++i) CHECK(rec.net[i] == (i % 2 ? 120 : -20));
  }
}

TEST_CASE("the mock dialogue run reproduces the reference transcript") {
  const auto c = mock_dialogue();
  const auto r = run_experiment(c, virtual_time());
  REQUIRE(r.all_completed());
  const auto& rep = r.repetitions[0];
  std::vector<std::string> seen;
  for (const auto& e : rep.transcript) seen.push_back(e.content);
  CHECK(seen == fixture_turns());
  const auto& first = rep.records[0];
  CHECK(first.paid[0] == 20);
  CHECK(first.gained[0] == 40);
  CHECK(first.net[1] == 20);
  CHECK(first.net[7] == 0);
  CHECK(replay(r).repetitions.size() == 1);
}

TEST_CASE("runs are deterministic in the master seed") {
  std::vector<json> roster{{{"kind", "scripted"}, {"strategy", "fermi_imitate"}, {"beta", 1.0},
                            {"initial_cooperate", 0.5}, {"repeat", 10}}};
  auto c = scripted(10, 4, roster, 12, 3, 4, "well_mixed");
  const auto a = run_experiment(c);
  const auto b = run_experiment(c);
  REQUIRE(a.repetitions.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.repetitions[i].seed == b.repetitions[i].seed);
    CHECK(a.repetitions[i].records == b.repetitions[i].records);
    CHECK(a.repetitions[i].graphs == b.repetitions[i].graphs);
  }
  CHECK(a.repetitions[0].records != a.repetitions[1].records);
  RunOptions par;
  par.jobs = 3;
  const auto p = run_experiment(c, par);
  for (std::size_t i = 0; i < 3; ++i) CHECK(p.repetitions[i].records == a.repetitions[i].records);
  c.master_seed = 43;
  CHECK(run_experiment(c).repetitions[0].records != a.repetitions[0].records);
}

TEST_CASE("well-mixed graphs change between rounds and replay") {
  std::vector<json> roster{{{"kind", "scripted"}, {"strategy", "random"}, {"p", 0.5}, {"repeat", 12}}};
  const auto r = run_experiment(scripted(12, 4, roster, 6, 1, 4, "well_mixed"));
  const auto& g = r.repetitions[0].graphs;
  REQUIRE(g.size() == 6);
  bool changed = false;
  for (std::size_t t = 1; t < g.size(); ++t) changed |= !(g[t] == g[0]);
  CHECK(changed);
  CHECK_NOTHROW(replay(r));
}

TEST_CASE("replay detects tampering at the divergent round") {
  std::vector<json> roster{{{"kind", "scripted"}, {"strategy", "random"}, {"p", 0.5}, {"repeat", 8}}};
  auto r = run_experiment(scripted(8, 2, roster, 6, 2));
  CHECK_NOTHROW(replay(r));
  r.repetitions[1].records[3].net[2] += 1;
  try {
    replay(r);
    FAIL("expected IntegrityError");
  } catch (const IntegrityError& e) {
    CHECK(e.round() == 4);
  }
}

TEST_CASE("replay checks chat transcripts against recorded actions") {
  auto r = run_experiment(mock_dialogue(), virtual_time());
  auto& rec = r.repetitions[0].records[1];
  rec = resolve_round(
      [&] {
        auto a = rec.actions;
        a[0] = Action::Defect;
        return a;
      }(),
      r.repetitions[0].graphs[1], r.config.params);
  rec.round_index = 2;
  try {
    replay(r);
    FAIL("expected IntegrityError");
  } catch (const IntegrityError& e) {
    CHECK(e.round() == 2);
  }
}

TEST_CASE("event stream accounting") {
  std::vector<json> roster{{{"kind", "scripted"}, {"strategy", "tit_for_tat_majority"}, {"repeat", 6}}};
  EventLog log;
  RunOptions o;
  o.events = &log;
  run_experiment(scripted(6, 2, roster, 4, 2), o);
  CHECK(log.count("experiment_started") == 1);
  CHECK(log.count("repetition_started") == 2);
  CHECK(log.count("round_started") == 8);
  CHECK(log.count("action_recorded") == 6 * 4 * 2);
  CHECK(log.count("round_resolved") == 8);
  CHECK(log.count("repetition_finished") == 2);
  CHECK(log.count("experiment_finished") == 1);
  const auto all = log.since(0);
  std::uint64_t prev = 0;
  for (const auto& e : all) {
    CHECK(e.seq == prev + 1);
    prev = e.seq;
  }
  CHECK(all.front().type == "experiment_started");
  CHECK(all.back().type == "experiment_finished");
  int last_node = -1;
  for (const auto& e : all) {
    if (e.type == "round_started") last_node = -1;
    if (e.type == "action_recorded") {
      const int node = e.data["node"];
      CHECK(node == last_node + 1);
      last_node = node;
    }
  }
}

TEST_CASE("an agent that never answers clearly fails its repetition") {
  auto c = mock_dialogue();
  c.repetitions = 2;
  c.agents[0].script = {{"rules", {{{"contains", "ready"}, {"reply", "Yes."}},
                                   {{"contains", "understand"}, {"reply", "Yes."}}}},
                        {"fallback", "Hmm, let me think."}};
  EventLog log;
  auto o = virtual_time();
  o.events = &log;
  const auto r = run_experiment(c, o);
  REQUIRE(r.repetitions.size() == 2);
  for (const auto& rep : r.repetitions) {
    CHECK_FALSE(rep.status.completed);
    CHECK(rep.status.reason == "rectification");
    CHECK(rep.status.round == 1);
    CHECK(rep.records.empty());
  }
  CHECK_FALSE(r.all_completed());
  CHECK(log.count("dialogue_flagged") == 2 * 3);
}

TEST_CASE("transport failure fails the repetition") {
  auto c = mock_dialogue();
  c.agents[0].script = {{"replies", json::array()}};
  c.agents[0].provider.max_retries = 1;
  const auto r = run_experiment(c, virtual_time());
  CHECK(r.repetitions[0].status.reason == "transport");
}

TEST_CASE("human agents: submission, timeout with substitution, abort") {
  auto doc = json::parse(R"({
    "topology": {"n": 4, "k": 2, "mode": "fixed_ring"},
    "rounds": 2, "repetitions": 1, "human_timeout": 5,
    "agents": [{"kind": "human", "id": "h"}, {"kind": "scripted", "strategy": "all_c", "repeat": 3}]
  })");
  {
    ExperimentRun run("x", parse_config(doc));
    auto& log = run.events();
    std::uint64_t seen = 0;
    int answered = 0;
    while (answered < 2) {
      REQUIRE(log.wait(seen, 5s));
      for (const auto& e : log.since(seen)) {
        seen = e.seq;
        if (e.type == "awaiting_input") {
          auto inbox = run.control().find_inbox("h");
          REQUIRE(inbox);
          CHECK(inbox->submit(Action::Defect) == HumanInbox::SubmitResult::Accepted);
          ++answered;
        }
      }
    }
    run.join();
    CHECK(run.state() == ExperimentRun::State::Completed);
    const auto r = run.result();
    REQUIRE(r);
    CHECK(r->repetitions[0].records[1].actions[0] == Action::Defect);
    CHECK(log.count("observation") == 2);
  }
  {
    doc["human_timeout"] = 0.05;
    doc["failure_policy"] = {{"substitute", "C"}};
    const auto r = run_experiment(parse_config(doc));
    CHECK(r.repetitions[0].status.completed);
    CHECK(r.repetitions[0].records[0].actions[0] == Action::Cooperate);
  }
  {
    doc["failure_policy"] = "fail_run";
    const auto r = run_experiment(parse_config(doc));
    CHECK(r.repetitions[0].status.reason == "human_timeout");
  }
  {
    doc["human_timeout"] = 30;
    ExperimentRun run("y", parse_config(doc));
    REQUIRE(run.events().wait(0, 5s));
    std::this_thread::sleep_for(50ms);
    run.abort();
    run.join();
    CHECK(run.state() == ExperimentRun::State::Aborted);
    CHECK(run.result()->repetitions[0].status.reason == "aborted");
  }
}

TEST_CASE("results survive a write and read") {
  const auto r = run_experiment(mock_dialogue(), virtual_time());
  const auto dir = std::filesystem::temp_directory_path() / "netpd-runner-storage";
  std::filesystem::remove_all(dir);
  write_result(r, dir);
  CHECK(has_result(dir));
  const auto back = read_result(dir);
  CHECK(to_json(back.config) == to_json(r.config));
  REQUIRE(back.repetitions.size() == 1);
  CHECK(back.repetitions[0].records == r.repetitions[0].records);
  CHECK(back.repetitions[0].transcript.size() == r.repetitions[0].transcript.size());
  CHECK(back.repetitions[0].status == r.repetitions[0].status);
  CHECK_NOTHROW(replay(back));
  std::filesystem::remove_all(dir);
}

TEST_CASE("stimulus runs: tit for tat majority flips when cooperation drops below half") {
  StimulusSpec s;
  s.rounds = 12;
  s.runs = 2;
  AgentSpec tft;
  tft.strategy = "tit_for_tat_majority";
  s.post_change_cooperators = 1;
  auto curve = run_stimulus(s, tft, GameParams{});
  REQUIRE(curve.size() == 12);
  for (int t = 0; t < 6; ++t) CHECK(curve[t] == 1.0);
  for (int t = 6; t < 12; ++t) CHECK(curve[t] == 0.0);
  s.post_change_cooperators = 2;
  curve = run_stimulus(s, tft, GameParams{});
  for (double v : curve) CHECK(v == 1.0);
}

TEST_CASE("neighbor labels") {
  const auto g = circulant(8, 4);
  const auto fixed = neighbor_labels(g, 1, false);
  CHECK(fixed[0] == std::vector<NodeId>{1, 2, 6, 7});
  const auto a = neighbor_labels(g, 5, true);
  CHECK(a == neighbor_labels(g, 5, true));
  for (std::size_t i = 0; i < 8; ++i) {
    auto sorted = a[i];
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == fixed[i]);
  }
}

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "netpd/commands.hpp"
#include "netpd/server.hpp"
#include "netpd/storage.hpp"

using namespace netpd;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("netpd-cli-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string preset(const std::string& name) {
  return std::string(NETPD_PRESET_DIR) + "/" + name;
}

fs::path write_json(const fs::path& path, const json& j) {
  std::ofstream(path) << j.dump(2);
  return path;
}

std::vector<std::string> lines(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("grid run writes a manifest and reruns as a no-op") {
  const auto dir = scratch("grid");
  auto r = cli({"run", "--grid", preset("paper-grid.json"), "--out", dir.string()});
  CHECK(r.code == 0);
  const auto manifest = read_json(dir / "manifest.json");
  CHECK(manifest["totals"]["cells"] == 18);
  CHECK(manifest["totals"]["regimes"] == 2);
  CHECK(manifest["totals"]["repetitions"] == 90);
  CHECK(manifest["totals"]["completed_repetitions"] == 90);
  std::set<std::string> regimes;
  for (const auto& cell : manifest["cells"]) {
    regimes.insert(cell["regime"].get<std::string>());
    CHECK(cell["repetitions"] == 5);
    CHECK(cell["completed_repetitions"] == 5);
    CHECK(fs::exists(dir / cell["name"].get<std::string>() / "config.json"));
  }
  CHECK(regimes == std::set<std::string>{"long", "short"});

  const auto cell = manifest["cells"][0]["name"].get<std::string>();
  const auto records = dir / cell / "rep-000" / "records.jsonl";
  const auto before = fs::last_write_time(records);
  r = cli({"run", "--grid", preset("paper-grid.json"), "--out", dir.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("(18 up to date)") != std::string::npos);
  CHECK(fs::last_write_time(records) == before);

  SUBCASE("metrics") {
    r = cli({"metrics", dir.string(), "--which", "final15"});
    CHECK(r.code == 0);
    const auto csv = lines(dir / "metrics" / "final15.csv");
    REQUIRE(csv.size() > 1);
    CHECK(csv[0] == "cell,k,bc_ratio,class,round,mean,se,runs");
    std::set<std::string> labels;
    for (std::size_t i = 1; i < csv.size(); ++i) {
      std::stringstream ss(csv[i]);
      std::string field;
      for (int f = 0; f < 4; ++f) std::getline(ss, field, ',');
      labels.insert(field);
    }
    CHECK(labels == std::set<std::string>{"b/c<k", "b/c=k", "b/c>k"});
    for (const char* which : {"coop", "assort", "payoffs"}) {
      CHECK(cli({"metrics", dir.string(), "--which", which}).code == 0);
      CHECK(fs::exists(dir / "metrics" / (std::string(which) + ".csv")));
      CHECK(fs::exists(dir / "metrics" / (std::string(which) + ".json")));
    }
    const auto payoffs = read_json(dir / "metrics" / "payoffs.json");
    CHECK(payoffs.is_object());
    CHECK(cli({"metrics", dir.string(), "--which", "bogus"}).code == 2);
  }
  SUBCASE("replay") {
    r = cli({"replay", dir.string()});
    CHECK(r.code == 0);
    CHECK(r.out.find(cell + ": identical") != std::string::npos);

    auto text = lines(records);
    auto rec = json::parse(text[2]);
    rec["net"][0] = rec["net"][0].get<long long>() + 10;
    text[2] = rec.dump();
    {
      std::ofstream out(records);
      for (const auto& l : text) out << l << "\n";
    }
    r = cli({"replay", dir.string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("round 3") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("single config run and overrides") {
  const auto dir = scratch("single");
  auto r = cli({"run", preset("mock-dialogue.json"), "--out", dir.string(), "--reps", "2"});
  CHECK(r.code == 0);
  const auto manifest = read_json(dir / "manifest.json");
  CHECK(manifest["totals"]["repetitions"] == 2);
  CHECK(cli({"replay", dir.string()}).code == 0);
  fs::remove_all(dir);
}

TEST_CASE("failed repetitions give exit code 1") {
  const auto dir = scratch("failing");
  std::ifstream in(preset("mock-dialogue.json"));
  auto doc = json::parse(in);
  doc["agents"][0]["script"] = {{"fallback", "Let me think about it."}};
  const auto path = write_json(dir / "cfg.json", doc);
  auto r = cli({"run", path.string(), "--out", (dir / "out").string()});
  CHECK(r.code == 1);
  const auto status = read_json(dir / "out" / "mock-dialogue" / "rep-000" / "status.json");
  CHECK(status["completed"] == false);
  CHECK(status["reason"] == "rectification");
  CHECK(cli({"metrics", (dir / "out").string(), "--which", "coop"}).code == 1);
  fs::remove_all(dir);
}

TEST_CASE("invalid configs exit 2 naming the key") {
  const auto dir = scratch("invalid");
  std::ifstream in(preset("mock-dialogue.json"));
  auto doc = json::parse(in);
  doc["topology"]["colour"] = "red";
  const auto path = write_json(dir / "bad.json", doc);
  auto r = cli({"run", path.string(), "--out", (dir / "out").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("topology.colour") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "out" / "manifest.json"));

  r = cli({"validate", path.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("topology.colour") != std::string::npos);
  r = cli({"validate", preset("paper-grid.json")});
  CHECK(r.code == 0);
  CHECK(r.out == "ok: 18 cells\n");
  CHECK(cli({"validate", preset("stimulus.json")}).out == "ok: 9 cells\n");
  CHECK(cli({"validate", (dir / "missing.json").string()}).code == 2);
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(cli({"validate", (dir / "broken.json").string()}).code == 2);
  CHECK(cli({"run"}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("serve reports a busy port") {
  ControlServer holder;
  const int port = holder.start("127.0.0.1", 0);
  auto r = cli({"serve", "--host", "127.0.0.1", "--port", std::to_string(port)});
  CHECK(r.code == 1);
  CHECK_FALSE(r.err.empty());
  holder.stop();
}

TEST_CASE("the built executable agrees") {
  const char* exe = std::getenv("NETPD_CLI");
  if (!exe) return;
  const std::string cmd = std::string(exe) + " validate " + preset("paper-grid.json") + " > /dev/null";
  CHECK(std::system(cmd.c_str()) == 0);
  const std::string bad = std::string(exe) + " validate /nonexistent.json 2> /dev/null";
  const int status = std::system(bad.c_str());
  CHECK(WEXITSTATUS(status) == 2);
}

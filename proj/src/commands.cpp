#include "netpd/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <unistd.h>

#include <CLI11.hpp>

#include "netpd/errors.hpp"
#include "netpd/grid.hpp"
#include "netpd/metrics.hpp"
#include "netpd/server.hpp"
#include "netpd/storage.hpp"

namespace netpd {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

nlohmann::json num_json(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

std::string safe_name(const std::string& name) {
  std::string out;
  for (char c : name) {
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  }
  return out.empty() ? "experiment" : out;
}

// Cell directories of a results directory, in manifest order.
std::vector<fs::path> result_cells(const fs::path& dir) {
  std::vector<fs::path> cells;
  if (fs::exists(dir / "manifest.json")) {
    const auto manifest = read_json(dir / "manifest.json");
    for (const auto& c : manifest.at("cells")) {
      cells.push_back(dir / c.at("name").get<std::string>());
    }
  } else if (has_result(dir)) {
    cells.push_back(dir);
  } else if (fs::is_directory(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_directory() && has_result(entry.path())) cells.push_back(entry.path());
    }
    std::sort(cells.begin(), cells.end());
  }
  return cells;
}

void series_rows(std::string& csv, nlohmann::json& json, const std::string& cell,
                 const SeriesWithBand& s, const char* klass = nullptr) {
  auto rows = nlohmann::json::array();
  for (std::size_t t = 0; t < s.size(); ++t) {
    csv += cell + ",";
    if (klass) csv += std::string(klass) + ",";
    csv += std::to_string(t + 1) + "," + num(s.mean[t]) + "," + num(s.se[t]) + "," +
           std::to_string(s.runs[t]) + "\n";
    rows.push_back({{"round", t + 1}, {"mean", num_json(s.mean[t])}, {"se", num_json(s.se[t])},
                    {"runs", s.runs[t]}});
  }
  json = std::move(rows);
}

int cmd_metrics(const fs::path& dir, const std::string& which, fs::path out_dir, std::ostream& out,
                std::ostream& err) {
  const auto cells = result_cells(dir);
  if (cells.empty()) {
    err << "error: no results in " << dir.string() << "\n";
    return 1;
  }
  if (out_dir.empty()) out_dir = dir / "metrics";
  std::string csv;
  nlohmann::json json = nlohmann::json::object();
  if (which == "coop" || which == "assort") {
    csv = "cell,round,mean,se,runs\n";
  } else if (which == "payoffs") {
    csv = "cell,class,round,mean,se,runs\n";
  } else {
    csv = "cell,k,bc_ratio,class,round,mean,se,runs\n";
  }
  std::size_t used = 0;
  for (const auto& cell_dir : cells) {
    const auto result = read_result(cell_dir);
    const std::string cell = cell_dir.filename().string();
    if (result.completed().empty()) {
      err << "warning: " << cell << " has no completed repetitions\n";
      continue;
    }
    ++used;
    if (which == "coop") {
      series_rows(csv, json[cell], cell, cooperation_series(result));
    } else if (which == "assort") {
      series_rows(csv, json[cell], cell, assortment_series(result));
    } else if (which == "payoffs") {
      const auto rp = relative_payoffs(result);
      nlohmann::json entry;
      series_rows(csv, entry["cooperators"], cell, rp.cooperators, "C");
      series_rows(csv, entry["defectors"], cell, rp.defectors, "D");
      entry["shares"] = {
          {"player_rounds",
           {{"cooperators", rp.player_rounds.cooperator_count},
            {"defectors", rp.player_rounds.defector_count},
            {"defector_share", num_json(rp.player_rounds.defector_share())}}},
          {"players",
           {{"cooperators", rp.players.cooperator_count},
            {"defectors", rp.players.defector_count},
            {"defector_share", num_json(rp.players.defector_share())}}}};
      if (rp.cooperator_samples.size() >= 2 && rp.defector_samples.size() >= 2) {
        const auto t = welch_t_test(rp.cooperator_samples, rp.defector_samples);
        entry["t_test"] = {{"t", t.t},
                           {"df", num_json(t.df)},
                           {"p", t.p_underflow ? nlohmann::json("<1e-300") : nlohmann::json(t.p)},
                           {"degenerate", t.degenerate}};
      } else {
        entry["t_test"] = nullptr;
      }
      json[cell] = std::move(entry);
    } else {
      const auto s = cooperation_series(result);
      const std::size_t r = std::min<std::size_t>(15, s.size());
      const auto k = static_cast<long long>(result.config.topology.k);
      const auto bc = static_cast<long long>(result.config.params.bc_ratio);
      const char* label = bc_class_label(bc, k);
      csv += cell + "," + std::to_string(k) + "," + std::to_string(bc) + "," + label + "," +
             std::to_string(r) + "," + num(s.mean[r - 1]) + "," + num(s.se[r - 1]) + "," +
             std::to_string(s.runs[r - 1]) + "\n";
      json[cell] = {{"k", k},        {"bc_ratio", bc},
                    {"class", label}, {"round", r},
                    {"mean", num_json(s.mean[r - 1])},
                    {"se", num_json(s.se[r - 1])},
                    {"runs", s.runs[r - 1]}};
    }
  }
  if (used == 0) {
    err << "error: no completed repetitions in " << dir.string() << "\n";
    return 1;
  }
  write_text(out_dir / (which + ".csv"), csv);
  write_text(out_dir / (which + ".json"), json.dump(2) + "\n");
  out << "wrote " << (out_dir / (which + ".csv")).string() << "\n";
  return 0;
}

int cmd_replay(const fs::path& dir, std::ostream& out, std::ostream& err) {
  const auto cells = result_cells(dir);
  if (cells.empty()) {
    err << "error: no results in " << dir.string() << "\n";
    return 1;
  }
  for (const auto& cell_dir : cells) {
    const std::string cell = cell_dir.filename().string();
    try {
      const auto recorded = read_result(cell_dir);
      const auto replayed = replay(recorded);
      // Byte-level check: the replayed rounds must serialize to the stored files.
      const fs::path scratch = fs::temp_directory_path() /
                               ("netpd-replay-" + std::to_string(::getpid()) + "-" + safe_name(cell));
      write_result(replayed, scratch);
      for (const auto& rep : replayed.repetitions) {
        char name[16];
        std::snprintf(name, sizeof name, "rep-%03d", rep.index);
        const auto a = file_hash(cell_dir / name / "records.jsonl");
        const auto b = file_hash(scratch / name / "records.jsonl");
        if (a != b) {
          fs::remove_all(scratch);
          throw IntegrityError("records.jsonl of " + std::string(name) + " is not byte-identical", 1);
        }
      }
      fs::remove_all(scratch);
      out << cell << ": identical\n";
    } catch (const IntegrityError& e) {
      err << cell << ": " << e.what() << "\n";
      return 1;
    } catch (const Error& e) {
      err << cell << ": " << e.what() << "\n";
      return 1;
    }
  }
  return 0;
}

ControlServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const std::string& host, int port, std::ostream& out, std::ostream& err) {
  ControlServer server;
  try {
    const int bound = server.start(host, port);
    out << "listening on http://" << host << ":" << bound << std::endl;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.wait();
  g_server = nullptr;
  return 0;
}

std::vector<GridCell> load_cells(const std::string& path, bool as_grid, const Overrides& o) {
  nlohmann::json doc;
  try {
    doc = read_json(path);
  } catch (const InputError& e) {
    throw ConfigError(e.what(), path);
  }
  if (as_grid || is_grid_document(doc)) {
    if (o.seed) doc["master_seed"] = *o.seed;
    auto cells = parse_grid(doc).expand();
    Overrides rest = o;
    rest.seed.reset();
    for (auto& c : cells) apply_overrides(c.config, rest);
    return cells;
  }
  GridCell cell;
  cell.config = parse_config(doc);
  apply_overrides(cell.config, o);
  cell.name = safe_name(cell.config.name);
  return {std::move(cell)};
}

}  // namespace

int cli_main(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Networked prisoner's dilemma experiment engine"};
  app.require_subcommand(1);

  std::string config_path, grid_path, out_dir = "results";
  Overrides overrides;
  std::uint64_t seed = 0;
  int reps = 0, rounds = 0, jobs = 1, max_parallel = 0;
  auto* run = app.add_subcommand("run", "Run an experiment config or grid");
  run->add_option("config", config_path, "Experiment config (JSON)");
  run->add_option("--grid", grid_path, "Grid spec (JSON)");
  run->add_option("--out", out_dir, "Results directory")->capture_default_str();
  auto* seed_opt = run->add_option("--seed", seed, "Override the master seed");
  auto* reps_opt = run->add_option("--reps", reps, "Override repetitions")->check(CLI::PositiveNumber);
  auto* rounds_opt = run->add_option("--rounds", rounds, "Override rounds")->check(CLI::PositiveNumber);
  auto* mp_opt = run->add_option("--max-parallel", max_parallel, "Concurrent chat/human decisions")
                     ->check(CLI::PositiveNumber);
  run->add_option("--jobs", jobs, "Cells run concurrently")->check(CLI::PositiveNumber);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a config or grid without running it");
  validate->add_option("path", validate_path, "Config or grid (JSON)")->required();

  std::string metrics_dir, which = "coop", metrics_out;
  auto* metrics = app.add_subcommand("metrics", "Compute plot-ready metrics from results");
  metrics->add_option("results", metrics_dir, "Results directory")->required();
  metrics->add_option("--which", which, "coop | assort | payoffs | final15")
      ->check(CLI::IsMember({"coop", "assort", "payoffs", "final15"}))
      ->capture_default_str();
  metrics->add_option("--out", metrics_out, "Output directory (default <results>/metrics)");

  std::string replay_dir;
  auto* replay_cmd = app.add_subcommand("replay", "Re-execute stored results and compare");
  replay_cmd->add_option("results", replay_dir, "Results directory")->required();

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Start the HTTP control surface");
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*validate) {
      const auto cells = load_cells(validate_path, false, {});
      out << "ok: " << cells.size() << (cells.size() == 1 ? " cell\n" : " cells\n");
      return 0;
    }
    if (*run) {
      if (config_path.empty() == grid_path.empty()) {
        err << "error: give exactly one of a config path or --grid\n";
        return 2;
      }
      if (*seed_opt) overrides.seed = seed;
      if (*reps_opt) overrides.repetitions = reps;
      if (*rounds_opt) overrides.rounds = rounds;
      if (*mp_opt) overrides.max_parallel = max_parallel;
      const bool as_grid = !grid_path.empty();
      const auto path = as_grid ? grid_path : config_path;
      const auto cells = load_cells(path, as_grid, overrides);
      std::string name = cells.size() == 1 ? cells.front().name : "grid";
      if (as_grid) name = parse_grid(read_json(path)).name;
      BatchOptions batch;
      batch.jobs = jobs;
      batch.log = [&out](const std::string& line) { out << line << "\n"; };
      const auto outcome = run_cells(cells, out_dir, name, batch);
      out << outcome.completed_repetitions << "/" << outcome.repetitions
          << " repetitions completed across " << outcome.cells << " cells ("
          << outcome.skipped << " up to date)\n";
      return outcome.all_completed() ? 0 : 1;
    }
    if (*metrics) return cmd_metrics(metrics_dir, which, metrics_out, out, err);
    if (*replay_cmd) return cmd_replay(replay_dir, out, err);
    if (*serve) return cmd_serve(host, port, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(std::move(args), std::cout, std::cerr);
}

}  // namespace netpd

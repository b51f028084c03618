#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "netpd/config.hpp"
#include "netpd/errors.hpp"
#include "netpd/game.hpp"
#include "netpd/llm/parse.hpp"
#include "netpd/llm/prompts.hpp"
#include "netpd/metrics.hpp"
#include "netpd/runner.hpp"
#include "netpd/storage.hpp"
#include "netpd/topology.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

// Python objects cross the boundary as JSON text.
json from_py(const py::object& obj) {
  auto dumps = py::module_::import("json").attr("dumps");
  return json::parse(dumps(obj).cast<std::string>());
}

py::object to_py(const json& j) {
  auto loads = py::module_::import("json").attr("loads");
  return loads(j.dump());
}

std::vector<netpd::Action> actions_of(const std::string& text) {
  return netpd::parse_trace(text, "actions");
}

netpd::Graph graph_of(const py::object& obj) { return from_py(obj).get<netpd::Graph>(); }

py::object graph_py(const netpd::Graph& g) {
  json j;
  to_json(j, g);
  return to_py(j);
}

netpd::GameParams params_of(long long bc_ratio, long long cost, long long points_per_dollar) {
  netpd::GameParams p;
  p.bc_ratio = bc_ratio;
  p.cost_per_edge = cost;
  p.points_per_dollar = points_per_dollar;
  p.validate();
  return p;
}

json series_json(const netpd::SeriesWithBand& s) {
  json mean = json::array(), se = json::array();
  for (std::size_t t = 0; t < s.size(); ++t) {
    mean.push_back(std::isnan(s.mean[t]) ? json(nullptr) : json(s.mean[t]));
    se.push_back(std::isnan(s.se[t]) ? json(nullptr) : json(s.se[t]));
  }
  return {{"mean", mean}, {"se", se}, {"runs", s.runs}};
}

py::object run(const py::object& config) {
  netpd::ExperimentResult result;
  {
    const auto cfg = netpd::parse_config(from_py(config));
    py::gil_scoped_release release;
    result = netpd::run_experiment(cfg);
  }
  json reps = json::array();
  for (const auto& rep : result.repetitions) {
    json records = json::array();
    for (const auto& r : rep.records) records.push_back(netpd::to_json(r));
    json status = netpd::to_json(rep.status);
    reps.push_back({{"index", rep.index}, {"seed", rep.seed}, {"status", status},
                    {"records", records}});
  }
  json out{{"config", netpd::to_json(result.config)}, {"repetitions", reps}};
  if (!result.completed().empty()) {
    out["cooperation"] = series_json(netpd::cooperation_series(result));
  }
  return to_py(out);
}

}  // namespace

PYBIND11_MODULE(_netpd, m) {
  m.doc() = "Networked prisoner's dilemma experiment engine";

  static py::exception<netpd::Error> error(m, "Error", PyExc_RuntimeError);
  static py::exception<netpd::ConfigError> config_error(m, "ConfigError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const netpd::ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const netpd::Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.def("circulant", [](std::size_t n, std::size_t k) { return graph_py(netpd::circulant(n, k)); },
        py::arg("n"), py::arg("k"));
  m.def(
      "sample_regular",
      [](std::size_t n, std::size_t k, std::uint64_t seed) {
        netpd::Rng rng(seed);
        return graph_py(netpd::sample_regular(n, k, rng));
      },
      py::arg("n"), py::arg("k"), py::arg("seed"));

  m.def(
      "resolve_round",
      [](const std::string& actions, const py::object& graph, long long bc_ratio, long long cost) {
        const auto rec = netpd::resolve_round(actions_of(actions), graph_of(graph),
                                              params_of(bc_ratio, cost, 300));
        return to_py(netpd::to_json(rec));
      },
      py::arg("actions"), py::arg("graph"), py::arg("bc_ratio") = 2, py::arg("cost_per_edge") = 10,
      "Resolve one round; actions is a string such as \"CDDD\".");

  m.def(
      "points_to_currency",
      [](long long points, long long points_per_dollar, bool floor) {
        auto p = params_of(2, 10, points_per_dollar);
        p.floor_currency = floor;
        return netpd::points_to_currency(points, p).str();
      },
      py::arg("points"), py::arg("points_per_dollar") = 300, py::arg("floor") = false);

  m.def(
      "parse_action",
      [](const std::string& reply) -> std::optional<std::string> {
        if (auto a = netpd::llm::parse_action(reply)) return netpd::to_string(*a);
        return std::nullopt;
      },
      py::arg("reply"));

  m.def(
      "assortment",
      [](const std::string& actions, const py::object& graph) {
        return netpd::assortment(actions_of(actions), graph_of(graph));
      },
      py::arg("actions"), py::arg("graph"));

  m.def(
      "welch_t_test",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto r = netpd::welch_t_test(a, b);
        py::dict d;
        d["t"] = r.t;
        d["df"] = r.df;
        d["p"] = r.p;
        d["degenerate"] = r.degenerate;
        d["p_underflow"] = r.p_underflow;
        return d;
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "render_opening",
      [](long long bc_ratio, long long cost, int announced_rounds) {
        return netpd::llm::render_opening(netpd::llm::PromptTemplateSet::defaults(),
                                          params_of(bc_ratio, cost, 300), announced_rounds);
      },
      py::arg("bc_ratio") = 2, py::arg("cost_per_edge") = 10, py::arg("announced_rounds") = 15);

  m.def("run_experiment", &run, py::arg("config"),
        "Run a config given as a dict; returns records, statuses and the cooperation series.");

  m.def(
      "run_stimulus",
      [](const py::object& focal, int post_change, int runs, int rounds, std::uint64_t seed) {
        netpd::StimulusSpec spec;
        spec.post_change_cooperators = post_change;
        spec.runs = runs;
        spec.rounds = rounds;
        const auto agent = netpd::parse_agent_spec(from_py(focal), "focal");
        py::gil_scoped_release release;
        return netpd::run_stimulus(spec, agent, {}, seed);
      },
      py::arg("focal"), py::arg("post_change_cooperators") = 3, py::arg("runs") = 10,
      py::arg("rounds") = 25, py::arg("seed") = 0);
}

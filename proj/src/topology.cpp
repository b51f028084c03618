#include "netpd/topology.hpp"

#include <algorithm>
#include <set>
#include <string>

#include <json.hpp>

#include "netpd/errors.hpp"

namespace netpd {

const char* to_string(TopologyMode mode) {
  switch (mode) {
    case TopologyMode::FixedRing: return "fixed_ring";
    case TopologyMode::WellMixed: return "well_mixed";
    case TopologyMode::Star: return "star";
  }
  return "?";
}

TopologyMode topology_mode_from_string(std::string_view text) {
  if (text == "fixed_ring") return TopologyMode::FixedRing;
  if (text == "well_mixed") return TopologyMode::WellMixed;
  if (text == "star") return TopologyMode::Star;
  throw ConfigError("unknown topology mode '" + std::string(text) +
                    "' (expected fixed_ring, well_mixed or star)");
}

void TopologySpec::validate() const {
  if (mode == TopologyMode::Star) {
    if (n < 2 || k != n - 1) {
      throw ConfigError("star topology needs k = n - 1 >= 1", "topology");
    }
    return;
  }
  if (n < 3) throw ConfigError("need at least 3 players", "topology.n");
  if (k < 2 || k % 2 != 0) throw ConfigError("degree must be even and >= 2", "topology.k");
  if (k > n - 1) throw ConfigError("degree must not exceed n - 1", "topology.k");
}

Graph Graph::from_edges(std::size_t n,
                        std::span<const std::pair<NodeId, NodeId>> edges) {
  Graph g;
  g.adjacency_.resize(n);
  std::set<std::pair<NodeId, NodeId>> seen;
  for (auto [a, b] : edges) {
    if (a >= n || b >= n) throw ConfigError("edge endpoint out of range", "edges");
    if (a == b) throw ConfigError("self-loop at node " + std::to_string(a), "edges");
    if (!seen.emplace(std::min(a, b), std::max(a, b)).second) {
      throw ConfigError("duplicate edge " + std::to_string(a) + "-" + std::to_string(b),
                        "edges");
    }
    g.adjacency_[a].push_back(b);
    g.adjacency_[b].push_back(a);
  }
  for (auto& list : g.adjacency_) std::sort(list.begin(), list.end());
  return g;
}

std::size_t Graph::degree(NodeId node) const { return neighbors(node).size(); }

std::span<const NodeId> Graph::neighbors(NodeId node) const {
  if (node >= adjacency_.size()) {
    throw DomainError("node " + std::to_string(node) + " out of range for graph of size " +
                      std::to_string(adjacency_.size()));
  }
  return adjacency_[node];
}

bool Graph::adjacent(NodeId a, NodeId b) const {
  auto list = neighbors(a);
  return std::binary_search(list.begin(), list.end(), b);
}

std::optional<std::size_t> Graph::regular_degree() const {
  if (adjacency_.empty()) return std::nullopt;
  const std::size_t d = adjacency_.front().size();
  for (const auto& list : adjacency_) {
    if (list.size() != d) return std::nullopt;
  }
  return d;
}

std::vector<std::pair<NodeId, NodeId>> Graph::edges() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (NodeId a = 0; a < adjacency_.size(); ++a) {
    for (NodeId b : adjacency_[a]) {
      if (a < b) out.emplace_back(a, b);
    }
  }
  return out;
}

Graph circulant(std::size_t n, std::size_t k) {
  TopologySpec{n, k, TopologyMode::FixedRing}.validate();
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId i = 0; i < n; ++i) {
    for (std::size_t d = 1; d <= k / 2; ++d) edges.emplace_back(i, (i + d) % n);
  }
  return Graph::from_edges(n, edges);
}

Graph sample_regular(std::size_t n, std::size_t k, Rng& rng) {
  TopologySpec{n, k, TopologyMode::WellMixed}.validate();
  constexpr int kMaxRestarts = 10'000;
  constexpr int kMaxRedraws = 200;

  std::vector<NodeId> stubs;
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::set<std::pair<NodeId, NodeId>> present;
  for (int attempt = 0; attempt < kMaxRestarts; ++attempt) {
    stubs.clear();
    for (NodeId i = 0; i < n; ++i) stubs.insert(stubs.end(), k, i);
    edges.clear();
    present.clear();
    bool stuck = false;
    while (!stubs.empty() && !stuck) {
      stuck = true;
      for (int redraw = 0; redraw < kMaxRedraws; ++redraw) {
        std::size_t x = rng.index(stubs.size());
        std::size_t y = rng.index(stubs.size() - 1);
        if (y >= x) ++y;
        NodeId a = stubs[x];
        NodeId b = stubs[y];
        if (a == b || present.contains({std::min(a, b), std::max(a, b)})) continue;
        present.emplace(std::min(a, b), std::max(a, b));
        edges.emplace_back(a, b);
        // Remove the larger index first so the smaller stays valid.
        for (std::size_t idx : {std::max(x, y), std::min(x, y)}) {
          stubs[idx] = stubs.back();
          stubs.pop_back();
        }
        stuck = false;
        break;
      }
    }
    if (!stuck) return Graph::from_edges(n, edges);
  }
  throw SamplingError("could not sample a simple " + std::to_string(k) +
                      "-regular graph on " + std::to_string(n) + " nodes");
}

Graph star(std::size_t leaves) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId i = 1; i <= leaves; ++i) edges.emplace_back(0, i);
  return Graph::from_edges(leaves + 1, edges);
}

std::span<const NodeId> neighbors(const Graph& graph, NodeId node) {
  return graph.neighbors(node);
}

void to_json(nlohmann::json& j, const Graph& graph) {
  j = nlohmann::json::object();
  j["n"] = graph.size();
  if (auto d = graph.regular_degree()) {
    j["k"] = *d;
  } else {
    j["k"] = nullptr;
  }
  auto edges = nlohmann::json::array();
  for (auto [a, b] : graph.edges()) edges.push_back({a, b});
  j["edges"] = std::move(edges);
}

void from_json(const nlohmann::json& j, Graph& graph) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (const auto& e : j.at("edges")) {
    edges.emplace_back(e.at(0).get<NodeId>(), e.at(1).get<NodeId>());
  }
  graph = Graph::from_edges(j.at("n").get<std::size_t>(), edges);
}

}  // namespace netpd

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "netpd/rng.hpp"

namespace netpd {

using NodeId = std::size_t;

// Star is used only by the controlled-stimulus protocol (focal node 0 with
// four leaves); the experiment grid uses the other two.
enum class TopologyMode { FixedRing, WellMixed, Star };

const char* to_string(TopologyMode mode);
TopologyMode topology_mode_from_string(std::string_view text);

struct TopologySpec {
  std::size_t n = 8;
  std::size_t k = 2;
  TopologyMode mode = TopologyMode::FixedRing;

  // Throws ConfigError when n < 3, k odd, k < 2 or k > n - 1.
  void validate() const;
};

// Immutable simple undirected graph with sorted adjacency lists.
class Graph {
 public:
  Graph() = default;

  // Throws ConfigError on self-loops, duplicate edges or out-of-range ids.
  static Graph from_edges(std::size_t n,
                          std::span<const std::pair<NodeId, NodeId>> edges);

  std::size_t size() const noexcept { return adjacency_.size(); }
  std::size_t degree(NodeId node) const;
  // Sorted ascending. Throws DomainError for node >= size().
  std::span<const NodeId> neighbors(NodeId node) const;
  bool adjacent(NodeId a, NodeId b) const;
  // Common degree when the graph is regular.
  std::optional<std::size_t> regular_degree() const;
  // Each edge once, as (low, high), lexicographically sorted.
  std::vector<std::pair<NodeId, NodeId>> edges() const;

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  std::vector<std::vector<NodeId>> adjacency_;
};

// Node i adjacent to i±1, ..., i±k/2 (mod n).
Graph circulant(std::size_t n, std::size_t k);

// Uniformly-ish random simple k-regular graph. Pairing model: stubs are
// matched one pair at a time, pairs that would form a loop or a duplicate
// edge are redrawn, and a stuck pairing restarts from scratch. Throws
// SamplingError after 10,000 restarts.
Graph sample_regular(std::size_t n, std::size_t k, Rng& rng);

// Focal node 0 joined to nodes 1..leaves.
Graph star(std::size_t leaves);

std::span<const NodeId> neighbors(const Graph& graph, NodeId node);

// {"n": ..., "k": ... (null unless regular), "edges": [[i, j], ...]}
void to_json(nlohmann::json& j, const Graph& graph);
void from_json(const nlohmann::json& j, Graph& graph);

}  // namespace netpd

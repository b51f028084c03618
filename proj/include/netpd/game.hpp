#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "netpd/topology.hpp"

namespace netpd {

using Points = std::int64_t;

enum class Action : std::uint8_t { Cooperate, Defect };

constexpr char to_char(Action a) noexcept { return a == Action::Cooperate ? 'C' : 'D'; }
inline std::string to_string(Action a) { return std::string(1, to_char(a)); }
// Exactly "C" or "D"; anything else is nullopt.
std::optional<Action> action_from_string(std::string_view text) noexcept;

struct GameParams {
  Points cost_per_edge = 10;
  Points bc_ratio = 2;
  Points points_per_dollar = 300;
  // Pro-rata conversion by default; floored whole dollars when set.
  bool floor_currency = false;

  Points benefit_per_edge() const noexcept { return cost_per_edge * bc_ratio; }
  // Throws ConfigError unless every field is a positive integer and
  // bc_ratio > 1.
  void validate() const;
};

struct EdgeFlow {
  NodeId from;
  NodeId to;
  Points points;
  friend bool operator==(const EdgeFlow&, const EdgeFlow&) = default;
};

struct RoundRecord {
  int round_index = 1;
  std::vector<Action> actions;
  std::vector<Points> paid;
  std::vector<Points> gained;
  std::vector<Points> net;
  std::vector<EdgeFlow> edge_flows;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

// Resolves one simultaneous-move round. Throws ConfigError when the action
// count differs from the graph size, ProtocolError when a node is isolated.
RoundRecord resolve_round(std::span<const Action> actions, const Graph& graph,
                          const GameParams& params, int round_index = 1);

// Exact points / points_per_dollar, held as whole cents. Pro-rata amounts
// are rounded half-up to the cent.
struct CurrencyAmount {
  std::int64_t cents = 0;
  std::string str() const;  // "1.50"
  double dollars() const noexcept { return static_cast<double>(cents) / 100.0; }
};

CurrencyAmount points_to_currency(Points points, const GameParams& params);

// Largest single-round net for a player of this degree: a defector whose
// neighbors all cooperate.
Points max_round_net(std::size_t degree, const GameParams& params);

double cooperation_fraction(std::span<const Action> actions) noexcept;

}  // namespace netpd

#include "netpd/game.hpp"

#include <algorithm>
#include <cstdio>

#include "netpd/errors.hpp"

namespace netpd {

std::optional<Action> action_from_string(std::string_view text) noexcept {
  if (text == "C") return Action::Cooperate;
  if (text == "D") return Action::Defect;
  return std::nullopt;
}

void GameParams::validate() const {
  if (cost_per_edge <= 0) throw ConfigError("must be a positive integer", "params.cost_per_edge");
  if (bc_ratio <= 1) throw ConfigError("must be an integer greater than 1", "params.bc_ratio");
  if (points_per_dollar <= 0) {
    throw ConfigError("must be a positive integer", "params.points_per_dollar");
  }
}

RoundRecord resolve_round(std::span<const Action> actions, const Graph& graph,
                          const GameParams& params, int round_index) {
  const std::size_t n = graph.size();
  if (actions.size() != n) {
    throw ConfigError("got " + std::to_string(actions.size()) + " actions for " +
                      std::to_string(n) + " players");
  }
  const Points cost = params.cost_per_edge;
  const Points benefit = params.benefit_per_edge();

  RoundRecord rec;
  rec.round_index = round_index;
  rec.actions.assign(actions.begin(), actions.end());
  rec.paid.assign(n, 0);
  rec.gained.assign(n, 0);
  rec.net.assign(n, 0);
  for (NodeId i = 0; i < n; ++i) {
    auto nbrs = graph.neighbors(i);
    if (nbrs.empty()) throw ProtocolError("node " + std::to_string(i) + " has no neighbors");
    if (actions[i] != Action::Cooperate) continue;
    rec.paid[i] = cost * static_cast<Points>(nbrs.size());
    for (NodeId j : nbrs) {
      rec.gained[j] += benefit;
      rec.edge_flows.push_back({i, j, benefit});
    }
  }
  for (NodeId i = 0; i < n; ++i) rec.net[i] = rec.gained[i] - rec.paid[i];
  return rec;
}

std::string CurrencyAmount::str() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%02lld", static_cast<long long>(cents / 100),
                static_cast<long long>(cents % 100));
  return buf;
}

CurrencyAmount points_to_currency(Points points, const GameParams& params) {
  if (points < 0) throw DomainError("cannot convert negative points to currency");
  params.validate();
  const Points per_dollar = params.points_per_dollar;
  if (params.floor_currency) return {(points / per_dollar) * 100};
  // cents = round_half_up(points * 100 / per_dollar)
  const Points scaled = points * 100;
  return {(2 * scaled + per_dollar) / (2 * per_dollar)};
}

Points max_round_net(std::size_t degree, const GameParams& params) {
  if (degree == 0) throw DomainError("degree must be at least 1");
  return params.benefit_per_edge() * static_cast<Points>(degree);
}

double cooperation_fraction(std::span<const Action> actions) noexcept {
  if (actions.empty()) return 0.0;
  auto c = std::count(actions.begin(), actions.end(), Action::Cooperate);
  return static_cast<double>(c) / static_cast<double>(actions.size());
}

}  // namespace netpd

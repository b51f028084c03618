#include <doctest.h>

#include <numeric>

#include "netpd/errors.hpp"
#include "netpd/game.hpp"
#include "netpd/rng.hpp"
#include "netpd/topology.hpp"
#include "oracles.hpp"

using namespace netpd;

namespace {

std::vector<Action> profile(std::uint32_t mask, std::size_t n) {
  std::vector<Action> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = (mask >> i) & 1u ? Action::Cooperate : Action::Defect;
  return a;
}

GameParams with_bc(Points bc) {
  GameParams p;
  p.bc_ratio = bc;
  return p;
}

}  // namespace

TEST_CASE("actions serialize as C and D") {
  CHECK(to_string(Action::Cooperate) == "C");
  CHECK(to_string(Action::Defect) == "D");
  CHECK(action_from_string("C") == Action::Cooperate);
  CHECK(action_from_string("D") == Action::Defect);
  CHECK_FALSE(action_from_string("c"));
  CHECK_FALSE(action_from_string("CD"));
}

TEST_CASE("focal cooperator with two cooperating neighbors on the ring") {
  auto g = circulant(8, 2);
  std::vector<Action> a(8, Action::Defect);
  a[0] = a[1] = a[7] = Action::Cooperate;
  auto rec = resolve_round(a, g, with_bc(2));
  CHECK(rec.paid[0] == 20);
  CHECK(rec.gained[0] == 40);
  CHECK(rec.net[0] == 20);
}

TEST_CASE("all defect pays and gains nothing") {
  auto g = circulant(8, 4);
  auto rec = resolve_round(std::vector<Action>(8, Action::Defect), g, with_bc(4));
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(rec.paid[i] == 0);
    CHECK(rec.gained[i] == 0);
    CHECK(rec.net[i] == 0);
  }
  CHECK(rec.edge_flows.empty());
}

TEST_CASE("lone cooperator on a 4-ring") {
  auto rec = resolve_round(profile(0b0001, 4), circulant(4, 2), with_bc(6));
  CHECK(rec.net == std::vector<Points>{-20, 60, 0, 60});
}

TEST_CASE("resolve_round equals the per-edge transfer oracle on every profile") {
  for (int n : {4, 6, 8}) {
    for (int k : {2, 4, 6}) {
      if (k >= n) continue;
      const auto g = circulant(n, k);
      const auto edges = oracle::circulant_edges(n, k);
      for (Points bc : {2, 4, 6}) {
        const auto params = with_bc(bc);
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
          const auto rec = resolve_round(profile(mask, n), g, params);
          const auto want = oracle::per_edge_transfers(n, edges, mask, 10, 10 * bc);
          REQUIRE(rec.paid == want.paid);
          REQUIRE(rec.gained == want.gained);
          REQUIRE(rec.net == want.net);
        }
      }
    }
  }
}

TEST_CASE("conservation, monotonicity and purity on random graphs") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 6 + rng.index(20);
    std::size_t k = 2 * (1 + rng.index(3));
    if (k >= n) k = 2;
    const auto g = sample_regular(n, k, rng);
    const auto params = with_bc(2 + static_cast<Points>(rng.index(5)));
    std::vector<Action> a(n);
    for (auto& x : a) x = rng.bernoulli(0.5) ? Action::Cooperate : Action::Defect;

    const auto rec = resolve_round(a, g, params);
    Points total = std::accumulate(rec.net.begin(), rec.net.end(), Points{0});
    Points expected = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (a[i] == Action::Cooperate) {
        expected += static_cast<Points>(g.degree(i)) *
                    (params.benefit_per_edge() - params.cost_per_edge);
      }
    }
    CHECK(total == expected);
    CHECK(resolve_round(a, g, params) == rec);

    for (std::size_t i = 0; i < n; ++i) {
      if (a[i] != Action::Cooperate) continue;
      auto b = a;
      b[i] = Action::Defect;
      const auto flipped = resolve_round(b, g, params);
      CHECK(flipped.net[i] - rec.net[i] ==
            params.cost_per_edge * static_cast<Points>(g.degree(i)));
    }
  }
}

TEST_CASE("resolve_round rejects bad input") {
  const auto g = circulant(8, 2);
  CHECK_THROWS_AS(resolve_round(std::vector<Action>(7, Action::Defect), g, GameParams{}),
                  ConfigError);
  auto isolated = Graph::from_edges(3, std::vector<std::pair<NodeId, NodeId>>{{0, 1}});
  CHECK_THROWS_AS(resolve_round(std::vector<Action>(3, Action::Defect), isolated, GameParams{}),
                  ProtocolError);
}

TEST_CASE("game params validation") {
  GameParams p;
  CHECK_NOTHROW(p.validate());
  p.bc_ratio = 1;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.cost_per_edge = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.points_per_dollar = -5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("points to currency") {
  GameParams p;
  CHECK(points_to_currency(300, p).str() == "1.00");
  CHECK(points_to_currency(0, p).str() == "0.00");
  CHECK(points_to_currency(450, p).str() == "1.50");
  CHECK(points_to_currency(100, p).str() == "0.33");
  CHECK(points_to_currency(200, p).str() == "0.67");
  CHECK_THROWS_AS(points_to_currency(-1, p), DomainError);
  p.floor_currency = true;
  CHECK(points_to_currency(450, p).str() == "1.00");
  CHECK(points_to_currency(299, p).str() == "0.00");
}

TEST_CASE("max round net") {
  CHECK(max_round_net(2, with_bc(6)) == 120);
  CHECK(max_round_net(6, with_bc(2)) == 120);
  CHECK(max_round_net(4, with_bc(4)) == 160);
  CHECK_THROWS(max_round_net(0, with_bc(2)));
}

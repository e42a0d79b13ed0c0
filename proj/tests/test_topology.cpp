#include <algorithm>
#include <functional>
#include <limits>
#include <queue>

#include <gtest/gtest.h>

#include "neuroute/error.hpp"
#include "neuroute/flowsolve.hpp"
#include "neuroute/topology.hpp"
#include "support/generators.hpp"

using namespace neuroute;
using namespace neuroute::testing;

namespace {

Network geant() { return load_topology_file(NEUROUTE_DATA_DIR "/geant.topo"); }
Network triangle() { return load_topology_file(NEUROUTE_DATA_DIR "/triangle.topo"); }

// Independent DFS enumeration, sorted by (cost, link ids).
std::vector<std::vector<LinkId>> brute_paths(const Network& net, NodeId s, NodeId d) {
  std::vector<std::vector<LinkId>> out;
  std::vector<bool> seen(net.node_count(), false);
  std::vector<LinkId> stack;
  std::function<void(NodeId)> dfs = [&](NodeId v) {
    if (v == d) {
      out.push_back(stack);
      return;
    }
    seen[v] = true;
    for (const auto& l : net.links()) {
      if (l.src != v || seen[l.dst]) continue;
      stack.push_back(l.id);
      dfs(l.dst);
      stack.pop_back();
    }
    seen[v] = false;
  };
  dfs(s);
  auto cost = [&](const std::vector<LinkId>& p) {
    double c = 0.0;
    for (auto l : p) c += net.link(l).cost;
    return c;
  };
  std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
    const double ca = cost(a), cb = cost(b);
    return ca != cb ? ca < cb : a < b;
  });
  return out;
}

double dijkstra(const Network& net, NodeId s, NodeId d) {
  std::vector<double> dist(net.node_count(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[s] = 0.0;
  pq.push({0.0, s});
  while (!pq.empty()) {
    auto [du, u] = pq.top();
    pq.pop();
    if (du > dist[u]) continue;
    for (const auto& l : net.links()) {
      if (l.src == u && du + l.cost < dist[l.dst]) {
        dist[l.dst] = du + l.cost;
        pq.push({dist[l.dst], l.dst});
      }
    }
  }
  return dist[d];
}

}  // namespace

TEST(Topology, GeantFixtureShape) {
  const auto net = geant();
  EXPECT_EQ(net.node_count(), 23u);
  EXPECT_EQ(net.link_count(), 38u);
  for (const auto& l : net.links()) {
    EXPECT_EQ(l.capacity_bps, 10e6);
    EXPECT_EQ(l.cost, 2.0);
  }
  EXPECT_EQ(net.od_count(), 506u);
}

TEST(Topology, MinimalDocument) {
  const auto net = load_topology("nodes: [A, B]\nlinks:\n  - {src: A, dst: B, capacity_bps: 10000000, cost: 1}\n");
  ASSERT_EQ(net.link_count(), 1u);
  EXPECT_EQ(net.link(0).id, 0u);
  EXPECT_EQ(net.link(0).src, 0u);
  EXPECT_EQ(net.link(0).dst, 1u);
}

TEST(Topology, UndefinedNodeIsNamed) {
  try {
    load_topology("nodes: [A, B]\nlinks:\n  - {src: A, dst: Z, capacity_bps: 1, cost: 1}\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("'Z'"), std::string::npos) << e.what();
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Topology, RejectsBadDocuments) {
  EXPECT_THROW(load_topology("nodes: [A, A]\nlinks: []\n"), ParseError);
  EXPECT_THROW(load_topology("nodes: [A, B]\nlinks:\n  - {src: A, dst: B, capacity_bps: 0, cost: 1}\n"), ParseError);
  EXPECT_THROW(load_topology("nodes: [A, B]\nlinks:\n  - {src: A, dst: B, capacity_bps: 5, cost: -1}\n"), ParseError);
  EXPECT_THROW(load_topology("nodes: [A, B]\nlinks:\n  - {src: A, dst: A, capacity_bps: 5, cost: 1}\n"), ParseError);
  EXPECT_THROW(load_topology("nodes: [A, B]\nlinks:\n  - {src: A, dst: B, cost: 1}\n"), ParseError);
  EXPECT_THROW(load_topology("nodes: [A, B\n"), ParseError);
  EXPECT_THROW(load_topology_file("/nonexistent/net.topo"), Error);
}

TEST(Topology, HashTracksContent) {
  const auto a = triangle();
  const auto b = triangle();
  EXPECT_EQ(a.hash(), b.hash());
  auto links = a.links();
  links[0].capacity_bps = 9e6;
  const Network c(a.node_names(), links);
  EXPECT_NE(a.hash(), c.hash());
}

TEST(CandidatePaths, TriangleForward) {
  const auto net = triangle();
  const auto paths = k_candidate_paths(net, {0, 2}, 5);
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_EQ(paths[0].links, std::vector<LinkId>({2}));
  EXPECT_EQ(paths[1].links, std::vector<LinkId>({0, 1}));
}

TEST(CandidatePaths, TriangleReverseIsEmpty) {
  EXPECT_TRUE(k_candidate_paths(triangle(), {2, 0}, 5).empty());
}

// 38 arcs over 23 nodes leave most heads with a single in-arc, so only the
// core ring pairs reach five alternatives.
TEST(CandidatePaths, GeantAdjacentPairsMatchExhaustiveOrder) {
  const auto net = geant();
  std::size_t full = 0;
  for (const auto& l : net.links()) {
    const auto paths = k_candidate_paths(net, {l.src, l.dst}, 5);
    const auto brute = brute_paths(net, l.src, l.dst);
    ASSERT_EQ(paths.size(), std::min<std::size_t>(5, brute.size())) << format_path(net, {{l.src, l.dst}, {l.id}});
    for (std::size_t i = 0; i < paths.size(); ++i) {
      EXPECT_EQ(paths[i].links, brute[i]);
      if (i > 0) EXPECT_LE(path_cost(net, paths[i - 1]), path_cost(net, paths[i]));
    }
    EXPECT_EQ(paths.front().links, std::vector<LinkId>({l.id}));
    full += paths.size() == 5 ? 1 : 0;
  }
  EXPECT_EQ(full, 7u);
}

TEST(CandidatePaths, PropertyMatchesExhaustiveEnumeration) {
  Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const auto net = random_network(rng, {3, 7, 0.35});
    const std::size_t k = uniform_int(rng, 1, 6);
    for (NodeId s = 0; s < net.node_count(); ++s) {
      for (NodeId d = 0; d < net.node_count(); ++d) {
        if (s == d) continue;
        const auto paths = k_candidate_paths(net, {s, d}, k);
        const auto brute = brute_paths(net, s, d);
        ASSERT_EQ(paths.size(), std::min(k, brute.size()));
        for (std::size_t i = 0; i < paths.size(); ++i) {
          EXPECT_TRUE(is_simple_path(net, paths[i]));
          EXPECT_EQ(paths[i].od, (OdPair{s, d}));
          EXPECT_EQ(paths[i].links, brute[i]);
          if (i > 0) EXPECT_LE(path_cost(net, paths[i - 1]), path_cost(net, paths[i]));
        }
        if (!paths.empty()) EXPECT_DOUBLE_EQ(path_cost(net, paths[0]), dijkstra(net, s, d));
        const auto all = all_simple_paths(net, {s, d});
        ASSERT_EQ(all.size(), brute.size());
        for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i].links, brute[i]);
      }
    }
  }
}

TEST(CandidatePaths, RejectsBadArguments) {
  const auto net = triangle();
  EXPECT_THROW(k_candidate_paths(net, {0, 0}, 2), ValidationError);
  EXPECT_THROW(k_candidate_paths(net, {0, 7}, 2), ValidationError);
  EXPECT_THROW(k_candidate_paths(net, {0, 1}, 0), ValidationError);
}

TEST(OdIndex, RoundTripsCanonicalOrder) {
  const std::size_t n = 23;
  std::size_t idx = 0;
  for (NodeId s = 0; s < n; ++s) {
    for (NodeId d = 0; d < n; ++d) {
      if (s == d) continue;
      EXPECT_EQ(od_index({s, d}, n), idx);
      EXPECT_EQ(od_at(idx, n), (OdPair{s, d}));
      ++idx;
    }
  }
  EXPECT_EQ(idx, 506u);
}

TEST(CandidateTableTest, IndexOfFindsPaths) {
  const auto net = triangle();
  const CandidateTable table(net, 5);
  EXPECT_EQ(table.od_count(), 6u);
  const auto& ac = table.paths({0, 2});
  ASSERT_EQ(ac.size(), 2u);
  EXPECT_EQ(table.index_of(ac[1]), 1u);
  EXPECT_FALSE(table.index_of(Path{{0, 2}, {0}}).has_value());
}

TEST(ApplyRouting, EmptyDecisionOnlyAdvancesTime) {
  const auto net = triangle();
  const auto st = NetworkState::full(net, 4);
  const auto next = apply_routing(net, st, RoutingDecision{});
  EXPECT_EQ(next.available, st.available);
  EXPECT_EQ(next.cost, st.cost);
  EXPECT_EQ(next.timestamp, 5);
}

TEST(ApplyRouting, SubtractsRoutedRate) {
  const auto net = triangle();
  RoutingDecision d;
  d.flows.push_back({{0, 0, 2, 8e6, 0.0}, Path{{0, 2}, {2}}, 8e6});
  const auto next = apply_routing(net, NetworkState::full(net), d);
  EXPECT_EQ(next.available[2], 2e6);
  EXPECT_EQ(next.available[0], 10e6);
}

TEST(ApplyRouting, OverloadNamesLink) {
  const auto net = triangle();
  RoutingDecision d;
  d.flows.push_back({{0, 0, 2, 11e6, 0.0}, Path{{0, 2}, {2}}, 11e6});
  try {
    apply_routing(net, NetworkState::full(net), d);
    FAIL();
  } catch (const CapacityViolation& e) {
    EXPECT_EQ(e.link(), 2u);
  }
}

TEST(ApplyRouting, PropertyNeverNegative) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto net = random_network(rng);
    const auto st = random_state(rng, net);
    RoutingDecision d;
    for (std::size_t f = 0; f < 4; ++f) {
      const auto demand = random_demands(rng, net, 1, 15, false)[0];
      const auto paths = k_candidate_paths(net, demand.od(), 3);
      if (paths.empty()) continue;
      d.flows.push_back({demand, paths[uniform_int(rng, 0, paths.size() - 1)], demand.requested});
    }
    try {
      const auto next = apply_routing(net, st, d);
      for (double a : next.available) EXPECT_GE(a, 0.0);
    } catch (const CapacityViolation&) {
      EXPECT_FALSE(check_admissible(net, st, d).admissible());
    }
  }
}

TEST(NetworkStateTest, ValidateCatchesBadEntries) {
  const auto net = triangle();
  auto st = NetworkState::full(net);
  st.available[1] = 11e6;
  EXPECT_THROW(st.validate(net), ValidationError);
  st = NetworkState::full(net);
  st.available.pop_back();
  EXPECT_THROW(st.validate(net), ValidationError);
}

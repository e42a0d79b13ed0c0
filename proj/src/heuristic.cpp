#include <chrono>

#include <fmt/core.h>

#include "neuroute/error.hpp"
#include "neuroute/flowsolve.hpp"

namespace neuroute {

HeuristicResult baseline_heuristic(const Network& net, const NetworkState& state, const TrafficMatrix& tm,
                                   const CandidateTable& candidates, const SolverConfig& config) {
  if (tm.n != net.node_count()) throw DimensionError("traffic matrix does not match the topology");
  if (candidates.node_count() != net.node_count()) throw DimensionError("candidate table does not match the topology");

  const auto start = std::chrono::steady_clock::now();
  auto out = baseline_heuristic(net, state, tm_to_demands(tm, config.min_rate_fraction), candidates, config);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

HeuristicResult baseline_heuristic(const Network& net, const NetworkState& state, std::span<const FlowDemand> demands,
                                   const CandidateTable& candidates, const SolverConfig& config) {
  if (candidates.node_count() != net.node_count()) throw DimensionError("candidate table does not match the topology");
  const auto start = std::chrono::steady_clock::now();
  HeuristicResult out;
  if (!demands.empty()) {
    const auto maxflow = fractional_max_throughput(net, state, demands, candidates, config);
    const auto cheap = fractional_min_cost(net, state, demands, maxflow, config);
    out.decision = select_unsplittable(cheap, net, state, demands, config);
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

HeuristicResult baseline_heuristic(const Network& net, const NetworkState& state, const TrafficMatrix& tm,
                                   const SolverConfig& config) {
  config.validate();
  const CandidateTable table(net, config.k_paths);
  return baseline_heuristic(net, state, tm, table, config);
}

std::string decision_csv(const RoutingDecision& decision, const Network& net, const NetworkState& state) {
  std::string out = "flow_id,src,dst,rate_bps,path,cost_contrib\n";
  for (const auto& a : decision.flows) {
    std::string path;
    double contrib = 0.0;
    if (a.routed()) {
      for (std::size_t i = 0; i < a.path->links.size(); ++i) {
        if (i) path += ';';
        path += std::to_string(a.path->links[i]);
      }
      contrib = a.rate * path_cost(state.cost, *a.path);
    }
    out += fmt::format("{},{},{},{},{},{}\n", a.demand.id, net.node_name(a.demand.src), net.node_name(a.demand.dst),
                       a.routed() ? a.rate : 0.0, path, contrib);
  }
  return out;
}

}  // namespace neuroute

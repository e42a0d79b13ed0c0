#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neuroute/topology.hpp"
#include "neuroute/traffic.hpp"

namespace neuroute {

/// Relative slack used when comparing rates against capacities and bounds.
inline constexpr double kRateTolerance = 1e-9;

struct SolverConfig {
  double epsilon = 0.05;          // FPTAS accuracy
  std::size_t k_paths = 5;        // candidate paths per OD
  std::size_t max_iterations = 0; // multiplicative-weights phases; 0 = 10*ceil(ln|L|/eps^2)
  double throughput_slack = 0.01; // allowed drift of per-flow throughput in the cost phase
  double min_rate_fraction = 0.0; // N^f as a fraction of R^f
  std::size_t max_cost_passes = 50;

  void validate() const;
  std::size_t iteration_budget(std::size_t link_count) const;
};

struct PathShare {
  Path path;
  double rate = 0.0;
};

/// One flow's rate spread over its candidate paths.
struct FlowSplit {
  std::vector<PathShare> shares;
  double throughput() const;
};

/// Per-flow, per-link rates r^f(l), indexed [flow][link].
using LinkRates = std::vector<std::vector<double>>;

/// Path-based fractional multicommodity flow, aligned with a demand list.
struct FractionalFlow {
  std::vector<FlowSplit> flows;
  std::size_t phases = 0;

  double total_throughput() const;
  double total_cost(std::span<const double> link_cost) const;
  LinkRates link_rates(std::size_t link_count) const;
};

struct FlowAssignment {
  FlowDemand demand;
  std::optional<Path> path;
  double rate = 0.0;

  bool routed() const { return path.has_value() && rate > 0.0; }
};

/// Unsplittable routing: each routed flow on exactly one path.
struct RoutingDecision {
  std::vector<FlowAssignment> flows;
  std::vector<std::string> reports;  // flows left unrouted or degraded

  double throughput() const;
  double cost(std::span<const double> link_cost) const;
  std::size_t routed_count() const;
};

enum class Constraint {
  Nonnegativity,      // r^f(l) >= 0
  FlowCapacity,       // r^f(l) <= C(l)
  AggregateCapacity,  // sum_f r^f(l) <= available(l)
  Conservation,       // inflow = outflow at intermediate nodes
  SourceInflow,       // nothing enters s_f
  SinkOutflow,        // nothing leaves d_f
  MaxRate,            // outflow of s_f <= R^f
  MinRate,            // outflow of s_f >= N^f
  PathStructure,      // routed path does not chain from s_f to d_f
};

std::string_view constraint_name(Constraint c);

struct Violation {
  Constraint family;
  std::optional<std::size_t> flow;
  std::optional<LinkId> link;
  std::optional<NodeId> node;
  double excess = 0.0;
  std::string message;
};

struct AdmissibilityReport {
  std::vector<Violation> violations;

  bool admissible() const { return violations.empty(); }
  bool has(Constraint c) const;
  std::string summary() const;
};

/// Evaluates every constraint family on link-level rates. Throws
/// DimensionError when the shape does not match the demands and links.
AdmissibilityReport check_admissible(const Network& net, const NetworkState& state,
                                     std::span<const FlowDemand> demands, const LinkRates& rates);
AdmissibilityReport check_admissible(const Network& net, const NetworkState& state,
                                     std::span<const FlowDemand> demands, const FractionalFlow& flow);
/// Adds the unsplittable-specific checks (path chaining, unrouted flows with
/// N^f > 0) on top of the link-level evaluation.
AdmissibilityReport check_admissible(const Network& net, const NetworkState& state,
                                     const RoutingDecision& decision);

/// Exhaustive search over every simple path and integer-Mbps rate per flow.
/// Maximizes throughput, then minimizes cost, then prefers the
/// lexicographically smallest path choice. Only for <= 8 nodes, <= 4 flows
/// and integer-Mbps capacities and demands.
RoutingDecision solve_exact_oracle(const Network& net, const NetworkState& state,
                                   std::span<const FlowDemand> demands, const SolverConfig& config);

/// Multiplicative-weights max-throughput solve over each flow's candidate
/// paths (minimum rates are reserved first), followed by a greedy top-up on
/// residual capacity.
FractionalFlow fractional_max_throughput(const Network& net, const NetworkState& state,
                                         std::span<const FlowDemand> demands,
                                         const CandidateTable& candidates, const SolverConfig& config);

/// Reroutes each flow onto cheaper candidate paths while holding its
/// throughput; never increases total cost.
FractionalFlow fractional_min_cost(const Network& net, const NetworkState& state,
                                   std::span<const FlowDemand> demands, const FractionalFlow& targets,
                                   const SolverConfig& config);

/// Greedy rounding: flows in decreasing throughput order take the path that
/// carries most of their fractional rate, diverting or down-rating when the
/// residual capacity is short.
RoutingDecision select_unsplittable(const FractionalFlow& fractional, const Network& net,
                                    const NetworkState& state, std::span<const FlowDemand> demands,
                                    const SolverConfig& config);

struct HeuristicResult {
  RoutingDecision decision;
  double seconds = 0.0;
};

HeuristicResult baseline_heuristic(const Network& net, const NetworkState& state, const TrafficMatrix& tm,
                                   const CandidateTable& candidates, const SolverConfig& config);
HeuristicResult baseline_heuristic(const Network& net, const NetworkState& state, const TrafficMatrix& tm,
                                   const SolverConfig& config);
/// Same pipeline on an explicit demand list, which unlike a TM may carry
/// several flows per OD pair.
HeuristicResult baseline_heuristic(const Network& net, const NetworkState& state, std::span<const FlowDemand> demands,
                                   const CandidateTable& candidates, const SolverConfig& config);

/// Routes each demand on the candidate at `preferred[i]`, largest demands
/// first, clipping to residual capacity. A demand whose preferred path
/// cannot carry its minimum (or any) rate moves to the next candidate;
/// `fallbacks` counts those moves and demands left unrouted.
RoutingDecision route_on_preferred_paths(const Network& net, const NetworkState& state,
                                         std::span<const FlowDemand> demands,
                                         std::span<const std::size_t> preferred,
                                         const CandidateTable& candidates, std::size_t* fallbacks = nullptr);

/// `flow_id,src,dst,rate_bps,path,cost_contrib` rows; path is `;`-joined link ids.
std::string decision_csv(const RoutingDecision& decision, const Network& net, const NetworkState& state);

}  // namespace neuroute

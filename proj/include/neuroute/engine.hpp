#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "neuroute/flowsolve.hpp"
#include "neuroute/imitation.hpp"
#include "neuroute/neuralnet.hpp"
#include "neuroute/topology.hpp"
#include "neuroute/traffic.hpp"

namespace neuroute {

struct ForwardingRule {
  OdPair od;
  Path path;
  double rate = 0.0;  // bits/s
  std::int64_t install_tick = 0;
};

struct TickReport {
  std::int64_t tick = 0;
  std::size_t rules = 0;
  double infer_ms = 0.0;
  double bh_ms = 0.0;         // only when the teacher ran this tick
  std::size_t fallbacks = 0;  // flows moved off their decoded path
  bool bh_fallback = false;   // the whole tick was handed to the teacher
  double throughput = 0.0;
  double cost = 0.0;
  double dropped = 0.0;       // fraction of predicted demand left unrouted
};

struct EngineConfig {
  SolverConfig solver;
  std::size_t window = kDefaultWindow;
  double fallback_threshold = 0.1;
};

/// Chooses one candidate index per OD slot for a (TM, state) pair.
class PathPolicy {
 public:
  virtual ~PathPolicy() = default;
  virtual std::vector<std::size_t> choose(const TrafficMatrix& tm, const NetworkState& state) const = 0;
};

class MlpPolicy final : public PathPolicy {
 public:
  MlpPolicy(const Network& net, const Mlp& model, const CandidateTable& table);
  std::vector<std::size_t> choose(const TrafficMatrix& tm, const NetworkState& state) const override;

 private:
  const Network& net_;
  const Mlp& model_;
  const CandidateTable& table_;
};

/// The teacher's own choices, encoded the way dataset labels are.
class TeacherPolicy final : public PathPolicy {
 public:
  TeacherPolicy(const Network& net, const CandidateTable& table, SolverConfig config);
  std::vector<std::size_t> choose(const TrafficMatrix& tm, const NetworkState& state) const override;

 private:
  const Network& net_;
  const CandidateTable& table_;
  SolverConfig config_;
};

struct TickResult {
  std::vector<ForwardingRule> rules;
  RoutingDecision decision;
  TickReport report;
  NetworkState next_state;
  TrafficMatrix predicted;
};

/// Predicts the next TM from the last `window` matrices, asks the policy for
/// paths, assigns rates in decreasing-demand order with per-flow candidate
/// fallback, and hands the tick to the teacher when too much demand is
/// dropped. The installed rule set always passes check_admissible.
TickResult route_tick(const Network& net, const NetworkState& state, std::span<const TrafficMatrix> window,
                      const PathPolicy& policy, const CandidateTable& table, const EngineConfig& config);

struct BenchRow {
  std::int64_t tick = 0;
  double throughput = 0.0;
  double cost = 0.0;
  double infer_ms = 0.0;
  double bh_ms = 0.0;
  std::size_t fallbacks = 0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  double accuracy = 0.0;          // policy vs teacher over active slots
  double throughput_ratio = 0.0;  // policy paths vs teacher paths, same rate rule
  double mean_infer_ms = 0.0;
  double p95_infer_ms = 0.0;
  double mean_bh_ms = 0.0;
  double p95_bh_ms = 0.0;
  double speedup = 0.0;           // mean teacher time over mean policy time
  std::size_t tick_fallbacks = 0;

  /// `tick,throughput_bps,cost,infer_ms,bh_ms,fallbacks`
  std::string csv() const;
  std::string summary_csv() const;
};

/// Paired per-tick runs of the policy and the teacher on predicted TMs, from
/// tick `window` onward; each tick starts from full capacity.
BenchReport compare_with_bh(const Network& net, const TmSequence& scenario, const PathPolicy& policy,
                            const CandidateTable& table, const EngineConfig& config);

}  // namespace neuroute

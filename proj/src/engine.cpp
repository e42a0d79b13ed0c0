#include <algorithm>
#include <chrono>
#include <cmath>

#include <fmt/core.h>

#include "neuroute/engine.hpp"
#include "neuroute/error.hpp"

namespace neuroute {

namespace {

using clk = std::chrono::steady_clock;

double since_ms(clk::time_point start) {
  return std::chrono::duration<double, std::milli>(clk::now() - start).count();
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - 1;
  return v[std::min(idx, v.size() - 1)];
}

double dropped_fraction(const RoutingDecision& d) {
  double asked = 0.0, got = 0.0;
  for (const auto& a : d.flows) {
    asked += a.demand.requested;
    if (a.routed()) got += a.rate;
  }
  return asked > 0.0 ? std::max(0.0, 1.0 - got / asked) : 0.0;
}

}  // namespace

MlpPolicy::MlpPolicy(const Network& net, const Mlp& model, const CandidateTable& table)
    : net_(net), model_(model), table_(table) {
  if (model.input_size() != input_width(net) || model.group_size != table.k() ||
      model.output_size() != output_width(net, table.k()))
    throw DimensionError(fmt::format("model shape {} -> {} (k={}) does not match the topology ({} -> {}, k={})",
                                     model.input_size(), model.output_size(), model.group_size, input_width(net),
                                     output_width(net, table.k()), table.k()));
  if (!model.topology_hash.empty() && model.topology_hash != net.hash())
    throw ValidationError("model was trained on a different topology");
}

std::vector<std::size_t> MlpPolicy::choose(const TrafficMatrix& tm, const NetworkState& state) const {
  const auto in = encode_input(net_, tm, state);
  const auto out = forward(model_, in.values);
  return decode_indices({out.data(), static_cast<std::size_t>(out.size())}, table_);
}

TeacherPolicy::TeacherPolicy(const Network& net, const CandidateTable& table, SolverConfig config)
    : net_(net), table_(table), config_(config) {}

std::vector<std::size_t> TeacherPolicy::choose(const TrafficMatrix& tm, const NetworkState& state) const {
  const auto bh = baseline_heuristic(net_, state, tm, table_, config_);
  const auto enc = encode_labels(bh.decision, table_);
  return {enc.labels.begin(), enc.labels.end()};
}

TickResult route_tick(const Network& net, const NetworkState& state, std::span<const TrafficMatrix> window,
                      const PathPolicy& policy, const CandidateTable& table, const EngineConfig& config) {
  if (config.window < 2) throw ValidationError("prediction window must be at least 2");
  if (window.size() < config.window)
    throw ValidationError(fmt::format("need {} past matrices, got {}", config.window, window.size()));
  if (table.node_count() != net.node_count()) throw DimensionError("candidate table does not match the topology");
  state.validate(net);

  TickResult out;
  out.predicted = predict_next(window.last(config.window));
  const auto demands = tm_to_demands(out.predicted, config.solver.min_rate_fraction);
  out.report.tick = out.predicted.timestamp;

  if (!demands.empty()) {
    const auto start = clk::now();
    const auto chosen = policy.choose(out.predicted, state);
    out.report.infer_ms = since_ms(start);
    out.decision = route_on_preferred_paths(net, state, demands, per_demand(chosen, demands, net.node_count()), table,
                                            &out.report.fallbacks);
    out.report.dropped = dropped_fraction(out.decision);
    if (out.report.dropped > config.fallback_threshold) {
      try {
        const auto bh = baseline_heuristic(net, state, out.predicted, table, config.solver);
        out.report.bh_ms = 1e3 * bh.seconds;
        if (bh.decision.throughput() > out.decision.throughput()) {
          out.decision = bh.decision;
          out.report.bh_fallback = true;
          out.report.dropped = dropped_fraction(out.decision);
        }
      } catch (const InfeasibleError&) {
        // Keep the policy's decision; it is admissible by construction.
      }
    }
  }

  const auto check = check_admissible(net, state, out.decision);
  if (!check.admissible()) throw CapacityViolation("rule set failed admissibility: " + check.summary(), 0);
  out.next_state = apply_routing(net, state, out.decision);
  for (const auto& a : out.decision.flows) {
    if (a.routed() && a.rate > 0.0) out.rules.push_back({a.demand.od(), *a.path, a.rate, out.predicted.timestamp});
  }
  out.report.rules = out.rules.size();
  out.report.throughput = out.decision.throughput();
  out.report.cost = out.decision.cost(state.cost);
  return out;
}

BenchReport compare_with_bh(const Network& net, const TmSequence& scenario, const PathPolicy& policy,
                            const CandidateTable& table, const EngineConfig& config) {
  BenchReport rep;
  const auto& tms = scenario.matrices;
  std::size_t correct = 0, counted = 0;
  double policy_tp = 0.0, teacher_tp = 0.0;
  std::vector<double> infer, bh_times;
  for (std::size_t t = config.window; t < tms.size(); ++t) {
    const auto state = NetworkState::full(net, tms[t].timestamp);
    const std::span<const TrafficMatrix> window(tms.data() + t - config.window, config.window);
    const auto predicted = predict_next(window);
    const auto demands = tm_to_demands(predicted, config.solver.min_rate_fraction);

    auto start = clk::now();
    const auto chosen = policy.choose(predicted, state);
    const double infer_ms = since_ms(start);

    start = clk::now();
    HeuristicResult bh;
    try {
      bh = baseline_heuristic(net, state, predicted, table, config.solver);
    } catch (const InfeasibleError&) {
      continue;
    }
    const double bh_ms = since_ms(start);
    const auto labels = encode_labels(bh.decision, table);

    std::size_t moved = 0;
    const auto mine = route_on_preferred_paths(net, state, demands, per_demand(chosen, demands, net.node_count()),
                                               table, &moved);
    std::vector<std::size_t> teacher(labels.labels.begin(), labels.labels.end());
    const auto theirs =
        route_on_preferred_paths(net, state, demands, per_demand(teacher, demands, net.node_count()), table);
    for (std::size_t od = 0; od < chosen.size(); ++od) {
      if (!labels.active[od]) continue;
      correct += chosen[od] == static_cast<std::size_t>(labels.labels[od]) ? 1 : 0;
      ++counted;
    }
    policy_tp += mine.throughput();
    teacher_tp += theirs.throughput();
    if (dropped_fraction(mine) > config.fallback_threshold) ++rep.tick_fallbacks;
    infer.push_back(infer_ms);
    bh_times.push_back(bh_ms);
    rep.rows.push_back({predicted.timestamp, mine.throughput(), mine.cost(state.cost), infer_ms, bh_ms, moved});
  }
  if (rep.rows.empty()) return rep;
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  rep.accuracy = counted ? static_cast<double>(correct) / static_cast<double>(counted) : 1.0;
  rep.throughput_ratio = teacher_tp > 0.0 ? policy_tp / teacher_tp : 1.0;
  rep.mean_infer_ms = mean(infer);
  rep.p95_infer_ms = percentile(infer, 0.95);
  rep.mean_bh_ms = mean(bh_times);
  rep.p95_bh_ms = percentile(bh_times, 0.95);
  rep.speedup = rep.mean_infer_ms > 0.0 ? rep.mean_bh_ms / rep.mean_infer_ms : 0.0;
  return rep;
}

std::string BenchReport::csv() const {
  std::string out = "tick,throughput_bps,cost,infer_ms,bh_ms,fallbacks\n";
  for (const auto& r : rows)
    out += fmt::format("{},{},{},{},{},{}\n", r.tick, r.throughput, r.cost, r.infer_ms, r.bh_ms, r.fallbacks);
  return out;
}

std::string BenchReport::summary_csv() const {
  return fmt::format(
      "ticks,accuracy,throughput_ratio,mean_infer_ms,p95_infer_ms,mean_bh_ms,p95_bh_ms,speedup,tick_fallbacks\n"
      "{},{},{},{},{},{},{},{},{}\n",
      rows.size(), accuracy, throughput_ratio, mean_infer_ms, p95_infer_ms, mean_bh_ms, p95_bh_ms, speedup,
      tick_fallbacks);
}

}  // namespace neuroute

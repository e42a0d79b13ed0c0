#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "neuroute/error.hpp"
#include "neuroute/flowsolve.hpp"

namespace neuroute {

void SolverConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("epsilon must lie in (0, 1)");
  if (k_paths < 1) throw ValidationError("k-paths must be at least 1");
  if (!(throughput_slack >= 0.0 && throughput_slack < 1.0))
    throw ValidationError("throughput slack must lie in [0, 1)");
  if (!(min_rate_fraction >= 0.0 && min_rate_fraction <= 1.0))
    throw ValidationError("minimum-rate fraction must lie in [0, 1]");
}

std::size_t SolverConfig::iteration_budget(std::size_t link_count) const {
  if (max_iterations > 0) return max_iterations;
  const double logl = std::log(static_cast<double>(std::max<std::size_t>(link_count, 2)));
  return 10 * static_cast<std::size_t>(std::ceil(logl / (epsilon * epsilon)));
}

double FlowSplit::throughput() const {
  double t = 0.0;
  for (const auto& s : shares) t += s.rate;
  return t;
}

double FractionalFlow::total_throughput() const {
  double t = 0.0;
  for (const auto& f : flows) t += f.throughput();
  return t;
}

double FractionalFlow::total_cost(std::span<const double> link_cost) const {
  double c = 0.0;
  for (const auto& f : flows) {
    for (const auto& s : f.shares) c += s.rate * path_cost(link_cost, s.path);
  }
  return c;
}

LinkRates FractionalFlow::link_rates(std::size_t link_count) const {
  LinkRates out(flows.size(), std::vector<double>(link_count, 0.0));
  for (std::size_t f = 0; f < flows.size(); ++f) {
    for (const auto& s : flows[f].shares) {
      for (LinkId l : s.path.links) out[f].at(l) += s.rate;
    }
  }
  return out;
}

double RoutingDecision::throughput() const {
  double t = 0.0;
  for (const auto& a : flows) {
    if (a.routed()) t += a.rate;
  }
  return t;
}

double RoutingDecision::cost(std::span<const double> link_cost) const {
  double c = 0.0;
  for (const auto& a : flows) {
    if (a.routed()) c += a.rate * path_cost(link_cost, *a.path);
  }
  return c;
}

std::size_t RoutingDecision::routed_count() const {
  return static_cast<std::size_t>(std::count_if(flows.begin(), flows.end(), [](const auto& a) { return a.routed(); }));
}

std::string_view constraint_name(Constraint c) {
  switch (c) {
    case Constraint::Nonnegativity: return "nonnegativity";
    case Constraint::FlowCapacity: return "per-flow capacity";
    case Constraint::AggregateCapacity: return "aggregate capacity";
    case Constraint::Conservation: return "flow conservation";
    case Constraint::SourceInflow: return "source inflow";
    case Constraint::SinkOutflow: return "sink outflow";
    case Constraint::MaxRate: return "requested-rate bound";
    case Constraint::MinRate: return "minimum-rate bound";
    case Constraint::PathStructure: return "path structure";
  }
  return "unknown";
}

bool AdmissibilityReport::has(Constraint c) const {
  return std::any_of(violations.begin(), violations.end(), [c](const Violation& v) { return v.family == c; });
}

std::string AdmissibilityReport::summary() const {
  if (violations.empty()) return "admissible";
  std::string out = fmt::format("{} violation(s)", violations.size());
  for (std::size_t i = 0; i < std::min<std::size_t>(violations.size(), 5); ++i)
    out += "; " + violations[i].message;
  return out;
}

namespace {

double tol(double scale) { return kRateTolerance * std::max(1.0, std::abs(scale)); }

}  // namespace

AdmissibilityReport check_admissible(const Network& net, const NetworkState& state,
                                     std::span<const FlowDemand> demands, const LinkRates& rates) {
  const std::size_t nl = net.link_count();
  if (state.available.size() != nl) throw DimensionError("network state does not match the link count");
  if (rates.size() != demands.size())
    throw DimensionError(fmt::format("rates cover {} flows but {} demands were given", rates.size(), demands.size()));
  for (const auto& row : rates) {
    if (row.size() != nl) throw DimensionError("per-flow rate vector does not match the link count");
  }
  for (const auto& d : demands) {
    if (d.src >= net.node_count() || d.dst >= net.node_count())
      throw DimensionError(fmt::format("flow {} references an unknown node", d.id));
  }

  AdmissibilityReport report;
  auto add = [&](Constraint c, std::optional<std::size_t> f, std::optional<LinkId> l, std::optional<NodeId> v,
                 double excess, std::string msg) {
    report.violations.push_back(Violation{c, f, l, v, excess, std::move(msg)});
  };

  std::vector<double> aggregate(nl, 0.0);
  for (std::size_t f = 0; f < demands.size(); ++f) {
    const auto& d = demands[f];
    std::vector<double> in(net.node_count(), 0.0), out(net.node_count(), 0.0);
    for (LinkId l = 0; l < nl; ++l) {
      const double r = rates[f][l];
      const double cap = net.link(l).capacity_bps;
      if (!(r >= -tol(cap)))
        add(Constraint::Nonnegativity, f, l, std::nullopt, -r,
            fmt::format("flow {} has negative rate {} on link {}", d.id, r, l));
      if (r > cap + tol(cap))
        add(Constraint::FlowCapacity, f, l, std::nullopt, r - cap,
            fmt::format("flow {} carries {} on link {} of capacity {}", d.id, r, l, cap));
      aggregate[l] += r;
      out[net.link(l).src] += r;
      in[net.link(l).dst] += r;
    }
    for (NodeId v = 0; v < net.node_count(); ++v) {
      if (v == d.src || v == d.dst) continue;
      const double gap = in[v] - out[v];
      if (std::abs(gap) > tol(std::max(in[v], out[v])))
        add(Constraint::Conservation, f, std::nullopt, v, std::abs(gap),
            fmt::format("flow {} is not conserved at node {} (in {}, out {})", d.id, net.node_name(v), in[v], out[v]));
    }
    if (in[d.src] > tol(d.requested))
      add(Constraint::SourceInflow, f, std::nullopt, d.src, in[d.src],
          fmt::format("flow {} sends {} back into its source", d.id, in[d.src]));
    if (out[d.dst] > tol(d.requested))
      add(Constraint::SinkOutflow, f, std::nullopt, d.dst, out[d.dst],
          fmt::format("flow {} sends {} out of its destination", d.id, out[d.dst]));
    const double sent = out[d.src];
    if (sent > d.requested + tol(d.requested))
      add(Constraint::MaxRate, f, std::nullopt, std::nullopt, sent - d.requested,
          fmt::format("flow {} sends {} above its requested {}", d.id, sent, d.requested));
    if (sent < d.minimum - tol(d.minimum))
      add(Constraint::MinRate, f, std::nullopt, std::nullopt, d.minimum - sent,
          fmt::format("flow {} sends {} below its minimum {}", d.id, sent, d.minimum));
  }
  for (LinkId l = 0; l < nl; ++l) {
    const double avail = state.available[l];
    if (aggregate[l] > avail + tol(net.link(l).capacity_bps))
      add(Constraint::AggregateCapacity, std::nullopt, l, std::nullopt, aggregate[l] - avail,
          fmt::format("link {} ({} -> {}) carries {} with {} available", l, net.node_name(net.link(l).src),
                      net.node_name(net.link(l).dst), aggregate[l], avail));
  }
  return report;
}

AdmissibilityReport check_admissible(const Network& net, const NetworkState& state,
                                     std::span<const FlowDemand> demands, const FractionalFlow& flow) {
  if (flow.flows.size() != demands.size())
    throw DimensionError("fractional flow does not match the demand list");
  for (std::size_t f = 0; f < flow.flows.size(); ++f) {
    for (const auto& s : flow.flows[f].shares) {
      for (LinkId l : s.path.links) {
        if (l >= net.link_count()) throw DimensionError(fmt::format("flow {} uses unknown link {}", f, l));
      }
    }
  }
  return check_admissible(net, state, demands, flow.link_rates(net.link_count()));
}

AdmissibilityReport check_admissible(const Network& net, const NetworkState& state,
                                     const RoutingDecision& decision) {
  std::vector<FlowDemand> demands;
  LinkRates rates;
  AdmissibilityReport structural;
  for (std::size_t f = 0; f < decision.flows.size(); ++f) {
    const auto& a = decision.flows[f];
    demands.push_back(a.demand);
    rates.emplace_back(net.link_count(), 0.0);
    if (!a.path) continue;
    for (LinkId l : a.path->links) {
      if (l >= net.link_count()) throw DimensionError(fmt::format("flow {} uses unknown link {}", a.demand.id, l));
    }
    if (a.path->od != a.demand.od() || !is_simple_path(net, *a.path)) {
      structural.violations.push_back(Violation{Constraint::PathStructure, f, std::nullopt, std::nullopt, 0.0,
                                                fmt::format("flow {} path does not chain from {} to {}", a.demand.id,
                                                            net.node_name(a.demand.src), net.node_name(a.demand.dst))});
    }
    for (LinkId l : a.path->links) rates.back()[l] += a.rate;
  }
  AdmissibilityReport report = check_admissible(net, state, demands, rates);
  report.violations.insert(report.violations.begin(), structural.violations.begin(), structural.violations.end());
  return report;
}

}  // namespace neuroute

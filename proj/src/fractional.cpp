#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/core.h>

#include "neuroute/error.hpp"
#include "neuroute/flowsolve.hpp"

namespace neuroute {

namespace {

double tol(double scale) { return kRateTolerance * std::max(1.0, std::abs(scale)); }

// Order of a flow's shares by (path cost, link sequence).
std::vector<std::size_t> cheapest_first(const FlowSplit& split, std::span<const double> link_cost) {
  std::vector<std::size_t> idx(split.shares.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> cost;
  for (const auto& s : split.shares) cost.push_back(path_cost(link_cost, s.path));
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (cost[a] != cost[b]) return cost[a] < cost[b];
    return split.shares[a].path.links < split.shares[b].path.links;
  });
  return idx;
}

void add_load(std::vector<double>& load, const Path& p, double rate) {
  for (LinkId l : p.links) load[l] += rate;
}

// Flat path storage for the multiplicative-weights loop.
struct Commodity {
  std::size_t flow = 0;
  double headroom = 0.0;
  std::vector<std::size_t> share;           // index into the flow's shares
  std::vector<std::vector<LinkId>> links;   // usable candidate paths
  std::vector<double> routed;               // unscaled flow per path
};

// Scales the raw multiplicative-weights flow into the capacities, then fills
// leftover room greedily in commodity and candidate order. Returns the total.
double feasible_flow(const std::vector<Commodity>& comm, std::span<const double> capacity,
                     const std::vector<char>& used, std::vector<std::vector<double>>& flow) {
  const std::size_t nl = capacity.size();
  std::vector<double> load(nl, 0.0);
  double congestion = 0.0;
  for (const auto& c : comm) {
    double sent = 0.0;
    for (std::size_t p = 0; p < c.links.size(); ++p) {
      sent += c.routed[p];
      for (LinkId l : c.links[p]) load[l] += c.routed[p];
    }
    congestion = std::max(congestion, sent / c.headroom);
  }
  for (LinkId l = 0; l < nl; ++l)
    if (used[l]) congestion = std::max(congestion, load[l] / capacity[l]);
  const double scale = congestion > 0.0 ? 1.0 / (congestion * (1.0 + 1e-12)) : 0.0;

  std::vector<double> residual(capacity.begin(), capacity.end());
  flow.resize(comm.size());
  for (std::size_t j = 0; j < comm.size(); ++j) {
    flow[j].assign(comm[j].links.size(), 0.0);
    for (std::size_t p = 0; p < comm[j].links.size(); ++p) {
      flow[j][p] = comm[j].routed[p] * scale;
      for (LinkId l : comm[j].links[p]) residual[l] -= flow[j][p];
    }
  }
  for (auto& r : residual) r = std::max(0.0, r);

  double total = 0.0;
  for (std::size_t j = 0; j < comm.size(); ++j) {
    const auto& c = comm[j];
    double sent = std::accumulate(flow[j].begin(), flow[j].end(), 0.0);
    for (std::size_t p = 0; p < c.links.size(); ++p) {
      double amt = c.headroom - sent;
      if (amt <= tol(c.headroom)) break;
      for (LinkId l : c.links[p]) amt = std::min(amt, residual[l]);
      if (amt <= 0.0) continue;
      flow[j][p] += amt;
      sent += amt;
      for (LinkId l : c.links[p]) residual[l] = std::max(0.0, residual[l] - amt);
    }
    total += sent;
  }
  return total;
}

// Upper bound on the optimum from LP duality. Link lengths come from the
// multiplicative weights; each demand edge gets the smallest length that keeps
// every candidate path at length >= 1, and the link lengths are rescaled by
// the best factor found on the piecewise-linear bound.
double dual_bound(const std::vector<Commodity>& comm, std::span<const double> capacity,
                  const std::vector<char>& used, const std::vector<double>& y) {
  double link_sum = 0.0;
  for (LinkId l = 0; l < capacity.size(); ++l)
    if (used[l]) link_sum += capacity[l] * y[l];

  struct Break {
    double at;  // scale at which the commodity stops needing its demand edge
    double headroom;
    double dist;
  };
  std::vector<Break> br;
  br.reserve(comm.size());
  double demand_sum = 0.0;
  for (const auto& c : comm) {
    double dist = std::numeric_limits<double>::infinity();
    for (const auto& p : c.links) {
      double len = 0.0;
      for (LinkId l : p) len += y[l];
      dist = std::min(dist, len);
    }
    br.push_back({1.0 / dist, c.headroom, dist});
    demand_sum += c.headroom;
  }
  std::sort(br.begin(), br.end(), [](const Break& a, const Break& b) { return a.at < b.at; });

  // bound(s) = s * link_sum + sum over commodities with s*dist < 1 of h * (1 - s*dist)
  double best = demand_sum;
  double h_active = demand_sum;
  double hd_active = 0.0;
  for (const auto& b : br) hd_active += b.headroom * b.dist;
  for (const auto& b : br) {
    best = std::min(best, b.at * link_sum + h_active - b.at * hd_active);
    h_active -= b.headroom;
    hd_active -= b.headroom * b.dist;
  }
  return best;
}

// Garg-Koenemann style packing over (link capacities + one virtual demand
// edge per flow) with Fleischer's round-robin phases. Lengths are kept
// relative to delta; `log_offset` tracks renormalization so the stopping
// rule (shortest length >= 1 in absolute terms) stays exact. Every few phases
// the current feasible flow is compared with the dual bound and the loop
// stops early once it is provably within (1 - eps) of the optimum.
// On return `routed` holds the final feasible flow.
std::size_t multiplicative_weights(std::vector<Commodity>& comm, std::span<const double> capacity, double eps,
                                   std::size_t budget) {
  constexpr std::size_t kCertifyEvery = 8;
  if (comm.empty()) return 0;
  const std::size_t nl = capacity.size();
  std::vector<char> used(nl, 0);
  for (const auto& c : comm)
    for (const auto& p : c.links)
      for (LinkId l : p) used[l] = 1;
  const double m = static_cast<double>(std::count(used.begin(), used.end(), 1) + comm.size());
  // ln(1/delta) for delta = (1+eps) / ((1+eps) m)^(1/eps)
  const double log_inv_delta = std::log((1.0 + eps) * m) / eps - std::log1p(eps);

  std::vector<double> y(nl, 0.0);
  for (LinkId l = 0; l < nl; ++l)
    if (used[l]) y[l] = 1.0 / capacity[l];
  std::vector<double> yv(comm.size());
  for (std::size_t j = 0; j < comm.size(); ++j) yv[j] = 1.0 / comm[j].headroom;

  auto shortest = [&](std::size_t j, std::size_t& arg) {
    double best = std::numeric_limits<double>::infinity();
    const auto& c = comm[j];
    for (std::size_t p = 0; p < c.links.size(); ++p) {
      double len = yv[j];
      for (LinkId l : c.links[p]) len += y[l];
      if (len < best) {
        best = len;
        arg = p;
      }
    }
    return best;
  };

  std::vector<double> cached(comm.size());
  double alpha = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < comm.size(); ++j) {
    std::size_t arg = 0;
    cached[j] = shortest(j, arg);
    alpha = std::min(alpha, cached[j]);
  }

  std::vector<std::vector<double>> flow;
  bool certified = false;
  double log_offset = 0.0;  // absolute length = stored * delta * exp(log_offset)
  std::size_t phase = 0;
  while (phase < budget) {
    const double stop = std::exp(log_inv_delta - log_offset);
    if (alpha >= stop) break;
    const double threshold = std::min(alpha * (1.0 + eps), stop);
    for (std::size_t j = 0; j < comm.size(); ++j) {
      if (cached[j] >= threshold) continue;
      auto& c = comm[j];
      while (true) {
        std::size_t p = 0;
        const double len = shortest(j, p);
        cached[j] = len;
        if (len >= threshold) break;
        double amount = c.headroom;
        for (LinkId l : c.links[p]) amount = std::min(amount, capacity[l]);
        c.routed[p] += amount;
        yv[j] *= 1.0 + eps * amount / c.headroom;
        for (LinkId l : c.links[p]) y[l] *= 1.0 + eps * amount / capacity[l];
      }
    }
    alpha = threshold;
    ++phase;
    if (alpha > 1e200) {
      constexpr double kShrink = 1e-200;
      for (auto& v : y) v *= kShrink;
      for (auto& v : yv) v *= kShrink;
      for (auto& v : cached) v *= kShrink;
      alpha *= kShrink;
      log_offset -= std::log(kShrink);
    }
    if (phase % kCertifyEvery == 0) {
      const double primal = feasible_flow(comm, capacity, used, flow);
      if (primal >= (1.0 - eps) * dual_bound(comm, capacity, used, y)) {
        certified = true;
        break;
      }
    }
  }
  if (!certified) feasible_flow(comm, capacity, used, flow);
  for (std::size_t j = 0; j < comm.size(); ++j) comm[j].routed = flow[j];
  return phase;
}

}  // namespace

FractionalFlow fractional_max_throughput(const Network& net, const NetworkState& state,
                                         std::span<const FlowDemand> demands, const CandidateTable& candidates,
                                         const SolverConfig& config) {
  config.validate();
  state.validate(net);
  const std::size_t nl = net.link_count();

  FractionalFlow out;
  out.flows.resize(demands.size());
  for (std::size_t f = 0; f < demands.size(); ++f) {
    const auto& d = demands[f];
    if (!(d.minimum >= 0.0 && d.minimum <= d.requested))
      throw ValidationError(fmt::format("flow {} needs 0 <= N^f <= R^f", d.id));
    for (const auto& p : candidates.paths(d.od())) out.flows[f].shares.push_back(PathShare{p, 0.0});
  }

  std::vector<double> residual = state.available;

  // Minimum rates first, largest first, cheapest paths first.
  std::vector<std::size_t> order(demands.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return demands[a].minimum > demands[b].minimum; });
  for (std::size_t f : order) {
    double need = demands[f].minimum;
    if (!(need > 0.0)) continue;
    auto& split = out.flows[f];
    for (std::size_t i : cheapest_first(split, state.cost)) {
      const double amt = std::min(need, bottleneck(residual, split.shares[i].path));
      if (amt <= 0.0) continue;
      split.shares[i].rate += amt;
      for (LinkId l : split.shares[i].path.links) residual[l] -= amt;
      need -= amt;
    }
    if (need > tol(demands[f].minimum))
      throw InfeasibleError(fmt::format("flow {} ({} -> {}): minimum rate {} bps cannot be met on its candidate paths",
                                        demands[f].id, net.node_name(demands[f].src), net.node_name(demands[f].dst),
                                        demands[f].minimum));
  }
  for (auto& r : residual) r = std::max(0.0, r);

  std::vector<Commodity> comm;
  for (std::size_t f = 0; f < demands.size(); ++f) {
    const double headroom = demands[f].requested - out.flows[f].throughput();
    if (headroom <= tol(demands[f].requested)) continue;
    Commodity c;
    c.flow = f;
    c.headroom = headroom;
    for (std::size_t i = 0; i < out.flows[f].shares.size(); ++i) {
      const auto& p = out.flows[f].shares[i].path;
      if (bottleneck(residual, p) <= tol(1.0)) continue;
      c.share.push_back(i);
      c.links.push_back(p.links);
    }
    if (c.links.empty()) continue;
    c.routed.assign(c.links.size(), 0.0);
    comm.push_back(std::move(c));
  }

  out.phases = multiplicative_weights(comm, residual, config.epsilon, config.iteration_budget(nl));

  for (const auto& c : comm) {
    for (std::size_t p = 0; p < c.links.size(); ++p) {
      auto& share = out.flows[c.flow].shares[c.share[p]];
      share.rate += c.routed[p];
      for (LinkId l : c.links[p]) residual[l] -= c.routed[p];
    }
  }
  for (auto& r : residual) r = std::max(0.0, r);

  // Top up along any path that still has room.
  for (std::size_t f = 0; f < demands.size(); ++f) {
    auto& split = out.flows[f];
    double headroom = demands[f].requested - split.throughput();
    for (std::size_t i : cheapest_first(split, state.cost)) {
      if (headroom <= tol(demands[f].requested)) break;
      const double amt = std::min(headroom, bottleneck(residual, split.shares[i].path));
      if (amt <= 0.0) continue;
      split.shares[i].rate += amt;
      for (LinkId l : split.shares[i].path.links) residual[l] = std::max(0.0, residual[l] - amt);
      headroom -= amt;
    }
  }
  return out;
}

FractionalFlow fractional_min_cost(const Network& net, const NetworkState& state, std::span<const FlowDemand> demands,
                                   const FractionalFlow& targets, const SolverConfig& config) {
  config.validate();
  auto check = check_admissible(net, state, demands, targets);
  if (!check.admissible())
    throw InfeasibleError("throughput targets are inconsistent with capacities: " + check.summary());

  FractionalFlow out = targets;
  const std::size_t nl = net.link_count();
  std::vector<double> load(nl, 0.0);
  for (const auto& f : out.flows)
    for (const auto& s : f.shares) add_load(load, s.path, s.rate);

  std::vector<std::size_t> order(out.flows.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> target(out.flows.size());
  for (std::size_t f = 0; f < out.flows.size(); ++f) target[f] = out.flows[f].throughput();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return target[a] > target[b]; });

  std::vector<std::vector<std::size_t>> cheap(out.flows.size());
  for (std::size_t f = 0; f < out.flows.size(); ++f) cheap[f] = cheapest_first(out.flows[f], state.cost);

  std::vector<double> residual(nl);
  for (std::size_t pass = 0; pass < config.max_cost_passes; ++pass) {
    bool improved = false;
    for (std::size_t f : order) {
      auto& split = out.flows[f];
      if (target[f] <= 0.0 || split.shares.size() < 2) continue;
      const double old_cost = [&] {
        double c = 0.0;
        for (const auto& s : split.shares) c += s.rate * path_cost(state.cost, s.path);
        return c;
      }();
      for (const auto& s : split.shares) add_load(load, s.path, -s.rate);
      for (LinkId l = 0; l < nl; ++l) residual[l] = std::max(0.0, state.available[l] - load[l]);

      std::vector<double> rates(split.shares.size(), 0.0);
      double need = target[f];
      double new_cost = 0.0;
      for (std::size_t i : cheap[f]) {
        if (need <= 0.0) break;
        const auto& p = split.shares[i].path;
        const double amt = std::min(need, bottleneck(residual, p));
        if (amt <= 0.0) continue;
        rates[i] = amt;
        need -= amt;
        new_cost += amt * path_cost(state.cost, p);
        for (LinkId l : p.links) residual[l] -= amt;
      }
      const bool placed = need <= tol(target[f]);
      if (placed && new_cost < old_cost - 1e-12 * std::max(1.0, old_cost)) {
        for (std::size_t i = 0; i < rates.size(); ++i) split.shares[i].rate = rates[i];
        improved = true;
      }
      for (const auto& s : split.shares) add_load(load, s.path, s.rate);
    }
    if (!improved) break;
  }
  for (std::size_t f = 0; f < out.flows.size(); ++f) {
    if (std::abs(out.flows[f].throughput() - target[f]) > config.throughput_slack * target[f] + tol(target[f]))
      throw Error(fmt::format("cost phase moved flow {} outside its throughput slack", demands[f].id));
  }
  return out;
}

RoutingDecision select_unsplittable(const FractionalFlow& fractional, const Network& net, const NetworkState& state,
                                    std::span<const FlowDemand> demands, const SolverConfig& config) {
  config.validate();
  if (fractional.flows.size() != demands.size()) throw DimensionError("fractional flow does not match the demand list");

  const std::size_t nf = demands.size();
  std::vector<double> pi(nf);
  for (std::size_t f = 0; f < nf; ++f) pi[f] = fractional.flows[f].throughput();
  std::vector<std::size_t> order(nf);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pi[a] > pi[b]; });

  RoutingDecision out;
  out.flows.resize(nf);
  std::vector<double> residual = state.available;
  for (std::size_t f : order) {
    const auto& d = demands[f];
    const auto& shares = fractional.flows[f].shares;
    out.flows[f].demand = d;

    std::vector<std::size_t> pref(shares.size());
    std::iota(pref.begin(), pref.end(), 0);
    std::vector<double> cost;
    for (const auto& s : shares) cost.push_back(path_cost(state.cost, s.path));
    std::stable_sort(pref.begin(), pref.end(), [&](std::size_t a, std::size_t b) {
      if (shares[a].rate != shares[b].rate) return shares[a].rate > shares[b].rate;
      if (cost[a] != cost[b]) return cost[a] < cost[b];
      return shares[a].path.links < shares[b].path.links;
    });

    // Never ask for more than the fractional solve granted the flow.
    const double want = std::min(d.requested, pi[f]);
    const double floor_rate = std::max(d.minimum, tol(d.requested));
    if (want < floor_rate) {
      out.reports.push_back(fmt::format("flow {} ({} -> {}) unrouted: no fractional throughput", d.id,
                                        net.node_name(d.src), net.node_name(d.dst)));
      continue;
    }

    std::optional<std::size_t> pick;
    for (std::size_t i : pref) {
      if (bottleneck(residual, shares[i].path) >= want - tol(want)) {
        pick = i;
        break;
      }
    }
    if (!pick) {
      double best = -1.0;
      for (std::size_t i : pref) {
        const double b = bottleneck(residual, shares[i].path);
        if (b > best) {
          best = b;
          pick = i;
        }
      }
    }
    const double rate = pick ? std::min(want, bottleneck(residual, shares[*pick].path)) : 0.0;
    if (!pick || rate < floor_rate) {
      out.reports.push_back(fmt::format("flow {} ({} -> {}) unrouted: minimum rate {} bps does not fit", d.id,
                                        net.node_name(d.src), net.node_name(d.dst), d.minimum));
      continue;
    }
    if (rate < want - tol(want))
      out.reports.push_back(fmt::format("flow {} ({} -> {}) down-rated to {} bps", d.id, net.node_name(d.src),
                                        net.node_name(d.dst), rate));
    out.flows[f].path = shares[*pick].path;
    out.flows[f].rate = rate;
    for (LinkId l : shares[*pick].path.links) residual[l] = std::max(0.0, residual[l] - rate);
  }
  return out;
}

RoutingDecision route_on_preferred_paths(const Network& net, const NetworkState& state,
                                         std::span<const FlowDemand> demands, std::span<const std::size_t> preferred,
                                         const CandidateTable& candidates, std::size_t* fallbacks) {
  if (preferred.size() != demands.size()) throw DimensionError("one preferred path index per demand is required");
  std::vector<std::size_t> order(demands.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return demands[a].requested > demands[b].requested; });

  std::size_t moved = 0;
  RoutingDecision out;
  out.flows.resize(demands.size());
  std::vector<double> residual = state.available;
  for (std::size_t f : order) {
    const auto& d = demands[f];
    out.flows[f].demand = d;
    const auto& paths = candidates.paths(d.od());
    const double floor_rate = std::max(d.minimum, tol(d.requested));
    std::optional<std::size_t> pick;
    const std::size_t first = paths.empty() ? 0 : std::min(preferred[f], paths.size() - 1);
    for (std::size_t step = 0; step < paths.size(); ++step) {
      const std::size_t i = (first + step) % paths.size();
      if (bottleneck(residual, paths[i]) >= floor_rate) {
        pick = i;
        break;
      }
    }
    if (!pick || *pick != preferred[f]) ++moved;
    if (!pick) {
      out.reports.push_back(fmt::format("flow {} ({} -> {}) unrouted: no candidate has room", d.id,
                                        net.node_name(d.src), net.node_name(d.dst)));
      continue;
    }
    const double rate = std::min(d.requested, bottleneck(residual, paths[*pick]));
    out.flows[f].path = paths[*pick];
    out.flows[f].rate = rate;
    for (LinkId l : paths[*pick].links) residual[l] = std::max(0.0, residual[l] - rate);
  }
  if (fallbacks) *fallbacks = moved;
  return out;
}

}  // namespace neuroute

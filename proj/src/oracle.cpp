#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "neuroute/error.hpp"
#include "neuroute/flowsolve.hpp"

namespace neuroute {

namespace {

constexpr double kMbps = 1e6;
constexpr std::size_t kMaxNodes = 8;
constexpr std::size_t kMaxFlows = 4;

long to_mbps(double bps, const char* what) {
  const double m = bps / kMbps;
  const double r = std::round(m);
  if (std::abs(m - r) > 1e-9 * std::max(1.0, std::abs(m)))
    throw TractabilityError(fmt::format("exact oracle needs integer-Mbps {}, got {} bps", what, bps));
  return static_cast<long>(r);
}

struct Candidate {
  std::vector<int> path;  // per flow: index into its path list, -1 = unrouted
  std::vector<long> rate; // per flow, Mbps
  long throughput = 0;
  double cost = 0.0;
};

bool cost_less(double a, double b) { return a < b - 1e-9 * std::max(1.0, std::abs(b)); }

class Search {
 public:
  Search(std::vector<std::vector<Path>> paths, std::vector<std::vector<double>> path_costs, std::vector<long> requested,
         std::vector<long> minimum, std::vector<long> capacity)
      : paths_(std::move(paths)),
        costs_(std::move(path_costs)),
        requested_(std::move(requested)),
        minimum_(std::move(minimum)),
        residual_(std::move(capacity)) {
    const std::size_t nf = requested_.size();
    tail_requested_.assign(nf + 1, 0);
    tail_min_cost_.assign(nf + 1, 0.0);
    for (std::size_t f = nf; f-- > 0;) {
      double cheapest = costs_[f].empty() ? 0.0 : *std::min_element(costs_[f].begin(), costs_[f].end());
      const long reach = costs_[f].empty() ? 0 : requested_[f];
      tail_requested_[f] = tail_requested_[f + 1] + reach;
      tail_min_cost_[f] = tail_min_cost_[f + 1] + static_cast<double>(reach) * cheapest;
    }
    current_.path.assign(nf, -1);
    current_.rate.assign(nf, 0);
  }

  std::optional<Candidate> run() {
    descend(0);
    return best_;
  }

 private:
  bool better(const Candidate& a, const Candidate& b) const {
    if (a.throughput != b.throughput) return a.throughput > b.throughput;
    if (cost_less(a.cost, b.cost)) return true;
    if (cost_less(b.cost, a.cost)) return false;
    for (std::size_t f = 0; f < a.path.size(); ++f) {
      static const std::vector<LinkId> kNone;
      const auto& pa = a.path[f] < 0 ? kNone : paths_[f][a.path[f]].links;
      const auto& pb = b.path[f] < 0 ? kNone : paths_[f][b.path[f]].links;
      if (pa != pb) return pa < pb;
    }
    return a.rate > b.rate;
  }

  void descend(std::size_t f) {
    if (f == requested_.size()) {
      if (!best_ || better(current_, *best_)) best_ = current_;
      return;
    }
    if (best_) {
      const long bound = current_.throughput + tail_requested_[f];
      if (bound < best_->throughput) return;
      if (bound == best_->throughput && cost_less(best_->cost, current_.cost + tail_min_cost_[f])) return;
    }
    for (std::size_t p = 0; p < paths_[f].size(); ++p) {
      long room = requested_[f];
      for (LinkId l : paths_[f][p].links) room = std::min(room, residual_[l]);
      for (long r = room; r >= std::max(minimum_[f], 1L); --r) {
        for (LinkId l : paths_[f][p].links) residual_[l] -= r;
        current_.path[f] = static_cast<int>(p);
        current_.rate[f] = r;
        current_.throughput += r;
        current_.cost += static_cast<double>(r) * costs_[f][p];
        descend(f + 1);
        current_.throughput -= r;
        current_.cost -= static_cast<double>(r) * costs_[f][p];
        for (LinkId l : paths_[f][p].links) residual_[l] += r;
      }
    }
    if (minimum_[f] == 0) {
      current_.path[f] = -1;
      current_.rate[f] = 0;
      descend(f + 1);
    }
  }

  std::vector<std::vector<Path>> paths_;
  std::vector<std::vector<double>> costs_;
  std::vector<long> requested_;
  std::vector<long> minimum_;
  std::vector<long> residual_;
  std::vector<long> tail_requested_;
  std::vector<double> tail_min_cost_;
  Candidate current_;
  std::optional<Candidate> best_;
};

}  // namespace

RoutingDecision solve_exact_oracle(const Network& net, const NetworkState& state, std::span<const FlowDemand> demands,
                                   const SolverConfig& config) {
  config.validate();
  state.validate(net);
  if (net.node_count() > kMaxNodes)
    throw TractabilityError(fmt::format("exact oracle handles at most {} nodes, got {}", kMaxNodes, net.node_count()));
  if (demands.size() > kMaxFlows)
    throw TractabilityError(fmt::format("exact oracle handles at most {} flows, got {}", kMaxFlows, demands.size()));

  std::vector<long> capacity;
  for (double a : state.available) capacity.push_back(to_mbps(a, "capacity"));

  std::vector<std::vector<Path>> paths;
  std::vector<std::vector<double>> costs;
  std::vector<long> requested, minimum;
  for (const auto& d : demands) {
    requested.push_back(to_mbps(d.requested, "demand"));
    minimum.push_back(to_mbps(d.minimum, "minimum rate"));
    paths.push_back(all_simple_paths(net, d.od()));
    costs.emplace_back();
    for (const auto& p : paths.back()) costs.back().push_back(path_cost(state.cost, p));
  }

  Search search(paths, costs, requested, minimum, capacity);
  auto best = search.run();
  if (!best) {
    std::string who;
    for (const auto& d : demands) {
      if (d.minimum > 0.0) who += fmt::format(" {}", d.id);
    }
    throw InfeasibleError("no admissible routing meets the minimum rates of flows" + who);
  }

  RoutingDecision out;
  for (std::size_t f = 0; f < demands.size(); ++f) {
    FlowAssignment a{demands[f], std::nullopt, 0.0};
    if (best->path[f] >= 0) {
      a.path = paths[f][best->path[f]];
      a.rate = static_cast<double>(best->rate[f]) * kMbps;
    } else {
      out.reports.push_back(fmt::format("flow {} unrouted", demands[f].id));
    }
    out.flows.push_back(std::move(a));
  }
  return out;
}

}  // namespace neuroute

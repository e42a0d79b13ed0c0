#include "neuroute/topology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/core.h>
#include <yaml-cpp/yaml.h>

#include "neuroute/error.hpp"
#include "neuroute/flowsolve.hpp"
#include "neuroute/hashing.hpp"

namespace neuroute {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Path costs are compared on a 1e-9 grid so that mathematically equal sums
// accumulated in different orders tie and fall through to the link order.
double canonical_cost(double c) { return std::round(c * 1e9) / 1e9; }

struct RankedPath {
  double cost;
  std::vector<LinkId> links;
  bool operator<(const RankedPath& o) const {
    if (cost != o.cost) return cost < o.cost;
    return links < o.links;
  }
};

RankedPath rank(const Network& net, std::vector<LinkId> links) {
  double c = 0.0;
  for (LinkId l : links) c += net.link(l).cost;
  return {canonical_cost(c), std::move(links)};
}

bool near(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

// Cheapest simple path from `from` to `to` avoiding the masked nodes and
// links; among equal-cost paths the lexicographically smallest link sequence.
std::optional<std::vector<LinkId>> lexmin_shortest(const Network& net, NodeId from, NodeId to,
                                                   const std::vector<char>& node_blocked,
                                                   const std::vector<char>& link_blocked) {
  const std::size_t n = net.node_count();
  std::vector<double> dist(n, kInf);
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[to] = 0.0;
  pq.emplace(0.0, to);
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[v]) continue;
    for (LinkId l : net.in_links(v)) {
      if (link_blocked[l]) continue;
      const NodeId u = net.link(l).src;
      if (node_blocked[u]) continue;
      const double nd = d + net.link(l).cost;
      if (nd < dist[u]) {
        dist[u] = nd;
        pq.emplace(nd, u);
      }
    }
  }
  if (dist[from] == kInf) return std::nullopt;

  // Depth-first walk over tight links in link-id order; the first complete
  // walk is the lexicographic minimum among shortest paths. Backtracking only
  // happens around zero-cost cycles.
  std::vector<char> on_path(n, 0);
  std::vector<LinkId> links;
  auto dfs = [&](auto&& self, NodeId u) -> bool {
    if (u == to) return true;
    on_path[u] = 1;
    std::vector<LinkId> out(net.out_links(u).begin(), net.out_links(u).end());
    std::sort(out.begin(), out.end());
    for (LinkId l : out) {
      if (link_blocked[l]) continue;
      const NodeId v = net.link(l).dst;
      if (node_blocked[v] || on_path[v] || dist[v] == kInf) continue;
      if (!near(net.link(l).cost + dist[v], dist[u])) continue;
      links.push_back(l);
      if (self(self, v)) return true;
      links.pop_back();
    }
    on_path[u] = 0;
    return false;
  };
  if (!dfs(dfs, from)) return std::nullopt;
  return links;
}

std::size_t yaml_line(const YAML::Node& node) { return static_cast<std::size_t>(node.Mark().line) + 1; }

}  // namespace

// ---------------------------------------------------------------------------

Network::Network(std::vector<std::string> node_names, std::vector<Link> links, std::string name,
                 std::string cost_unit)
    : names_(std::move(node_names)),
      links_(std::move(links)),
      name_(std::move(name)),
      cost_unit_(std::move(cost_unit)) {
  if (names_.size() < 2) throw ValidationError("network needs at least 2 nodes");
  if (links_.empty()) throw ValidationError("network needs at least 1 link");
  {
    std::set<std::string> seen;
    for (const auto& n : names_) {
      if (!seen.insert(n).second) throw ValidationError("duplicate node '" + n + "'");
    }
  }
  out_.assign(names_.size(), {});
  in_.assign(names_.size(), {});
  std::set<std::pair<NodeId, NodeId>> arcs;
  for (std::size_t i = 0; i < links_.size(); ++i) {
    Link& l = links_[i];
    l.id = i;
    if (l.src >= names_.size() || l.dst >= names_.size())
      throw ValidationError(fmt::format("link {} references a node outside the network", i));
    if (l.src == l.dst) throw ValidationError(fmt::format("link {} is a self-loop", i));
    if (!(l.capacity_bps > 0.0) || !std::isfinite(l.capacity_bps))
      throw ValidationError(fmt::format("link {} capacity must be positive", i));
    if (!(l.cost >= 0.0) || !std::isfinite(l.cost))
      throw ValidationError(fmt::format("link {} cost must be nonnegative", i));
    if (!arcs.emplace(l.src, l.dst).second)
      throw ValidationError(fmt::format("duplicate link {} -> {}", names_[l.src], names_[l.dst]));
    out_[l.src].push_back(i);
    in_[l.dst].push_back(i);
  }
}

std::optional<NodeId> Network::find_node(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

std::optional<LinkId> Network::find_link(NodeId src, NodeId dst) const {
  for (LinkId l : out_.at(src)) {
    if (links_[l].dst == dst) return l;
  }
  return std::nullopt;
}

std::string Network::hash() const {
  ByteWriter w;
  w.u64(names_.size());
  for (const auto& n : names_) w.str(n);
  w.u64(links_.size());
  for (const auto& l : links_) {
    w.u64(l.src);
    w.u64(l.dst);
    w.f64(l.capacity_bps);
    w.f64(l.cost);
  }
  return sha256_hex(w.bytes());
}

NetworkState NetworkState::full(const Network& net, std::int64_t timestamp) {
  NetworkState s;
  s.timestamp = timestamp;
  for (const auto& l : net.links()) {
    s.available.push_back(l.capacity_bps);
    s.cost.push_back(l.cost);
  }
  return s;
}

void NetworkState::validate(const Network& net) const {
  if (available.size() != net.link_count() || cost.size() != net.link_count())
    throw ValidationError(fmt::format("network state has {}/{} entries for {} links",
                                      available.size(), cost.size(), net.link_count()));
  for (std::size_t l = 0; l < available.size(); ++l) {
    if (!(available[l] >= 0.0) || available[l] > net.link(l).capacity_bps * (1 + 1e-12))
      throw ValidationError(fmt::format("link {} available capacity {} outside [0, {}]", l,
                                        available[l], net.link(l).capacity_bps));
    if (!(cost[l] >= 0.0)) throw ValidationError(fmt::format("link {} cost is negative", l));
  }
}

bool is_simple_path(const Network& net, const Path& path) {
  if (path.links.empty() || path.od.src == path.od.dst) return false;
  std::vector<char> seen(net.node_count(), 0);
  NodeId at = path.od.src;
  seen[at] = 1;
  for (LinkId l : path.links) {
    if (l >= net.link_count()) return false;
    const Link& link = net.link(l);
    if (link.src != at) return false;
    at = link.dst;
    if (seen[at]) return false;
    seen[at] = 1;
  }
  return at == path.od.dst;
}

double path_cost(std::span<const double> link_cost, const Path& path) {
  double c = 0.0;
  for (LinkId l : path.links) c += link_cost[l];
  return c;
}

double path_cost(const Network& net, const Path& path) {
  double c = 0.0;
  for (LinkId l : path.links) c += net.link(l).cost;
  return c;
}

double bottleneck(std::span<const double> available, const Path& path) {
  double b = kInf;
  for (LinkId l : path.links) b = std::min(b, available[l]);
  return path.links.empty() ? 0.0 : b;
}

std::string format_path(const Network& net, const Path& path) {
  std::string out = net.node_name(path.od.src);
  for (LinkId l : path.links) out += "->" + net.node_name(net.link(l).dst);
  return out;
}

// ---------------------------------------------------------------------------

Network load_topology(std::string_view document) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(document));
  } catch (const YAML::Exception& e) {
    throw ParseError("topology: " + e.msg, static_cast<std::size_t>(e.mark.line) + 1);
  }
  if (!root.IsMap()) throw ParseError("topology: expected a mapping at top level");

  const YAML::Node nodes = root["nodes"];
  if (!nodes || !nodes.IsSequence()) throw ParseError("topology: missing 'nodes' list");
  const YAML::Node links = root["links"];
  if (!links || !links.IsSequence()) throw ParseError("topology: missing 'links' list");

  std::vector<std::string> names;
  std::unordered_map<std::string, NodeId> index;
  for (const auto& n : nodes) {
    if (!n.IsScalar()) throw ParseError("topology: node entries must be names", yaml_line(n));
    auto name = n.as<std::string>();
    if (!index.emplace(name, names.size()).second)
      throw ParseError("topology: duplicate node '" + name + "'", yaml_line(n));
    names.push_back(std::move(name));
  }

  std::vector<Link> parsed;
  for (const auto& rec : links) {
    const std::size_t line = yaml_line(rec);
    if (!rec.IsMap()) throw ParseError("topology: link entries must be records", line);
    auto field = [&](const char* key) {
      YAML::Node v = rec[key];
      if (!v) throw ParseError(fmt::format("topology: link missing field '{}'", key), line);
      return v;
    };
    auto endpoint = [&](const char* key) {
      const auto name = field(key).as<std::string>();
      auto it = index.find(name);
      if (it == index.end())
        throw ParseError(fmt::format("topology: link {} '{}' is not a declared node", key, name),
                         line);
      return it->second;
    };
    auto number = [&](const char* key) {
      try {
        return field(key).as<double>();
      } catch (const YAML::BadConversion&) {
        throw ParseError(fmt::format("topology: link field '{}' is not a number", key), line);
      }
    };
    Link l;
    l.id = parsed.size();
    l.src = endpoint("src");
    l.dst = endpoint("dst");
    l.capacity_bps = number("capacity_bps");
    l.cost = number("cost");
    if (!(l.capacity_bps > 0.0))
      throw ParseError(fmt::format("topology: capacity_bps must be positive, got {}", l.capacity_bps),
                       line);
    if (!(l.cost >= 0.0))
      throw ParseError(fmt::format("topology: cost must be nonnegative, got {}", l.cost), line);
    if (l.src == l.dst) throw ParseError("topology: link endpoints must differ", line);
    parsed.push_back(l);
  }

  std::string name = root["name"] ? root["name"].as<std::string>() : std::string{};
  std::string unit = root["cost_unit"] ? root["cost_unit"].as<std::string>() : std::string{};
  try {
    return Network(std::move(names), std::move(parsed), std::move(name), std::move(unit));
  } catch (const ValidationError& e) {
    throw ParseError(std::string("topology: ") + e.what());
  }
}

Network load_topology_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open topology file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_topology(ss.str());
}

// ---------------------------------------------------------------------------

std::vector<Path> k_candidate_paths(const Network& net, OdPair od, std::size_t k) {
  if (od.src >= net.node_count() || od.dst >= net.node_count())
    throw ValidationError("od endpoint outside the network");
  if (od.src == od.dst) throw ValidationError("od endpoints must differ");
  if (k == 0) throw ValidationError("k must be positive");

  const std::size_t n = net.node_count();
  std::vector<char> node_blocked(n, 0);
  std::vector<char> link_blocked(net.link_count(), 0);

  std::vector<RankedPath> accepted;
  auto first = lexmin_shortest(net, od.src, od.dst, node_blocked, link_blocked);
  if (!first) return {};
  accepted.push_back(rank(net, std::move(*first)));

  std::vector<RankedPath> pending;
  std::set<std::vector<LinkId>> known{accepted.front().links};

  while (accepted.size() < k) {
    const std::vector<LinkId> prev = accepted.back().links;
    NodeId spur = od.src;
    for (std::size_t i = 0; i < prev.size(); ++i) {
      std::fill(node_blocked.begin(), node_blocked.end(), 0);
      std::fill(link_blocked.begin(), link_blocked.end(), 0);
      // Root nodes other than the spur node are off limits.
      NodeId walk = od.src;
      for (std::size_t j = 0; j < i; ++j) {
        node_blocked[walk] = 1;
        walk = net.link(prev[j]).dst;
      }
      for (const auto& a : accepted) {
        if (a.links.size() > i && std::equal(prev.begin(), prev.begin() + i, a.links.begin()))
          link_blocked[a.links[i]] = 1;
      }
      if (auto tail = lexmin_shortest(net, spur, od.dst, node_blocked, link_blocked)) {
        std::vector<LinkId> full(prev.begin(), prev.begin() + i);
        full.insert(full.end(), tail->begin(), tail->end());
        if (known.insert(full).second) pending.push_back(rank(net, std::move(full)));
      }
      spur = net.link(prev[i]).dst;
    }
    if (pending.empty()) break;
    auto best = std::min_element(pending.begin(), pending.end());
    accepted.push_back(std::move(*best));
    pending.erase(best);
  }

  std::vector<Path> out;
  out.reserve(accepted.size());
  for (auto& a : accepted) out.push_back(Path{od, std::move(a.links)});
  return out;
}

std::vector<Path> all_simple_paths(const Network& net, OdPair od) {
  if (od.src == od.dst) throw ValidationError("od endpoints must differ");
  std::vector<RankedPath> found;
  std::vector<char> seen(net.node_count(), 0);
  std::vector<LinkId> stack;
  auto dfs = [&](auto&& self, NodeId u) -> void {
    if (u == od.dst) {
      found.push_back(rank(net, stack));
      return;
    }
    seen[u] = 1;
    for (LinkId l : net.out_links(u)) {
      const NodeId v = net.link(l).dst;
      if (seen[v]) continue;
      stack.push_back(l);
      self(self, v);
      stack.pop_back();
    }
    seen[u] = 0;
  };
  dfs(dfs, od.src);
  std::sort(found.begin(), found.end());
  std::vector<Path> out;
  for (auto& f : found) out.push_back(Path{od, std::move(f.links)});
  return out;
}

std::size_t od_index(OdPair od, std::size_t n) {
  return od.src * (n - 1) + (od.dst < od.src ? od.dst : od.dst - 1);
}

OdPair od_at(std::size_t index, std::size_t n) {
  const NodeId src = index / (n - 1);
  NodeId dst = index % (n - 1);
  if (dst >= src) ++dst;
  return {src, dst};
}

CandidateTable::CandidateTable(const Network& net, std::size_t k) : n_(net.node_count()), k_(k) {
  paths_.reserve(net.od_count());
  for (std::size_t i = 0; i < net.od_count(); ++i) {
    paths_.push_back(k_candidate_paths(net, od_at(i, n_), k));
  }
}

CandidateTable::CandidateTable(std::size_t node_count, std::size_t k,
                               std::vector<std::vector<Path>> paths)
    : n_(node_count), k_(k), paths_(std::move(paths)) {
  if (paths_.size() != n_ * (n_ - 1))
    throw DimensionError("candidate table does not cover every OD pair");
  for (const auto& list : paths_) {
    if (list.size() > k_) throw DimensionError("candidate list longer than k");
  }
}

std::optional<std::size_t> CandidateTable::index_of(const Path& path) const {
  const auto& list = paths(path.od);
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (list[i].links == path.links) return i;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

NetworkState apply_routing(const Network& net, const NetworkState& state,
                           const RoutingDecision& decision) {
  state.validate(net);
  std::vector<double> used(net.link_count(), 0.0);
  for (const auto& a : decision.flows) {
    if (!a.routed()) continue;
    if (!is_simple_path(net, *a.path))
      throw ValidationError("decision for flow " + std::to_string(a.demand.id) +
                            " uses an invalid path");
    for (LinkId l : a.path->links) used[l] += a.rate;
  }
  NetworkState next = state;
  ++next.timestamp;
  for (LinkId l = 0; l < net.link_count(); ++l) {
    const double left = state.available[l] - used[l];
    if (left < -kRateTolerance * std::max(1.0, state.available[l])) {
      throw CapacityViolation(
          fmt::format("capacity violation on link {} ({} -> {}): {} bps routed, {} bps available",
                      l, net.node_name(net.link(l).src), net.node_name(net.link(l).dst), used[l],
                      state.available[l]),
          l);
    }
    next.available[l] = std::max(0.0, left);
  }
  return next;
}

}  // namespace neuroute

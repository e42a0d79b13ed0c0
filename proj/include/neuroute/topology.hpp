#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace neuroute {

using NodeId = std::size_t;
using LinkId = std::size_t;

struct Link {
  LinkId id = 0;
  NodeId src = 0;
  NodeId dst = 0;
  double capacity_bps = 0.0;
  double cost = 0.0;
};

/// Ordered (origin, destination) node pair.
struct OdPair {
  NodeId src = 0;
  NodeId dst = 0;
  auto operator<=>(const OdPair&) const = default;
};

/// Directed, capacitated, costed graph. Immutable after construction; the
/// link order is the canonical encoding order everywhere.
class Network {
 public:
  /// Validates every invariant; throws ValidationError.
  Network(std::vector<std::string> node_names, std::vector<Link> links,
          std::string name = {}, std::string cost_unit = {});

  std::size_t node_count() const { return names_.size(); }
  std::size_t link_count() const { return links_.size(); }
  std::size_t od_count() const { return names_.size() * (names_.size() - 1); }

  const std::vector<Link>& links() const { return links_; }
  const Link& link(LinkId id) const { return links_.at(id); }
  const std::string& node_name(NodeId id) const { return names_.at(id); }
  const std::vector<std::string>& node_names() const { return names_; }
  std::optional<NodeId> find_node(std::string_view name) const;
  std::optional<LinkId> find_link(NodeId src, NodeId dst) const;

  std::span<const LinkId> out_links(NodeId node) const { return out_.at(node); }
  std::span<const LinkId> in_links(NodeId node) const { return in_.at(node); }

  const std::string& name() const { return name_; }
  const std::string& cost_unit() const { return cost_unit_; }

  /// SHA-256 over names, link order, capacities and costs.
  std::string hash() const;

 private:
  std::vector<std::string> names_;
  std::vector<Link> links_;
  std::vector<std::vector<LinkId>> out_;
  std::vector<std::vector<LinkId>> in_;
  std::string name_;
  std::string cost_unit_;
};

/// Per-link residual capacity and cost at one tick.
struct NetworkState {
  std::int64_t timestamp = 0;
  std::vector<double> available;
  std::vector<double> cost;

  /// Every link at full capacity with its nominal cost.
  static NetworkState full(const Network& net, std::int64_t timestamp = 0);
  /// Throws ValidationError unless lengths match and 0 <= available <= C(l).
  void validate(const Network& net) const;
};

struct Path {
  OdPair od;
  std::vector<LinkId> links;

  bool operator==(const Path&) const = default;
};

/// True when consecutive links chain from od.src to od.dst without
/// revisiting a node.
bool is_simple_path(const Network& net, const Path& path);
double path_cost(std::span<const double> link_cost, const Path& path);
double path_cost(const Network& net, const Path& path);
/// Smallest residual capacity along the path.
double bottleneck(std::span<const double> available, const Path& path);
std::string format_path(const Network& net, const Path& path);

/// Parses the YAML topology format: `nodes` list and `links` list of
/// {src, dst, capacity_bps, cost} records. Errors carry line context.
Network load_topology(std::string_view document);
Network load_topology_file(const std::string& path);

/// The k cheapest simple paths from od.src to od.dst, cost-nondecreasing,
/// ties broken by lexicographic link-id sequence (Yen's algorithm).
std::vector<Path> k_candidate_paths(const Network& net, OdPair od, std::size_t k);

/// Every simple path for od, in the same (cost, link sequence) order.
std::vector<Path> all_simple_paths(const Network& net, OdPair od);

/// Position of an OD pair in the canonical n(n-1) ordering (source-major,
/// diagonal skipped).
std::size_t od_index(OdPair od, std::size_t node_count);
OdPair od_at(std::size_t index, std::size_t node_count);

/// Candidate path lists for every OD pair, in canonical OD order.
class CandidateTable {
 public:
  CandidateTable() = default;
  CandidateTable(const Network& net, std::size_t k);
  CandidateTable(std::size_t node_count, std::size_t k, std::vector<std::vector<Path>> paths);

  std::size_t k() const { return k_; }
  std::size_t node_count() const { return n_; }
  std::size_t od_count() const { return paths_.size(); }
  const std::vector<Path>& paths(OdPair od) const { return paths_.at(od_index(od, n_)); }
  const std::vector<Path>& paths_at(std::size_t od_idx) const { return paths_.at(od_idx); }
  /// Index of path within its OD's list, or nullopt.
  std::optional<std::size_t> index_of(const Path& path) const;

 private:
  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::vector<std::vector<Path>> paths_;
};

struct RoutingDecision;

/// Installs a decision: available capacity drops by the rate routed over
/// each link and the timestamp advances. Throws CapacityViolation naming the
/// first overloaded link.
NetworkState apply_routing(const Network& net, const NetworkState& state,
                           const RoutingDecision& decision);

}  // namespace neuroute

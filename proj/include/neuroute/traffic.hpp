#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "neuroute/topology.hpp"

namespace neuroute {

/// n x n origin-destination rates in bits/s, row-major by source.
struct TrafficMatrix {
  std::size_t n = 0;
  std::vector<double> rates;
  std::int64_t timestamp = 0;

  TrafficMatrix() = default;
  TrafficMatrix(std::size_t nodes, std::int64_t t = 0) : n(nodes), rates(nodes * nodes, 0.0), timestamp(t) {}

  double& at(NodeId s, NodeId d) { return rates[s * n + d]; }
  double at(NodeId s, NodeId d) const { return rates[s * n + d]; }
  double total() const;
  /// Throws ValidationError on a nonzero diagonal or a negative/non-finite entry.
  void validate() const;
  bool operator==(const TrafficMatrix&) const = default;
};

struct TrafficParams {
  double mean_utilization = 0.5;   // target mean link load under shortest-path routing
  double temporal_amplitude = 0.3; // relative swing of the diurnal factor
  double noise_fraction = 0.1;     // std-dev of the multiplicative noise
  double ar_coefficient = 0.3;     // lag-1 correlation of the noise process
  std::size_t period = 288;        // ticks per diurnal cycle
  std::size_t length = 1000;
};

struct TmSequence {
  std::vector<TrafficMatrix> matrices;
  TrafficParams params;
  std::uint64_t seed = 0;

  /// Throws ValidationError unless timestamps step by 1 and sizes agree.
  void validate() const;
};

struct FlowDemand {
  std::size_t id = 0;
  NodeId src = 0;
  NodeId dst = 0;
  double requested = 0.0;  // R^f, bits/s
  double minimum = 0.0;    // N^f, bits/s

  OdPair od() const { return {src, dst}; }
  bool operator==(const FlowDemand&) const = default;
};

/// Per-OD mean rate that loads an average link to `utilization` when every
/// OD pair follows its cheapest path.
double gravity_target_rate(const Network& net, double utilization);

/// Gravity-model base rates modulated by a sinusoidal daily factor and a
/// seeded multiplicative AR(1) noise process, clipped at zero.
TmSequence generate_tm_sequence(const Network& net, const TrafficParams& params, std::uint64_t seed);

/// Rows of `t,src,dst,rate_bps` (optional header). Unlisted pairs are zero.
TmSequence load_tm_csv(std::string_view content, const Network& net);
std::string write_tm_csv(const TmSequence& seq, const Network& net);

inline constexpr std::size_t kDefaultWindow = 10;

/// Per-OD least-squares line through the window, evaluated one step ahead and
/// clipped at zero.
TrafficMatrix predict_next(std::span<const TrafficMatrix> window);

/// One demand per positive OD entry in (source, destination) order, with
/// N^f = min_fraction * R^f.
std::vector<FlowDemand> tm_to_demands(const TrafficMatrix& tm, double min_fraction = 0.0);

}  // namespace neuroute

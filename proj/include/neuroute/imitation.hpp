#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neuroute/flowsolve.hpp"
#include "neuroute/neuralnet.hpp"
#include "neuroute/topology.hpp"
#include "neuroute/traffic.hpp"

namespace neuroute {

/// n(n-1) off-diagonal demands then |L| available capacities.
std::size_t input_width(const Network& net);
/// n(n-1) groups of k path scores.
std::size_t output_width(const Network& net, std::size_t k);

/// Merged (TM, state) vector scaled by its maximum entry.
Normalized encode_input(const Network& net, const TrafficMatrix& tm, const NetworkState& state);

/// Inverse of encode_input: rebuilds the TM and state a sample was made from.
std::pair<TrafficMatrix, NetworkState> decode_input(const Network& net, std::span<const double> input, double scale,
                                                     std::int64_t timestamp);

struct EncodedLabels {
  std::vector<std::int32_t> labels;   // per OD slot, canonical order
  std::vector<std::uint8_t> active;   // 1 when the slot carries a routed flow
  std::vector<std::int32_t> per_flow; // per decision flow; -1 when unrouted
};

/// Per-OD candidate index of each routed flow. When several flows share an OD
/// the highest-rate one fills the slot. Unrouted and idle ODs get index 0 and
/// are marked inactive. Throws ValidationError for paths outside the table.
EncodedLabels encode_labels(const RoutingDecision& decision, const CandidateTable& table);

/// Per-OD argmax over each group of k scores, limited to the candidates that
/// exist, ties to the lower index.
std::vector<std::size_t> decode_indices(std::span<const double> output, const CandidateTable& table);
std::vector<std::optional<Path>> decode_paths(std::span<const double> output, const CandidateTable& table);

/// Picks, for each demand, the decoded index of its OD slot.
std::vector<std::size_t> per_demand(std::span<const std::size_t> od_indices, std::span<const FlowDemand> demands,
                                    std::size_t node_count);

struct Sample {
  std::vector<double> input;
  std::vector<std::int32_t> labels;
  std::vector<std::uint8_t> active;
  std::int64_t tick = 0;
  double scale = 1.0;          // normalization maximum
  double bh_throughput = 0.0;  // of the teacher's own decision
  double bh_cost = 0.0;
};

struct Dataset {
  std::string topology_hash;
  std::string config_hash;  // of the teacher's solver configuration
  std::size_t node_count = 0;
  std::size_t link_count = 0;
  CandidateTable table;
  std::vector<Sample> samples;
  std::size_t train_count = 0;
  // Kept in memory only; timings are not reproducible.
  std::vector<double> bh_seconds;
  std::vector<std::string> skipped;

  std::size_t k() const { return table.k(); }
  std::size_t test_count() const { return samples.size() - train_count; }
  std::span<const Sample> train_split() const { return std::span(samples).first(train_count); }
  std::span<const Sample> test_split() const { return std::span(samples).subspan(train_count); }
  /// SHA-256 of the binary encoding.
  std::string hash() const;
};

std::string solver_config_hash(const SolverConfig& config);

inline constexpr double kDefaultTrainFraction = 0.7;

/// Runs the teacher on every tick at full capacity. Ticks whose instance is
/// infeasible are skipped with a reason. `threads` > 1 fans out over ticks;
/// the result does not depend on it.
Dataset generate_dataset(const Network& net, const TmSequence& seq, const SolverConfig& config,
                         std::size_t threads = 1, double train_fraction = kDefaultTrainFraction);

/// Column-per-sample matrices for the trainer.
TrainingData to_training_data(std::span<const Sample> samples);

std::string save_dataset(const Dataset& ds);
Dataset load_dataset(std::string_view content);
/// One row per sample: tick, split, scale, teacher throughput/cost, inputs,
/// labels, activity flags. Header lines start with '#'.
std::string dataset_csv(const Dataset& ds);

struct EvalMetrics {
  std::size_t samples = 0;
  double accuracy = 0.0;           // over active OD slots
  double exact_match = 0.0;        // samples with every active slot right
  double throughput_ratio = 0.0;   // model paths vs teacher paths under the engine's rate rule
  double raw_throughput_ratio = 0.0;  // model paths vs the teacher's own decision
  double mean_infer_ms = 0.0;      // forward pass plus decode
  double mean_bh_ms = 0.0;         // 0 when the dataset carries no timings
};

EvalMetrics evaluate_model(const Mlp& model, const Dataset& ds, std::span<const Sample> split, const Network& net);

std::string eval_csv(const EvalMetrics& m);

}  // namespace neuroute

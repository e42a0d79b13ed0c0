#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace neuroute {

enum class Activation : std::uint32_t { Relu = 0 };
enum class Mode { Train, Infer };

/// Input scaling rule recorded in checkpoints: divide by the vector maximum.
inline constexpr std::uint32_t kNormalizeByMax = 1;

using LabelMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic>;
using MaskMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Feed-forward network: rectified hidden layers and a softmax over each
/// consecutive group of `group_size` outputs.
struct Mlp {
  std::vector<std::size_t> sizes;        // [in, h1..hH, out]
  std::vector<Eigen::MatrixXd> weights;  // layer i maps sizes[i] -> sizes[i+1]
  std::vector<Eigen::VectorXd> biases;
  std::size_t group_size = 1;
  double dropout = 0.0;                  // applied after every hidden layer in train mode
  Activation activation = Activation::Relu;
  std::string topology_hash;             // provenance; empty when unknown

  std::size_t input_size() const { return sizes.front(); }
  std::size_t output_size() const { return sizes.back(); }
  std::size_t group_count() const { return sizes.back() / group_size; }
  std::size_t layer_count() const { return weights.size(); }
  std::size_t parameter_count() const;
  /// Throws DimensionError / ValidationError on inconsistent shapes or
  /// non-finite parameters.
  void validate() const;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
Mlp init_mlp(const std::vector<std::size_t>& sizes, std::uint64_t seed, std::size_t group_size = 1,
             double dropout = 0.0);

bool bitwise_equal(const Mlp& a, const Mlp& b);

struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer (post-dropout)
  std::vector<Eigen::MatrixXd> masks;   // scaled keep masks per hidden layer; empty when unused
  Eigen::MatrixXd logits;
};

/// Column-per-sample forward pass. Train mode applies inverted dropout with
/// masks drawn from `seed`.
Eigen::MatrixXd forward_batch(const Mlp& net, const Eigen::MatrixXd& inputs, Mode mode = Mode::Infer,
                              std::uint64_t seed = 0, ForwardCache* cache = nullptr);
Eigen::VectorXd forward(const Mlp& net, std::span<const double> input, Mode mode = Mode::Infer,
                        std::uint64_t seed = 0);

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

struct LossResult {
  double loss = 0.0;  // mean over samples of summed per-group cross-entropy
  double msr = 0.0;   // mean squared residual against the one-hot targets
  std::size_t correct = 0;
  std::size_t counted = 0;
  Gradients grads;
};

/// `labels` is groups x batch, one target index per group. `active`, when
/// non-empty, restricts the accuracy counters (not the loss) to flagged groups.
LossResult loss_and_gradients(const Mlp& net, const Eigen::MatrixXd& inputs, const LabelMatrix& labels,
                              std::uint64_t dropout_seed, Mode mode = Mode::Train, const MaskMatrix& active = {});

/// Converts a dense per-group one-hot target matrix to label indices.
LabelMatrix labels_from_one_hot(const Eigen::MatrixXd& targets, std::size_t group_size);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool bias_correction = true;
  std::uint64_t step = 0;
  std::vector<Eigen::VectorXd> first;
  std::vector<Eigen::VectorXd> second;
};

/// A named parameter array and its gradient.
struct ParamBlock {
  std::string name;
  std::span<double> values;
  std::span<const double> grads;
};

/// One Adam update over every block. Nothing is modified when a gradient is
/// non-finite (ValidationError names the block).
void adam_step(std::span<ParamBlock> blocks, AdamState& state, double learning_rate);
void adam_step(Mlp& net, const Gradients& grads, AdamState& state, double learning_rate);

struct Normalized {
  std::vector<double> values;
  double scale = 1.0;
};

/// Divides by the largest entry; an all-zero vector maps to itself with scale 1.
Normalized normalize_input(std::span<const double> v);

struct TrainingData {
  Eigen::MatrixXd inputs;  // in x N
  LabelMatrix labels;      // groups x N
  MaskMatrix active;       // groups x N, or empty for "all active"

  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 100;
  std::size_t epochs = 10;
  double dropout = 0.5;
  std::uint64_t seed = 0;
  double time_budget_seconds = 0.0;  // stop after the epoch that crosses it; 0 = none
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  double msr = 0.0;
  double accuracy = 0.0;       // over the training pass, dropout active
  double test_accuracy = -1.0; // filled by a hook; negative when not measured
  double seconds = 0.0;
};

using EpochHook = std::function<void(EpochMetrics&, const Mlp&)>;

std::vector<EpochMetrics> train(Mlp& net, const TrainingData& data, const TrainConfig& config,
                                const EpochHook& on_epoch = {});

/// Fraction of active groups whose argmax (ties to the lower index) matches
/// the label, evaluated in infer mode.
double group_accuracy(const Mlp& net, const TrainingData& data);

/// Argmax over one group, ties to the lower index; only the first `valid`
/// entries are considered.
std::size_t group_argmax(std::span<const double> group, std::size_t valid);

std::string save_model(const Mlp& net);
Mlp load_model(std::string_view content);

/// `epoch,loss,msr,accuracy,test_accuracy`; deterministic given the seed.
std::string metrics_csv(std::span<const EpochMetrics> metrics);
/// `epoch,seconds`; wall-clock, kept apart so the metrics file reproduces.
std::string timing_csv(std::span<const EpochMetrics> metrics);

/// Stateless 64-bit mixer for deriving per-batch seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace neuroute

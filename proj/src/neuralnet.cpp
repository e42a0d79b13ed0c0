#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include <fmt/core.h>

#include "neuroute/error.hpp"
#include "neuroute/neuralnet.hpp"

namespace neuroute {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) n += sizes[i] * sizes[i + 1] + sizes[i + 1];
  return n;
}

void Mlp::validate() const {
  if (sizes.size() < 2) throw DimensionError("a network needs at least an input and an output layer");
  for (std::size_t s : sizes) {
    if (s == 0) throw DimensionError("layer sizes must be positive");
  }
  if (group_size == 0 || sizes.back() % group_size != 0)
    throw DimensionError(fmt::format("output size {} is not a multiple of group size {}", sizes.back(), group_size));
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
  if (weights.size() != sizes.size() - 1 || biases.size() != sizes.size() - 1)
    throw DimensionError("parameter blocks do not match the layer count");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (static_cast<std::size_t>(weights[i].rows()) != sizes[i + 1] ||
        static_cast<std::size_t>(weights[i].cols()) != sizes[i] ||
        static_cast<std::size_t>(biases[i].size()) != sizes[i + 1])
      throw DimensionError(fmt::format("layer {} parameters do not match sizes {} -> {}", i, sizes[i], sizes[i + 1]));
    if (!weights[i].allFinite() || !biases[i].allFinite())
      throw ValidationError(fmt::format("layer {} has non-finite parameters", i));
  }
}

Mlp init_mlp(const std::vector<std::size_t>& sizes, std::uint64_t seed, std::size_t group_size, double dropout) {
  Mlp net;
  net.sizes = sizes;
  net.group_size = group_size;
  net.dropout = dropout;
  if (sizes.size() < 2) throw DimensionError("a network needs at least an input and an output layer");
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    if (sizes[i] == 0 || sizes[i + 1] == 0) throw DimensionError("layer sizes must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[i]));
    std::uniform_real_distribution<double> u(-bound, bound);
    Eigen::MatrixXd w(sizes[i + 1], sizes[i]);
    // Fill row-major so the draw order does not depend on Eigen's storage.
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = u(rng);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sizes[i + 1])));
  }
  net.validate();
  return net;
}

bool bitwise_equal(const Mlp& a, const Mlp& b) {
  if (a.sizes != b.sizes || a.group_size != b.group_size || a.activation != b.activation ||
      a.topology_hash != b.topology_hash)
    return false;
  if (std::memcmp(&a.dropout, &b.dropout, sizeof(double)) != 0) return false;
  auto same = [](const auto& x, const auto& y) {
    return x.size() == y.size() &&
           std::memcmp(x.data(), y.data(), static_cast<std::size_t>(x.size()) * sizeof(double)) == 0;
  };
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    if (!same(a.weights[i], b.weights[i]) || !same(a.biases[i], b.biases[i])) return false;
  }
  return true;
}

namespace {

void softmax_groups(Eigen::MatrixXd& z, std::size_t k) {
  const Eigen::Index groups = z.rows() / static_cast<Eigen::Index>(k);
  const auto kk = static_cast<Eigen::Index>(k);
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    for (Eigen::Index g = 0; g < groups; ++g) {
      auto seg = z.col(c).segment(g * kk, kk);
      const double m = seg.maxCoeff();
      seg = (seg.array() - m).exp();
      seg /= seg.sum();
    }
  }
}

void check_input(const Mlp& net, const Eigen::MatrixXd& inputs) {
  if (static_cast<std::size_t>(inputs.rows()) != net.input_size())
    throw DimensionError(fmt::format("input has {} features, network expects {}", inputs.rows(), net.input_size()));
}

}  // namespace

Eigen::MatrixXd forward_batch(const Mlp& net, const Eigen::MatrixXd& inputs, Mode mode, std::uint64_t seed,
                              ForwardCache* cache) {
  check_input(net, inputs);
  const bool drop = mode == Mode::Train && net.dropout > 0.0;
  const double keep = 1.0 - net.dropout;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  if (cache) {
    cache->inputs.clear();
    cache->masks.clear();
  }
  Eigen::MatrixXd a = inputs;
  const std::size_t layers = net.layer_count();
  for (std::size_t i = 0; i < layers; ++i) {
    Eigen::MatrixXd z = net.weights[i] * a;
    z.colwise() += net.biases[i];
    if (cache) cache->inputs.push_back(std::move(a));
    if (i + 1 == layers) {
      if (cache) cache->logits = z;
      softmax_groups(z, net.group_size);
      return z;
    }
    a = z.cwiseMax(0.0);
    if (drop) {
      Eigen::MatrixXd mask(a.rows(), a.cols());
      for (Eigen::Index c = 0; c < mask.cols(); ++c)
        for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = u(rng) < keep ? 1.0 / keep : 0.0;
      a = a.cwiseProduct(mask);
      if (cache) cache->masks.push_back(std::move(mask));
    } else if (cache) {
      cache->masks.emplace_back();
    }
  }
  return a;  // unreachable: validate() guarantees at least one layer
}

Eigen::VectorXd forward(const Mlp& net, std::span<const double> input, Mode mode, std::uint64_t seed) {
  const Eigen::Map<const Eigen::MatrixXd> x(input.data(), static_cast<Eigen::Index>(input.size()), 1);
  return forward_batch(net, x, mode, seed).col(0);
}

std::size_t group_argmax(std::span<const double> group, std::size_t valid) {
  valid = std::min(valid, group.size());
  std::size_t best = 0;
  for (std::size_t i = 1; i < valid; ++i) {
    if (group[i] > group[best]) best = i;
  }
  return best;
}

LabelMatrix labels_from_one_hot(const Eigen::MatrixXd& targets, std::size_t group_size) {
  if (group_size == 0 || targets.rows() % static_cast<Eigen::Index>(group_size) != 0)
    throw DimensionError("target rows are not a multiple of the group size");
  const auto k = static_cast<Eigen::Index>(group_size);
  const Eigen::Index groups = targets.rows() / k;
  LabelMatrix labels(groups, targets.cols());
  for (Eigen::Index c = 0; c < targets.cols(); ++c) {
    for (Eigen::Index g = 0; g < groups; ++g) {
      int hot = -1;
      for (Eigen::Index j = 0; j < k; ++j) {
        const double v = targets(g * k + j, c);
        if (v == 1.0 && hot < 0) {
          hot = static_cast<int>(j);
        } else if (v != 0.0) {
          throw ValidationError(fmt::format("target group {} of sample {} is not one-hot", g, c));
        }
      }
      if (hot < 0) throw ValidationError(fmt::format("target group {} of sample {} is not one-hot", g, c));
      labels(g, c) = hot;
    }
  }
  return labels;
}

LossResult loss_and_gradients(const Mlp& net, const Eigen::MatrixXd& inputs, const LabelMatrix& labels,
                              std::uint64_t dropout_seed, Mode mode, const MaskMatrix& active) {
  const auto k = static_cast<Eigen::Index>(net.group_size);
  const auto groups = static_cast<Eigen::Index>(net.group_count());
  const Eigen::Index batch = inputs.cols();
  if (labels.rows() != groups || labels.cols() != batch)
    throw DimensionError(fmt::format("labels are {}x{}, expected {}x{}", labels.rows(), labels.cols(), groups, batch));
  if (active.size() != 0 && (active.rows() != groups || active.cols() != batch))
    throw DimensionError("activity mask does not match the label shape");
  if (batch == 0) throw DimensionError("empty batch");
  for (Eigen::Index c = 0; c < batch; ++c) {
    for (Eigen::Index g = 0; g < groups; ++g) {
      const int y = labels(g, c);
      if (y < 0 || y >= k)
        throw ValidationError(fmt::format("label {} of group {} in sample {} is outside [0, {})", y, g, c, k));
    }
  }

  ForwardCache cache;
  Eigen::MatrixXd probs = forward_batch(net, inputs, mode, dropout_seed, &cache);

  LossResult out;
  const double inv_batch = 1.0 / static_cast<double>(batch);
  double loss = 0.0;
  double sq = 0.0;
  Eigen::MatrixXd delta = probs;  // becomes (p - y) / batch
  for (Eigen::Index c = 0; c < batch; ++c) {
    for (Eigen::Index g = 0; g < groups; ++g) {
      const Eigen::Index base = g * k;
      const auto logit = cache.logits.col(c).segment(base, k);
      const double m = logit.maxCoeff();
      const double lse = m + std::log((logit.array() - m).exp().sum());
      const int y = labels(g, c);
      loss += lse - logit(y);
      delta(base + y, c) -= 1.0;
      if (active.size() == 0 || active(g, c)) {
        const std::span<const double> grp(probs.col(c).data() + base, static_cast<std::size_t>(k));
        out.correct += group_argmax(grp, grp.size()) == static_cast<std::size_t>(y) ? 1 : 0;
        ++out.counted;
      }
    }
    sq += delta.col(c).squaredNorm();
  }
  out.loss = loss * inv_batch;
  out.msr = sq * inv_batch / static_cast<double>(net.output_size());
  delta *= inv_batch;

  const std::size_t layers = net.layer_count();
  out.grads.weights.resize(layers);
  out.grads.biases.resize(layers);
  for (std::size_t i = layers; i-- > 0;) {
    out.grads.weights[i].noalias() = delta * cache.inputs[i].transpose();
    out.grads.biases[i] = delta.rowwise().sum();
    if (i == 0) break;
    Eigen::MatrixXd back = net.weights[i].transpose() * delta;
    // cache.inputs[i] is relu(z) times the dropout mask; it is positive exactly
    // where both the unit fired and survived.
    const auto& act = cache.inputs[i];
    if (cache.masks[i - 1].size() != 0) {
      back = back.cwiseProduct(cache.masks[i - 1]);
    }
    delta = (act.array() > 0.0).select(back, 0.0);
  }
  return out;
}

void adam_step(std::span<ParamBlock> blocks, AdamState& state, double learning_rate) {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning rate must be positive");
  if (state.first.empty()) {
    for (const auto& b : blocks) {
      state.first.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.values.size())));
      state.second.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.values.size())));
    }
  }
  if (state.first.size() != blocks.size()) throw DimensionError("optimizer state does not match the parameter blocks");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    if (b.values.size() != b.grads.size() || static_cast<std::size_t>(state.first[i].size()) != b.values.size())
      throw DimensionError(fmt::format("gradient for '{}' does not match its parameters", b.name));
    for (double g : b.grads) {
      if (!std::isfinite(g)) throw ValidationError(fmt::format("non-finite gradient in '{}'", b.name));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = state.bias_correction ? 1.0 - std::pow(state.beta1, t) : 1.0;
  const double c2 = state.bias_correction ? 1.0 - std::pow(state.beta2, t) : 1.0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto& m = state.first[i];
    auto& v = state.second[i];
    const auto& b = blocks[i];
    for (std::size_t j = 0; j < b.values.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double g = b.grads[j];
      m(jj) = state.beta1 * m(jj) + (1.0 - state.beta1) * g;
      v(jj) = state.beta2 * v(jj) + (1.0 - state.beta2) * g * g;
      const double mh = m(jj) / c1;
      const double vh = v(jj) / c2;
      b.values[j] -= learning_rate * mh / (std::sqrt(vh) + state.epsilon);
    }
  }
}

void adam_step(Mlp& net, const Gradients& grads, AdamState& state, double learning_rate) {
  if (grads.weights.size() != net.layer_count() || grads.biases.size() != net.layer_count())
    throw DimensionError("gradients do not match the network layers");
  std::vector<ParamBlock> blocks;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    if (grads.weights[i].size() != net.weights[i].size() || grads.biases[i].size() != net.biases[i].size())
      throw DimensionError(fmt::format("gradient shape mismatch in layer {}", i));
    blocks.push_back({fmt::format("weights[{}]", i),
                      {net.weights[i].data(), static_cast<std::size_t>(net.weights[i].size())},
                      {grads.weights[i].data(), static_cast<std::size_t>(grads.weights[i].size())}});
    blocks.push_back({fmt::format("bias[{}]", i),
                      {net.biases[i].data(), static_cast<std::size_t>(net.biases[i].size())},
                      {grads.biases[i].data(), static_cast<std::size_t>(grads.biases[i].size())}});
  }
  adam_step(blocks, state, learning_rate);
}

Normalized normalize_input(std::span<const double> v) {
  Normalized out;
  out.values.assign(v.begin(), v.end());
  double m = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) throw ValidationError("input contains a non-finite entry");
    if (x < 0.0) throw ValidationError(fmt::format("input contains negative entry {}", x));
    m = std::max(m, x);
  }
  if (m > 0.0) {
    out.scale = m;
    for (double& x : out.values) x /= m;
  }
  return out;
}

double group_accuracy(const Mlp& net, const TrainingData& data) {
  constexpr Eigen::Index kChunk = 256;
  const auto k = static_cast<Eigen::Index>(net.group_size);
  const auto groups = static_cast<Eigen::Index>(net.group_count());
  std::size_t correct = 0, counted = 0;
  for (Eigen::Index start = 0; start < data.inputs.cols(); start += kChunk) {
    const Eigen::Index n = std::min(kChunk, data.inputs.cols() - start);
    const Eigen::MatrixXd probs = forward_batch(net, data.inputs.middleCols(start, n));
    for (Eigen::Index c = 0; c < n; ++c) {
      for (Eigen::Index g = 0; g < groups; ++g) {
        if (data.active.size() != 0 && !data.active(g, start + c)) continue;
        const std::span<const double> grp(probs.col(c).data() + g * k, static_cast<std::size_t>(k));
        correct += group_argmax(grp, grp.size()) == static_cast<std::size_t>(data.labels(g, start + c)) ? 1 : 0;
        ++counted;
      }
    }
  }
  return counted ? static_cast<double>(correct) / static_cast<double>(counted) : 0.0;
}

std::vector<EpochMetrics> train(Mlp& net, const TrainingData& data, const TrainConfig& config,
                                const EpochHook& on_epoch) {
  if (config.batch_size == 0) throw ValidationError("batch size must be positive");
  if (!(config.dropout >= 0.0 && config.dropout < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
  if (data.size() == 0) throw ValidationError("no training samples");
  if (data.labels.cols() != data.inputs.cols()) throw DimensionError("labels and inputs disagree on sample count");
  net.dropout = config.dropout;
  net.validate();

  AdamState adam;
  std::vector<EpochMetrics> history;
  std::vector<Eigen::Index> order(data.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto started = std::chrono::steady_clock::now();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(mix_seed(config.seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);

    double loss = 0.0, msr = 0.0;
    std::size_t correct = 0, counted = 0, batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      const std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(start + n));
      const Eigen::MatrixXd x = data.inputs(Eigen::all, idx);
      const LabelMatrix y = data.labels(Eigen::all, idx);
      MaskMatrix act;
      if (data.active.size() != 0) act = data.active(Eigen::all, idx);
      const auto r = loss_and_gradients(net, x, y, mix_seed(mix_seed(config.seed, epoch), batch_index), Mode::Train, act);
      adam_step(net, r.grads, adam, config.learning_rate);
      loss += r.loss * static_cast<double>(n);
      msr += r.msr * static_cast<double>(n);
      correct += r.correct;
      counted += r.counted;
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.loss = loss / static_cast<double>(data.size());
    m.msr = msr / static_cast<double>(data.size());
    m.accuracy = counted ? static_cast<double>(correct) / static_cast<double>(counted) : 0.0;
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    if (on_epoch) on_epoch(m, net);
    history.push_back(m);
    if (!std::isfinite(m.loss)) throw ValidationError(fmt::format("training diverged at epoch {}", epoch));
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (config.time_budget_seconds > 0.0 && elapsed >= config.time_budget_seconds) break;
  }
  return history;
}

std::string metrics_csv(std::span<const EpochMetrics> metrics) {
  std::string out = "epoch,loss,msr,accuracy,test_accuracy\n";
  for (const auto& m : metrics)
    out += fmt::format("{},{},{},{},{}\n", m.epoch, m.loss, m.msr, m.accuracy, m.test_accuracy);
  return out;
}

std::string timing_csv(std::span<const EpochMetrics> metrics) {
  std::string out = "epoch,seconds\n";
  for (const auto& m : metrics) out += fmt::format("{},{}\n", m.epoch, m.seconds);
  return out;
}

}  // namespace neuroute

#include <fmt/core.h>

#include "neuroute/error.hpp"
#include "neuroute/hashing.hpp"
#include "neuroute/neuralnet.hpp"

namespace neuroute {

namespace {

constexpr std::uint32_t kMagic = 0x4C4D524E;  // "NRML" little-endian
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxLayers = 1024;

}  // namespace

std::string save_model(const Mlp& net) {
  net.validate();
  ByteWriter w;
  w.u32(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(net.sizes.size()));
  for (std::size_t s : net.sizes) w.u64(s);
  w.u64(net.group_size);
  w.f64(net.dropout);
  w.u32(static_cast<std::uint32_t>(net.activation));
  w.u32(kNormalizeByMax);
  w.str(net.topology_hash);
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    // Row-major so the file layout is independent of Eigen's storage order.
    const auto& m = net.weights[i];
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
    for (Eigen::Index r = 0; r < net.biases[i].size(); ++r) w.f64(net.biases[i](r));
  }
  return w.take();
}

Mlp load_model(std::string_view content) {
  ByteReader r(content);
  if (r.u32() != kMagic) throw FormatError("not a model checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw FormatError(fmt::format("unsupported checkpoint version {} (expected {})", version, kVersion));

  Mlp net;
  const std::uint32_t count = r.u32();
  if (count < 2 || count > kMaxLayers) throw FormatError(fmt::format("implausible layer count {}", count));
  r.require(static_cast<std::size_t>(count) * 8);
  for (std::uint32_t i = 0; i < count; ++i) net.sizes.push_back(r.u64());
  net.group_size = r.u64();
  net.dropout = r.f64();
  const std::uint32_t act = r.u32();
  if (act != static_cast<std::uint32_t>(Activation::Relu)) throw FormatError(fmt::format("unknown activation {}", act));
  net.activation = Activation::Relu;
  const std::uint32_t norm = r.u32();
  if (norm != kNormalizeByMax) throw FormatError(fmt::format("unknown normalization rule {}", norm));
  net.topology_hash = r.str();

  for (std::size_t i = 0; i + 1 < net.sizes.size(); ++i) {
    const std::size_t rows = net.sizes[i + 1], cols = net.sizes[i];
    // Guard the multiplication before trusting corrupted sizes.
    if (rows == 0 || cols == 0 || rows > r.remaining() / 8 || cols > r.remaining() / 8 / rows)
      throw FormatError(fmt::format("truncated content: layer {} needs {}x{} weights", i, rows, cols));
    r.require((rows * cols + rows) * 8);
    Eigen::MatrixXd w(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index a = 0; a < w.rows(); ++a)
      for (Eigen::Index b = 0; b < w.cols(); ++b) w(a, b) = r.f64();
    Eigen::VectorXd bias(static_cast<Eigen::Index>(rows));
    for (Eigen::Index a = 0; a < bias.size(); ++a) bias(a) = r.f64();
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(bias));
  }
  if (r.remaining() != 0) throw FormatError(fmt::format("{} trailing bytes after the parameters", r.remaining()));
  try {
    net.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint is inconsistent: ") + e.what());
  }
  return net;
}

}  // namespace neuroute

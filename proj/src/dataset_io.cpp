#include <fmt/core.h>

#include "neuroute/error.hpp"
#include "neuroute/hashing.hpp"
#include "neuroute/imitation.hpp"

namespace neuroute {

namespace {

constexpr std::uint32_t kMagic = 0x5344524E;  // "NRDS" little-endian
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::string save_dataset(const Dataset& ds) {
  ByteWriter w;
  w.u32(kMagic);
  w.u32(kVersion);
  w.str(ds.topology_hash);
  w.str(ds.config_hash);
  w.u32(kNormalizeByMax);
  w.u64(ds.node_count);
  w.u64(ds.link_count);
  w.u64(ds.table.k());
  w.u64(ds.samples.size());
  w.u64(ds.train_count);
  w.u64(ds.table.od_count());
  for (std::size_t od = 0; od < ds.table.od_count(); ++od) {
    const auto& paths = ds.table.paths_at(od);
    w.u32(static_cast<std::uint32_t>(paths.size()));
    for (const auto& p : paths) {
      w.u32(static_cast<std::uint32_t>(p.links.size()));
      for (LinkId l : p.links) w.u32(static_cast<std::uint32_t>(l));
    }
  }
  const std::size_t width = ds.node_count * (ds.node_count - (ds.node_count ? 1 : 0)) + ds.link_count;
  for (const auto& s : ds.samples) {
    if (s.input.size() != width || s.labels.size() != ds.table.od_count() || s.active.size() != s.labels.size())
      throw DimensionError(fmt::format("sample at tick {} does not match the dataset dimensions", s.tick));
    w.i64(s.tick);
    w.f64(s.scale);
    w.f64(s.bh_throughput);
    w.f64(s.bh_cost);
    for (double x : s.input) w.f64(x);
    for (auto y : s.labels) w.u8(static_cast<std::uint8_t>(y));
    for (auto a : s.active) w.u8(a);
  }
  return w.take();
}

Dataset load_dataset(std::string_view content) {
  ByteReader r(content);
  if (r.u32() != kMagic) throw FormatError("not a dataset file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw FormatError(fmt::format("unsupported dataset version {}", version));
  Dataset ds;
  ds.topology_hash = r.str();
  ds.config_hash = r.str();
  if (r.u32() != kNormalizeByMax) throw FormatError("unknown input normalization rule");
  ds.node_count = r.u64();
  ds.link_count = r.u64();
  const std::size_t k = r.u64();
  const std::size_t count = r.u64();
  ds.train_count = r.u64();
  const std::size_t ods = r.u64();
  if (ds.node_count < 2 || ods != ds.node_count * (ds.node_count - 1))
    throw FormatError("candidate table does not match the node count");
  if (ds.train_count > count) throw FormatError("train count exceeds the sample count");
  if (k == 0 || k > 255) throw FormatError(fmt::format("implausible k {}", k));

  std::vector<std::vector<Path>> paths(ods);
  for (std::size_t od = 0; od < ods; ++od) {
    const std::uint32_t np = r.u32();
    if (np > k) throw FormatError("more candidates than k");
    for (std::uint32_t p = 0; p < np; ++p) {
      Path path{od_at(od, ds.node_count), {}};
      const std::uint32_t len = r.u32();
      r.require(static_cast<std::size_t>(len) * 4);
      for (std::uint32_t i = 0; i < len; ++i) {
        const std::uint32_t l = r.u32();
        if (l >= ds.link_count) throw FormatError("candidate path references an unknown link");
        path.links.push_back(l);
      }
      paths[od].push_back(std::move(path));
    }
  }
  ds.table = CandidateTable(ds.node_count, k, std::move(paths));

  const std::size_t width = ods + ds.link_count;
  const std::size_t row = 8 * 4 + width * 8 + ods * 2;
  if (count > r.remaining() / row) throw FormatError("truncated content: fewer samples than the header declares");
  ds.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Sample s;
    s.tick = r.i64();
    s.scale = r.f64();
    s.bh_throughput = r.f64();
    s.bh_cost = r.f64();
    s.input.resize(width);
    for (double& x : s.input) x = r.f64();
    s.labels.resize(ods);
    for (auto& y : s.labels) {
      y = r.u8();
      if (static_cast<std::size_t>(y) >= k) throw FormatError("label index out of range");
    }
    s.active.resize(ods);
    for (auto& a : s.active) a = r.u8();
    ds.samples.push_back(std::move(s));
  }
  if (r.remaining() != 0) throw FormatError(fmt::format("{} trailing bytes after the samples", r.remaining()));
  return ds;
}

std::string Dataset::hash() const { return sha256_hex(save_dataset(*this)); }

std::string dataset_csv(const Dataset& ds) {
  std::string out = fmt::format("# topology_hash={}\n# config_hash={}\n# n={} links={} k={} samples={} train={}\n",
                                ds.topology_hash, ds.config_hash, ds.node_count, ds.link_count, ds.k(),
                                ds.samples.size(), ds.train_count);
  if (ds.samples.empty()) return out;
  out += "tick,split,scale,bh_throughput,bh_cost";
  for (std::size_t i = 0; i < ds.samples.front().input.size(); ++i) out += fmt::format(",x{}", i);
  for (std::size_t i = 0; i < ds.samples.front().labels.size(); ++i) out += fmt::format(",y{}", i);
  for (std::size_t i = 0; i < ds.samples.front().active.size(); ++i) out += fmt::format(",a{}", i);
  out += '\n';
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    out += fmt::format("{},{},{},{},{}", s.tick, i < ds.train_count ? "train" : "test", s.scale, s.bh_throughput,
                       s.bh_cost);
    for (double x : s.input) out += fmt::format(",{}", x);
    for (auto y : s.labels) out += fmt::format(",{}", y);
    for (auto a : s.active) out += fmt::format(",{}", a);
    out += '\n';
  }
  return out;
}

}  // namespace neuroute

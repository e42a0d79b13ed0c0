#include "neuroute/traffic.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <fmt/core.h>

#include "neuroute/error.hpp"

namespace neuroute {

double TrafficMatrix::total() const {
  double s = 0.0;
  for (double r : rates) s += r;
  return s;
}

void TrafficMatrix::validate() const {
  if (rates.size() != n * n) throw ValidationError("traffic matrix has wrong entry count");
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t d = 0; d < n; ++d) {
      const double r = at(s, d);
      if (!std::isfinite(r) || r < 0.0)
        throw ValidationError(fmt::format("traffic matrix entry ({}, {}) = {} is invalid", s, d, r));
      if (s == d && r != 0.0)
        throw ValidationError(fmt::format("traffic matrix diagonal entry {} is nonzero", s));
    }
  }
}

void TmSequence::validate() const {
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    matrices[i].validate();
    if (i > 0) {
      if (matrices[i].n != matrices[0].n)
        throw ValidationError("traffic matrices in a sequence must share a size");
      if (matrices[i].timestamp != matrices[i - 1].timestamp + 1)
        throw ValidationError("traffic matrix timestamps must increase by 1");
    }
  }
}

double gravity_target_rate(const Network& net, double utilization) {
  double capacity = 0.0;
  for (const auto& l : net.links()) capacity += l.capacity_bps;
  double hops = 0.0;
  std::size_t reachable = 0;
  for (std::size_t i = 0; i < net.od_count(); ++i) {
    auto best = k_candidate_paths(net, od_at(i, net.node_count()), 1);
    if (best.empty()) continue;
    hops += static_cast<double>(best.front().links.size());
    ++reachable;
  }
  if (reachable == 0) return 0.0;
  const double mean_hops = hops / static_cast<double>(reachable);
  return utilization * capacity / (static_cast<double>(reachable) * mean_hops);
}

TmSequence generate_tm_sequence(const Network& net, const TrafficParams& p, std::uint64_t seed) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (p.length < 1) throw ValidationError("sequence length must be at least 1");
  if (p.period < 1) throw ValidationError("diurnal period must be at least 1 tick");
  if (!in_unit(p.mean_utilization) || !in_unit(p.temporal_amplitude) ||
      !in_unit(p.noise_fraction))
    throw ValidationError("utilization, amplitude and noise must lie in [0, 1]");
  if (!(p.ar_coefficient >= 0.0 && p.ar_coefficient < 1.0))
    throw ValidationError("AR coefficient must lie in [0, 1)");

  const std::size_t n = net.node_count();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> weight_dist(0.5, 1.5);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<double> weight(n);
  for (auto& w : weight) w = weight_dist(rng);

  std::vector<char> reachable(n * n, 0);
  double weight_sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < net.od_count(); ++i) {
    const OdPair od = od_at(i, n);
    if (k_candidate_paths(net, od, 1).empty()) continue;
    reachable[od.src * n + od.dst] = 1;
    weight_sum += weight[od.src] * weight[od.dst];
    ++pairs;
  }
  const double target = gravity_target_rate(net, p.mean_utilization);

  std::vector<double> base(n * n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t d = 0; d < n; ++d) {
      if (reachable[s * n + d])
        base[s * n + d] = target * static_cast<double>(pairs) * weight[s] * weight[d] / weight_sum;
    }
  }

  const double innovation = std::sqrt(1.0 - p.ar_coefficient * p.ar_coefficient);
  std::vector<double> noise(n * n, 0.0);
  for (auto& e : noise) e = gauss(rng);

  TmSequence seq;
  seq.params = p;
  seq.seed = seed;
  seq.matrices.reserve(p.length);
  for (std::size_t t = 0; t < p.length; ++t) {
    if (t > 0) {
      for (auto& e : noise) e = p.ar_coefficient * e + innovation * gauss(rng);
    }
    const double daily = 1.0 + p.temporal_amplitude *
                                   std::sin(2.0 * std::numbers::pi * static_cast<double>(t) /
                                            static_cast<double>(p.period));
    TrafficMatrix tm(n, static_cast<std::int64_t>(t));
    for (std::size_t i = 0; i < n * n; ++i) {
      if (base[i] == 0.0) continue;
      tm.rates[i] = std::max(0.0, base[i] * daily * (1.0 + p.noise_fraction * noise[i]));
    }
    seq.matrices.push_back(std::move(tm));
  }
  return seq;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

TmSequence load_tm_csv(std::string_view content, const Network& net) {
  const std::size_t n = net.node_count();
  std::map<std::int64_t, TrafficMatrix> by_tick;
  std::set<std::tuple<std::int64_t, NodeId, NodeId>> seen;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool first_row = true;
  while (pos <= content.size()) {
    const auto nl = content.find('\n', pos);
    std::string_view line = trim(content.substr(pos, nl == std::string_view::npos ? content.npos : nl - pos));
    pos = nl == std::string_view::npos ? content.size() + 1 : nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;

    auto fields = split_commas(line);
    std::int64_t t = 0;
    if (first_row && (fields.empty() || !parse_number(fields[0], t))) {
      first_row = false;  // header
      continue;
    }
    first_row = false;
    if (fields.size() != 4) throw ParseError("expected 4 fields: t,src,dst,rate_bps", line_no);
    if (!parse_number(fields[0], t)) throw ParseError("tick is not an integer", line_no);
    const auto src = net.find_node(fields[1]);
    const auto dst = net.find_node(fields[2]);
    if (!src) throw ParseError(fmt::format("unknown node '{}'", fields[1]), line_no);
    if (!dst) throw ParseError(fmt::format("unknown node '{}'", fields[2]), line_no);
    double rate = 0.0;
    if (!parse_number(fields[3], rate) || !std::isfinite(rate))
      throw ParseError("rate is not a number", line_no);
    if (rate < 0.0) throw ParseError(fmt::format("negative rate {}", rate), line_no);
    if (*src == *dst) {
      if (rate != 0.0)
        throw ParseError(fmt::format("diagonal entry {} -> {} has nonzero rate", fields[1], fields[2]),
                         line_no);
      continue;
    }
    if (!seen.emplace(t, *src, *dst).second)
      throw ParseError(fmt::format("duplicate row for t={} {} -> {}", t, fields[1], fields[2]), line_no);
    auto [it, inserted] = by_tick.try_emplace(t, n, t);
    it->second.at(*src, *dst) = rate;
  }
  if (by_tick.empty()) throw ParseError("traffic CSV has no rows");

  TmSequence seq;
  std::int64_t expect = by_tick.begin()->first;
  for (auto& [t, tm] : by_tick) {
    if (t != expect)
      throw ParseError(fmt::format("ticks are not contiguous: expected t={} but found t={}", expect, t));
    ++expect;
    seq.matrices.push_back(std::move(tm));
  }
  seq.params.length = seq.matrices.size();
  return seq;
}

std::string write_tm_csv(const TmSequence& seq, const Network& net) {
  std::string out = "t,src,dst,rate_bps\n";
  for (const auto& tm : seq.matrices) {
    for (std::size_t s = 0; s < tm.n; ++s) {
      for (std::size_t d = 0; d < tm.n; ++d) {
        if (tm.at(s, d) > 0.0)
          out += fmt::format("{},{},{},{}\n", tm.timestamp, net.node_name(s), net.node_name(d), tm.at(s, d));
      }
    }
  }
  return out;
}

TrafficMatrix predict_next(std::span<const TrafficMatrix> window) {
  const std::size_t w = window.size();
  if (w < 2) throw ValidationError(fmt::format("prediction window needs at least 2 matrices, got {}", w));
  const std::size_t n = window.front().n;
  for (const auto& tm : window) {
    if (tm.n != n) throw DimensionError("window matrices differ in size");
  }

  const double x_mean = static_cast<double>(w - 1) / 2.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < w; ++i) {
    const double dx = static_cast<double>(i) - x_mean;
    sxx += dx * dx;
  }
  const double ahead = static_cast<double>(w) - x_mean;

  TrafficMatrix out(n, window.back().timestamp + 1);
  for (std::size_t e = 0; e < n * n; ++e) {
    if (e / n == e % n) continue;
    double y_sum = 0.0;
    for (const auto& tm : window) y_sum += tm.rates[e];
    const double y_mean = y_sum / static_cast<double>(w);
    double sxy = 0.0;
    for (std::size_t i = 0; i < w; ++i) sxy += (static_cast<double>(i) - x_mean) * (window[i].rates[e] - y_mean);
    out.rates[e] = std::max(0.0, y_mean + (sxy / sxx) * ahead);
  }
  return out;
}

std::vector<FlowDemand> tm_to_demands(const TrafficMatrix& tm, double min_fraction) {
  if (!(min_fraction >= 0.0 && min_fraction <= 1.0))
    throw ValidationError("minimum-rate fraction must lie in [0, 1]");
  std::vector<FlowDemand> out;
  for (std::size_t s = 0; s < tm.n; ++s) {
    for (std::size_t d = 0; d < tm.n; ++d) {
      const double r = tm.at(s, d);
      if (s == d || !(r > 0.0)) continue;
      out.push_back(FlowDemand{out.size(), s, d, r, min_fraction * r});
    }
  }
  return out;
}

}  // namespace neuroute

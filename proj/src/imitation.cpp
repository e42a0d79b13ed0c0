#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <thread>

#include <fmt/core.h>

#include "neuroute/error.hpp"
#include "neuroute/hashing.hpp"
#include "neuroute/imitation.hpp"

namespace neuroute {

std::size_t input_width(const Network& net) { return net.od_count() + net.link_count(); }

std::size_t output_width(const Network& net, std::size_t k) { return net.od_count() * k; }

Normalized encode_input(const Network& net, const TrafficMatrix& tm, const NetworkState& state) {
  const std::size_t n = net.node_count();
  if (tm.n != n) throw DimensionError(fmt::format("traffic matrix covers {} nodes, topology has {}", tm.n, n));
  if (state.available.size() != net.link_count())
    throw DimensionError(
        fmt::format("network state covers {} links, topology has {}", state.available.size(), net.link_count()));
  std::vector<double> raw;
  raw.reserve(input_width(net));
  for (NodeId s = 0; s < n; ++s)
    for (NodeId d = 0; d < n; ++d)
      if (s != d) raw.push_back(tm.at(s, d));
  raw.insert(raw.end(), state.available.begin(), state.available.end());
  return normalize_input(raw);
}

std::pair<TrafficMatrix, NetworkState> decode_input(const Network& net, std::span<const double> input, double scale,
                                                     std::int64_t timestamp) {
  if (input.size() != input_width(net)) throw DimensionError("input vector does not match the topology");
  const std::size_t n = net.node_count();
  TrafficMatrix tm(n, timestamp);
  std::size_t i = 0;
  for (NodeId s = 0; s < n; ++s)
    for (NodeId d = 0; d < n; ++d)
      if (s != d) tm.at(s, d) = input[i++] * scale;
  NetworkState state = NetworkState::full(net, timestamp);
  for (LinkId l = 0; l < net.link_count(); ++l)
    state.available[l] = std::min(input[i++] * scale, net.link(l).capacity_bps);
  return {std::move(tm), std::move(state)};
}

EncodedLabels encode_labels(const RoutingDecision& decision, const CandidateTable& table) {
  const std::size_t n = table.node_count();
  EncodedLabels out;
  out.labels.assign(table.od_count(), 0);
  out.active.assign(table.od_count(), 0);
  std::vector<double> best_rate(table.od_count(), -1.0);
  for (const auto& a : decision.flows) {
    if (!a.routed()) {
      out.per_flow.push_back(-1);
      continue;
    }
    const auto idx = table.index_of(*a.path);
    if (!idx)
      throw ValidationError(fmt::format("flow {} uses a path outside its candidate list (k or topology mismatch)",
                                        a.demand.id));
    out.per_flow.push_back(static_cast<std::int32_t>(*idx));
    const std::size_t slot = od_index(a.demand.od(), n);
    if (a.rate > best_rate[slot]) {
      best_rate[slot] = a.rate;
      out.labels[slot] = static_cast<std::int32_t>(*idx);
      out.active[slot] = 1;
    }
  }
  return out;
}

std::vector<std::size_t> decode_indices(std::span<const double> output, const CandidateTable& table) {
  const std::size_t k = table.k();
  if (output.size() != table.od_count() * k)
    throw DimensionError(fmt::format("output has {} entries, expected {}", output.size(), table.od_count() * k));
  std::vector<std::size_t> out(table.od_count());
  for (std::size_t od = 0; od < table.od_count(); ++od)
    out[od] = group_argmax(output.subspan(od * k, k), std::max<std::size_t>(1, table.paths_at(od).size()));
  return out;
}

std::vector<std::optional<Path>> decode_paths(std::span<const double> output, const CandidateTable& table) {
  const auto idx = decode_indices(output, table);
  std::vector<std::optional<Path>> out(idx.size());
  for (std::size_t od = 0; od < idx.size(); ++od) {
    const auto& paths = table.paths_at(od);
    if (!paths.empty()) out[od] = paths[idx[od]];
  }
  return out;
}

std::vector<std::size_t> per_demand(std::span<const std::size_t> od_indices, std::span<const FlowDemand> demands,
                                    std::size_t node_count) {
  std::vector<std::size_t> out;
  out.reserve(demands.size());
  for (const auto& d : demands) out.push_back(od_indices[od_index(d.od(), node_count)]);
  return out;
}

std::string solver_config_hash(const SolverConfig& c) {
  ByteWriter w;
  w.f64(c.epsilon);
  w.u64(c.k_paths);
  w.u64(c.max_iterations);
  w.f64(c.throughput_slack);
  w.f64(c.min_rate_fraction);
  w.u64(c.max_cost_passes);
  return sha256_hex(w.bytes());
}

Dataset generate_dataset(const Network& net, const TmSequence& seq, const SolverConfig& config, std::size_t threads,
                         double train_fraction) {
  config.validate();
  if (seq.matrices.empty()) throw ValidationError("traffic sequence is empty");
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw ValidationError("train fraction must lie in [0, 1]");
  for (const auto& tm : seq.matrices) {
    if (tm.n != net.node_count()) throw DimensionError("traffic sequence does not match the topology");
  }

  Dataset ds;
  ds.topology_hash = net.hash();
  ds.config_hash = solver_config_hash(config);
  ds.node_count = net.node_count();
  ds.link_count = net.link_count();
  ds.table = CandidateTable(net, config.k_paths);

  const std::size_t ticks = seq.matrices.size();
  std::vector<std::optional<Sample>> slots(ticks);
  std::vector<double> seconds(ticks, 0.0);
  std::vector<std::string> reasons(ticks);

  auto work = [&](std::size_t t) {
    const auto& tm = seq.matrices[t];
    const auto state = NetworkState::full(net, tm.timestamp);
    try {
      const auto bh = baseline_heuristic(net, state, tm, ds.table, config);
      auto enc = encode_input(net, tm, state);
      auto lab = encode_labels(bh.decision, ds.table);
      Sample s;
      s.input = std::move(enc.values);
      s.scale = enc.scale;
      s.labels = std::move(lab.labels);
      s.active = std::move(lab.active);
      s.tick = tm.timestamp;
      s.bh_throughput = bh.decision.throughput();
      s.bh_cost = bh.decision.cost(state.cost);
      slots[t] = std::move(s);
      seconds[t] = bh.seconds;
    } catch (const InfeasibleError& e) {
      reasons[t] = fmt::format("tick {} skipped: {}", tm.timestamp, e.what());
    }
  };

  threads = std::clamp<std::size_t>(threads, 1, ticks);
  if (threads == 1) {
    for (std::size_t t = 0; t < ticks; ++t) work(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t t = next++; t < ticks; t = next++) work(t);
        } catch (...) {
          errors[w] = std::current_exception();
          next = ticks;
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  for (std::size_t t = 0; t < ticks; ++t) {
    if (slots[t]) {
      ds.samples.push_back(std::move(*slots[t]));
      ds.bh_seconds.push_back(seconds[t]);
    } else {
      ds.skipped.push_back(std::move(reasons[t]));
    }
  }
  ds.train_count = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ds.samples.size())));
  return ds;
}

TrainingData to_training_data(std::span<const Sample> samples) {
  TrainingData data;
  if (samples.empty()) return data;
  const auto in = static_cast<Eigen::Index>(samples.front().input.size());
  const auto groups = static_cast<Eigen::Index>(samples.front().labels.size());
  const auto n = static_cast<Eigen::Index>(samples.size());
  data.inputs.resize(in, n);
  data.labels.resize(groups, n);
  data.active.resize(groups, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& s = samples[static_cast<std::size_t>(c)];
    if (static_cast<Eigen::Index>(s.input.size()) != in || static_cast<Eigen::Index>(s.labels.size()) != groups)
      throw DimensionError("samples do not share dimensions");
    data.inputs.col(c) = Eigen::Map<const Eigen::VectorXd>(s.input.data(), in);
    for (Eigen::Index g = 0; g < groups; ++g) {
      data.labels(g, c) = s.labels[static_cast<std::size_t>(g)];
      data.active(g, c) = s.active[static_cast<std::size_t>(g)];
    }
  }
  return data;
}

EvalMetrics evaluate_model(const Mlp& model, const Dataset& ds, std::span<const Sample> split, const Network& net) {
  if (ds.topology_hash != net.hash()) throw ValidationError("dataset was generated on a different topology");
  if (model.input_size() != input_width(net) || model.output_size() != output_width(net, ds.k()) ||
      model.group_size != ds.k())
    throw DimensionError(fmt::format("model shape {} -> {} (k={}) does not match dataset {} -> {} (k={})",
                                     model.input_size(), model.output_size(), model.group_size, input_width(net),
                                     output_width(net, ds.k()), ds.k()));
  EvalMetrics m;
  m.samples = split.size();
  if (split.empty()) return m;

  using clk = std::chrono::steady_clock;
  std::size_t correct = 0, counted = 0, exact = 0;
  double model_tp = 0.0, teacher_tp = 0.0, raw_tp = 0.0, infer = 0.0;
  for (const auto& s : split) {
    const auto start = clk::now();
    const auto out = forward(model, s.input);
    const auto chosen = decode_indices({out.data(), static_cast<std::size_t>(out.size())}, ds.table);
    infer += std::chrono::duration<double, std::milli>(clk::now() - start).count();

    bool all = true;
    for (std::size_t od = 0; od < chosen.size(); ++od) {
      if (!s.active[od]) continue;
      const bool hit = chosen[od] == static_cast<std::size_t>(s.labels[od]);
      correct += hit ? 1 : 0;
      all = all && hit;
      ++counted;
    }
    exact += all ? 1 : 0;

    const auto [tm, state] = decode_input(net, s.input, s.scale, s.tick);
    const auto demands = tm_to_demands(tm);
    std::vector<std::size_t> teacher(s.labels.begin(), s.labels.end());
    model_tp += route_on_preferred_paths(net, state, demands, per_demand(chosen, demands, net.node_count()), ds.table)
                    .throughput();
    teacher_tp += route_on_preferred_paths(net, state, demands, per_demand(teacher, demands, net.node_count()),
                                           ds.table)
                      .throughput();
    raw_tp += s.bh_throughput;
  }
  const double n = static_cast<double>(split.size());
  m.accuracy = counted ? static_cast<double>(correct) / static_cast<double>(counted) : 1.0;
  m.exact_match = static_cast<double>(exact) / n;
  m.throughput_ratio = teacher_tp > 0.0 ? model_tp / teacher_tp : 1.0;
  m.raw_throughput_ratio = raw_tp > 0.0 ? model_tp / raw_tp : 1.0;
  m.mean_infer_ms = infer / n;

  // Timings line up with samples only for freshly generated datasets.
  const auto* base = ds.samples.data();
  const bool inside = std::less_equal<>()(base, split.data()) &&
                      std::less_equal<>()(split.data() + split.size(), base + ds.samples.size());
  if (ds.bh_seconds.size() == ds.samples.size() && inside) {
    const auto first = static_cast<std::size_t>(split.data() - base);
    {
      double bh = 0.0;
      for (std::size_t i = 0; i < split.size(); ++i) bh += ds.bh_seconds[first + i];
      m.mean_bh_ms = 1e3 * bh / n;
    }
  }
  return m;
}

std::string eval_csv(const EvalMetrics& m) {
  return fmt::format(
      "samples,accuracy,exact_match,throughput_ratio,raw_throughput_ratio,mean_infer_ms,mean_bh_ms\n"
      "{},{},{},{},{},{},{}\n",
      m.samples, m.accuracy, m.exact_match, m.throughput_ratio, m.raw_throughput_ratio, m.mean_infer_ms, m.mean_bh_ms);
}

}  // namespace neuroute

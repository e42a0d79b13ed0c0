#include <cmath>

#include <gtest/gtest.h>

#include "neuroute/error.hpp"
#include "neuroute/imitation.hpp"
#include "support/generators.hpp"

using namespace neuroute;
using namespace neuroute::testing;

namespace {

Network triangle() { return load_topology_file(NEUROUTE_DATA_DIR "/triangle.topo"); }
Network geant() { return load_topology_file(NEUROUTE_DATA_DIR "/geant.topo"); }

// Complete digraph on four nodes: every OD has exactly five simple paths.
Network k4() {
  std::vector<Link> links;
  for (NodeId s = 0; s < 4; ++s)
    for (NodeId d = 0; d < 4; ++d)
      if (s != d) links.push_back({links.size(), s, d, 10e6, static_cast<double>(1 + (s + d) % 3)});
  return Network({"a", "b", "c", "d"}, links, "k4");
}

TmSequence sequence(const Network& net, std::size_t length, double util, std::uint64_t seed) {
  TrafficParams p;
  p.length = length;
  p.mean_utilization = util;
  return generate_tm_sequence(net, p, seed);
}

std::vector<double> one_hot_output(std::span<const std::int32_t> labels, std::size_t k) {
  std::vector<double> out(labels.size() * k, 0.0);
  for (std::size_t od = 0; od < labels.size(); ++od) out[od * k + static_cast<std::size_t>(labels[od])] = 1.0;
  return out;
}

// Zero weights with biases that put all mass on `labels` for every input.
Mlp constant_model(const Network& net, std::span<const std::int32_t> labels, std::size_t k) {
  auto m = init_mlp({input_width(net), 4, output_width(net, k)}, 0, k);
  for (auto& w : m.weights) w.setZero();
  for (std::size_t od = 0; od < labels.size(); ++od) m.biases[1](static_cast<Eigen::Index>(od * k + labels[od])) = 5.0;
  m.topology_hash = net.hash();
  return m;
}

}  // namespace

TEST(Encoding, GeantWidths) {
  const auto net = geant();
  EXPECT_EQ(input_width(net), 544u);
  EXPECT_EQ(output_width(net, 5), 2530u);
  EXPECT_EQ(encode_input(net, TrafficMatrix(23), NetworkState::full(net)).values.size(), 544u);
}

TEST(Encoding, TriangleWidth) {
  const auto net = triangle();
  EXPECT_EQ(encode_input(net, TrafficMatrix(3), NetworkState::full(net)).values.size(), 9u);
}

TEST(Encoding, IdleMatrixFullCapacity) {
  const auto net = geant();
  const auto in = encode_input(net, TrafficMatrix(23), NetworkState::full(net));
  for (std::size_t i = 0; i < 506; ++i) EXPECT_EQ(in.values[i], 0.0);
  for (std::size_t i = 506; i < 544; ++i) EXPECT_EQ(in.values[i], 1.0);
  EXPECT_EQ(in.scale, 10e6);
}

TEST(Encoding, DecodeInvertsEncode) {
  const auto net = geant();
  Rng rng(3);
  const auto tm = random_tm(rng, 23, 4e6);
  const auto st = random_state(rng, net);
  const auto in = encode_input(net, tm, st);
  const auto [tm2, st2] = decode_input(net, in.values, in.scale, 0);
  for (std::size_t e = 0; e < tm.rates.size(); ++e) EXPECT_NEAR(tm2.rates[e], tm.rates[e], 1e-6);
  for (std::size_t l = 0; l < st.available.size(); ++l) EXPECT_NEAR(st2.available[l], st.available[l], 1e-6);
}

TEST(Encoding, ShapeMismatchThrows) {
  const auto net = geant();
  EXPECT_THROW(encode_input(net, TrafficMatrix(3), NetworkState::full(net)), DimensionError);
  EXPECT_THROW(encode_input(net, TrafficMatrix(23), NetworkState::full(triangle())), DimensionError);
}

TEST(Labels, CheapestPathIsZero) {
  const auto net = triangle();
  const CandidateTable table(net, 5);
  RoutingDecision d;
  d.flows.push_back({{0, 0, 2, 3e6, 0.0}, table.paths({0, 2})[0], 3e6});
  const auto enc = encode_labels(d, table);
  EXPECT_EQ(enc.labels[od_index({0, 2}, 3)], 0);
  EXPECT_EQ(enc.active[od_index({0, 2}, 3)], 1);
}

TEST(Labels, TriangleSecondFlowTakesIndexOne) {
  const auto net = triangle();
  const CandidateTable table(net, 5);
  const auto& paths = table.paths({0, 2});
  RoutingDecision d;
  d.flows.push_back({{0, 0, 2, 8e6, 0.0}, paths[0], 8e6});
  d.flows.push_back({{1, 0, 2, 6e6, 0.0}, paths[1], 6e6});
  const auto enc = encode_labels(d, table);
  EXPECT_EQ(enc.per_flow, (std::vector<std::int32_t>{0, 1}));
  // The shared slot follows the larger flow.
  EXPECT_EQ(enc.labels[od_index({0, 2}, 3)], 0);
}

TEST(Labels, GeantHas506Slots) {
  const auto net = geant();
  const auto tm = sequence(net, 1, 0.5, 2).matrices[0];
  const CandidateTable table(net, 5);
  const auto bh = baseline_heuristic(net, NetworkState::full(net), tm, table, {});
  const auto enc = encode_labels(bh.decision, table);
  EXPECT_EQ(enc.labels.size(), 506u);
  EXPECT_EQ(enc.active.size(), 506u);
}

TEST(Labels, ForeignPathThrows) {
  const auto net = triangle();
  const CandidateTable table(net, 1);
  RoutingDecision d;
  d.flows.push_back({{0, 0, 2, 1e6, 0.0}, Path{{0, 2}, {0, 1}}, 1e6});
  EXPECT_THROW(encode_labels(d, table), ValidationError);
}

TEST(Labels, PropertyDecodeInvertsEncode) {
  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const auto net = random_network(rng, {3, 9, 0.3});
    const std::size_t k = uniform_int(rng, 1, 5);
    const CandidateTable table(net, k);
    SolverConfig cfg;
    cfg.k_paths = k;
    const auto tm = random_tm(rng, net.node_count(), 6e6, 0.6);
    const auto bh = baseline_heuristic(net, random_state(rng, net), tm, table, cfg);
    const auto enc = encode_labels(bh.decision, table);
    const auto paths = decode_paths(one_hot_output(enc.labels, k), table);
    for (const auto& a : bh.decision.flows) {
      if (!a.routed()) continue;
      const auto slot = od_index(a.demand.od(), net.node_count());
      ASSERT_TRUE(paths[slot].has_value());
      EXPECT_EQ(*paths[slot], *a.path);
    }
  }
}

TEST(Decode, ArgmaxAndTies) {
  const auto net = k4();
  const CandidateTable table(net, 5);
  std::vector<double> out(12 * 5, 0.2);
  const double g0[] = {0.1, 0.7, 0.1, 0.05, 0.05};
  const double g1[] = {0.4, 0.1, 0.4, 0.05, 0.05};
  std::copy(std::begin(g0), std::end(g0), out.begin());
  std::copy(std::begin(g1), std::end(g1), out.begin() + 5);
  const auto idx = decode_indices(out, table);
  EXPECT_EQ(idx[0], 1u);
  EXPECT_EQ(idx[1], 0u);
  EXPECT_EQ(idx[2], 0u);
  EXPECT_THROW(decode_indices(std::vector<double>(7), table), DimensionError);
}

TEST(Decode, OnlyExistingCandidatesCount) {
  const auto net = triangle();
  const CandidateTable table(net, 5);
  std::vector<double> out(6 * 5, 0.0);
  const auto slot = od_index({0, 2}, 3);
  out[slot * 5 + 4] = 1.0;  // index 4 does not exist for A->C
  out[slot * 5 + 1] = 0.5;
  EXPECT_EQ(decode_indices(out, table)[slot], 1u);
  EXPECT_FALSE(decode_paths(out, table)[od_index({2, 0}, 3)].has_value());
}

TEST(Dataset, OneTick) {
  const auto net = geant();
  const auto ds = generate_dataset(net, sequence(net, 1, 0.5, 1), {});
  EXPECT_EQ(ds.samples.size(), 1u);
  EXPECT_EQ(ds.train_count + ds.test_count(), 1u);
}

TEST(Dataset, ConstantSequenceHasConstantLabels) {
  const auto net = geant();
  TrafficParams p;
  p.length = 6;
  p.noise_fraction = 0.0;
  p.temporal_amplitude = 0.0;
  p.mean_utilization = 0.8;
  const auto ds = generate_dataset(net, generate_tm_sequence(net, p, 4), {});
  for (const auto& s : ds.samples) {
    EXPECT_EQ(s.labels, ds.samples.front().labels);
    EXPECT_EQ(s.active, ds.samples.front().active);
  }
}

TEST(Dataset, SplitByTickOrder) {
  const auto net = geant();
  const auto ds = generate_dataset(net, sequence(net, 20, 0.5, 1), {});
  EXPECT_EQ(ds.train_count, 14u);
  EXPECT_EQ(ds.test_count(), 6u);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) EXPECT_EQ(ds.samples[i].tick, static_cast<std::int64_t>(i));
  EXPECT_EQ(ds.test_split().front().tick, 14);
}

TEST(Dataset, PropertyBoundsAndLabelRanges) {
  Rng rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const auto net = random_network(rng, {4, 9, 0.3});
    SolverConfig cfg;
    cfg.k_paths = uniform_int(rng, 1, 5);
    const auto ds = generate_dataset(net, sequence(net, 8, uniform_real(rng, 0.2, 1.0), trial), cfg);
    for (const auto& s : ds.samples) {
      EXPECT_EQ(s.input.size(), input_width(net));
      for (double x : s.input) {
        EXPECT_GE(x, 0.0);
        EXPECT_LE(x, 1.0);
      }
      for (std::size_t od = 0; od < s.labels.size(); ++od) {
        EXPECT_GE(s.labels[od], 0);
        EXPECT_LT(static_cast<std::size_t>(s.labels[od]), std::max<std::size_t>(1, ds.table.paths_at(od).size()));
      }
    }
  }
}

TEST(Dataset, HashIgnoresThreadCount) {
  const auto net = geant();
  const auto seq = sequence(net, 12, 0.8, 5);
  const auto a = generate_dataset(net, seq, {}, 1);
  const auto b = generate_dataset(net, seq, {}, 3);
  const auto c = generate_dataset(net, seq, {}, 1);
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash(), c.hash());
  SolverConfig other;
  other.epsilon = 0.1;
  EXPECT_NE(a.hash(), generate_dataset(net, seq, other).hash());
}

TEST(Dataset, SaveLoadRoundTrip) {
  const auto net = geant();
  const auto ds = generate_dataset(net, sequence(net, 5, 0.8, 2), {});
  const auto bytes = save_dataset(ds);
  const auto back = load_dataset(bytes);
  EXPECT_EQ(back.hash(), ds.hash());
  EXPECT_EQ(back.train_count, ds.train_count);
  EXPECT_EQ(back.samples[3].labels, ds.samples[3].labels);
  EXPECT_EQ(back.table.paths_at(17), ds.table.paths_at(17));
  EXPECT_THROW(load_dataset(bytes.substr(0, bytes.size() / 2)), FormatError);
  EXPECT_THROW(load_dataset(bytes + "z"), FormatError);
  EXPECT_THROW(load_dataset("junk"), FormatError);
}

TEST(Dataset, CsvExport) {
  const auto net = triangle();
  const auto ds = generate_dataset(net, sequence(net, 3, 0.5, 2), {});
  const auto csv = dataset_csv(ds);
  EXPECT_EQ(csv.front(), '#');
  std::size_t rows = 0;
  std::size_t pos = 0;
  while ((pos = csv.find('\n', pos)) != std::string::npos) {
    ++pos;
    if (pos < csv.size() && csv[pos] != '#') ++rows;
  }
  EXPECT_EQ(rows, 4u);  // column header plus three samples
  EXPECT_NE(csv.find("\ntick,split,scale"), std::string::npos);
}

TEST(Evaluate, TeacherLabelsScorePerfectly) {
  const auto net = geant();
  TrafficParams p;
  p.length = 6;
  p.noise_fraction = 0.0;
  p.temporal_amplitude = 0.0;
  p.mean_utilization = 0.8;
  const auto ds = generate_dataset(net, generate_tm_sequence(net, p, 4), {});
  const auto model = constant_model(net, ds.samples.front().labels, 5);
  const auto m = evaluate_model(model, ds, ds.test_split(), net);
  EXPECT_EQ(m.samples, ds.test_count());
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.exact_match, 1.0);
  EXPECT_EQ(m.throughput_ratio, 1.0);
  EXPECT_GT(m.mean_infer_ms, 0.0);
  EXPECT_GT(m.mean_bh_ms, 0.0);
}

TEST(Evaluate, UniformOutputsScoreChance) {
  const auto net = k4();
  auto ds = generate_dataset(net, sequence(net, 400, 0.5, 8), {});
  Rng rng(5);
  for (auto& s : ds.samples) {
    for (std::size_t od = 0; od < s.labels.size(); ++od) {
      s.labels[od] = static_cast<std::int32_t>(uniform_int(rng, 0, 4));
      s.active[od] = 1;
    }
  }
  auto model = init_mlp({input_width(net), 8, output_width(net, 5)}, 0, 5);
  for (auto& w : model.weights) w.setZero();
  const auto m = evaluate_model(model, ds, ds.test_split(), net);
  const double n = static_cast<double>(ds.test_count() * 12);
  EXPECT_NEAR(m.accuracy, 0.2, 3 * std::sqrt(0.2 * 0.8 / n));
}

TEST(Evaluate, RefusesMismatches) {
  const auto net = geant();
  const auto ds = generate_dataset(net, sequence(net, 2, 0.5, 1), {});
  const auto wrong_k = init_mlp({544, 4, 506 * 3}, 0, 3);
  EXPECT_THROW(evaluate_model(wrong_k, ds, ds.test_split(), net), DimensionError);
  const auto ok = init_mlp({544, 4, 2530}, 0, 5);
  EXPECT_THROW(evaluate_model(ok, ds, ds.test_split(), triangle()), ValidationError);
}

TEST(Evaluate, CsvHeader) {
  const auto csv = eval_csv({});
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "samples,accuracy,exact_match,throughput_ratio,raw_throughput_ratio,mean_infer_ms,mean_bh_ms");
}

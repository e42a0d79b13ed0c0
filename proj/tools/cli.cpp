#include "cli.hpp"

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include "neuroute/engine.hpp"
#include "neuroute/error.hpp"
#include "neuroute/hashing.hpp"
#include "neuroute/imitation.hpp"

namespace neuroute::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

struct RunConfig {
  std::string topo, tm, dataset, model;
  std::string out = "out";
  std::string format = "binary";
  std::uint64_t seed = 1;
  SolverConfig solver;
  TrafficParams traffic;
  TrainConfig train;
  std::size_t layers = 6;
  std::size_t hidden = 100;
  double train_fraction = kDefaultTrainFraction;
  double budget_seconds = 0.0;
  std::size_t window = kDefaultWindow;
  double fallback_threshold = 0.1;
  // Raw list flags for sweep.
  std::string layer_list, hidden_list, lr_list;
};

// Flags as given on the command line; unset ones leave the config alone.
struct Flags {
  std::optional<std::string> config, topo, tm, dataset, model, out, format;
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon, dropout, budget, utilization, amplitude, noise, ar, train_fraction, fallback, slack,
      min_rate;
  std::optional<std::size_t> k_paths, batch, epochs, period, length, window, max_iterations;
  std::optional<std::string> layers, hidden, lr;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot read file '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write file '{}'", path.string()));
  out << content;
}

template <typename T>
T parse_value(const std::string& text, const std::string& what) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ValidationError(fmt::format("bad value '{}' for {}", text, what));
  return v;
}

// Flat `[section]` / `key = value` file; unknown keys are an error.
void apply_config_file(RunConfig& c, const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError(fmt::format("config {}: {}", path, e.message()), e.line());
  }
  auto str = [](const boost::property_tree::ptree& n) { return n.get_value<std::string>(); };
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      const std::string v = str(body);
      if (section == "seed") c.seed = parse_value<std::uint64_t>(v, "seed");
      else if (section == "topo") c.topo = v;
      else if (section == "tm") c.tm = v;
      else if (section == "dataset") c.dataset = v;
      else if (section == "model") c.model = v;
      else if (section == "out") c.out = v;
      else throw ValidationError(fmt::format("unknown config key '{}'", section));
      continue;
    }
    for (const auto& [key, node] : body) {
      const std::string v = str(node);
      const std::string name = section + "." + key;
      if (section == "paths") {
        if (key == "topo") c.topo = v;
        else if (key == "tm") c.tm = v;
        else if (key == "dataset") c.dataset = v;
        else if (key == "model") c.model = v;
        else if (key == "out") c.out = v;
        else throw ValidationError(fmt::format("unknown config key '{}'", name));
      } else if (section == "solver") {
        if (key == "epsilon") c.solver.epsilon = parse_value<double>(v, name);
        else if (key == "k_paths") c.solver.k_paths = parse_value<std::size_t>(v, name);
        else if (key == "max_iterations") c.solver.max_iterations = parse_value<std::size_t>(v, name);
        else if (key == "throughput_slack") c.solver.throughput_slack = parse_value<double>(v, name);
        else if (key == "min_rate_fraction") c.solver.min_rate_fraction = parse_value<double>(v, name);
        else if (key == "max_cost_passes") c.solver.max_cost_passes = parse_value<std::size_t>(v, name);
        else throw ValidationError(fmt::format("unknown config key '{}'", name));
      } else if (section == "traffic") {
        if (key == "mean_utilization") c.traffic.mean_utilization = parse_value<double>(v, name);
        else if (key == "temporal_amplitude") c.traffic.temporal_amplitude = parse_value<double>(v, name);
        else if (key == "noise_fraction") c.traffic.noise_fraction = parse_value<double>(v, name);
        else if (key == "ar_coefficient") c.traffic.ar_coefficient = parse_value<double>(v, name);
        else if (key == "period") c.traffic.period = parse_value<std::size_t>(v, name);
        else if (key == "length") c.traffic.length = parse_value<std::size_t>(v, name);
        else throw ValidationError(fmt::format("unknown config key '{}'", name));
      } else if (section == "train") {
        if (key == "learning_rate") c.train.learning_rate = parse_value<double>(v, name);
        else if (key == "batch_size") c.train.batch_size = parse_value<std::size_t>(v, name);
        else if (key == "epochs") c.train.epochs = parse_value<std::size_t>(v, name);
        else if (key == "dropout") c.train.dropout = parse_value<double>(v, name);
        else if (key == "layers") c.layers = parse_value<std::size_t>(v, name);
        else if (key == "hidden") c.hidden = parse_value<std::size_t>(v, name);
        else if (key == "train_fraction") c.train_fraction = parse_value<double>(v, name);
        else throw ValidationError(fmt::format("unknown config key '{}'", name));
      } else if (section == "engine") {
        if (key == "window") c.window = parse_value<std::size_t>(v, name);
        else if (key == "fallback_threshold") c.fallback_threshold = parse_value<double>(v, name);
        else throw ValidationError(fmt::format("unknown config key '{}'", name));
      } else {
        throw ValidationError(fmt::format("unknown config section '{}'", section));
      }
    }
  }
}

template <typename T>
void take(T& dst, const std::optional<T>& src) {
  if (src) dst = *src;
}

RunConfig resolve(const Flags& f) {
  RunConfig c;
  if (f.config) apply_config_file(c, *f.config);
  take(c.topo, f.topo);
  take(c.tm, f.tm);
  take(c.dataset, f.dataset);
  take(c.model, f.model);
  take(c.out, f.out);
  take(c.format, f.format);
  take(c.seed, f.seed);
  take(c.solver.epsilon, f.epsilon);
  take(c.solver.k_paths, f.k_paths);
  take(c.solver.max_iterations, f.max_iterations);
  take(c.solver.throughput_slack, f.slack);
  take(c.solver.min_rate_fraction, f.min_rate);
  take(c.traffic.mean_utilization, f.utilization);
  take(c.traffic.temporal_amplitude, f.amplitude);
  take(c.traffic.noise_fraction, f.noise);
  take(c.traffic.ar_coefficient, f.ar);
  take(c.traffic.period, f.period);
  take(c.traffic.length, f.length);
  take(c.train.batch_size, f.batch);
  take(c.train.epochs, f.epochs);
  take(c.train.dropout, f.dropout);
  take(c.train_fraction, f.train_fraction);
  take(c.budget_seconds, f.budget);
  take(c.window, f.window);
  take(c.fallback_threshold, f.fallback);
  if (f.layers) c.layer_list = *f.layers;
  if (f.hidden) c.hidden_list = *f.hidden;
  if (f.lr) c.lr_list = *f.lr;
  c.train.seed = c.seed;
  c.solver.validate();
  if (c.format != "binary" && c.format != "csv" && c.format != "both")
    throw ValidationError(fmt::format("unknown format '{}' (binary, csv or both)", c.format));
  return c;
}

// "1..8" or "1,2,4"
template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& what) {
  std::vector<T> out;
  if (const auto dots = text.find(".."); dots != std::string::npos && std::is_integral_v<T>) {
    const T lo = parse_value<T>(text.substr(0, dots), what);
    const T hi = parse_value<T>(text.substr(dots + 2), what);
    if (hi < lo) throw ValidationError(fmt::format("empty range '{}' for {}", text, what));
    for (T v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_value<T>(item, what));
  if (out.empty()) throw ValidationError(fmt::format("empty list for {}", what));
  return out;
}

template <typename T>
T single(const std::string& text, T fallback, const std::string& what) {
  if (text.empty()) return fallback;
  const auto v = parse_list<T>(text, what);
  if (v.size() != 1) throw ValidationError(fmt::format("{} takes one value outside sweep", what));
  return v.front();
}

std::size_t worker_threads() {
  if (const char* env = std::getenv("NEUROUTE_THREADS")) {
    const auto n = parse_value<std::size_t>(env, "NEUROUTE_THREADS");
    if (n == 0) throw ValidationError("NEUROUTE_THREADS must be at least 1");
    return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string config_dump(const RunConfig& c) {
  std::string s;
  auto kv = [&](const char* k, const auto& v) { s += fmt::format("{}={}\n", k, v); };
  kv("seed", c.seed);
  kv("solver.epsilon", c.solver.epsilon);
  kv("solver.k_paths", c.solver.k_paths);
  kv("solver.max_iterations", c.solver.max_iterations);
  kv("solver.throughput_slack", c.solver.throughput_slack);
  kv("solver.min_rate_fraction", c.solver.min_rate_fraction);
  kv("solver.max_cost_passes", c.solver.max_cost_passes);
  kv("traffic.mean_utilization", c.traffic.mean_utilization);
  kv("traffic.temporal_amplitude", c.traffic.temporal_amplitude);
  kv("traffic.noise_fraction", c.traffic.noise_fraction);
  kv("traffic.ar_coefficient", c.traffic.ar_coefficient);
  kv("traffic.period", c.traffic.period);
  kv("traffic.length", c.traffic.length);
  kv("train.learning_rate", c.lr_list.empty() ? fmt::format("{}", c.train.learning_rate) : c.lr_list);
  kv("train.batch_size", c.train.batch_size);
  kv("train.epochs", c.train.epochs);
  kv("train.dropout", c.train.dropout);
  kv("train.layers", c.layer_list.empty() ? fmt::format("{}", c.layers) : c.layer_list);
  kv("train.hidden", c.hidden_list.empty() ? fmt::format("{}", c.hidden) : c.hidden_list);
  kv("train.train_fraction", c.train_fraction);
  kv("train.budget_seconds", c.budget_seconds);
  kv("engine.window", c.window);
  kv("engine.fallback_threshold", c.fallback_threshold);
  return s;
}

class Artifacts {
 public:
  Artifacts(std::string command, const RunConfig& cfg) : command_(std::move(command)), cfg_(cfg) {
    fs::create_directories(cfg.out);
  }

  /// `timed` marks wall-clock content; its hash is listed apart because it
  /// cannot reproduce.
  void write(const std::string& name, const std::string& content, bool timed = false) {
    write_file(fs::path(cfg_.out) / name, content);
    (timed ? timed_ : files_)[name] = sha256_hex(content);
  }

  std::string finish(std::ostream& out) {
    json m;
    m["command"] = command_;
    m["seed"] = cfg_.seed;
    const auto dump = config_dump(cfg_);
    m["config_hash"] = sha256_hex(dump);
    json conf = json::object();
    std::istringstream lines(dump);
    for (std::string line; std::getline(lines, line);) {
      const auto eq = line.find('=');
      conf[line.substr(0, eq)] = line.substr(eq + 1);
    }
    m["config"] = conf;
    json inputs = json::object();
    for (const auto& [k, v] : std::map<std::string, std::string>{
             {"topo", cfg_.topo}, {"tm", cfg_.tm}, {"dataset", cfg_.dataset}, {"model", cfg_.model}})
      if (!v.empty()) inputs[k] = sha256_hex(read_file(v));
    m["inputs"] = inputs;
    m["versions"] = {{"neuroute", kVersion},
                     {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__}};
    json arts = json::object();
    for (const auto& [k, v] : files_) arts[k] = v;
    m["artifacts"] = arts;
    json timed = json::object();
    for (const auto& [k, v] : timed_) timed[k] = v;
    m["timing_artifacts"] = timed;
    const auto name = command_ + ".manifest.json";
    write_file(fs::path(cfg_.out) / name, m.dump(2) + "\n");
    out << fmt::format("wrote {} artifact(s) to {}\n", files_.size() + timed_.size(), cfg_.out);
    return name;
  }

 private:
  std::string command_;
  const RunConfig& cfg_;
  std::map<std::string, std::string> files_;
  std::map<std::string, std::string> timed_;
};

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ValidationError(fmt::format("{} is required", flag));
}

Network topology(const RunConfig& c) {
  require(c.topo, "--topo");
  return load_topology_file(c.topo);
}

TmSequence scenario(const RunConfig& c, const Network& net) {
  if (!c.tm.empty()) return load_tm_csv(read_file(c.tm), net);
  return generate_tm_sequence(net, c.traffic, c.seed);
}

Dataset dataset(const RunConfig& c) {
  require(c.dataset, "--dataset");
  return load_dataset(read_file(c.dataset));
}

Mlp model(const RunConfig& c) {
  require(c.model, "--model");
  return load_model(read_file(c.model));
}

void check_k(const Flags& f, std::size_t have, const char* where) {
  if (f.k_paths && *f.k_paths != have)
    throw ValidationError(fmt::format("--k-paths {} contradicts k={} recorded in the {}", *f.k_paths, have, where));
}

std::vector<std::size_t> layer_sizes(std::size_t in, std::size_t layers, std::size_t hidden, std::size_t out) {
  std::vector<std::size_t> sizes{in};
  for (std::size_t i = 0; i < layers; ++i) sizes.push_back(hidden);
  sizes.push_back(out);
  return sizes;
}

int cmd_gen_traffic(const RunConfig& c, std::ostream& out) {
  const auto net = topology(c);
  const auto seq = generate_tm_sequence(net, c.traffic, c.seed);
  Artifacts a("gen-traffic", c);
  a.write("traffic.csv", write_tm_csv(seq, net));
  out << fmt::format("{} matrices over {} nodes, target per-OD rate {:.0f} bps\n", seq.matrices.size(),
                     net.node_count(), gravity_target_rate(net, c.traffic.mean_utilization));
  a.finish(out);
  return 0;
}

int cmd_gen_dataset(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto net = topology(c);
  const auto seq = scenario(c, net);
  const auto ds = generate_dataset(net, seq, c.solver, worker_threads(), c.train_fraction);
  for (const auto& why : ds.skipped) err << why << '\n';
  Artifacts a("gen-dataset", c);
  if (c.format != "csv") a.write("dataset.bin", save_dataset(ds));
  if (c.format != "binary") a.write("dataset.csv", dataset_csv(ds));
  double bh = 0.0;
  for (double s : ds.bh_seconds) bh += s;
  out << fmt::format("{} samples ({} train / {} test), {} skipped, mean teacher time {:.2f} ms\n", ds.samples.size(),
                     ds.train_count, ds.test_count(), ds.skipped.size(),
                     ds.bh_seconds.empty() ? 0.0 : 1e3 * bh / static_cast<double>(ds.bh_seconds.size()));
  out << "dataset hash " << ds.hash() << '\n';
  a.finish(out);
  return 0;
}

int cmd_train(const RunConfig& c, const Flags& f, std::ostream& out) {
  const auto ds = dataset(c);
  check_k(f, ds.k(), "dataset");
  if (ds.train_count == 0) throw ValidationError("dataset has no training samples");
  const std::size_t layers = single<std::size_t>(c.layer_list, c.layers, "--layers");
  const std::size_t hidden = single<std::size_t>(c.hidden_list, c.hidden, "--hidden");
  TrainConfig tc = c.train;
  tc.learning_rate = single<double>(c.lr_list, c.train.learning_rate, "--lr");
  tc.time_budget_seconds = c.budget_seconds;

  const std::size_t in = ds.table.od_count() + ds.link_count;
  auto net = init_mlp(layer_sizes(in, layers, hidden, ds.table.od_count() * ds.k()), c.seed, ds.k(), tc.dropout);
  net.topology_hash = ds.topology_hash;
  const auto train_data = to_training_data(ds.train_split());
  const auto test_data = to_training_data(ds.test_split());
  std::vector<EpochMetrics> history;
  if (tc.epochs > 0) {
    history = train(net, train_data, tc, [&](EpochMetrics& m, const Mlp& model) {
      if (ds.test_count() > 0) m.test_accuracy = group_accuracy(model, test_data);
      out << fmt::format("epoch {:>3}  loss {:.4f}  msr {:.6f}  acc {:.4f}  test {:.4f}  {:.2f}s\n", m.epoch, m.loss,
                         m.msr, m.accuracy, m.test_accuracy, m.seconds);
      out.flush();
    });
  }
  Artifacts a("train", c);
  a.write("model.bin", save_model(net));
  a.write("metrics.csv", metrics_csv(history));
  a.write("epoch_times.csv", timing_csv(history), true);
  out << fmt::format("{} parameters\n", net.parameter_count());
  a.finish(out);
  return 0;
}

int cmd_eval(const RunConfig& c, const Flags& f, std::ostream& out) {
  const auto ds = dataset(c);
  const auto m = model(c);
  if (m.topology_hash != ds.topology_hash)
    throw ValidationError(fmt::format("model topology hash {} differs from the dataset's {}", m.topology_hash,
                                      ds.topology_hash));
  if (m.group_size != ds.k())
    throw ValidationError(fmt::format("model k={} contradicts dataset k={}", m.group_size, ds.k()));
  check_k(f, ds.k(), "dataset");
  const auto net = topology(c);
  if (net.hash() != ds.topology_hash) throw ValidationError("--topo is not the topology the dataset was built on");
  const auto split = ds.test_count() > 0 ? ds.test_split() : std::span<const Sample>(ds.samples);
  const auto metrics = evaluate_model(m, ds, split, net);
  Artifacts a("eval", c);
  // Quality columns reproduce; timings go to their own file.
  a.write("eval.csv", fmt::format("samples,accuracy,exact_match,throughput_ratio,raw_throughput_ratio\n{},{},{},{},{}\n",
                                  metrics.samples, metrics.accuracy, metrics.exact_match, metrics.throughput_ratio,
                                  metrics.raw_throughput_ratio));
  a.write("eval_times.csv",
          fmt::format("mean_infer_ms,mean_bh_ms\n{},{}\n", metrics.mean_infer_ms, metrics.mean_bh_ms), true);
  out << fmt::format("accuracy {:.4f}  exact {:.4f}  throughput ratio {:.4f}  inference {:.3f} ms\n",
                     metrics.accuracy, metrics.exact_match, metrics.throughput_ratio, metrics.mean_infer_ms);
  a.finish(out);
  return 0;
}

EngineConfig engine_config(const RunConfig& c, std::size_t k) {
  EngineConfig e;
  e.solver = c.solver;
  e.solver.k_paths = k;
  e.window = c.window;
  e.fallback_threshold = c.fallback_threshold;
  return e;
}

int cmd_route_sim(const RunConfig& c, const Flags& f, std::ostream& out) {
  const auto net = topology(c);
  const auto m = model(c);
  check_k(f, m.group_size, "model");
  const auto seq = scenario(c, net);
  const CandidateTable table(net, m.group_size);
  const MlpPolicy policy(net, m, table);
  const auto cfg = engine_config(c, m.group_size);
  std::string ticks = "tick,throughput_bps,cost,fallbacks,teacher_fallback\n";
  std::string times = "tick,infer_ms,bh_ms\n";
  std::string rules = "tick,src,dst,rate_bps,path\n";
  std::size_t whole = 0;
  for (std::size_t t = cfg.window; t < seq.matrices.size(); ++t) {
    const auto state = NetworkState::full(net, seq.matrices[t].timestamp);
    const auto r = route_tick(net, state, std::span(seq.matrices).subspan(t - cfg.window, cfg.window), policy,
                              table, cfg);
    whole += r.report.bh_fallback ? 1 : 0;
    ticks += fmt::format("{},{},{},{},{}\n", r.report.tick, r.report.throughput, r.report.cost, r.report.fallbacks,
                         r.report.bh_fallback ? 1 : 0);
    times += fmt::format("{},{},{}\n", r.report.tick, r.report.infer_ms, r.report.bh_ms);
    for (const auto& rule : r.rules) {
      std::string path;
      for (std::size_t i = 0; i < rule.path.links.size(); ++i) path += (i ? ";" : "") + std::to_string(rule.path.links[i]);
      rules += fmt::format("{},{},{},{},{}\n", rule.install_tick, net.node_name(rule.od.src),
                           net.node_name(rule.od.dst), rule.rate, path);
    }
  }
  Artifacts a("route-sim", c);
  a.write("ticks.csv", ticks);
  a.write("rules.csv", rules);
  a.write("tick_times.csv", times, true);
  out << fmt::format("{} ticks routed, {} handed to the teacher\n",
                     seq.matrices.size() > cfg.window ? seq.matrices.size() - cfg.window : 0, whole);
  a.finish(out);
  return 0;
}

int cmd_bench(const RunConfig& c, const Flags& f, std::ostream& out) {
  const auto net = topology(c);
  const auto seq = scenario(c, net);
  std::optional<Mlp> m;
  if (!c.model.empty()) m = model(c);
  const std::size_t k = m ? m->group_size : c.solver.k_paths;
  if (m) check_k(f, k, "model");
  const CandidateTable table(net, k);
  const auto cfg = engine_config(c, k);
  std::unique_ptr<PathPolicy> policy;
  if (m) {
    policy = std::make_unique<MlpPolicy>(net, *m, table);
  } else {
    policy = std::make_unique<TeacherPolicy>(net, table, cfg.solver);
  }
  const auto rep = compare_with_bh(net, seq, *policy, table, cfg);
  Artifacts a("bench", c);
  a.write("bench.csv", rep.csv(), true);
  a.write("bench_summary.csv", rep.summary_csv(), true);
  out << fmt::format("{} ticks  accuracy {:.4f}  throughput ratio {:.4f}  policy {:.3f} ms  teacher {:.3f} ms  "
                     "speedup {:.1f}x\n",
                     rep.rows.size(), rep.accuracy, rep.throughput_ratio, rep.mean_infer_ms, rep.mean_bh_ms,
                     rep.speedup);
  a.finish(out);
  return 0;
}

int cmd_sweep(const RunConfig& c, const Flags& f, std::ostream& out) {
  const auto ds = dataset(c);
  check_k(f, ds.k(), "dataset");
  if (ds.train_count == 0) throw ValidationError("dataset has no training samples");
  const auto layers = c.layer_list.empty() ? std::vector<std::size_t>{c.layers}
                                           : parse_list<std::size_t>(c.layer_list, "--layers");
  const auto hidden = c.hidden_list.empty() ? std::vector<std::size_t>{c.hidden}
                                            : parse_list<std::size_t>(c.hidden_list, "--hidden");
  const auto rates =
      c.lr_list.empty() ? std::vector<double>{c.train.learning_rate} : parse_list<double>(c.lr_list, "--lr");

  struct Job {
    std::size_t layers, hidden;
    double lr;
    EpochMetrics last;
    double seconds = 0.0;
  };
  std::vector<Job> jobs;
  for (auto l : layers)
    for (auto h : hidden)
      for (auto r : rates) jobs.push_back({l, h, r, {}, 0.0});

  const auto train_data = to_training_data(ds.train_split());
  const auto test_data = to_training_data(ds.test_split());
  const std::size_t in = ds.table.od_count() + ds.link_count;
  const std::size_t width = ds.table.od_count() * ds.k();
  auto run = [&](Job& job) {
    TrainConfig tc = c.train;
    tc.learning_rate = job.lr;
    tc.time_budget_seconds = c.budget_seconds;
    // A time budget replaces the epoch cap unless epochs were set explicitly.
    if (c.budget_seconds > 0.0 && !f.epochs) tc.epochs = std::numeric_limits<std::size_t>::max() / 2;
    auto net = init_mlp(layer_sizes(in, job.layers, job.hidden, width), c.seed, ds.k(), tc.dropout);
    const auto hist = tc.epochs ? train(net, train_data, tc) : std::vector<EpochMetrics>{};
    for (const auto& m : hist) job.seconds += m.seconds;
    if (!hist.empty()) job.last = hist.back();
    job.last.test_accuracy = ds.test_count() ? group_accuracy(net, test_data) : -1.0;
  };

  const std::size_t threads = std::min(worker_threads(), jobs.size());
  if (threads <= 1) {
    for (auto& j : jobs) {
      run(j);
      out << fmt::format("layers {} hidden {} lr {}: msr {:.6f} test {:.4f} ({} epochs, {:.1f}s)\n", j.layers,
                         j.hidden, j.lr, j.last.msr, j.last.test_accuracy, j.last.epoch, j.seconds);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < jobs.size(); i = next++) run(jobs[i]);
        } catch (...) {
          errors[w] = std::current_exception();
          next = jobs.size();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::string csv = "layers,hidden,lr,epochs,loss,msr,test_accuracy,training_seconds\n";
  for (const auto& j : jobs)
    csv += fmt::format("{},{},{},{},{},{},{},{}\n", j.layers, j.hidden, j.lr, j.last.epoch, j.last.loss, j.last.msr,
                       j.last.test_accuracy, j.seconds);
  Artifacts a("sweep", c);
  a.write("sweep.csv", csv, true);
  a.finish(out);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learned path selection for max-throughput min-cost routing", "neuroute"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.set_help_all_flag("--help-all");

  Flags f;
  app.add_option("--config", f.config, "key = value config file with [paths] [solver] [traffic] [train] [engine]");
  app.add_option("--topo", f.topo, "topology file");
  app.add_option("--tm", f.tm, "traffic CSV (t,src,dst,rate_bps); generated when absent");
  app.add_option("--dataset", f.dataset, "dataset file");
  app.add_option("--model", f.model, "model checkpoint");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--seed", f.seed, "seed for every random draw");
  app.add_option("--epsilon", f.epsilon, "solver accuracy");
  app.add_option("--k-paths", f.k_paths, "candidate paths per OD pair");
  app.add_option("--max-iterations", f.max_iterations, "phase cap for the throughput solver (0 = default)");
  app.add_option("--slack", f.slack, "throughput slack of the cost phase, fraction of each flow");
  app.add_option("--min-rate-fraction", f.min_rate, "minimum rate as a fraction of each demand");
  app.add_option("--layers", f.layers, "hidden layers (sweep: list or a..b range)");
  app.add_option("--hidden", f.hidden, "units per hidden layer (sweep: list)");
  app.add_option("--lr", f.lr, "learning rate (sweep: list)");
  app.add_option("--batch", f.batch, "mini-batch size");
  app.add_option("--epochs", f.epochs, "training epochs");
  app.add_option("--dropout", f.dropout, "dropout rate on hidden layers");
  app.add_option("--budget-seconds", f.budget, "training time budget per configuration");
  app.add_option("--train-fraction", f.train_fraction, "leading share of ticks used for training");
  app.add_option("--format", f.format, "dataset output: binary, csv or both");
  app.add_option("--utilization", f.utilization, "traffic: mean link load under shortest paths");
  app.add_option("--amplitude", f.amplitude, "traffic: daily swing");
  app.add_option("--noise", f.noise, "traffic: noise std-dev");
  app.add_option("--ar", f.ar, "traffic: noise lag-1 correlation");
  app.add_option("--period", f.period, "traffic: ticks per daily cycle");
  app.add_option("--length", f.length, "traffic: number of ticks");
  app.add_option("--window", f.window, "prediction window in ticks");
  app.add_option("--fallback-threshold", f.fallback, "dropped-demand share that hands a tick to the teacher");

  auto* gen_traffic = app.add_subcommand("gen-traffic", "synthesize a traffic sequence");
  auto* gen_dataset = app.add_subcommand("gen-dataset", "run the teacher over a sequence and encode samples");
  auto* train_cmd = app.add_subcommand("train", "train the path-selection network");
  auto* eval_cmd = app.add_subcommand("eval", "score a model on a dataset's test split");
  auto* route_sim = app.add_subcommand("route-sim", "route a sequence tick by tick with a model");
  auto* bench = app.add_subcommand("bench", "paired model vs teacher timing and quality");
  auto* sweep = app.add_subcommand("sweep", "train over a grid of layers, widths and learning rates");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string what = e.what();
    std::replace(what.begin(), what.end(), '\n', ' ');
    err << "error: " << what << '\n';
    return e.get_exit_code() ? e.get_exit_code() : 2;
  }

  try {
    const RunConfig cfg = resolve(f);
    if (*gen_traffic) return cmd_gen_traffic(cfg, out);
    if (*gen_dataset) return cmd_gen_dataset(cfg, out, err);
    if (*train_cmd) return cmd_train(cfg, f, out);
    if (*eval_cmd) return cmd_eval(cfg, f, out);
    if (*route_sim) return cmd_route_sim(cfg, f, out);
    if (*bench) return cmd_bench(cfg, f, out);
    if (*sweep) return cmd_sweep(cfg, f, out);
  } catch (const std::exception& e) {
    std::string what = e.what();
    std::replace(what.begin(), what.end(), '\n', ' ');
    err << "error: " << what << '\n';
    return 1;
  }
  return 1;
}

}  // namespace neuroute::cli

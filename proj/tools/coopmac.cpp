// coopmac: evaluate, optimize, assign, simulate and sweep cognitive MAC
// scenarios. Tabular output is CSV on stdout; errors go to stderr.

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coopmac/assignment.hpp"
#include "coopmac/mac_throughput.hpp"
#include "coopmac/optimizer.hpp"
#include "coopmac/parallel.hpp"
#include "coopmac/scenario_io.hpp"
#include "coopmac/simulator.hpp"

using namespace coopmac;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Common {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
};

Scenario load(const Common& c) { return load_scenario(c.scenario, c.seed); }

/// Decimal places written in a numeric literal ("0.10" -> 2).
int decimals_of(const std::string& text) {
  const auto dot = text.find('.');
  if (dot == std::string::npos) return 0;
  std::size_t end = dot + 1;
  while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end]))) ++end;
  return static_cast<int>(end - dot - 1);
}

double to_number(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) throw std::invalid_argument("not a number: '" + text + "'");
  return v;
}

/// "a,b,c", or "lo..hi" / "lo..hi:step". Without a step, ranges advance by
/// one unit in the last decimal place written ("0.1..1.0" -> 0.1 steps).
std::vector<std::string> expand_values(const std::string& spec) {
  std::vector<std::string> out;
  std::stringstream items(spec);
  std::string item;
  while (std::getline(items, item, ',')) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      if (item.empty()) throw std::invalid_argument("--values: empty entry");
      out.push_back(item);
      continue;
    }
    const std::string lo_s = item.substr(0, dots);
    std::string hi_s = item.substr(dots + 2), step_s;
    if (const auto colon = hi_s.find(':'); colon != std::string::npos) {
      step_s = hi_s.substr(colon + 1);
      hi_s = hi_s.substr(0, colon);
    }
    const double lo = to_number(lo_s), hi = to_number(hi_s);
    int places = std::max(decimals_of(lo_s), decimals_of(hi_s));
    double step = std::pow(10.0, -places);
    if (!step_s.empty()) {
      step = to_number(step_s);
      places = std::max(places, decimals_of(step_s));
    }
    if (!(step > 0.0)) throw std::invalid_argument("--values: step must be positive");
    if (hi < lo) throw std::invalid_argument("--values: range '" + item + "' runs backwards");
    const auto count = static_cast<long long>(std::floor((hi - lo) / step + 1e-9));
    if (count > 100000) throw std::invalid_argument("--values: range '" + item + "' is too long");
    for (long long k = 0; k <= count; ++k) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.*f", places, lo + static_cast<double>(k) * step);
      out.push_back(buf);
    }
  }
  if (out.empty()) throw std::invalid_argument("--values: empty value list");
  return out;
}

// ---------------------------------------------------------------------------
// CSV

const char* kHeader = "param,value,algorithm,NT,E,T,W,tau_total_us,wall_ms,assignment,tau_us";

struct Row {
  std::string param = "none";
  std::string value;
  std::string algorithm;
  ChannelAssignment assignment;
  SensingDesign design;
  ThroughputReport report;
  double wall_ms = 0.0;
};

std::string csv_line(const Row& r, bool timing) {
  std::ostringstream os;
  os << r.param << ',' << r.value << ',' << r.algorithm << ',' << fmt(r.report.normalized) << ','
     << fmt(r.report.expected_idle) << ',' << fmt(r.report.single_channel) << ',' << r.design.window << ','
     << fmt(r.report.tau_total_us) << ',' << (timing ? fmt(r.wall_ms) : "0") << ',' << r.assignment.to_string()
     << ',' << r.design.tau_string();
  return os.str();
}

// ---------------------------------------------------------------------------
// Algorithms

struct AlgoSpec {
  std::string name = "greedy";
  std::size_t width = 1;
  bool wrap = false;
  double tau_fraction = 0.01;
  int fixed_window = 32;
  std::uint64_t brute_limit = std::uint64_t{1} << 20;
  bool full_brute = false;
};

const std::vector<std::string> kAlgos = {"greedy", "brute", "rr", "hungarian", "fixed", "given"};

Row run_algorithm(const Scenario& sc, const AlgoSpec& a, unsigned threads) {
  OptimizerOptions opts;
  opts.threads = threads;
  const DesignPolicy optimized = DesignPolicy::optimized(opts);
  AssignmentOutcome out;
  if (a.name == "greedy") {
    out = greedy_channel_assignment(sc, sc.growth_threshold, optimized);
  } else if (a.name == "fixed") {
    out = greedy_channel_assignment(sc, sc.growth_threshold, DesignPolicy::fixed_tau(a.tau_fraction, a.fixed_window));
    out.algorithm = "fixed";
  } else if (a.name == "brute") {
    OptimizerOptions bo = a.full_brute ? OptimizerOptions{} : OptimizerOptions::coarse();
    bo.threads = threads;
    out = brute_force_channel_assignment(sc, {a.brute_limit}, DesignPolicy::optimized(bo));
  } else if (a.name == "rr") {
    const auto rr = round_robin_assignment(sc.num_su, sc.num_channels, a.width,
                                           a.wrap ? RoundRobinMode::Wrap : RoundRobinMode::Truncate);
    out = fixed_assignment_outcome(sc, rr, optimized, "rr" + std::to_string(a.width));
  } else if (a.name == "hungarian") {
    out = hungarian_seed_assignment(sc, optimized);
  } else if (a.name == "given") {
    if (!sc.assignment) throw std::invalid_argument("--algo given needs a scenario with a fixed assignment");
    out = fixed_assignment_outcome(sc, *sc.assignment, optimized, "given");
  } else {
    throw std::invalid_argument("unknown algorithm '" + a.name + "'");
  }
  Row row;
  row.algorithm = out.algorithm;
  row.assignment = out.assignment;
  row.design = out.design;
  row.report = out.report;
  row.wall_ms = out.wall_ms;
  return row;
}

void add_algo_flags(CLI::App* cmd, AlgoSpec& a) {
  cmd->add_option("--algo", a.name, "greedy | brute | rr | hungarian | fixed | given")
      ->check(CLI::IsMember(kAlgos));
  cmd->add_option("--width", a.width, "round-robin run length")->check(CLI::PositiveNumber);
  cmd->add_flag("--wrap", a.wrap, "round-robin runs wrap past the last channel");
  cmd->add_option("--tau-fraction", a.tau_fraction, "fixed algorithm: tau as a fraction of T")
      ->check(CLI::Range(1e-9, 1.0));
  cmd->add_option("--fixed-window", a.fixed_window, "fixed algorithm: contention window")->check(CLI::PositiveNumber);
  cmd->add_option("--brute-limit", a.brute_limit, "largest 2^(N*M) brute force will enumerate");
  cmd->add_flag("--full-brute", a.full_brute, "brute force with the full-fidelity optimizer");
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("scenario", c.scenario, "scenario JSON file or preset (paper_4x4, paper_10x4)")->required();
  cmd->add_option("--seed", c.seed, "override the scenario seed");
  cmd->add_option("--threads", c.threads, "worker threads (default: COOPMAC_THREADS or all cores)");
}

/// Assignment for eval/optimize/simulate: flag, then scenario, then full.
ChannelAssignment pick_assignment(const Scenario& sc, const std::string& flag) {
  if (!flag.empty()) {
    auto a = ChannelAssignment::parse(flag);
    if (a.num_su() != sc.num_su || a.num_channels() != sc.num_channels)
      throw std::invalid_argument("--assignment must be " + std::to_string(sc.num_su) + " x " +
                                  std::to_string(sc.num_channels));
    return a;
  }
  if (sc.assignment) return *sc.assignment;
  return ChannelAssignment::full(sc.num_su, sc.num_channels);
}

// ---------------------------------------------------------------------------
// Subcommands

struct EvalArgs {
  Common c;
  std::string assignment, tau;
  int window = 0;
};

int cmd_eval(const EvalArgs& a) {
  const Scenario sc = load(a.c);
  const ChannelAssignment asg = pick_assignment(sc, a.assignment);
  SensingDesign design;
  if (!a.tau.empty()) {
    design.tau_us = SensingDesign::parse_tau(a.tau, sc.num_su, sc.num_channels);
    design.window = a.window > 0 ? a.window : 32;
  } else if (sc.design && a.assignment.empty()) {
    design = *sc.design;
    if (a.window > 0) design.window = a.window;
  } else {
    throw std::invalid_argument("eval needs --tau (or a scenario with a fixed design)");
  }
  const ThroughputReport r = normalized_throughput(sc, asg, design);
  std::cout << "assignment " << asg.to_string() << "\n"
            << "W " << design.window << "\n"
            << "tau_us " << design.tau_string() << "\n"
            << "tau_total_us " << fmt(r.tau_total_us) << "\n"
            << "phi " << fmt(r.contention.phi) << "\n"
            << "collision_p " << fmt(r.contention.p) << "\n"
            << "P_t " << fmt(r.contention.p_transmit) << "\n"
            << "P_s " << fmt(r.contention.p_success) << "\n"
            << "mean_slot_us " << fmt(r.contention.mean_slot_us) << "\n"
            << "slots " << fmt(r.slots_per_cycle) << "\n"
            << "T " << fmt(r.single_channel) << "\n"
            << "E " << fmt(r.expected_idle) << "\n"
            << "NT " << fmt(r.normalized) << "\n";
  for (std::size_t j = 0; j < sc.num_channels; ++j) {
    std::cout << "channel " << j + 1 << " b=" << r.sensing.sensors_b[j] << " a=" << r.sensing.threshold_a[j];
    if (r.sensing.sensed(j))
      std::cout << " P_d=" << fmt(*r.sensing.channel_pd[j]) << " P_f=" << fmt(*r.sensing.channel_pf[j]);
    else
      std::cout << " unsensed";
    std::cout << "\n";
  }
  return 0;
}

struct OptimizeArgs {
  Common c;
  std::string assignment;
  bool timing = false;
};

int cmd_optimize(const OptimizeArgs& a) {
  const Scenario sc = load(a.c);
  const ChannelAssignment asg = pick_assignment(sc, a.assignment);
  OptimizerOptions opts;
  opts.threads = a.c.threads;
  const auto start = std::chrono::steady_clock::now();
  const OptimizedDesign d = optimize_design(sc, asg, opts);
  Row row;
  row.algorithm = "optimize";
  row.assignment = asg;
  row.design = d.design;
  row.report = d.report;
  row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  std::cout << kHeader << "\n" << csv_line(row, a.timing) << "\n";
  return 0;
}

struct AssignArgs {
  Common c;
  AlgoSpec algo;
  bool timing = false;
};

int cmd_assign(const AssignArgs& a) {
  const Scenario sc = load(a.c);
  const Row row = run_algorithm(sc, a.algo, a.c.threads);
  std::cout << kHeader << "\n" << csv_line(row, a.timing) << "\n";
  return 0;
}

struct SimulateArgs {
  Common c;
  std::string assignment;
  std::uint64_t cycles = 10000;
  std::uint64_t batch = 1000;
  std::uint64_t sim_seed = 1;
};

int cmd_simulate(const SimulateArgs& a) {
  const Scenario sc = load(a.c);
  ChannelAssignment asg;
  SensingDesign design;
  if (sc.design && a.assignment.empty()) {
    asg = *sc.assignment;
    design = *sc.design;
  } else {
    asg = pick_assignment(sc, a.assignment);
    OptimizerOptions opts;
    opts.threads = a.c.threads;
    design = optimize_design(sc, asg, opts).design;
  }
  const ThroughputReport analytic = normalized_throughput(sc, asg, design);
  SimConfig cfg;
  cfg.n_cycles = a.cycles;
  cfg.batch_cycles = a.batch;
  cfg.seed = a.sim_seed;
  cfg.threads = a.c.threads;
  const EmpiricalReport emp = simulate_cycles(sc, asg, design, cfg);
  auto rel = [](double e, double x) { return x != 0.0 ? (e - x) / x : 0.0; };
  std::cout << "quantity,analytic,empirical,stderr,rel_delta\n";
  std::cout << "NT," << fmt(analytic.normalized) << ',' << fmt(emp.normalized) << ',' << fmt(emp.normalized_stderr)
            << ',' << fmt(rel(emp.normalized, analytic.normalized)) << "\n";
  std::cout << "phi," << fmt(analytic.contention.phi) << ',' << fmt(emp.phi) << ',' << fmt(emp.phi_stderr) << ','
            << fmt(rel(emp.phi, analytic.contention.phi)) << "\n";
  const double slots = static_cast<double>(emp.contention.slots()) / static_cast<double>(emp.cycles);
  std::cout << "slots_per_cycle," << fmt(analytic.slots_per_cycle) << ',' << fmt(slots) << ",,"
            << fmt(rel(slots, analytic.slots_per_cycle)) << "\n";
  const double busy = static_cast<double>(emp.contention.successes + emp.contention.collisions);
  const double ps = busy > 0.0 ? static_cast<double>(emp.contention.successes) / busy : 0.0;
  std::cout << "P_s," << fmt(analytic.contention.p_success) << ',' << fmt(ps) << ",,"
            << fmt(rel(ps, analytic.contention.p_success)) << "\n";
  for (std::size_t j = 0; j < sc.num_channels; ++j) {
    const auto& ch = emp.channels[j];
    const double pf = analytic.sensing.sensed(j) ? *analytic.sensing.channel_pf[j] : 1.0;
    const double declared = ch.idle ? static_cast<double>(ch.correct_idle) / static_cast<double>(ch.idle) : 0.0;
    std::cout << "idle_declared_ch" << j + 1 << ',' << fmt(1.0 - pf) << ',' << fmt(declared) << ",,"
              << fmt(rel(declared, 1.0 - pf)) << "\n";
  }
  return 0;
}

struct SweepArgs {
  Common c;
  AlgoSpec algo;
  std::string param, values;
  bool reoptimize = false;
  bool timing = false;
};

int cmd_sweep(const SweepArgs& a) {
  const Scenario base = load(a.c);
  const auto values = expand_values(a.values);
  std::vector<Row> rows;
  if (a.param == "pidle" && !a.reoptimize) {
    // One optimization; idle probabilities only rescale E.
    for (const auto& v : values) with_common_idle(base, to_number(v));
    const Row shared = run_algorithm(base, a.algo, a.c.threads);
    for (const auto& v : values) {
      Row row = shared;
      row.param = a.param;
      row.value = v;
      row.report = normalized_throughput(with_common_idle(base, to_number(v)), shared.assignment, shared.design);
      rows.push_back(row);
    }
  } else {
    // Validate every value before spending time on any of them.
    std::vector<Scenario> scenarios;
    std::vector<AlgoSpec> algos;
    for (const auto& v : values) {
      Scenario sc = base;
      AlgoSpec algo = a.algo;
      if (a.param == "pidle") sc = with_common_idle(base, to_number(v));
      else if (a.param == "snr_shift") sc = with_snr_shift(base, to_number(v));
      else if (a.param == "fusion") sc = with_fusion(base, FusionRule::parse(v));
      else if (a.param == "tau_fraction") {
        algo.tau_fraction = to_number(v);
        if (!(algo.tau_fraction > 0.0 && algo.tau_fraction < 1.0))
          throw std::invalid_argument("tau_fraction values must lie in (0,1)");
      }
      sc.validate();
      scenarios.push_back(std::move(sc));
      algos.push_back(algo);
    }
    const unsigned outer = a.c.threads ? a.c.threads : worker_count();
    const unsigned inner = outer > 1 && values.size() > 1 ? 1 : a.c.threads;
    rows = parallel_map<Row>(
        values.size(),
        [&](std::size_t k) {
          Row row = run_algorithm(scenarios[k], algos[k], inner);
          row.param = a.param;
          row.value = values[k];
          return row;
        },
        outer);
  }
  std::cout << kHeader << "\n";
  for (const auto& r : rows) std::cout << csv_line(r, a.timing) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Throughput analysis, optimization and simulation of a cooperative-sensing cognitive MAC"};
  app.require_subcommand(1);

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "evaluate NT for a fixed assignment and design");
  add_common(e, eval.c);
  e->add_option("--assignment", eval.assignment, "rows of 0/1 joined by '|'");
  e->add_option("--tau", eval.tau, "tau_us matrix, row-major, rows joined by '|'");
  e->add_option("--window", eval.window, "contention window W")->check(CLI::PositiveNumber);

  OptimizeArgs opt;
  auto* o = app.add_subcommand("optimize", "optimize sensing times and W for one assignment");
  add_common(o, opt.c);
  o->add_option("--assignment", opt.assignment, "rows of 0/1 joined by '|' (default: scenario, else full)");
  o->add_flag("--timing", opt.timing, "record wall-clock time in the CSV");

  AssignArgs asg;
  auto* s = app.add_subcommand("assign", "choose a channel assignment and its design");
  add_common(s, asg.c);
  add_algo_flags(s, asg.algo);
  s->add_flag("--timing", asg.timing, "record wall-clock time in the CSV");

  SimulateArgs sim;
  auto* m = app.add_subcommand("simulate", "Monte Carlo check of the analytic throughput");
  add_common(m, sim.c);
  m->add_option("--assignment", sim.assignment, "rows of 0/1 joined by '|' (default: scenario, else full)");
  m->add_option("--cycles", sim.cycles, "simulated cycles")->check(CLI::PositiveNumber);
  m->add_option("--batch", sim.batch, "cycles per replication batch")->check(CLI::PositiveNumber);
  m->add_option("--sim-seed", sim.sim_seed, "simulation seed");

  SweepArgs sw;
  auto* w = app.add_subcommand("sweep", "one CSV row per parameter value");
  add_common(w, sw.c);
  add_algo_flags(w, sw.algo);
  w->add_option("--param", sw.param, "pidle | snr_shift | fusion | tau_fraction")
      ->required()
      ->check(CLI::IsMember({"pidle", "snr_shift", "fusion", "tau_fraction"}));
  w->add_option("--values", sw.values, "comma list or lo..hi[:step]")->required();
  w->add_flag("--reoptimize", sw.reoptimize, "pidle: re-run the algorithm at every value");
  w->add_flag("--timing", sw.timing, "record wall-clock time in the CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }
  try {
    if (*e) return cmd_eval(eval);
    if (*o) return cmd_optimize(opt);
    if (*s) return cmd_assign(asg);
    if (*m) return cmd_simulate(sim);
    if (*w) return cmd_sweep(sw);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 1;
}

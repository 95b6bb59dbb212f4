#include "sbsd/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <thread>

#include "sbsd/error.hpp"
#include "sbsd/rng.hpp"

namespace sbsd::pipeline {

using nlohmann::json;

namespace {

std::size_t idx(Target t) { return static_cast<std::size_t>(t); }

// Runs jobs[i] for every i on a fixed pool; results land by index.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& job) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          job(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

speculator::TrainConfig PipelineConfig::train_config() const {
  if (!(epsilon >= 0 && epsilon < 1)) throw Error(ErrorCode::Precondition, "epsilon must lie in [0, 1)");
  // Exact 1 - epsilon on a 10^9 grid.
  constexpr std::uint64_t kDen = 1'000'000'000;
  const auto num = kDen - static_cast<std::uint64_t>(epsilon * static_cast<double>(kDen));
  return {{num, kDen}, max_nodes};
}

sim::SuperscalarConfig PipelineConfig::sim_config(unsigned p) const { return {p, mem_ports, l_p}; }

json to_json(const PipelineConfig& c) {
  return {{"capacity", {{"pc", c.capacity[0]}, {"gpr", c.capacity[1]}, {"mem", c.capacity[2]}}},
          {"schedule", selector::schedule_to_json(c.schedule)},
          {"epsilon", c.epsilon},
          {"max_nodes", c.max_nodes},
          {"issue_widths", c.issue_widths},
          {"sweep_p", c.sweep_p},
          {"mem_ports", c.mem_ports},
          {"l_p", c.l_p},
          {"verification",
           {{"mode", c.verification.kind == speculator::DomainSpec::Kind::Exhaustive ? "exhaustive" : "sampled"},
            {"samples", c.verification.samples},
            {"seed", c.verification.seed}}},
          {"max_refine_rounds", c.max_refine_rounds},
          {"sweep_capacities", c.sweep_capacities},
          {"master_seed", c.master_seed},
          {"max_cycles", c.max_cycles}};
}

PipelineConfig config_from_json(const json& j) {
  try {
    PipelineConfig c;
    if (j.contains("capacity")) {
      const auto& cap = j.at("capacity");
      c.capacity = {cap.value("pc", c.capacity[0]), cap.value("gpr", c.capacity[1]), cap.value("mem", c.capacity[2])};
    }
    if (j.contains("schedule")) c.schedule = selector::schedule_from_json(j.at("schedule"));
    c.epsilon = j.value("epsilon", c.epsilon);
    c.max_nodes = j.value("max_nodes", c.max_nodes);
    c.issue_widths = j.value("issue_widths", c.issue_widths);
    c.sweep_p = j.value("sweep_p", c.sweep_p);
    c.mem_ports = j.value("mem_ports", c.mem_ports);
    c.l_p = j.value("l_p", c.l_p);
    if (j.contains("verification")) {
      const auto& v = j.at("verification");
      const std::string mode = v.value("mode", std::string("exhaustive"));
      if (mode != "exhaustive" && mode != "sampled") {
        throw Error(ErrorCode::MalformedArtifact, "verification mode must be exhaustive or sampled");
      }
      c.verification.kind =
          mode == "exhaustive" ? speculator::DomainSpec::Kind::Exhaustive : speculator::DomainSpec::Kind::Sampled;
      c.verification.samples = v.value("samples", c.verification.samples);
      c.verification.seed = v.value("seed", c.verification.seed);
    }
    c.max_refine_rounds = j.value("max_refine_rounds", c.max_refine_rounds);
    c.sweep_capacities = j.value("sweep_capacities", c.sweep_capacities);
    c.master_seed = j.value("master_seed", c.master_seed);
    c.max_cycles = j.value("max_cycles", c.max_cycles);
    c.workers = j.value("workers", c.workers);
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedArtifact, e.what());
  }
}

std::vector<SuiteProgram> default_suite(std::uint64_t seed) {
  using workload::Kind;
  struct Item {
    const char* name;
    workload::Spec spec;
  };
  const auto s = [&](std::uint64_t k) { return derive_seed(seed, k); };
  const std::vector<Item> items = {
      {"random_free", {Kind::RANDOM, s(1), 64, 1, 0.0, true}},
      {"random_mixed", {Kind::RANDOM, s(2), 160, 1, 0.5, false}},
      {"random_dense", {Kind::RANDOM, s(3), 240, 1, 0.9, false}},
      {"arith_chain_short", {Kind::ARITH_CHAIN, s(4), 64, 1}},
      {"arith_chain_loop", {Kind::ARITH_CHAIN, s(5), 48, 300}},
      {"memcopy", {Kind::MEMCOPY, s(6), 32, 100}},
      {"fib10", {Kind::FIB, s(7), 10, 1}},
      {"fib_loop", {Kind::FIB, s(8), 24, 200}},
      {"bubble_sort", {Kind::BUBBLE_SORT, s(9), 32, 3}},
      {"branch_heavy", {Kind::BRANCH_HEAVY, s(10), 3000, 1}},
  };
  std::vector<SuiteProgram> out;
  for (const auto& it : items) out.push_back({it.name, it.spec.kind, workload::gen_program(it.spec)});
  return out;
}

std::vector<oracle::TraceSet> collect_traces(const std::vector<SuiteProgram>& suite) {
  std::vector<oracle::TraceSet> out;
  for (const auto& p : suite) {
    auto run = isa::run_single(p.program, workload::kStepBound);
    if (run.step_limit_exceeded) throw Error(ErrorCode::CycleLimitExceeded, p.name + " did not halt");
    out.push_back({p.program, std::move(run.trace)});
  }
  return out;
}

sim::PredictorBundle TrainedBundle::predictors() const {
  sim::PredictorBundle b;
  for (Target t : selector::kTargets) b[t] = targets[idx(t)].speculator;
  return b;
}

speculator::Speculator train_target(const std::vector<oracle::TraceSet>& traces, Target t,
                                    const selector::SelectedStateSet& set, const PipelineConfig& cfg) {
  oracle::OracleTable table = oracle::build_examples(traces, t);
  speculator::Speculator s = table.empty() ? speculator::abstain_everywhere(t, set)
                                           : speculator::train_speculator(table, set, cfg.train_config());
  return speculator::verify_and_refine(std::move(s), table, oracle::SemanticOracle::get(t), cfg.verification,
                                       cfg.train_config(), cfg.max_refine_rounds);
}

namespace {

std::vector<selector::DependencyEvent> events_of(const std::vector<oracle::TraceSet>& traces, Target t) {
  std::vector<selector::DependencyEvent> out;
  for (const auto& ts : traces) {
    const auto ev = oracle::learnable(selector::filter_kind(selector::extract_dependencies(ts.trace, ts.program), t));
    out.insert(out.end(), ev.begin(), ev.end());
  }
  return out;
}

}  // namespace

TrainedBundle train_bundle(const std::vector<oracle::TraceSet>& traces, const PipelineConfig& cfg) {
  TrainedBundle b;
  parallel_for(3, cfg.workers, [&](std::size_t i) {
    const Target t = selector::kTargets[i];
    auto& art = b.targets[i];
    art.selector.target = t;
    art.selector.schedule = cfg.schedule;
    art.selector.schedule.seed = derive_seed(cfg.master_seed, i);
    art.selector.seed = art.selector.schedule.seed;
    const auto events = events_of(traces, t);
    if (events.empty()) {
      art.warning = std::string("no ") + selector::target_name(t) + " dependencies; predictor abstains everywhere";
      art.selector.set = {0, cfg.capacity[i]};
      art.selector.energy = 1.0;
    } else {
      art.anneal = selector::anneal(events, cfg.capacity[i], art.selector.schedule);
      art.selector.set = art.anneal.best;
      art.selector.energy = art.anneal.best_energy;
    }
    art.speculator = train_target(traces, t, art.selector.set, cfg);
  });
  return b;
}

json bundle_to_json(const TrainedBundle& b) {
  json targets = json::object();
  for (Target t : selector::kTargets) {
    const auto& a = b.targets[idx(t)];
    json entry = {{"selector", selector::to_json(a.selector)}, {"speculator", speculator::to_json(a.speculator)}};
    if (!a.warning.empty()) entry["warning"] = a.warning;
    targets[selector::target_name(t)] = entry;
  }
  return {{"format", "sbsd-bundle"}, {"version", 1}, {"targets", targets}};
}

TrainedBundle bundle_from_json(const json& j) {
  try {
    if (j.at("format") != "sbsd-bundle") throw Error(ErrorCode::MalformedArtifact, "not a bundle artifact");
    TrainedBundle b;
    for (Target t : selector::kTargets) {
      const auto& e = j.at("targets").at(selector::target_name(t));
      auto& a = b.targets[idx(t)];
      a.selector = selector::selector_from_json(e.at("selector"));
      a.speculator = speculator::speculator_from_json(e.at("speculator"));
      a.warning = e.value("warning", std::string());
      if (a.selector.target != t || a.speculator.target != t) {
        throw Error(ErrorCode::MalformedArtifact, std::string("target mismatch under ") + selector::target_name(t));
      }
    }
    return b;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedArtifact, e.what());
  }
}

report::Row evaluate_program(const SuiteProgram& prog, const sim::PredictorBundle& bundle, const PipelineConfig& cfg,
                             unsigned p, const std::string& config_name, unsigned capacity) {
  report::Row row;
  row.program = prog.name;
  row.kind = workload::kind_name(prog.kind);
  row.config = config_name;
  row.p = p;
  row.capacity = capacity;
  try {
    const isa::SingleRun ref = isa::run_single(prog.program, workload::kStepBound);
    row.single_cycles = ref.latency_sum;
    row.cpi_single = ref.cpi();
    const sim::SimResult r = sim::run_superscalar(prog.program, bundle, cfg.sim_config(p), cfg.max_cycles);
    row.instructions = r.instructions;
    row.cycles = r.cycles;
    row.cpi = r.cpi();
    row.speedup = r.cycles == 0 ? 0.0 : static_cast<double>(ref.latency_sum) / static_cast<double>(r.cycles);
    row.run_coverage = r.coverage();
    row.metrics = r.metrics;
    for (std::size_t s = 0; s < 4; ++s) row.stalls[s] = r.stalls[s + 1];
    const auto eq = sim::compare_reference(ref, r);
    if (!eq.ok()) {
      row.equivalence.clear();
      for (const auto& d : eq.diffs) row.equivalence += (row.equivalence.empty() ? "" : "; ") + d;
    }
  } catch (const Error& e) {
    row.equivalence = std::string("error: ") + e.what();
  }
  return row;
}

report::Report evaluate_suite(const TrainedBundle& bundle, const std::vector<oracle::TraceSet>& traces,
                              const std::vector<SuiteProgram>& suite, const PipelineConfig& cfg) {
  report::Report rep;
  rep.config = to_json(cfg);
  for (Target t : selector::kTargets) rep.anneal_best[idx(t)] = bundle.targets[idx(t)].anneal.best_history;

  // Predictor variants: full, each target removed, everything removed.
  std::vector<std::pair<std::string, sim::PredictorBundle>> variants;
  variants.emplace_back("full", bundle.predictors());
  for (Target t : selector::kTargets) {
    auto b = bundle.predictors();
    b[t] = speculator::abstain_everywhere(t, b[t].members);
    variants.emplace_back(std::string("no_") + selector::target_name(t), std::move(b));
  }
  variants.emplace_back("abstain", sim::PredictorBundle::abstain_everywhere());

  // Capacity sweep: anneal at the smallest capacity, then grow nested sets.
  std::vector<unsigned> caps = cfg.sweep_capacities;
  std::vector<std::array<selector::SelectedStateSet, 3>> sweep_sets(caps.size());
  std::array<std::vector<selector::DependencyEvent>, 3> events;
  for (Target t : selector::kTargets) events[idx(t)] = events_of(traces, t);
  if (!caps.empty()) {
    for (Target t : selector::kTargets) {
      const auto& ev = events[idx(t)];
      selector::SelectedStateSet base{0, caps.front()};
      if (!ev.empty()) {
        auto sched = cfg.schedule;
        sched.seed = derive_seed(cfg.master_seed, 100 + idx(t));
        base = selector::anneal(ev, caps.front(), sched).best;
      }
      const auto nested = selector::nested_sets(ev, base, caps);
      for (std::size_t c = 0; c < caps.size(); ++c) sweep_sets[c][idx(t)] = nested[c];
    }
  }
  std::vector<sim::PredictorBundle> sweep_bundles(caps.size());
  parallel_for(caps.size() * 3, cfg.workers, [&](std::size_t k) {
    const std::size_t c = k / 3;
    const Target t = selector::kTargets[k % 3];
    sweep_bundles[c][t] = train_target(traces, t, sweep_sets[c][idx(t)], cfg);
  });

  struct Job {
    std::size_t program;
    const sim::PredictorBundle* bundle;
    std::string name;
    unsigned p;
    unsigned capacity;
  };
  std::vector<Job> jobs;
  for (unsigned p : cfg.issue_widths) {
    for (const auto& [name, b] : variants) {
      for (std::size_t i = 0; i < suite.size(); ++i) jobs.push_back({i, &b, name, p, 0});
    }
  }
  for (std::size_t c = 0; c < caps.size(); ++c) {
    for (std::size_t i = 0; i < suite.size(); ++i) {
      jobs.push_back({i, &sweep_bundles[c], "cap" + std::to_string(caps[c]), cfg.sweep_p, caps[c]});
    }
  }
  rep.rows.resize(jobs.size());
  parallel_for(jobs.size(), cfg.workers, [&](std::size_t k) {
    const Job& j = jobs[k];
    rep.rows[k] = evaluate_program(suite[j.program], *j.bundle, cfg, j.p, j.name, j.capacity);
  });

  for (std::size_t c = 0; c < caps.size(); ++c) {
    report::SweepPoint pt;
    pt.capacity = caps[c];
    for (Target t : selector::kTargets) {
      const auto& ev = events[idx(t)];
      pt.reusability[idx(t)] = ev.empty() ? 0.0 : selector::reusability(sweep_sets[c][idx(t)], ev).to_double();
    }
    for (const auto& row : rep.rows) {
      if (row.config != "cap" + std::to_string(caps[c])) continue;
      for (std::size_t t = 0; t < 3; ++t) pt.metrics[t] += row.metrics[t];
      pt.cycles += row.cycles;
      pt.instructions += row.instructions;
    }
    rep.sweep.push_back(pt);
  }
  return rep;
}

}  // namespace sbsd::pipeline

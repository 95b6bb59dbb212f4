// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails. Tolerances are the constants below.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "sbsd/bsd.hpp"
#include "sbsd/pipeline.hpp"
#include "sbsd/rng.hpp"

using namespace sbsd;
using selector::Target;

namespace {

// Criterion 1.
constexpr unsigned kMonoOracles = 200;
constexpr unsigned kMonoSequences = 50;
constexpr double kMonoSeconds = 60.0;
// Criterion 2.
constexpr unsigned kMaxCompleteWidth = 8;
constexpr unsigned kRandomFunctionsPerWidth = 300;
// Criterion 3.
constexpr double kSoundSeconds = 600.0;
// Criterion 4.
constexpr std::uint64_t kMinRetired = 100'000;
constexpr unsigned kEquivalenceWidths[] = {1, 2, 4};
// Criterion 5: additive slack on the coverage bound, as a share of CPI_single.
constexpr double kBoundSlack = 0.05;
constexpr double kFloatEps = 1e-12;
// Criterion 6.
constexpr double kMinChainCoverage = 0.5;
constexpr unsigned kFreePrograms = 8;
// Criterion 7.
constexpr unsigned kRandomSets = 10;

constexpr std::uint64_t kMasterSeed = 1;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

bool g_all_pass = true;

void report_line(int n, const char* name, const Outcome& o) {
  std::printf("criterion %d (%s): %s  %s\n", n, name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
  std::fflush(stdout);
  g_all_pass = g_all_pass && o.pass;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// Accuracy by direct evaluation of every row.
Fraction brute_accuracy(const bsd::Bsd& b, const bsd::ExampleSet& ex) {
  std::uint64_t hit = 0;
  for (const auto& r : ex.rows()) hit += b.evaluate({r.input, ex.width()}).first == (r.output != 0);
  return {hit, ex.size()};
}

// Random example sets: even oracles are exhaustive functions, odd ones are
// samples with repeats and conflicting labels.
bsd::ExampleSet random_oracle(unsigned width, bool exhaustive, Rng& rng) {
  const std::uint32_t domain = 1u << width;
  if (exhaustive) {
    std::vector<bool> f(domain);
    for (std::uint32_t x = 0; x < domain; ++x) f[x] = rng() & 1u;
    return bsd::ExampleSet::exhaustive(width, [&](std::uint32_t x) { return f[x]; });
  }
  bsd::ExampleSet ex(width);
  const auto rows = 1 + uniform_index(rng, 2 * domain);
  for (std::uint64_t i = 0; i < rows; ++i) {
    ex.add(static_cast<std::uint32_t>(uniform_index(rng, domain)), rng() & 1u);
  }
  return ex;
}

Outcome criterion_monotonicity() {
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(derive_seed(kMasterSeed, 1001));
  std::uint64_t expansions = 0;
  for (unsigned i = 0; i < kMonoOracles && o.pass; ++i) {
    const unsigned width = 3 + i % 6;
    const auto ex = random_oracle(width, i % 2 == 0, rng);
    for (unsigned s = 0; s < kMonoSequences && o.pass; ++s) {
      bsd::Bsd b = bsd::Bsd::new_root(ex);
      Fraction prev = brute_accuracy(b, ex);
      // Legal (leaf, var) pairs, kept in step with the tree: expanding a leaf
      // turns it into a decision with two fresh leaves below.
      std::vector<std::uint64_t> used{0};
      std::vector<std::pair<bsd::NodeRef, unsigned>> legal;
      for (unsigned v = 0; v < width; ++v) legal.emplace_back(0, v);
      while (!legal.empty()) {
        const auto [n, v] = legal[uniform_index(rng, legal.size())];
        b.expand(n, v, ex);
        ++expansions;
        std::erase_if(legal, [n = n](const auto& e) { return e.first == n; });
        used.resize(b.nodes().size(), 0);
        const auto& d = b.decision(n);
        for (bsd::NodeRef c : {d.lo, d.hi}) {
          used[c] = used[n] | (std::uint64_t{1} << v);
          for (unsigned u = 0; u < width; ++u) {
            if (!((used[c] >> u) & 1u)) legal.emplace_back(c, u);
          }
        }
        const Fraction acc = brute_accuracy(b, ex);
        if (acc < prev || acc != bsd::accuracy(b, ex)) {
          o.fail("oracle " + std::to_string(i) + " sequence " + std::to_string(s) + ": accuracy fell");
          break;
        }
        prev = acc;
      }
    }
  }
  const double secs = seconds_since(t0);
  if (secs >= kMonoSeconds) o.fail("took " + fmt(secs) + " s");
  if (o.pass) {
    o.detail = std::to_string(kMonoOracles) + " oracles x " + std::to_string(kMonoSequences) + " sequences, " +
               std::to_string(expansions) + " expansions, " + fmt(secs) + " s";
  }
  return o;
}

// Expands every impure leaf on a random unused variable until none is left.
bsd::Bsd random_full_expansion(const bsd::ExampleSet& ex, Rng& rng) {
  bsd::Bsd b = bsd::Bsd::new_root(ex);
  for (bool changed = true; changed;) {
    changed = false;
    for (bsd::NodeRef n = 0; n < b.nodes().size(); ++n) {
      if (!b.is_leaf(n) || b.leaf(n).pure()) continue;
      std::vector<unsigned> vars;
      for (unsigned v = 0; v < b.input_width(); ++v) {
        if (!((b.vars_above(n) >> v) & 1u)) vars.push_back(v);
      }
      if (vars.empty()) continue;
      b.expand(n, vars[uniform_index(rng, vars.size())], ex);
      changed = true;
    }
  }
  return b;
}

Outcome criterion_completeness() {
  Outcome o;
  Rng rng(derive_seed(kMasterSeed, 1002));
  std::uint64_t functions = 0;
  const auto check = [&](const bsd::ExampleSet& ex, const std::string& what) {
    ++functions;
    const auto g = bsd::grow(ex, {1, 1}, std::size_t{1} << 20);
    if (!g.reached_target || brute_accuracy(g.bsd, ex) != Fraction{1, 1}) o.fail("greedy expansion short on " + what);
    if (brute_accuracy(random_full_expansion(ex, rng), ex) != Fraction{1, 1}) o.fail("random expansion short on " + what);
  };
  for (unsigned w = 1; w <= kMaxCompleteWidth; ++w) {
    const std::uint32_t domain = 1u << w;
    if (w <= 3) {
      for (std::uint32_t table = 0; table < (1u << domain); ++table) {
        check(bsd::ExampleSet::exhaustive(w, [&](std::uint32_t x) { return (table >> x) & 1u; }),
              "width " + std::to_string(w) + " table " + std::to_string(table));
      }
      continue;
    }
    check(bsd::ExampleSet::exhaustive(w, [](std::uint32_t x) { return (std::popcount(x) & 1) != 0; }),
          "parity " + std::to_string(w));
    for (unsigned k = 0; k < kRandomFunctionsPerWidth; ++k) {
      check(random_oracle(w, true, rng), "random width " + std::to_string(w));
    }
  }
  if (o.pass) o.detail = std::to_string(functions) + " exhaustive functions, widths 1-8";
  return o;
}

struct PipelineRun {
  pipeline::PipelineConfig cfg;
  std::vector<pipeline::SuiteProgram> suite;
  std::vector<oracle::TraceSet> traces;
  pipeline::TrainedBundle bundle;
  report::Report report;
  double train_seconds = 0;
  std::string bundle_json, report_json, report_csv;
};

PipelineRun full_run(unsigned workers) {
  PipelineRun r;
  r.cfg.master_seed = kMasterSeed;
  r.cfg.workers = workers;
  r.suite = pipeline::default_suite(kMasterSeed);
  r.traces = pipeline::collect_traces(r.suite);
  const auto t0 = Clock::now();
  r.bundle = pipeline::train_bundle(r.traces, r.cfg);
  r.train_seconds = seconds_since(t0);
  r.report = pipeline::evaluate_suite(r.bundle, r.traces, r.suite, r.cfg);
  r.bundle_json = pipeline::bundle_to_json(r.bundle).dump(2);
  r.report_json = report::to_json(r.report).dump(2);
  std::ostringstream csv;
  report::write_csv(csv, r.report);
  r.report_csv = csv.str();
  return r;
}

std::size_t ti(Target t) { return static_cast<std::size_t>(t); }

bool is_sweep_row(const report::Row& row) { return row.config.rfind("cap", 0) == 0; }

std::string row_id(const report::Row& row) {
  return row.program + "/" + row.config + "/p" + std::to_string(row.p);
}

Outcome criterion_soundness(const PipelineRun& run) {
  Outcome o;
  const auto t0 = Clock::now();
  std::uint64_t predicted = 0;
  for (Target t : selector::kTargets) {
    const auto& s = run.bundle.targets[ti(t)].speculator;
    const auto& truth = oracle::SemanticOracle::get(t);
    const auto slots = s.slots();
    for (std::uint32_t x = 0; x < oracle::kDomainSize; ++x) {
      const auto d = speculator::decide(s, static_cast<std::uint16_t>(x));
      if (!d) continue;
      ++predicted;
      const auto f = truth.lookup(static_cast<std::uint16_t>(x));
      bool ok = f.has_value();
      if (ok && s.mode == speculator::Mode::Direct) {
        ok = s.members.contains(selector::kPc) && f->offset && *f->offset == *d;
      } else if (ok) {
        ok = ((f->mask >> slots[*d]) & 1u) != 0;
      }
      if (!ok) o.fail(std::string(selector::target_name(t)) + " unsound on input " + std::to_string(x));
    }
  }
  for (const auto& row : run.report.rows) {
    for (Target t : selector::kTargets) {
      const auto& m = row.metrics[ti(t)];
      if (m.fp != 0 || m.precision() != 1.0) o.fail(row_id(row) + " " + selector::target_name(t) + " has fp");
    }
  }
  const double secs = run.train_seconds + seconds_since(t0);
  if (secs >= kSoundSeconds) o.fail("train + verify took " + fmt(secs) + " s");
  if (o.pass) {
    o.detail = "3 x 2^16 inputs, " + std::to_string(predicted) + " predicting, fp = 0 in " +
               std::to_string(run.report.rows.size()) + " runs, " + fmt(secs) + " s";
  }
  return o;
}

Outcome criterion_equivalence(const PipelineRun& run) {
  Outcome o;
  std::map<unsigned, std::uint64_t> retired;
  std::map<unsigned, std::set<std::string>> kinds;
  for (const auto& row : run.report.rows) {
    if (row.equivalence != "ok") o.fail(row_id(row) + ": " + row.equivalence);
    if (row.config != "full") continue;
    retired[row.p] += row.instructions;
    kinds[row.p].insert(row.kind);
  }
  for (unsigned p : kEquivalenceWidths) {
    if (retired[p] < kMinRetired) o.fail("p=" + std::to_string(p) + " retired only " + std::to_string(retired[p]));
    if (kinds[p].size() != std::size(workload::kAllKinds)) o.fail("p=" + std::to_string(p) + " misses a kind");
  }
  if (o.pass) {
    o.detail = std::to_string(run.report.rows.size()) + " runs identical to reference, " +
               std::to_string(retired[1]) + " instructions per width, 6 kinds";
  }
  return o;
}

Outcome criterion_cpi_bounds(const PipelineRun& run) {
  Outcome o;
  double worst = -1e9;  // largest cpi - bound seen
  for (const auto& row : run.report.rows) {
    if (row.cycles > row.single_cycles || row.cycles * row.p < row.single_cycles) {
      o.fail(row_id(row) + " outside [single/p, single]");
    }
    const double c = row.run_coverage;
    const double bound = run.cfg.l_p * c + row.cpi_single * (1.0 - c) + kBoundSlack * row.cpi_single;
    worst = std::max(worst, row.cpi - bound);
    if (row.cpi > bound + kFloatEps) o.fail(row_id(row) + " cpi " + fmt(row.cpi) + " > bound " + fmt(bound));
  }
  if (o.pass) o.detail = std::to_string(run.report.rows.size()) + " runs, max(cpi - bound) = " + fmt(worst);
  return o;
}

Outcome criterion_payoff(const PipelineRun& run) {
  Outcome o;
  unsigned chains = 0;
  for (const auto& row : run.report.rows) {
    if (row.kind != "arith_chain" || row.config != "full" || row.p != 2) continue;
    ++chains;
    const double cov = row.metrics[ti(Target::GPR)].coverage();
    if (!(row.speedup > 1.0)) o.fail(row.program + " speedup " + fmt(row.speedup));
    if (!(cov > kMinChainCoverage)) o.fail(row.program + " gpr coverage " + fmt(cov));
    o.detail += row.program + " speedup " + fmt(row.speedup) + " gpr cov " + fmt(cov) + "; ";
  }
  if (chains == 0) o.fail("no arith_chain program");

  // Dependency-free ALU programs: exact division of the single-issue CPI.
  unsigned free_programs = 0;
  const auto predictors = run.bundle.predictors();
  const auto abstain = sim::PredictorBundle::abstain_everywhere();
  for (std::uint64_t seed = 0; free_programs < kFreePrograms && seed < 64; ++seed) {
    workload::Spec spec{workload::Kind::RANDOM, derive_seed(kMasterSeed, 2000 + seed), 64, 1, 0.0, true};
    const auto prog = workload::gen_program(spec);
    const auto single = isa::run_single(prog, workload::kStepBound);
    if (!selector::extract_dependencies(single.trace, prog).empty()) continue;
    ++free_programs;
    for (unsigned p : {1u, 2u, 4u}) {
      for (const auto* b : {&predictors, &abstain}) {
        const auto r = sim::run_superscalar(prog, *b, run.cfg.sim_config(p), run.cfg.max_cycles);
        if (r.cycles * p != single.latency_sum || r.instructions != single.retired) {
          o.fail("free program seed " + std::to_string(seed) + " p=" + std::to_string(p) + ": " +
                 std::to_string(r.cycles) + " cycles vs " + std::to_string(single.latency_sum));
        }
      }
    }
  }
  if (free_programs < kFreePrograms) o.fail("only " + std::to_string(free_programs) + " dependency-free programs");
  if (o.pass) o.detail += std::to_string(free_programs) + " dependency-free programs at cpi_single/p";
  return o;
}

Outcome criterion_selector(const PipelineRun& run) {
  Outcome o;
  auto sweep = run.report.sweep;
  std::sort(sweep.begin(), sweep.end(), [](const auto& a, const auto& b) { return a.capacity < b.capacity; });
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    if (sweep[i].coverage() < sweep[i - 1].coverage()) o.fail("coverage drops at capacity " + std::to_string(sweep[i].capacity));
    if (sweep[i].cpi() > sweep[i - 1].cpi()) o.fail("cpi rises at capacity " + std::to_string(sweep[i].capacity));
  }
  if (sweep.size() != run.cfg.sweep_capacities.size()) o.fail("sweep incomplete");
  for (Target t : selector::kTargets) {
    const auto& h = run.report.anneal_best[ti(t)];
    for (std::size_t i = 1; i < h.size(); ++i) {
      if (h[i] > h[i - 1]) o.fail(std::string(selector::target_name(t)) + " best energy rises");
    }
  }
  unsigned compared = 0;
  for (std::size_t i = 0; i < run.traces.size(); ++i) {
    const auto all = selector::extract_dependencies(run.traces[i].trace, run.traces[i].program);
    for (Target t : selector::kTargets) {
      const auto ev = oracle::learnable(selector::filter_kind(all, t));
      if (ev.empty()) continue;
      const auto& set = run.bundle.targets[ti(t)].selector.set;
      Rng rng(derive_seed(kMasterSeed, 3000 + i * 3 + ti(t)));
      double mean = 0;
      for (unsigned k = 0; k < kRandomSets; ++k) {
        mean += selector::reusability(selector::random_set(set.capacity, rng), ev).to_double();
      }
      mean /= kRandomSets;
      const double mine = selector::reusability(set, ev).to_double();
      ++compared;
      if (mine < mean) {
        o.fail(run.suite[i].name + " " + selector::target_name(t) + " reusability " + fmt(mine) + " < random " +
               fmt(mean));
      }
    }
  }
  if (o.pass) {
    std::string cov;
    for (const auto& sp : sweep) cov += fmt(sp.coverage()) + " ";
    o.detail = "sweep coverage " + cov + "; " + std::to_string(compared) + " program/target pairs beat random sets";
  }
  return o;
}

Outcome criterion_ablation(const PipelineRun& run) {
  Outcome o;
  std::map<std::string, std::uint64_t> cycles;  // program/config/p
  for (const auto& row : run.report.rows) {
    if (!is_sweep_row(row)) cycles[row_id(row)] = row.cycles;
  }
  for (Target t : selector::kTargets) {
    const std::string ablated = std::string("no_") + selector::target_name(t);
    std::string witness;
    for (const auto& prog : run.suite) {
      for (unsigned p : run.cfg.issue_widths) {
        const std::string suffix = "/p" + std::to_string(p);
        const auto full = cycles.at(prog.name + "/full" + suffix);
        const auto without = cycles.at(prog.name + "/" + ablated + suffix);
        if (without < full) o.fail(prog.name + " " + ablated + suffix + " is faster than full");
        if (without > full && witness.empty()) witness = prog.name + suffix;
      }
    }
    if (witness.empty()) o.fail(ablated + " never slower than full");
    o.detail += ablated + " slower on " + witness + "; ";
  }
  return o;
}

Outcome criterion_determinism(const PipelineRun& a, const PipelineRun& b) {
  Outcome o;
  if (a.bundle_json != b.bundle_json) o.fail("bundle JSON differs");
  if (a.report_json != b.report_json) o.fail("report JSON differs");
  if (a.report_csv != b.report_csv) o.fail("report CSV differs");
  if (o.pass) {
    o.detail = "bundle " + std::to_string(a.bundle_json.size()) + " B, report " +
               std::to_string(a.report_json.size()) + " B JSON / " + std::to_string(a.report_csv.size()) +
               " B CSV identical (workers " + std::to_string(a.cfg.workers) + " vs " +
               std::to_string(b.cfg.workers) + ")";
  }
  return o;
}

}  // namespace

int main() {
  report_line(1, "bsd monotonicity", criterion_monotonicity());
  report_line(2, "bsd completeness", criterion_completeness());

  const PipelineRun run = full_run(4);
  report_line(3, "speculator soundness", criterion_soundness(run));
  report_line(4, "architectural equivalence", criterion_equivalence(run));
  report_line(5, "cpi bounds", criterion_cpi_bounds(run));
  report_line(6, "parallelism payoff", criterion_payoff(run));
  report_line(7, "selector trends", criterion_selector(run));
  report_line(8, "ablation dominance", criterion_ablation(run));

  const PipelineRun again = full_run(1);
  report_line(9, "determinism", criterion_determinism(run, again));

  std::printf("%s\n", g_all_pass ? "ALL PASS" : "SOME CRITERIA FAILED");
  return g_all_pass ? 0 : 1;
}

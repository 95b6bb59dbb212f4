// sbsd: command-line front end for workload generation, training,
// verification and simulation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sbsd/error.hpp"
#include "sbsd/pipeline.hpp"
#include "sbsd/trace_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sbsd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitVerify = 2;
constexpr int kExitEquivalence = 3;

json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoFailure, "cannot read " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedArtifact, path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  os << text;
}

pipeline::PipelineConfig load_config(const std::string& path) {
  return path.empty() ? pipeline::PipelineConfig{} : pipeline::config_from_json(read_json(path));
}

// Programs (*.mrv) of a directory in name order, with their traces: the
// sibling .jsonl when present, otherwise a fresh reference run.
std::vector<pipeline::SuiteProgram> load_suite(const std::string& dir, std::vector<oracle::TraceSet>* traces) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".mrv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<pipeline::SuiteProgram> suite;
  for (const auto& f : files) {
    pipeline::SuiteProgram p;
    p.name = f.stem().string();
    p.program = isa::load_program(f.string());
    for (auto k : workload::kAllKinds) {
      if (p.name.rfind(workload::kind_name(k), 0) == 0) p.kind = k;
    }
    if (traces) {
      fs::path t = f;
      t.replace_extension(".jsonl");
      if (fs::exists(t)) {
        traces->push_back({p.program, isa::load_trace(t.string())});
      } else {
        traces->push_back({p.program, isa::run_single(p.program, workload::kStepBound).trace});
      }
    }
    suite.push_back(std::move(p));
  }
  if (suite.empty()) throw Error(ErrorCode::IoFailure, "no .mrv programs in " + dir);
  return suite;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"State-buffer speculation toolkit for the MiniRV-16 toy processor"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a workload program");
  std::string kind_name = "random", out_path;
  workload::Spec spec;
  gen->add_option("--kind", kind_name, "random|arith_chain|memcopy|fib|bubble_sort|branch_heavy")->required();
  gen->add_option("--len", spec.length, "Size parameter of the workload")->required();
  gen->add_option("--seed", spec.seed, "Generator seed");
  gen->add_option("--reps", spec.reps, "Outer repetitions");
  gen->add_option("--density", spec.dep_density, "RANDOM dependency density");
  gen->add_flag("--alu-only", spec.alu_only, "RANDOM: ALU operations only");
  gen->add_option("-o,--out", out_path, "Output .mrv file")->required();

  // gen-suite
  auto* gen_suite = app.add_subcommand("gen-suite", "Write the default evaluation suite");
  std::string suite_out;
  std::uint64_t suite_seed = 1;
  gen_suite->add_option("--out", suite_out, "Output directory")->required();
  gen_suite->add_option("--seed", suite_seed, "Suite seed");

  // run
  auto* run = app.add_subcommand("run", "Run a program on the single-cycle reference");
  std::string program_path, mode = "single", trace_path;
  std::size_t max_steps = workload::kStepBound;
  run->add_option("--program", program_path)->required();
  run->add_option("--mode", mode)->check(CLI::IsMember({"single"}));
  run->add_option("--trace", trace_path, "Write the JSONL trace here");
  run->add_option("--max-steps", max_steps);

  // train
  auto* train = app.add_subcommand("train", "Train and verify a predictor bundle");
  std::string traces_dir, config_path, bundle_out;
  train->add_option("--traces", traces_dir, "Directory of .mrv programs (+ optional .jsonl traces)")->required();
  train->add_option("--config", config_path, "Pipeline configuration JSON");
  train->add_option("-o,--out", bundle_out)->required();

  // verify
  auto* verify = app.add_subcommand("verify", "Re-verify every speculator of a bundle");
  std::string bundle_path;
  bool exhaustive = false;
  std::uint64_t samples = 0, verify_seed = 1;
  verify->add_option("--bundle", bundle_path)->required();
  auto* ex_flag = verify->add_flag("--exhaustive", exhaustive);
  verify->add_option("--samples", samples)->excludes(ex_flag);
  verify->add_option("--seed", verify_seed);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run a program on the superscalar model");
  unsigned p = 2, mem_ports = 2;
  std::string report_path;
  simulate->add_option("--program", program_path)->required();
  simulate->add_option("--bundle", bundle_path, "Bundle JSON (omit for abstain-everywhere)");
  simulate->add_option("-p", p)->check(CLI::Range(1u, 64u));
  simulate->add_option("--mem-ports", mem_ports);
  simulate->add_option("--report", report_path);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Train on a suite and write the evaluation report");
  std::string suite_dir, csv_path, json_path, capacities;
  sweep->add_option("--suite", suite_dir)->required();
  sweep->add_option("--capacities", capacities, "Comma-separated buffer capacities");
  sweep->add_option("--config", config_path);
  sweep->add_option("--csv", csv_path);
  sweep->add_option("--json", json_path);
  sweep->add_option("--bundle-out", bundle_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) {
      const auto k = workload::kind_from_name(kind_name);
      if (!k) {
        std::cerr << "unknown kind '" << kind_name << "'\n";
        return kExitUsage;
      }
      spec.kind = *k;
      write_text(out_path, workload::gen_source(spec));
      return kExitOk;
    }
    if (*gen_suite) {
      fs::create_directories(suite_out);
      for (const auto& prog : pipeline::default_suite(suite_seed)) {
        isa::save_program((fs::path(suite_out) / (prog.name + ".mrv")).string(), prog.program);
      }
      return kExitOk;
    }
    if (*run) {
      const auto prog = isa::load_program(program_path);
      const auto r = isa::run_single(prog, max_steps);
      if (!trace_path.empty()) isa::save_trace(trace_path, r.trace);
      std::cout << json{{"retired", r.retired},
                        {"latency_sum", r.latency_sum},
                        {"cpi", r.cpi()},
                        {"step_limit_exceeded", r.step_limit_exceeded},
                        {"regs", r.final_state.regs}}
                       .dump()
                << '\n';
      return kExitOk;
    }
    if (*train) {
      const auto cfg = load_config(config_path);
      std::vector<oracle::TraceSet> traces;
      load_suite(traces_dir, &traces);
      const auto b = pipeline::train_bundle(traces, cfg);
      for (const auto& t : b.targets) {
        if (!t.warning.empty()) std::cerr << "warning: " << t.warning << '\n';
      }
      write_text(bundle_out, pipeline::bundle_to_json(b).dump(1) + "\n");
      for (const auto& t : b.targets) {
        if (t.speculator.verification.status != "verified") return kExitVerify;
      }
      return kExitOk;
    }
    if (*verify) {
      const auto b = pipeline::bundle_from_json(read_json(bundle_path));
      speculator::DomainSpec dom;
      if (samples > 0) {
        dom.kind = speculator::DomainSpec::Kind::Sampled;
        dom.samples = samples;
        dom.seed = verify_seed;
      }
      bool ok = true;
      for (const auto& t : b.targets) {
        const auto r =
            speculator::verify_speculator(t.speculator, oracle::SemanticOracle::get(t.speculator.target), dom);
        std::cout << selector::target_name(t.speculator.target) << ": "
                  << (r.verified ? "verified" : "FAILED") << " (" << r.checked << " inputs, "
                  << r.counterexamples.size() << " counterexamples)\n";
        ok = ok && r.verified;
      }
      return ok ? kExitOk : kExitVerify;
    }
    if (*simulate) {
      const auto prog = isa::load_program(program_path);
      const auto bundle = bundle_path.empty() ? sim::PredictorBundle::abstain_everywhere()
                                              : pipeline::bundle_from_json(read_json(bundle_path)).predictors();
      const sim::SuperscalarConfig cfg{p, mem_ports, 1};
      const auto r = sim::run_superscalar(prog, bundle, cfg, 100'000'000);
      const auto eq = sim::compare_reference(prog, r);
      const auto rep = sim::sim_report(fs::path(program_path).stem().string(), cfg, r, eq);
      if (!report_path.empty()) write_text(report_path, rep.dump(1) + "\n");
      std::cout << rep.dump() << '\n';
      return eq.ok() ? kExitOk : kExitEquivalence;
    }
    if (*sweep) {
      auto cfg = load_config(config_path);
      if (!capacities.empty()) {
        cfg.sweep_capacities.clear();
        std::stringstream ss(capacities);
        for (std::string tok; std::getline(ss, tok, ',');) cfg.sweep_capacities.push_back(std::stoul(tok));
      }
      std::vector<oracle::TraceSet> traces;
      const auto suite = load_suite(suite_dir, &traces);
      const auto b = pipeline::train_bundle(traces, cfg);
      if (!bundle_out.empty()) write_text(bundle_out, pipeline::bundle_to_json(b).dump(1) + "\n");
      const auto rep = pipeline::evaluate_suite(b, traces, suite, cfg);
      if (!csv_path.empty()) report::export_csv(csv_path, rep);
      if (!json_path.empty()) report::export_json(json_path, rep);
      if (csv_path.empty() && json_path.empty()) report::write_csv(std::cout, rep);
      for (const auto& row : rep.rows) {
        if (row.equivalence != "ok") return kExitEquivalence;
      }
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (e.code() == ErrorCode::PredictorUnsound) return kExitEquivalence;
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

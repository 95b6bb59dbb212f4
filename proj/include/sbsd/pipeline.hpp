#pragma once

// End-to-end flow: traces -> selected sets -> verified speculators -> bundle,
// then suite evaluation with ablations and a capacity sweep.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbsd/oracle.hpp"
#include "sbsd/report.hpp"
#include "sbsd/selector.hpp"
#include "sbsd/speculator.hpp"
#include "sbsd/superscalar.hpp"
#include "sbsd/workload.hpp"

namespace sbsd::pipeline {

using selector::Target;

struct PipelineConfig {
  std::array<unsigned, 3> capacity{8, 8, 8};  // per target: pc, gpr, mem
  selector::AnnealSchedule schedule;
  double epsilon = 0.0;
  std::size_t max_nodes = std::size_t{1} << 20;
  std::vector<unsigned> issue_widths{1, 2, 4};
  unsigned sweep_p = 2;
  unsigned mem_ports = 2;
  unsigned l_p = 1;
  speculator::DomainSpec verification;
  unsigned max_refine_rounds = 8;
  std::vector<unsigned> sweep_capacities{2, 4, 8, 16, 32};
  std::uint64_t master_seed = 1;
  std::uint64_t max_cycles = 10'000'000;
  unsigned workers = 0;  // 0 = hardware concurrency; never affects results

  speculator::TrainConfig train_config() const;
  sim::SuperscalarConfig sim_config(unsigned p) const;
};

nlohmann::json to_json(const PipelineConfig& c);
PipelineConfig config_from_json(const nlohmann::json& j);

struct SuiteProgram {
  std::string name;
  workload::Kind kind = workload::Kind::RANDOM;
  isa::Program program;
};

// Every workload kind, sized for roughly 10^5 retired instructions in total.
std::vector<SuiteProgram> default_suite(std::uint64_t seed);

std::vector<oracle::TraceSet> collect_traces(const std::vector<SuiteProgram>& suite);

struct TargetArtifacts {
  selector::SelectorArtifact selector;
  selector::AnnealResult anneal;
  speculator::Speculator speculator;
  std::string warning;  // set when the target fell back to abstain-everywhere
};

struct TrainedBundle {
  std::array<TargetArtifacts, 3> targets;

  sim::PredictorBundle predictors() const;
};

// Trains one target's speculator for a given set and verifies it.
speculator::Speculator train_target(const std::vector<oracle::TraceSet>& traces, Target t,
                                    const selector::SelectedStateSet& set, const PipelineConfig& cfg);

TrainedBundle train_bundle(const std::vector<oracle::TraceSet>& traces, const PipelineConfig& cfg);

nlohmann::json bundle_to_json(const TrainedBundle& b);
TrainedBundle bundle_from_json(const nlohmann::json& j);

// Runs one program through both simulators.
report::Row evaluate_program(const SuiteProgram& prog, const sim::PredictorBundle& bundle, const PipelineConfig& cfg,
                             unsigned p, const std::string& config_name, unsigned capacity = 0);

// Full bundle and each single-target ablation at every issue width, plus the
// nested capacity sweep at sweep_p.
report::Report evaluate_suite(const TrainedBundle& bundle, const std::vector<oracle::TraceSet>& traces,
                              const std::vector<SuiteProgram>& suite, const PipelineConfig& cfg);

}  // namespace sbsd::pipeline

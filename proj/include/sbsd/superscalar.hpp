#pragma once

// p-way in-order issue. Each cycle issues the longest prefix of the fetch
// path whose in-group dependencies are all covered by predictions, executes
// it against the cycle-start state plus the predicted values, and commits in
// program order.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbsd/isa.hpp"
#include "sbsd/speculator.hpp"

namespace sbsd::sim {

using isa::Word;
using selector::Target;
using speculator::PredictionMetrics;
using speculator::Speculator;

struct SuperscalarConfig {
  unsigned p = 1;
  unsigned mem_ports = 1;
  unsigned l_p = 1;
};

struct PredictorBundle {
  std::array<Speculator, 3> by_target;  // indexed by Target

  const Speculator& operator[](Target t) const { return by_target[static_cast<std::size_t>(t)]; }
  Speculator& operator[](Target t) { return by_target[static_cast<std::size_t>(t)]; }

  static PredictorBundle abstain_everywhere();
};

enum class StallReason { None, GPR_RAW, MEM_RAW, CONTROL, STRUCTURAL };
const char* stall_name(StallReason r);

struct UsedPrediction {
  Target kind = Target::GPR;
  std::size_t producer = 0;  // index within the group
  std::uint16_t input = 0;   // producer encoding
  Word value = 0;
};

struct IssuePlan {
  std::vector<Word> pcs;  // fetch path, one per issued instruction
  std::vector<UsedPrediction> predictions;
  std::vector<bool> enabled_by_prediction;  // per issued instruction
  StallReason stall = StallReason::None;

  std::size_t m() const { return pcs.size(); }
};

// Live pool values at the start of the cycle (committed state).
using selector::ElementState;

IssuePlan plan_issue(const isa::Program& program, const isa::ProcessorState& state, const ElementState& elems,
                     const PredictorBundle& bundle, const SuperscalarConfig& cfg);

struct CycleRecord {
  std::uint64_t cycle = 0;  // cycle at which the group starts
  unsigned issued_m = 0;
  std::vector<Word> group;
  std::vector<UsedPrediction> predictions;
  StallReason stall = StallReason::None;
  unsigned cost = 0;
};

struct GroupOutcome {
  isa::ProcessorState state;
  unsigned cost = 0;
  std::vector<isa::TraceRecord> retired;
};

// Executes the planned group. Throws PredictorUnsound when a consumed
// prediction differs from sequential execution.
GroupOutcome step_group(const isa::Program& program, const isa::ProcessorState& state, ElementState& elems,
                        const IssuePlan& plan, const SuperscalarConfig& cfg, std::uint64_t first_step = 0);

struct SimResult {
  isa::ProcessorState final_state;
  std::uint64_t instructions = 0;
  std::uint64_t cycles = 0;
  std::uint64_t prediction_enabled = 0;  // instructions whose issue relied on a prediction
  std::array<PredictionMetrics, 3> metrics{};
  std::array<std::uint64_t, 5> stalls{};  // indexed by StallReason
  std::vector<CycleRecord> log;           // filled when requested
  std::vector<isa::TraceRecord> trace;

  double cpi() const { return instructions == 0 ? 0.0 : static_cast<double>(cycles) / static_cast<double>(instructions); }
  // Fraction of retired instructions issued early thanks to a prediction.
  double coverage() const {
    return instructions == 0 ? 0.0 : static_cast<double>(prediction_enabled) / static_cast<double>(instructions);
  }
};

SimResult run_superscalar(const isa::Program& program, const PredictorBundle& bundle, const SuperscalarConfig& cfg,
                          std::uint64_t max_cycles, bool keep_log = false);

struct EquivalenceReport {
  std::vector<std::string> diffs;
  bool ok() const { return diffs.empty(); }
};

EquivalenceReport compare_reference(const isa::SingleRun& reference, const SimResult& result);
EquivalenceReport compare_reference(const isa::Program& program, const SimResult& result);

nlohmann::json sim_report(const std::string& program_name, const SuperscalarConfig& cfg, const SimResult& r,
                          const EquivalenceReport& eq);

}  // namespace sbsd::sim

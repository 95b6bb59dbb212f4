#pragma once

// Candidate processor-state elements, dependency extraction from traces, and
// the simulated-annealing search for the most reusable subset.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbsd/fraction.hpp"
#include "sbsd/isa.hpp"
#include "sbsd/rng.hpp"

namespace sbsd::selector {

using isa::Word;

inline constexpr std::size_t kPoolSize = 18;
inline constexpr std::size_t kHistorySlots = 4;

// Pool ids in pool order.
using ElementId = std::uint8_t;
inline constexpr ElementId kPc = 0;
inline constexpr ElementId gpr(unsigned k) { return static_cast<ElementId>(1 + k); }
inline constexpr ElementId last_load(unsigned j) { return static_cast<ElementId>(9 + j); }
inline constexpr ElementId last_store(unsigned j) { return static_cast<ElementId>(13 + j); }
inline constexpr ElementId kLastBranch = 17;

// Bit i set <=> element i.
using ElementMask = std::uint32_t;
inline constexpr ElementMask kFullPool = (ElementMask{1} << kPoolSize) - 1;

std::string element_name(ElementId id);
std::optional<ElementId> element_from_name(const std::string& name);

enum class Target { PC, GPR, MEM };
inline constexpr std::array<Target, 3> kTargets{Target::PC, Target::GPR, Target::MEM};
const char* target_name(Target t);  // "pc" | "gpr" | "mem"
Target target_from_name(const std::string& name);

// Values of all pool elements as committed so far. History elements become
// valid once first written; slot 0 is the most recent. LASTSTOREADDR slots
// expose the stored data word and remember the address for matching loads.
struct ElementState {
  std::array<Word, kPoolSize> value{};
  ElementMask valid = 0;
  std::array<Word, kHistorySlots> store_addr{};

  static ElementState initial(const isa::ProcessorState& s);
  void commit(const isa::Instruction& inst, const isa::StepEffects& fx, const isa::ProcessorState& after);

  // Valid elements whose value equals v.
  ElementMask matching(Word v) const;
};

struct DependencyEvent {
  std::uint64_t consumer_step = 0;
  Target kind = Target::GPR;
  std::uint64_t producer_step = 0;
  Word producer_pc = 0;
  isa::EncodedInstruction producer_inst;
  Word needed_value = 0;
  // Elements that held the needed value when the producer issued.
  ElementMask matching = 0;
  ElementMask valid = 0;

  std::optional<ElementId> producing_element() const;
  friend bool operator==(const DependencyEvent&, const DependencyEvent&) = default;
};

// GPR: a consumer reading a register written by an earlier instruction (one
// event, from the most recent such writer). MEM: a load from an address
// stored earlier (producer = that store). PC: any instruction following a
// branch or jump (producer = the control instruction).
std::vector<DependencyEvent> extract_dependencies(const std::vector<isa::TraceRecord>& trace,
                                                  const isa::Program& program);

std::vector<DependencyEvent> filter_kind(const std::vector<DependencyEvent>& events, Target kind);

struct SelectedStateSet {
  ElementMask members = 0;
  unsigned capacity = 0;

  std::size_t size() const;
  bool contains(ElementId id) const { return (members >> id) & 1u; }
  std::vector<ElementId> sorted_members() const;
  friend bool operator==(const SelectedStateSet&, const SelectedStateSet&) = default;
};

// Fraction of events whose matching elements intersect the set.
Fraction reusability(const SelectedStateSet& s, const std::vector<DependencyEvent>& events);

// Swaps one member for one non-member, each drawn uniformly.
SelectedStateSet neighbor(const SelectedStateSet& s, Rng& rng);

SelectedStateSet random_set(unsigned capacity, Rng& rng);

struct AnnealSchedule {
  double t0 = 1.0;
  double alpha = 0.95;
  std::uint64_t resample_threshold = 200;
  std::uint64_t max_iters = 5000;
  std::uint64_t seed = 1;
};

double acceptance_probability(double delta_e, double temperature);

struct AnnealResult {
  SelectedStateSet initial;
  SelectedStateSet best;
  double best_energy = 1.0;
  std::vector<double> energy_history;  // energy of the current set per iteration
  std::vector<double> best_history;    // best energy so far per iteration
  std::uint64_t iterations = 0;
};

// Minimizes E = 1 - reusability starting from a random set of `capacity`.
AnnealResult anneal(const std::vector<DependencyEvent>& events, unsigned capacity, const AnnealSchedule& sched);

// Grows `base` greedily by marginal reusability (ties to pool order) into one
// set per capacity, each a superset of the previous. Capacities above the
// pool size are clipped.
std::vector<SelectedStateSet> nested_sets(const std::vector<DependencyEvent>& events, const SelectedStateSet& base,
                                          const std::vector<unsigned>& capacities);

nlohmann::json schedule_to_json(const AnnealSchedule& s);
AnnealSchedule schedule_from_json(const nlohmann::json& j);

struct SelectorArtifact {
  Target target = Target::GPR;
  SelectedStateSet set;
  double energy = 1.0;
  std::uint64_t seed = 0;
  AnnealSchedule schedule;
};

nlohmann::json to_json(const SelectorArtifact& a);
SelectorArtifact selector_from_json(const nlohmann::json& j);

}  // namespace sbsd::selector

#pragma once

// Ground truth for the speculators. Inputs are the producer instruction's 16
// encoding bits. For GPR and MEM the truth is the set of pool elements that
// always hold the dependent value when the producer issues; for PC it is the
// fixed next-pc offset, when there is one.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "sbsd/isa.hpp"
#include "sbsd/selector.hpp"

namespace sbsd::oracle {

using selector::ElementMask;
using selector::SelectedStateSet;
using selector::Target;

inline constexpr unsigned kInputWidth = 16;
inline constexpr std::uint32_t kDomainSize = 1u << kInputWidth;

struct Truth {
  ElementMask mask = 0;             // GPR/MEM
  std::optional<isa::Word> offset;  // PC
};

// Predictable for a speculator reading the given set.
bool predictable(Target t, const Truth& truth, const SelectedStateSet& members);

class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual Target target() const = 0;
  // nullopt when the oracle has no entry for the input.
  virtual std::optional<Truth> lookup(std::uint16_t input) const = 0;
};

// Truth over the whole 2^16 domain, computed once per target by executing
// each encoding against a fixed battery of probe states (half drawn from a
// small high-collision value pool). Encodings that can never produce the
// dependency (no destination, not a store, invalid opcode, a memory access
// that always faults) have no entry.
class SemanticOracle final : public Oracle {
 public:
  static const SemanticOracle& get(Target t);

  Target target() const override { return target_; }
  std::optional<Truth> lookup(std::uint16_t input) const override { return truth_[input]; }
  Truth at(std::uint16_t input) const { return truth_[input].value_or(Truth{}); }

  static constexpr unsigned kProbes = 256;

 private:
  explicit SemanticOracle(Target t);
  Target target_;
  std::vector<std::optional<Truth>> truth_;
};

struct TraceSet {
  isa::Program program;
  std::vector<isa::TraceRecord> trace;
};

// Observed truth. A GPR/MEM entry keeps the elements that held the value on
// every observation; a PC entry keeps every observed offset.
class OracleTable final : public Oracle {
 public:
  struct Entry {
    ElementMask mask = selector::kFullPool;
    std::set<isa::Word> offsets;
    std::uint64_t observations = 0;
  };

  explicit OracleTable(Target t) : target_(t) {}

  Target target() const override { return target_; }
  std::optional<Truth> lookup(std::uint16_t input) const override;

  void observe_element_mask(std::uint16_t input, ElementMask mask);
  void observe_offset(std::uint16_t input, isa::Word offset);
  // Overwrites the entry with exact truth (used by refinement).
  void set_truth(std::uint16_t input, const Truth& truth);

  const std::map<std::uint16_t, Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  Target target_;
  std::map<std::uint16_t, Entry> entries_;
};

// GPR/MEM: one observation per dependency event of the target kind, keyed by
// producer. PC: one observation per executed instruction (offset = next_pc -
// pc), so straight-line code maps to {1}.
OracleTable build_examples(const std::vector<TraceSet>& traces, Target target);

// Narrows each event's matching mask to the elements the semantic oracle
// guarantees for its producer, so that coincidental value matches do not
// count as reuse. PC events keep only the PC element, and only for a fixed offset.
std::vector<selector::DependencyEvent> learnable(std::vector<selector::DependencyEvent> events);

}  // namespace sbsd::oracle

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "sbsd/isa.hpp"

namespace sbsd::workload {

enum class Kind { RANDOM, ARITH_CHAIN, MEMCOPY, FIB, BUBBLE_SORT, BRANCH_HEAVY };

inline constexpr Kind kAllKinds[] = {Kind::RANDOM,      Kind::ARITH_CHAIN, Kind::MEMCOPY,
                                     Kind::FIB,         Kind::BUBBLE_SORT, Kind::BRANCH_HEAVY};

const char* kind_name(Kind k);  // "random", "arith_chain", ...
std::optional<Kind> kind_from_name(const std::string& name);

// `length` means: RANDOM instruction count (HALT included), ARITH_CHAIN links,
// MEMCOPY words, FIB n, BUBBLE_SORT elements, BRANCH_HEAVY loop iterations.
// Loop kinds repeat their body `reps` times; ARITH_CHAIN with reps > 1 wraps
// the chain in a counted loop.
struct Spec {
  Kind kind = Kind::RANDOM;
  std::uint64_t seed = 1;
  unsigned length = 16;
  unsigned reps = 1;
  double dep_density = 0.5;  // RANDOM: chance a source reads a recent result
  bool alu_only = false;     // RANDOM: only latency-1 ALU ops
};

inline constexpr std::size_t kStepBound = 2'000'000;

// Assembly text of the program; deterministic in the spec.
std::string gen_source(const Spec& spec);
// Assembled program, rejected and regenerated (bounded) when it faults or
// does not halt within kStepBound steps. Throws GenerationFailed.
isa::Program gen_program(const Spec& spec);

}  // namespace sbsd::workload

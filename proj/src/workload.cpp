#include "sbsd/workload.hpp"

#include <sstream>
#include <vector>

#include "sbsd/assembler.hpp"
#include "sbsd/error.hpp"
#include "sbsd/rng.hpp"

namespace sbsd::workload {

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::RANDOM: return "random";
    case Kind::ARITH_CHAIN: return "arith_chain";
    case Kind::MEMCOPY: return "memcopy";
    case Kind::FIB: return "fib";
    case Kind::BUBBLE_SORT: return "bubble_sort";
    case Kind::BRANCH_HEAVY: return "branch_heavy";
  }
  return "?";
}

std::optional<Kind> kind_from_name(const std::string& name) {
  for (Kind k : kAllKinds) {
    if (name == kind_name(k)) return k;
  }
  return std::nullopt;
}

namespace {

std::string reg(unsigned r) { return "r" + std::to_string(r); }

// Sets `r` to a non-negative constant with ADDI steps of at most 31.
void load_const(std::ostringstream& os, unsigned r, unsigned value) {
  const unsigned first = value < 31 ? value : 31;
  os << "  ADDI " << reg(r) << ", r0, " << first << '\n';
  for (unsigned left = value - first; left > 0;) {
    const unsigned step = left < 31 ? left : 31;
    os << "  ADDI " << reg(r) << ", " << reg(r) << ", " << step << '\n';
    left -= step;
  }
}

void check(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::GenerationFailed, what);
}

std::string random_source(const Spec& spec, Rng& rng) {
  check(spec.length >= 1 && spec.length <= isa::kMaxProgramLength, "random length must be in [1, 256]");
  std::ostringstream os;
  std::vector<unsigned> recent;  // destinations, newest last
  const auto src = [&]() -> unsigned {
    if (recent.empty() || !(uniform_unit(rng) < spec.dep_density)) return 0;
    const std::size_t window = recent.size() < 3 ? recent.size() : 3;
    return recent[recent.size() - 1 - uniform_index(rng, window)];
  };
  static const char* kAlu[] = {"ADD", "SUB", "AND", "OR", "XOR", "SLT"};
  for (unsigned i = 0; i + 1 < spec.length; ++i) {
    const unsigned rd = 1 + static_cast<unsigned>(uniform_index(rng, 7));
    const std::uint64_t pick = uniform_index(rng, spec.alu_only ? 7 : 10);
    if (pick < 6) {
      // Sources first so that the draw order is fixed.
      const unsigned a = src(), b = src();
      os << "  " << kAlu[pick] << ' ' << reg(rd) << ", " << reg(a) << ", " << reg(b) << '\n';
    } else if (pick == 6) {
      const unsigned a = src();
      const int imm = static_cast<int>(uniform_index(rng, 64)) - 32;
      os << "  ADDI " << reg(rd) << ", " << reg(a) << ", " << imm << '\n';
    } else if (pick == 7) {
      const unsigned a = src(), b = src();
      os << "  MUL " << reg(rd) << ", " << reg(a) << ", " << reg(b) << '\n';
    } else if (pick == 8) {
      os << "  LW " << reg(rd) << ", " << uniform_index(rng, 32) << "(r0)\n";
    } else {
      const unsigned v = src();
      os << "  SW " << reg(v) << ", " << uniform_index(rng, 32) << "(r0)\n";
      continue;  // no destination
    }
    recent.push_back(rd);
  }
  os << "  HALT\n";
  return os.str();
}

std::string arith_chain_source(const Spec& spec, Rng& rng) {
  const bool looped = spec.reps > 1;
  check(spec.length >= 1 && spec.length + (looped ? 16 : 1) <= isa::kMaxProgramLength, "chain length out of range");
  // r7 is the loop counter when looped; links use r1..r6.
  const unsigned regs = looped ? 6 : 7;
  std::ostringstream os;
  if (looped) {
    load_const(os, 7, spec.reps);
    os << "top:\n";
  }
  unsigned prev = 1 + static_cast<unsigned>(uniform_index(rng, regs));
  os << "  ADDI " << reg(prev) << ", r0, " << 1 + uniform_index(rng, 31) << '\n';
  for (unsigned i = 1; i < spec.length; ++i) {
    const unsigned rd = 1 + static_cast<unsigned>(uniform_index(rng, regs));
    const std::string d = reg(rd), s = reg(prev);
    if (uniform_unit(rng) < 0.7) {
      switch (uniform_index(rng, 4)) {
        case 0: os << "  ADD " << d << ", " << s << ", r0\n"; break;
        case 1: os << "  OR " << d << ", " << s << ", " << s << '\n'; break;
        case 2: os << "  AND " << d << ", " << s << ", " << s << '\n'; break;
        default: os << "  ADDI " << d << ", " << s << ", 0\n"; break;
      }
    } else {
      switch (uniform_index(rng, 3)) {
        case 0: os << "  ADDI " << d << ", " << s << ", " << 1 + uniform_index(rng, 31) << '\n'; break;
        case 1: os << "  ADD " << d << ", " << s << ", " << s << '\n'; break;
        default: os << "  XOR " << d << ", " << s << ", r0\n"; break;
      }
    }
    prev = rd;
  }
  if (looped) {
    // The body can exceed the branch range, so the back edge is a JAL.
    os << "  ADDI r7, r7, -1\n  BEQ r7, r0, end\n  JAL r0, top\nend:\n";
  }
  os << "  HALT\n";
  return os.str();
}

std::string memcopy_source(const Spec& spec, Rng& rng) {
  check(spec.length >= 1 && spec.length <= 64, "memcopy length must be in [1, 64]");
  std::ostringstream os;
  load_const(os, 7, spec.reps);
  os << "outer:\n  ADDI r1, r0, 0\n";
  load_const(os, 4, 128);
  load_const(os, 2, spec.length);
  os << "copy:\n"
        "  LW r3, 0(r1)\n"
        "  SW r3, 0(r4)\n"
        "  LW r5, 0(r4)\n"
        "  ADD r6, r6, r5\n"
        "  ADDI r1, r1, 1\n"
        "  ADDI r4, r4, 1\n"
        "  ADDI r2, r2, -1\n"
        "  BNE r2, r0, copy\n"
        "  ADDI r7, r7, -1\n"
        "  BNE r7, r0, outer\n"
        "  HALT\n";
  for (unsigned i = 0; i < spec.length; ++i) os << ".data " << i << ' ' << uniform_index(rng, 65536) << '\n';
  return os.str();
}

std::string fib_source(const Spec& spec) {
  std::ostringstream os;
  load_const(os, 7, spec.reps);
  os << "again:\n  ADDI r1, r0, 0\n  ADDI r2, r0, 1\n";
  load_const(os, 3, spec.length);
  os << "  BEQ r3, r0, done\n"
        "loop:\n"
        "  ADD r4, r1, r2\n"
        "  ADD r1, r2, r0\n"
        "  ADD r2, r4, r0\n"
        "  ADDI r3, r3, -1\n"
        "  BNE r3, r0, loop\n"
        "done:\n"
        "  ADDI r7, r7, -1\n"
        "  BNE r7, r0, again\n"
        "  HALT\n";
  return os.str();
}

std::string bubble_sort_source(const Spec& spec, Rng& rng) {
  check(spec.length >= 2 && spec.length <= 64, "bubble sort length must be in [2, 64]");
  std::ostringstream os;
  load_const(os, 7, spec.reps);
  os << "rep:\n";
  load_const(os, 1, spec.length - 1);
  os << "iloop:\n"
        "  ADDI r2, r0, 0\n"
        "  ADD r3, r1, r0\n"
        "jloop:\n"
        "  LW r4, 0(r2)\n"
        "  LW r5, 1(r2)\n"
        "  SLT r6, r5, r4\n"
        "  BEQ r6, r0, noswap\n"
        "  SW r5, 0(r2)\n"
        "  SW r4, 1(r2)\n"
        "noswap:\n"
        "  ADDI r2, r2, 1\n"
        "  ADDI r3, r3, -1\n"
        "  BNE r3, r0, jloop\n"
        "  ADDI r1, r1, -1\n"
        "  BNE r1, r0, iloop\n"
        "  ADDI r7, r7, -1\n"
        "  BNE r7, r0, rep\n"
        "  HALT\n";
  for (unsigned i = 0; i < spec.length; ++i) os << ".data " << i << ' ' << uniform_index(rng, 1000) << '\n';
  return os.str();
}

std::string branch_heavy_source(const Spec& spec, Rng& rng) {
  check(spec.length >= 1, "branch_heavy needs at least one iteration");
  std::ostringstream os;
  load_const(os, 7, spec.length);
  os << "  ADDI r5, r0, 1\n"
     << "  ADDI r1, r0, " << uniform_index(rng, 16) << '\n'
     << "loop:\n"
        "  ADDI r1, r1, 3\n"
        "  JAL r0, skip\n"
        "  ADDI r2, r2, 5\n"
        "skip:\n"
        "  AND r3, r1, r5\n"
        "  BEQ r3, r0, even\n"
        "  ADDI r4, r4, 1\n"
        "  BEQ r0, r0, join\n"
        "even:\n"
        "  ADDI r4, r4, 2\n"
        "join:\n"
        "  XOR r6, r6, r1\n"
        "  BNE r1, r1, loop\n"
        "  JAL r2, next\n"
        "next:\n"
        "  ADDI r7, r7, -1\n"
        "  BNE r7, r0, loop\n"
        "  HALT\n";
  return os.str();
}

std::string source_with(const Spec& spec, std::uint64_t seed) {
  Rng rng(seed);
  switch (spec.kind) {
    case Kind::RANDOM: return random_source(spec, rng);
    case Kind::ARITH_CHAIN: return arith_chain_source(spec, rng);
    case Kind::MEMCOPY: return memcopy_source(spec, rng);
    case Kind::FIB: return fib_source(spec);
    case Kind::BUBBLE_SORT: return bubble_sort_source(spec, rng);
    case Kind::BRANCH_HEAVY: return branch_heavy_source(spec, rng);
  }
  throw Error(ErrorCode::GenerationFailed, "unknown kind");
}

bool acceptable(const isa::Program& p) {
  try {
    return !isa::run_single(p, kStepBound).step_limit_exceeded;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

std::string gen_source(const Spec& spec) {
  check(spec.reps >= 1, "reps must be >= 1");
  constexpr unsigned kAttempts = 64;
  for (unsigned attempt = 0; attempt < kAttempts; ++attempt) {
    std::string src = source_with(spec, derive_seed(spec.seed, attempt));
    if (acceptable(isa::assemble(src))) return src;
  }
  throw Error(ErrorCode::GenerationFailed, std::string(kind_name(spec.kind)) + ": no acceptable program in " +
                                               std::to_string(kAttempts) + " attempts");
}

isa::Program gen_program(const Spec& spec) { return isa::assemble(gen_source(spec)); }

}  // namespace sbsd::workload

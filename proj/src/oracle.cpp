#include "sbsd/oracle.hpp"

#include <array>
#include <mutex>

#include "sbsd/error.hpp"
#include "sbsd/rng.hpp"

namespace sbsd::oracle {

using isa::Word;
using selector::ElementState;

bool predictable(Target t, const Truth& truth, const SelectedStateSet& members) {
  if (t == Target::PC) return truth.offset.has_value() && members.contains(selector::kPc);
  return (truth.mask & members.members) != 0;
}

namespace {

struct Probe {
  isa::ProcessorState state;
  ElementState elems;
};

std::vector<Probe> make_probes() {
  Rng rng(0x5eedf00dULL);
  std::vector<Probe> probes(SemanticOracle::kProbes);
  for (unsigned i = 0; i < probes.size(); ++i) {
    const bool collide = i < probes.size() / 2;
    const Word pooled[5] = {0, 1, 0xFFFF, 0x8000, static_cast<Word>(rng())};
    const auto draw = [&]() -> Word {
      return collide ? pooled[uniform_index(rng, 5)] : static_cast<Word>(rng());
    };
    auto& p = probes[i];
    p.state.pc = static_cast<Word>(uniform_index(rng, isa::kMaxProgramLength));
    for (unsigned k = 1; k < isa::kNumRegs; ++k) p.state.regs[k] = draw();
    for (auto& w : p.state.mem) w = draw();
    p.elems = ElementState::initial(p.state);
    for (selector::ElementId id = selector::last_load(0); id < selector::kPoolSize; ++id) p.elems.value[id] = draw();
    for (auto& a : p.elems.store_addr) a = static_cast<Word>(uniform_index(rng, isa::kMemWords));
    p.elems.valid = selector::kFullPool;
  }
  return probes;
}

}  // namespace

SemanticOracle::SemanticOracle(Target t) : target_(t), truth_(kDomainSize) {
  const std::vector<Probe> probes = make_probes();
  Rng addr_rng(0xadd7e55ULL);
  std::vector<Word> addr(probes.size());
  for (auto& a : addr) a = static_cast<Word>(uniform_index(addr_rng, isa::kMemWords));

  for (std::uint32_t x = 0; x < kDomainSize; ++x) {
    isa::Instruction inst;
    try {
      inst = isa::decode({static_cast<std::uint16_t>(x)});
    } catch (const Error&) {
      continue;
    }
    if (t == Target::GPR && !isa::destination_register(inst)) continue;
    if (t == Target::MEM && inst.op != isa::Opcode::SW) continue;

    Truth truth;
    truth.mask = selector::kFullPool;
    bool any = false, offset_fixed = true;
    Word offset = 0;
    for (std::size_t i = 0; i < probes.size(); ++i) {
      isa::ProcessorState s = probes[i].state;
      ElementState elems = probes[i].elems;
      if (isa::is_memory(inst.op) && inst.rs1 != 0) {
        // Steer the base so the access lands in memory.
        s.regs[inst.rs1] = static_cast<Word>(addr[i] - inst.imm);
        elems.value[selector::gpr(inst.rs1)] = s.regs[inst.rs1];
      }
      isa::StepEffects fx;
      try {
        fx = isa::effects(s, inst);
      } catch (const Error&) {
        continue;
      }
      const Word off = static_cast<Word>(fx.next_pc - s.pc);
      if (!any) offset = off;
      offset_fixed = offset_fixed && off == offset;
      any = true;
      if (t == Target::GPR) truth.mask &= elems.matching(fx.reg_write->second);
      if (t == Target::MEM) truth.mask &= elems.matching(fx.mem_write->second);
      if (t == Target::PC && !offset_fixed) break;
    }
    if (!any) continue;
    if (t == Target::PC) {
      truth.mask = 0;
      if (offset_fixed) truth.offset = offset;
    }
    truth_[x] = truth;
  }
}

const SemanticOracle& SemanticOracle::get(Target t) {
  static std::once_flag once[3];
  static const SemanticOracle* cache[3];
  const auto i = static_cast<std::size_t>(t);
  std::call_once(once[i], [&] { cache[i] = new SemanticOracle(t); });
  return *cache[i];
}

std::optional<Truth> OracleTable::lookup(std::uint16_t input) const {
  const auto it = entries_.find(input);
  if (it == entries_.end()) return std::nullopt;
  Truth t;
  if (target_ == Target::PC) {
    if (it->second.offsets.size() == 1) t.offset = *it->second.offsets.begin();
  } else {
    t.mask = it->second.mask;
  }
  return t;
}

void OracleTable::observe_element_mask(std::uint16_t input, ElementMask mask) {
  auto& e = entries_[input];
  e.mask &= mask;
  ++e.observations;
}

void OracleTable::observe_offset(std::uint16_t input, isa::Word offset) {
  auto& e = entries_[input];
  e.offsets.insert(offset);
  ++e.observations;
}

void OracleTable::set_truth(std::uint16_t input, const Truth& truth) {
  auto& e = entries_[input];
  e.mask = truth.mask;
  e.offsets.clear();
  if (truth.offset) {
    e.offsets.insert(*truth.offset);
  } else if (target_ == Target::PC) {
    // Two distinct offsets mark the input unpredictable.
    e.offsets = {0, 1};
  }
  ++e.observations;
}

OracleTable build_examples(const std::vector<TraceSet>& traces, Target target) {
  OracleTable table(target);
  for (const auto& ts : traces) {
    if (target == Target::PC) {
      isa::replay(ts.program, ts.trace);
      for (const auto& rec : ts.trace) {
        table.observe_offset(rec.inst.bits, static_cast<Word>(rec.next_pc - rec.pc_before));
      }
      continue;
    }
    for (const auto& ev : selector::extract_dependencies(ts.trace, ts.program)) {
      if (ev.kind == target) table.observe_element_mask(ev.producer_inst.bits, ev.matching);
    }
  }
  return table;
}

std::vector<selector::DependencyEvent> learnable(std::vector<selector::DependencyEvent> events) {
  for (auto& ev : events) {
    const auto truth = SemanticOracle::get(ev.kind).lookup(ev.producer_inst.bits);
    if (!truth) {
      ev.matching = 0;
    } else if (ev.kind == Target::PC) {
      ev.matching &= truth->offset ? (ElementMask{1} << selector::kPc) : ElementMask{0};
    } else {
      ev.matching &= truth->mask;
    }
  }
  return events;
}

}  // namespace sbsd::oracle

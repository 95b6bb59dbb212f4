#include "sbsd/superscalar.hpp"

#include <algorithm>

#include "sbsd/error.hpp"
#include "sbsd/oracle.hpp"

namespace sbsd::sim {

using isa::Instruction;
using isa::Opcode;
using selector::ElementMask;
using speculator::StateBuffer;

PredictorBundle PredictorBundle::abstain_everywhere() {
  PredictorBundle b;
  for (Target t : selector::kTargets) b[t] = speculator::abstain_everywhere(t, {});
  return b;
}

const char* stall_name(StallReason r) {
  switch (r) {
    case StallReason::None: return "none";
    case StallReason::GPR_RAW: return "gpr_raw";
    case StallReason::MEM_RAW: return "mem_raw";
    case StallReason::CONTROL: return "control";
    case StallReason::STRUCTURAL: return "structural";
  }
  return "?";
}

namespace {

// Pool elements an instruction overwrites at commit.
ElementMask elements_written(const Instruction& inst) {
  ElementMask m = ElementMask{1} << selector::kPc;
  if (auto rd = isa::destination_register(inst)) m |= ElementMask{1} << selector::gpr(*rd);
  if (inst.op == Opcode::LW) m |= ElementMask{0xF} << selector::last_load(0);
  if (inst.op == Opcode::SW) m |= ElementMask{0xF} << selector::last_store(0);
  if (isa::is_control(inst.op)) m |= ElementMask{1} << selector::kLastBranch;
  return m;
}

struct Member {
  Word pc = 0;
  Instruction inst;
  std::uint16_t bits = 0;
  ElementMask written_before = 0;
  std::optional<Word> addr;
  // Cached predictions: unset = not asked yet; inner nullopt = abstained.
  std::optional<std::optional<Word>> gpr, mem;
};

}  // namespace

IssuePlan plan_issue(const isa::Program& program, const isa::ProcessorState& state, const ElementState& elems,
                     const PredictorBundle& bundle, const SuperscalarConfig& cfg) {
  if (cfg.p < 1 || cfg.l_p < 1) throw Error(ErrorCode::Precondition, "p and l_p must be >= 1");
  IssuePlan plan;
  std::array<StateBuffer, 3> buffers;
  for (Target t : selector::kTargets) {
    buffers[static_cast<std::size_t>(t)] = StateBuffer::mirror(elems, bundle[t].members);
  }
  const auto ask = [&](Target t, const Member& m) -> std::optional<Word> {
    const auto p = speculator::predict(bundle[t], m.bits, buffers[static_cast<std::size_t>(t)], m.pc);
    if (p.abstain) return std::nullopt;
    // The buffered value is stale once an earlier group member rewrote it.
    if (p.element && ((m.written_before >> *p.element) & 1u)) return std::nullopt;
    return p.data;
  };

  std::vector<Member> group;
  std::array<int, isa::kNumRegs> last_writer;
  last_writer.fill(-1);
  ElementMask written = 0;
  unsigned mem_ops = 0;

  for (unsigned j = 0; j < cfg.p; ++j) {
    Member cur;
    bool enabled = false;
    if (j == 0) {
      cur.pc = state.pc;
    } else {
      const Member& prev = group.back();
      if (prev.inst.op == Opcode::HALT) break;
      if (isa::is_control(prev.inst.op)) {
        const auto next = ask(Target::PC, prev);
        if (!next) {
          plan.stall = StallReason::CONTROL;
          break;
        }
        plan.predictions.push_back({Target::PC, j - 1, prev.bits, *next});
        cur.pc = *next;
        enabled = true;
      } else {
        cur.pc = static_cast<Word>(prev.pc + 1);
      }
    }
    if (j > 0) {
      if (cur.pc >= program.instructions.size()) break;
      try {
        cur.inst = isa::decode(program.instructions[cur.pc]);
      } catch (const Error&) {
        break;
      }
    } else {
      cur.inst = isa::decode(program.fetch(cur.pc));
    }
    cur.bits = isa::encode(cur.inst).bits;
    cur.written_before = written;

    // Operand values as this member would see them.
    std::array<std::optional<Word>, isa::kNumRegs> operand;
    StallReason fail = StallReason::None;
    std::vector<UsedPrediction> used;
    for (auto r : isa::source_registers(cur.inst)) {
      const int w = r == 0 ? -1 : last_writer[r];
      if (w < 0) {
        operand[r] = state.regs[r];
        continue;
      }
      Member& producer = group[static_cast<std::size_t>(w)];
      if (!producer.gpr) producer.gpr = ask(Target::GPR, producer);
      if (!*producer.gpr) {
        fail = StallReason::GPR_RAW;
        break;
      }
      operand[r] = **producer.gpr;
      used.push_back({Target::GPR, static_cast<std::size_t>(w), producer.bits, **producer.gpr});
    }
    if (fail == StallReason::None && isa::is_memory(cur.inst.op)) {
      const Word a = static_cast<Word>(*operand[cur.inst.rs1] + cur.inst.imm);
      if (a >= isa::kMemWords && j > 0) break;
      cur.addr = a;
      if (cur.inst.op == Opcode::LW) {
        for (int k = static_cast<int>(group.size()) - 1; k >= 0; --k) {
          Member& st = group[static_cast<std::size_t>(k)];
          if (st.inst.op != Opcode::SW || st.addr != a) continue;
          if (!st.mem) st.mem = ask(Target::MEM, st);
          if (!*st.mem) {
            fail = StallReason::MEM_RAW;
          } else {
            used.push_back({Target::MEM, static_cast<std::size_t>(k), st.bits, **st.mem});
          }
          break;
        }
      }
      if (fail == StallReason::None && mem_ops + 1 > cfg.mem_ports && j > 0) fail = StallReason::STRUCTURAL;
    }
    if (fail != StallReason::None) {
      if (j == 0) throw Error(ErrorCode::Precondition, "first group member cannot stall");
      plan.stall = fail;
      break;
    }

    // Admit.
    for (const auto& u : used) {
      const bool dup = std::any_of(plan.predictions.begin(), plan.predictions.end(), [&](const UsedPrediction& q) {
        return q.kind == u.kind && q.producer == u.producer;
      });
      if (!dup) plan.predictions.push_back(u);
    }
    enabled = enabled || !used.empty();
    if (isa::is_memory(cur.inst.op)) ++mem_ops;
    if (auto rd = isa::destination_register(cur.inst)) last_writer[*rd] = static_cast<int>(j);
    written |= elements_written(cur.inst);
    plan.pcs.push_back(cur.pc);
    plan.enabled_by_prediction.push_back(enabled);
    group.push_back(cur);
  }
  return plan;
}

GroupOutcome step_group(const isa::Program& program, const isa::ProcessorState& state, ElementState& elems,
                        const IssuePlan& plan, const SuperscalarConfig& cfg, std::uint64_t first_step) {
  if (plan.m() == 0 || plan.m() > cfg.p) throw Error(ErrorCode::Precondition, "group size outside [1, p]");
  const std::size_t m = plan.m();
  std::vector<std::optional<Word>> gpr_pred(m), mem_pred(m);
  for (const auto& u : plan.predictions) {
    if (u.kind == Target::GPR) gpr_pred[u.producer] = u.value;
    if (u.kind == Target::MEM) mem_pred[u.producer] = u.value;
  }

  // Pass 1: every member executes against the cycle-start state, with
  // in-group results replaced by their predictions.
  std::vector<isa::StepEffects> view_fx(m);
  std::vector<Instruction> insts(m);
  {
    std::array<int, isa::kNumRegs> last_writer;
    last_writer.fill(-1);
    std::vector<std::pair<Word, std::size_t>> stores;  // (address, member)
    for (std::size_t j = 0; j < m; ++j) {
      insts[j] = isa::decode(program.fetch(plan.pcs[j]));
      isa::ProcessorState view = state;
      view.pc = plan.pcs[j];
      for (auto r : isa::source_registers(insts[j])) {
        const int w = r == 0 ? -1 : last_writer[r];
        if (w < 0) continue;
        if (!gpr_pred[w]) throw Error(ErrorCode::PredictorUnsound, "operand r" + std::to_string(r) + " unpredicted");
        view.regs[r] = *gpr_pred[w];
      }
      if (insts[j].op == Opcode::LW) {
        const Word a = static_cast<Word>(view.regs[insts[j].rs1] + insts[j].imm);
        for (auto it = stores.rbegin(); it != stores.rend(); ++it) {
          if (it->first != a) continue;
          if (!mem_pred[it->second]) throw Error(ErrorCode::PredictorUnsound, "forwarded store unpredicted");
          if (a < isa::kMemWords) view.mem[a] = *mem_pred[it->second];
          break;
        }
      }
      view_fx[j] = isa::effects(view, insts[j]);
      if (auto rd = isa::destination_register(insts[j])) last_writer[*rd] = static_cast<int>(j);
      if (view_fx[j].mem_write) stores.emplace_back(view_fx[j].mem_write->first, j);
    }
  }

  // Pass 2: commit in program order, checking against sequential execution.
  GroupOutcome out;
  out.state = state;
  for (std::size_t j = 0; j < m; ++j) {
    const auto unsound = [&](const std::string& what) {
      throw Error(ErrorCode::PredictorUnsound,
                  what + " at pc " + std::to_string(plan.pcs[j]) + " (" + isa::disassemble(insts[j]) + ")");
    };
    if (out.state.pc != plan.pcs[j]) unsound("fetch path diverged");
    const isa::StepEffects fx = isa::effects(out.state, insts[j]);
    if (gpr_pred[j] && (!fx.reg_write || fx.reg_write->second != *gpr_pred[j])) unsound("register prediction wrong");
    if (mem_pred[j] && (!fx.mem_write || fx.mem_write->second != *mem_pred[j])) unsound("store prediction wrong");
    if (j + 1 < m && fx.next_pc != plan.pcs[j + 1]) unsound("next-pc prediction wrong");
    if (fx.reg_write != view_fx[j].reg_write || fx.mem_write != view_fx[j].mem_write ||
        fx.next_pc != view_fx[j].next_pc || fx.halts != view_fx[j].halts) {
      unsound("grouped execution differs from sequential");
    }
    isa::TraceRecord rec;
    rec.step = first_step + j;
    rec.pc_before = out.state.pc;
    rec.inst = isa::encode(insts[j]);
    rec.reg_write = view_fx[j].reg_write;
    rec.mem_write = view_fx[j].mem_write;
    rec.next_pc = view_fx[j].next_pc;
    rec.latency = isa::latency(insts[j].op);
    isa::apply(out.state, view_fx[j]);
    elems.commit(insts[j], view_fx[j], out.state);
    out.retired.push_back(rec);
    out.cost = std::max(out.cost, rec.latency);
  }
  if (!plan.predictions.empty()) out.cost = std::max(out.cost, cfg.l_p);
  return out;
}

SimResult run_superscalar(const isa::Program& program, const PredictorBundle& bundle, const SuperscalarConfig& cfg,
                          std::uint64_t max_cycles, bool keep_log) {
  if (max_cycles == 0) throw Error(ErrorCode::Precondition, "max_cycles must be positive");
  SimResult r;
  isa::ProcessorState s = program.initial_state();
  ElementState elems = ElementState::initial(s);
  while (!s.halted) {
    if (r.cycles >= max_cycles) {
      throw Error(ErrorCode::CycleLimitExceeded, "no HALT within " + std::to_string(max_cycles) + " cycles");
    }
    const IssuePlan plan = plan_issue(program, s, elems, bundle, cfg);
    GroupOutcome g = step_group(program, s, elems, plan, cfg, r.instructions);
    if (keep_log) {
      r.log.push_back({r.cycles, static_cast<unsigned>(plan.m()), plan.pcs, plan.predictions, plan.stall, g.cost});
    }
    ++r.stalls[static_cast<std::size_t>(plan.stall)];
    r.cycles += g.cost;
    r.instructions += plan.m();
    r.prediction_enabled += static_cast<std::uint64_t>(
        std::count(plan.enabled_by_prediction.begin(), plan.enabled_by_prediction.end(), true));
    r.trace.insert(r.trace.end(), g.retired.begin(), g.retired.end());
    s = g.state;
  }
  r.final_state = s;
  const auto events = selector::extract_dependencies(r.trace, program);
  for (Target t : selector::kTargets) {
    r.metrics[static_cast<std::size_t>(t)] = speculator::measure(bundle[t], events, oracle::SemanticOracle::get(t));
  }
  return r;
}

EquivalenceReport compare_reference(const isa::SingleRun& reference, const SimResult& result) {
  EquivalenceReport rep;
  const auto& a = reference.final_state;
  const auto& b = result.final_state;
  if (a.pc != b.pc) rep.diffs.push_back("pc: " + std::to_string(a.pc) + " vs " + std::to_string(b.pc));
  if (a.halted != b.halted) rep.diffs.push_back("halted differs");
  for (std::size_t k = 0; k < isa::kNumRegs; ++k) {
    if (a.regs[k] != b.regs[k]) {
      rep.diffs.push_back("r" + std::to_string(k) + ": " + std::to_string(a.regs[k]) + " vs " +
                          std::to_string(b.regs[k]));
    }
  }
  for (std::size_t i = 0; i < isa::kMemWords; ++i) {
    if (a.mem[i] != b.mem[i]) {
      rep.diffs.push_back("mem[" + std::to_string(i) + "]: " + std::to_string(a.mem[i]) + " vs " +
                          std::to_string(b.mem[i]));
    }
  }
  if (reference.retired != result.instructions) {
    rep.diffs.push_back("retired: " + std::to_string(reference.retired) + " vs " +
                        std::to_string(result.instructions));
  }
  return rep;
}

EquivalenceReport compare_reference(const isa::Program& program, const SimResult& result) {
  const isa::SingleRun ref = isa::run_single(program, std::max<std::uint64_t>(result.instructions, 1) + 1);
  return compare_reference(ref, result);
}

nlohmann::json sim_report(const std::string& program_name, const SuperscalarConfig& cfg, const SimResult& r,
                          const EquivalenceReport& eq) {
  using nlohmann::json;
  json coverage = json::object();
  for (Target t : selector::kTargets) {
    coverage[selector::target_name(t)] = r.metrics[static_cast<std::size_t>(t)].coverage();
  }
  json stalls = json::object();
  for (auto reason : {StallReason::GPR_RAW, StallReason::MEM_RAW, StallReason::CONTROL, StallReason::STRUCTURAL}) {
    stalls[stall_name(reason)] = r.stalls[static_cast<std::size_t>(reason)];
  }
  return {{"program", program_name},
          {"p", cfg.p},
          {"cycles", r.cycles},
          {"instructions", r.instructions},
          {"cpi", r.cpi()},
          {"coverage", coverage},
          {"stalls", stalls},
          {"equivalence", eq.ok() ? json("ok") : json(eq.diffs)}};
}

}  // namespace sbsd::sim
